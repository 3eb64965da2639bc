//! Bayesian engine: noise and prior models, the linear-Gaussian posterior,
//! Gauss–Newton MAP with Laplace covariance, credible bands and
//! hyperparameter selection.

mod bands;
mod evidence;
mod gauss_newton;
mod gibbs;
mod hyper;
mod linear;
mod noise;
mod nonlinear;
mod prior;
mod quasi_opt;

pub use bands::{rigidity_credible_band, BandEstimator, CredibleBand, DeltaBand, Levels, LognormalBand, SamplingBand};
pub use evidence::{log_evidence, log_evidence_at, profiled_log_evidence};
pub use gauss_newton::{forward_in_params, gauss_newton_map, GnControls, GnReport, ParamMap};
pub use gibbs::{gibbs_hyper_updates, HyperDraws, HyperPrior};
pub use hyper::{
    maximize_evidence, quasi_optimality, EvidenceHyper, FixedHyper, HyperEstimate, HyperPolicy, HyperProblem,
    QuasiOptimalHyper, SearchControls, TracePoint,
};
pub use linear::{
    laplace_covariance, map_tikhonov, posterior_linear, posterior_predictive, GaussianPosterior, LinearProblem,
    PenalizedFit, Predictive, TikhonovSolver,
};
pub use noise::{Correlation, NoiseModel, Whitener};
pub use nonlinear::NonlinearProblem;
pub use prior::{Parameterization, PriorSpec};
pub use quasi_opt::{quasi_optimality_lambda, relative_lambda_grid};
