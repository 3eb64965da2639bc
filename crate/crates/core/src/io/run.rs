//! End-to-end inversion of a measurement set under a run configuration.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::ingest::MeasurementSet;
use crate::assembly::Mesh;
use crate::beam::{FeForward, ForwardModel, RotationalRestraint};
use crate::diagnostics::{fisher_report, FisherReport};
use crate::error::{Error, Result, StageExt};
use crate::inference::{
    posterior_linear, rigidity_credible_band, CredibleBand, GaussianPosterior, GnControls, HyperEstimate,
    HyperPolicy, HyperProblem, LinearProblem, NonlinearProblem, ParamMap, Parameterization, PriorSpec,
    QuasiOptimalHyper,
};
use crate::registry::{band_estimators, forward_builders, hyper_policies, jacobian_strategies, StrategyOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub data_sha256: String,
    pub seed: u64,
    pub version: String,
}

/// Measured and predicted rotation at one `(channel, position)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub channel: String,
    pub position_m: f64,
    pub measured_rad: f64,
    pub predicted_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub forward: String,
    pub parameterization: Parameterization,
    pub iterations: usize,
    pub converged: bool,
    pub center_ei: f64,
}

/// Everything an inversion produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub x_left: Vec<f64>,
    pub x_right: Vec<f64>,
    pub band: CredibleBand,
    pub hyper: HyperEstimate,
    /// Spring stiffnesses used in the final fit (N·m/rad), support order.
    pub springs: Vec<f64>,
    pub fisher: FisherReport,
    pub fit: Vec<FitRow>,
    pub solver: SolverSummary,
    pub provenance: Provenance,
}

impl ResultBundle {
    /// Mean rigidity over the elements whose midpoints lie in `[a, b]`.
    pub fn mean_ei_between(&self, a: f64, b: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .x_left
            .iter()
            .zip(&self.x_right)
            .zip(&self.band.mean)
            .filter(|((l, r), _)| {
                let m = 0.5 * (*l + *r);
                m >= a && m <= b
            })
            .map(|(_, e)| *e)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn data_hash(data: &MeasurementSet) -> String {
    let mut buf = Vec::new();
    for (id, row) in data.sensors.iter().zip(&data.rotations) {
        buf.extend_from_slice(id.as_bytes());
        buf.push(0);
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for x in &data.positions {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    super::config::sha256_hex(&buf)
}

/// Uniform rigidity that best explains `y` under `forward`.
pub fn fit_uniform_ei(forward: &dyn ForwardModel, y: &DVector<f64>) -> Result<f64> {
    let n = forward.n_params();
    let mut v = 1e-10;
    for _ in 0..4 {
        let theta = forward.rotations(&DVector::from_element(n, v))?;
        let den = theta.norm_squared();
        let num = theta.dot(y);
        if !(den > 0.0 && num > 0.0) {
            return Err(Error::domain(
                "the data do not fit a positive uniform rigidity; set [prior] center_ei explicitly",
            ));
        }
        let next = v * num / den;
        if forward.is_linear() || ((next - v) / v).abs() < 1e-10 {
            v = next;
            break;
        }
        v = next;
    }
    Ok(1.0 / v)
}

fn support_springs(forward_system: &crate::beam::BeamSystem) -> Vec<f64> {
    forward_system
        .supports()
        .iter()
        .filter_map(|s| match s.rotation {
            RotationalRestraint::Spring(k) => Some(k),
            _ => None,
        })
        .collect()
}

/// Forward, hyperparameter selection, posterior, bands and Fisher diagnostics.
pub fn run_inversion(cfg: &RunConfig, data: &MeasurementSet) -> Result<ResultBundle> {
    let system = cfg.build_system().stage("model")?;
    let mesh: Mesh = cfg.build_mesh().stage("model")?;
    let train = cfg.build_train().stage("model")?;
    let positions: Vec<f64> = cfg.sensors().iter().map(|s| s.position).collect();
    let ids: Vec<String> = cfg.sensors().iter().map(|s| s.id.clone()).collect();
    let noise = cfg.noise_model().stage("model")?;
    if data.positions.len() != train.n_positions()
        || data.positions.iter().zip(&train.positions).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()))
    {
        return Err(Error::Validation(vec![
            "measurement positions differ from the configured load sweep".into(),
        ]))
        .stage("data");
    }
    let y = data.select(&ids).stage("data")?;

    let options = StrategyOptions {
        tau: cfg.hyper.tau,
        search: cfg.hyper.search,
        quasi_opt: QuasiOptimalHyper {
            lo: cfg.hyper.quasi_opt_lo,
            hi: cfg.hyper.quasi_opt_hi,
            points: cfg.hyper.quasi_opt_points,
        },
        draws: cfg.hyper.draws,
        seed: cfg.seed,
    };
    let jacobian = jacobian_strategies().create(&cfg.hyper.jacobian, &options).stage("forward")?;
    let builder = forward_builders().create(&cfg.hyper.forward, &options).stage("forward")?;
    let forward = builder.build(&system, &mesh, &positions, &train, jacobian.clone()).stage("forward")?;

    let param = cfg.prior.parameterization;
    let center_ei = match cfg.prior.center_ei {
        Some(c) => c,
        None => fit_uniform_ei(forward.as_ref(), &y).stage("prior")?,
    };
    let n = mesh.n_elements();
    let center = match param {
        Parameterization::LinearCompliance => DVector::from_element(n, 1.0 / center_ei),
        Parameterization::LogLatent => DVector::from_element(n, -center_ei.ln()),
    };
    let known = cfg.noise.known.then(|| noise.sigma2());
    let policy: Arc<dyn HyperPolicy> = hyper_policies().create(&cfg.hyper.policy, &options).stage("hyper")?;
    let init_springs = if cfg.estimate_springs() { support_springs(&system) } else { vec![] };

    let linear = !cfg.estimate_springs() && forward.is_linear() && param == Parameterization::LinearCompliance;
    let (posterior, hyper, final_forward, iterations, converged) = if linear {
        let a = forward.jacobian(&DVector::from_element(n, 1.0 / center_ei)).stage("forward")?;
        let problem = LinearProblem::new(&a, &y, &noise, cfg.prior.order, &center).stage("hyper")?;
        let hyper = policy.select(&problem as &dyn HyperProblem, known, &[]).stage("hyper")?;
        let prior = PriorSpec::new(param, cfg.prior.order, hyper.tau, center.clone()).stage("posterior")?;
        let post = posterior_linear(&a, &y, &noise.with_sigma2(hyper.sigma2)?, &prior).stage("posterior")?;
        (post, hyper, forward.clone(), 1, true)
    } else {
        let problem = if cfg.estimate_springs() {
            let base = FeForward::new(&system, &mesh, &positions, &train, jacobian.clone()).stage("forward")?;
            NonlinearProblem::with_springs(
                base,
                mesh.clone(),
                cfg.spring_nodes()?,
                param,
                y.clone(),
                &noise,
                cfg.prior.order,
                center.clone(),
                GnControls::default(),
            )
        } else {
            NonlinearProblem::new(forward.clone(), param, y.clone(), &noise, cfg.prior.order, center.clone(), GnControls::default())
        }
        .stage("hyper")?;
        let hyper = policy.select(&problem, known, &init_springs).stage("hyper")?;
        let report = problem.solve(hyper.sigma2, hyper.tau, &hyper.springs).stage("posterior")?;
        let post = GaussianPosterior::new(report.params.clone(), report.hessian.clone(), param, hyper.sigma2, hyper.tau)
            .stage("posterior")?;
        let fwd = problem.forward(&hyper.springs).stage("posterior")?;
        (post, hyper, fwd, report.iterations, report.converged)
    };

    let estimator = band_estimators().create(&cfg.band_name(), &options).stage("bands")?;
    let band = rigidity_credible_band(&posterior, estimator.as_ref(), cfg.levels()?).stage("bands")?;

    let map = ParamMap::for_parameterization(param);
    let compliance = map.to_compliance(&posterior.mean);
    let predicted = final_forward.rotations(&compliance).stage("predict")?;
    let k = train.n_positions();
    let fit = (0..ids.len() * k)
        .map(|row| FitRow {
            channel: ids[row / k].clone(),
            position_m: train.positions[row % k],
            measured_rad: y[row],
            predicted_rad: predicted[row],
        })
        .collect();

    let ei: Vec<f64> = compliance.iter().map(|v| 1.0 / v).collect();
    let j = final_forward.jacobian(&compliance).stage("fisher")?;
    let fisher = fisher_report(&j, &noise.with_sigma2(hyper.sigma2)?, ids.len(), &ei, &mesh).stage("fisher")?;
    let springs = if cfg.estimate_springs() { hyper.springs.clone() } else { support_springs(&system) };

    Ok(ResultBundle {
        x_left: (0..n).map(|j| mesh.element(j).0).collect(),
        x_right: (0..n).map(|j| mesh.element(j).1).collect(),
        band,
        hyper,
        springs,
        fisher,
        fit,
        solver: SolverSummary {
            forward: final_forward.name().to_string(),
            parameterization: param,
            iterations,
            converged,
            center_ei,
        },
        provenance: Provenance {
            config_sha256: cfg.provenance_hash(),
            data_sha256: data_hash(data),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Fisher diagnostics of the configured layout at the uniform prior-centre rigidity.
///
/// The centre is `[prior] center_ei`, else `[truth] base_ei`.
pub fn fisher_at_center(cfg: &RunConfig) -> Result<FisherReport> {
    let ei0 = cfg
        .prior
        .center_ei
        .or_else(|| cfg.truth.as_ref().map(|t| t.base_ei))
        .ok_or_else(|| Error::Validation(vec!["fisher needs [prior] center_ei or [truth] base_ei".into()]))?;
    let system = cfg.build_system().stage("model")?;
    let mesh = cfg.build_mesh().stage("model")?;
    let train = cfg.build_train().stage("model")?;
    let positions: Vec<f64> = cfg.sensors().iter().map(|s| s.position).collect();
    let options = StrategyOptions::default();
    let jacobian = jacobian_strategies().create(&cfg.hyper.jacobian, &options).stage("forward")?;
    let forward = forward_builders()
        .create(&cfg.hyper.forward, &options)
        .stage("forward")?
        .build(&system, &mesh, &positions, &train, jacobian)
        .stage("forward")?;
    let n = mesh.n_elements();
    let j = forward.jacobian(&DVector::from_element(n, 1.0 / ei0)).stage("fisher")?;
    let noise = cfg.noise_model().stage("model")?;
    fisher_report(&j, &noise, positions.len(), &vec![ei0; n], &mesh).stage("fisher")
}
