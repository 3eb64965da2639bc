//! Closed-form linear-Gaussian posterior, Tikhonov solves and predictive.

use nalgebra::{DMatrix, DVector};

use super::{NoiseModel, Parameterization, PriorSpec};
use crate::assembly::{difference_operator, DifferenceOperator};
use crate::error::{Error, Result};
use crate::linalg::{log_det, norm2, spd_factor, symmetrize, SpdFactor};

/// Gaussian posterior `N(mean, precision⁻¹)` in compliance or latent units.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    factor: SpdFactor,
    pub parameterization: Parameterization,
    pub sigma2: f64,
    pub tau: f64,
}

impl GaussianPosterior {
    pub fn new(
        mean: DVector<f64>,
        precision: DMatrix<f64>,
        parameterization: Parameterization,
        sigma2: f64,
        tau: f64,
    ) -> Result<Self> {
        if precision.nrows() != mean.len() {
            return Err(Error::shape("posterior mean and precision disagree in size"));
        }
        let factor = spd_factor(&precision, "posterior precision")?;
        Ok(GaussianPosterior {
            mean,
            precision,
            factor,
            parameterization,
            sigma2,
            tau,
        })
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }

    /// Regularization parameter `λ = σ² τ`.
    pub fn lambda(&self) -> f64 {
        self.sigma2 * self.tau
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// Explicit covariance `precision⁻¹`.
    pub fn covariance(&self) -> DMatrix<f64> {
        symmetrize(&self.factor.inverse())
    }

    pub fn marginal_sd(&self) -> DVector<f64> {
        self.covariance().diagonal().map(f64::sqrt)
    }

    pub fn log_det_precision(&self) -> f64 {
        log_det(&self.factor)
    }
}

/// Whitened data and cached normal-equation pieces for repeated solves of
/// `(AᵀΓ⁻¹A + λ DᵀD) m = AᵀΓ⁻¹y + λ DᵀD m₀` over `λ`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    aw: DMatrix<f64>,
    yw: DVector<f64>,
    ata: DMatrix<f64>,
    aty: DVector<f64>,
    diff: DifferenceOperator,
    dtd: DMatrix<f64>,
    dtd_center: DVector<f64>,
    center: DVector<f64>,
    log_det_gamma: f64,
    log_det_ddt: f64,
}

/// Minimizer of the penalized misfit at one `λ`.
#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub lambda: f64,
    pub params: DVector<f64>,
    /// `‖A m − y‖²_{Γ⁻¹}`.
    pub misfit: f64,
    /// `‖D (m − m₀)‖²`.
    pub roughness: f64,
    /// `log det (AᵀΓ⁻¹A + λ DᵀD)`.
    pub logdet_b: f64,
    /// `AᵀΓ⁻¹A + λ DᵀD` (with `A` the Jacobian at the fit for nonlinear maps).
    pub b: DMatrix<f64>,
    /// False when an iterative fit stopped before its tolerance.
    pub converged: bool,
}

impl PenalizedFit {
    /// `‖A m − y‖² + λ ‖D(m − m₀)‖²`.
    pub fn penalized(&self) -> f64 {
        self.misfit + self.lambda * self.roughness
    }
}

impl LinearProblem {
    pub fn new(
        a: &DMatrix<f64>,
        y: &DVector<f64>,
        noise: &NoiseModel,
        order: usize,
        center: &DVector<f64>,
    ) -> Result<Self> {
        if a.nrows() != y.len() {
            return Err(Error::shape(format!("A has {} rows, y has {}", a.nrows(), y.len())));
        }
        if a.ncols() != center.len() {
            return Err(Error::shape(format!(
                "A has {} columns, prior center has {}",
                a.ncols(),
                center.len()
            )));
        }
        if y.iter().chain(a.iter()).any(|x| !x.is_finite()) {
            return Err(Error::numeric("non-finite entries in A or y"));
        }
        let w = noise.whitener(a.nrows())?;
        let aw = w.whiten(a);
        let yw = w.whiten_vec(y);
        let diff = difference_operator(order, a.ncols())?;
        let dtd = diff.gram();
        let ddt = &diff.matrix * diff.matrix.transpose();
        let log_det_ddt = log_det(&spd_factor(&ddt, "D Dᵀ")?);
        Ok(LinearProblem {
            ata: aw.transpose() * &aw,
            aty: aw.transpose() * &yw,
            dtd_center: &dtd * center,
            dtd,
            diff,
            aw,
            yw,
            center: center.clone(),
            log_det_gamma: w.log_det(),
            log_det_ddt,
        })
    }

    pub fn from_prior(a: &DMatrix<f64>, y: &DVector<f64>, noise: &NoiseModel, prior: &PriorSpec) -> Result<Self> {
        LinearProblem::new(a, y, noise, prior.order, &prior.center)
    }

    pub fn n_obs(&self) -> usize {
        self.aw.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.aw.ncols()
    }

    pub fn rank(&self) -> usize {
        self.diff.rank()
    }

    pub fn log_det_gamma(&self) -> f64 {
        self.log_det_gamma
    }

    pub fn log_det_ddt(&self) -> f64 {
        self.log_det_ddt
    }

    /// `AᵀΓ⁻¹A`.
    pub fn data_gram(&self) -> &DMatrix<f64> {
        &self.ata
    }

    pub fn dtd(&self) -> &DMatrix<f64> {
        &self.dtd
    }

    /// `tr(AᵀΓ⁻¹A) / tr(DᵀD)`, the natural scale of `λ`.
    pub fn lambda_scale(&self) -> f64 {
        self.ata.trace() / self.dtd.trace()
    }

    pub fn fit(&self, lambda: f64) -> Result<PenalizedFit> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("regularization parameter must be >= 0, got {lambda}")));
        }
        let b = &self.ata + &self.dtd * lambda;
        let chol = spd_factor(&b, "penalized normal matrix")?;
        let params = chol.solve(&(&self.aty + &self.dtd_center * lambda));
        Ok(self.evaluate(lambda, params, b, &chol))
    }

    fn evaluate(&self, lambda: f64, params: DVector<f64>, b: DMatrix<f64>, chol: &SpdFactor) -> PenalizedFit {
        let misfit = norm2(&(&self.aw * &params - &self.yw));
        let roughness = norm2(&(&self.diff.matrix * (&params - &self.center)));
        PenalizedFit {
            lambda,
            params,
            misfit,
            roughness,
            logdet_b: log_det(chol),
            b,
            converged: true,
        }
    }
}

/// Factored Tikhonov operator at a fixed `λ`, reused across data vectors.
#[derive(Debug, Clone)]
pub struct TikhonovSolver {
    chol: SpdFactor,
    /// `Aᵀ Γ⁻¹` applied via the whitened design.
    atw: DMatrix<f64>,
    whitener: super::noise::Whitener,
    shift: DVector<f64>,
}

impl TikhonovSolver {
    pub fn new(a: &DMatrix<f64>, noise: &NoiseModel, order: usize, center: &DVector<f64>, lambda: f64) -> Result<Self> {
        let whitener = noise.whitener(a.nrows())?;
        let aw = whitener.whiten(a);
        let dtd = difference_operator(order, a.ncols())?.gram();
        let b = aw.transpose() * &aw + &dtd * lambda;
        Ok(TikhonovSolver {
            chol: spd_factor(&b, "penalized normal matrix")?,
            atw: aw.transpose(),
            whitener,
            shift: dtd * center * lambda,
        })
    }

    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(&(&self.atw * self.whitener.whiten_vec(y) + &self.shift))
    }
}

/// Posterior of the linear-Gaussian model `y = A v + ε`.
pub fn posterior_linear(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    noise: &NoiseModel,
    prior: &PriorSpec,
) -> Result<GaussianPosterior> {
    if prior.parameterization != Parameterization::LinearCompliance {
        return Err(Error::model("closed-form posterior needs the linear compliance parameterization"));
    }
    let lp = LinearProblem::from_prior(a, y, noise, prior)?;
    let s2 = noise.sigma2();
    let q = lp.data_gram() / s2 + lp.dtd() * prior.tau;
    let rhs = &lp.aty / s2 + &lp.dtd_center * prior.tau;
    let factor = spd_factor(&q, "posterior precision")?;
    let mean = factor.solve(&rhs);
    Ok(GaussianPosterior {
        mean,
        precision: q,
        factor,
        parameterization: Parameterization::LinearCompliance,
        sigma2: s2,
        tau: prior.tau,
    })
}

/// Tikhonov solution with `λ = σ² τ`; equals the posterior mean.
pub fn map_tikhonov(a: &DMatrix<f64>, y: &DVector<f64>, noise: &NoiseModel, prior: &PriorSpec) -> Result<DVector<f64>> {
    let lp = LinearProblem::from_prior(a, y, noise, prior)?;
    Ok(lp.fit(noise.sigma2() * prior.tau)?.params)
}

/// Laplace covariance `((1/σ²) JᵀΓ⁻¹J + τ DᵀD)⁻¹` at a mode.
pub fn laplace_covariance(j: &DMatrix<f64>, noise: &NoiseModel, prior: &PriorSpec) -> Result<DMatrix<f64>> {
    if j.ncols() != prior.n() {
        return Err(Error::shape(format!("J has {} columns, prior has {}", j.ncols(), prior.n())));
    }
    let jw = noise.whitener(j.nrows())?.whiten(j);
    let h = jw.transpose() * &jw / noise.sigma2() + prior.difference().gram() * prior.tau;
    let chol = spd_factor(&h, "Laplace Hessian")?;
    Ok(symmetrize(&chol.inverse()))
}

/// Predictive distribution of `y_new = A_new v + ε`.
#[derive(Debug, Clone)]
pub struct Predictive {
    pub mean: DVector<f64>,
    /// `σ² Γ`.
    pub noise_cov: DMatrix<f64>,
    /// `A_new Q⁻¹ A_newᵀ`.
    pub param_cov: DMatrix<f64>,
    pub total_cov: DMatrix<f64>,
}

pub fn posterior_predictive(
    a_new: &DMatrix<f64>,
    posterior: &GaussianPosterior,
    noise: &NoiseModel,
) -> Result<Predictive> {
    if posterior.parameterization != Parameterization::LinearCompliance {
        return Err(Error::model("predictive needs the linear compliance parameterization"));
    }
    if a_new.ncols() != posterior.n() {
        return Err(Error::shape(format!(
            "A_new has {} columns, posterior has {}",
            a_new.ncols(),
            posterior.n()
        )));
    }
    let noise_cov = noise.gamma(a_new.nrows())? * noise.sigma2();
    let x = posterior.factor.solve(&a_new.transpose());
    let param_cov = symmetrize(&(a_new * x));
    Ok(Predictive {
        mean: a_new * &posterior.mean,
        total_cov: &noise_cov + &param_cov,
        noise_cov,
        param_cov,
    })
}
