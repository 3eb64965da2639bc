use nalgebra::{DMatrix, DVector};

use super::hyper::{quasi_optimality, HyperEstimate};
use super::linear::LinearProblem;
use super::{NoiseModel, PriorSpec};
use crate::error::Result;
use crate::linalg::logspace;

/// Log-spaced `λ` grid spanning `[lo, hi]` times `tr(AᵀΓ⁻¹A)/tr(DᵀD)`.
pub fn relative_lambda_grid(
    a: &DMatrix<f64>,
    noise: &NoiseModel,
    prior: &PriorSpec,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let lp = LinearProblem::from_prior(a, &DVector::zeros(a.nrows()), noise, prior)?;
    let s = lp.lambda_scale();
    Ok(logspace(s * lo, s * hi, n))
}

/// Quasi-optimal `λ` for the linear problem over an ascending grid.
///
/// `σ²` in the estimate is the configured noise variance; `τ = λ/σ²`.
pub fn quasi_optimality_lambda(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    noise: &NoiseModel,
    prior: &PriorSpec,
    grid: &[f64],
) -> Result<HyperEstimate> {
    let lp = LinearProblem::from_prior(a, y, noise, prior)?;
    quasi_optimality(&lp, grid, Some(noise.sigma2()), &[])
}
