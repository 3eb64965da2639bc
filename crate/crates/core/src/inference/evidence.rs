//! Marginal likelihood of `(σ², τ)` under the improper difference prior.
//!
//! The prior density uses the pseudo-determinant of `τ DᵀD`, so components
//! in the null space of `D` are informed by the likelihood alone:
//!
//! `log p(y) = −M/2 log(2πσ²) − ½ log|Γ| + r/2 log(τ/2π) + ½ log det(DDᵀ)
//!            + N/2 log 2π − ½ log|Q| − Φ_min`
//!
//! with `r = rank D` and `Q = B/σ²`, `B = AᵀΓ⁻¹A + λDᵀD`. For nonlinear maps
//! `A` is the Jacobian at the mode (Laplace approximation).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::hyper::HyperProblem;
use super::linear::{LinearProblem, PenalizedFit};
use super::{NoiseModel, Parameterization, PriorSpec};
use crate::error::{Error, Result};

/// Log-evidence at `(σ², τ)` from a fit computed at `λ = σ²τ`.
pub fn log_evidence_at(problem: &dyn HyperProblem, fit: &PenalizedFit, sigma2: f64, tau: f64) -> f64 {
    let m = problem.n_obs() as f64;
    let n = problem.n_params() as f64;
    let r = problem.rank() as f64;
    let ln2pi = (2.0 * PI).ln();
    -0.5 * m * (ln2pi + sigma2.ln()) - 0.5 * problem.log_det_gamma() + 0.5 * r * (tau.ln() - ln2pi)
        + 0.5 * problem.log_det_ddt()
        + 0.5 * n * ln2pi
        - 0.5 * (fit.logdet_b - n * sigma2.ln())
        - 0.5 * (fit.misfit / sigma2 + tau * fit.roughness)
}

/// Log-evidence maximized over `σ²` at fixed `λ`; returns `(value, σ̂²)`.
///
/// At fixed `λ` the `σ²` dependence is `−(M−N+r)/2 log σ² − S/(2σ²)` with
/// `S` the penalized misfit, giving `σ̂² = S/(M − N + r)`.
pub fn profiled_log_evidence(problem: &dyn HyperProblem, fit: &PenalizedFit) -> (f64, f64) {
    let dof = problem.n_obs() + problem.rank() - problem.n_params();
    let sigma2 = fit.penalized() / dof.max(1) as f64;
    (log_evidence_at(problem, fit, sigma2, fit.lambda / sigma2), sigma2)
}

/// Log marginal likelihood of the linear-Gaussian model.
pub fn log_evidence(a: &DMatrix<f64>, y: &DVector<f64>, noise: &NoiseModel, prior: &PriorSpec) -> Result<f64> {
    if prior.parameterization != Parameterization::LinearCompliance {
        return Err(Error::model("closed-form evidence needs the linear compliance parameterization"));
    }
    let lp = LinearProblem::from_prior(a, y, noise, prior)?;
    let fit = lp.fit(noise.sigma2() * prior.tau)?;
    Ok(log_evidence_at(&lp, &fit, noise.sigma2(), prior.tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::hyper::{maximize_evidence, SearchControls};
    use crate::inference::Correlation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// With `A = D = I`, `y ~ N(m₀, (σ² + 1/τ) I)`.
    fn conjugate(y: &DVector<f64>, s2: f64, tau: f64) -> f64 {
        let v = s2 + 1.0 / tau;
        y.iter().map(|yi| -0.5 * ((2.0 * PI * v).ln() + yi * yi / v)).sum()
    }

    #[test]
    fn identity_model_matches_conjugate_form() {
        let y = DVector::from_vec(vec![0.3, -1.1, 2.0, 0.7, -0.2]);
        let noise = NoiseModel::white(0.8).unwrap();
        for tau in [0.1, 1.0, 7.0] {
            let prior = PriorSpec::new(Parameterization::LinearCompliance, 0, tau, DVector::zeros(5)).unwrap();
            let got = log_evidence(&DMatrix::identity(5, 5), &y, &noise, &prior).unwrap();
            assert!((got - conjugate(&y, 0.64, tau)).abs() < 1e-12, "{got}");
        }
    }

    #[test]
    fn invariant_under_row_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(12, 5, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(12, |_, _| rng.random::<f64>());
        let g = DMatrix::from_fn(12, 12, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()));
        let perm: Vec<usize> = (0..12).rev().collect();
        let ap = DMatrix::from_fn(12, 5, |i, j| a[(perm[i], j)]);
        let yp = DVector::from_fn(12, |i, _| y[perm[i]]);
        let gp = DMatrix::from_fn(12, 12, |i, j| g[(perm[i], perm[j])]);
        let prior = PriorSpec::new(Parameterization::LinearCompliance, 2, 3.0, DVector::zeros(5)).unwrap();
        let e1 = log_evidence(&a, &y, &NoiseModel::new(0.1, Correlation::Dense(g)).unwrap(), &prior).unwrap();
        let e2 = log_evidence(&ap, &yp, &NoiseModel::new(0.1, Correlation::Dense(gp)).unwrap(), &prior).unwrap();
        assert!((e1 - e2).abs() < 1e-10);
    }

    #[test]
    fn profiled_search_matches_brute_force_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 8;
        let a = DMatrix::from_fn(40, n, |i, j| (-((i as f64 / 5.0 - j as f64).powi(2)) / 4.0).exp());
        let truth = DVector::from_fn(n, |j, _| (j as f64 * 0.7).sin());
        let y = &a * truth + DVector::from_fn(40, |_, _| 0.05 * rng.sample::<f64, _>(StandardNormal));
        let noise = NoiseModel::white(1.0).unwrap();
        let lp = LinearProblem::new(&a, &y, &noise, 2, &DVector::zeros(n)).unwrap();
        let est = maximize_evidence(&lp, None, &[], &SearchControls::default()).unwrap();
        // brute force over (σ², τ)
        let mut best = f64::NEG_INFINITY;
        for i in 0..200 {
            let s2 = 10f64.powf(-5.0 + 4.0 * i as f64 / 199.0);
            for k in 0..200 {
                let tau = 10f64.powf(-4.0 + 8.0 * k as f64 / 199.0);
                let fit = lp.fit(s2 * tau).unwrap();
                best = best.max(log_evidence_at(&lp, &fit, s2, tau));
            }
        }
        assert!(est.objective >= best - 1e-6, "{} < {best}", est.objective);
        assert!(est.objective - best < 0.05);
    }
}
