use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::NoiseModel;
use crate::assembly::DifferenceOperator;
use crate::error::{Error, Result};
use crate::linalg::norm2;

/// Conjugate hyperpriors `σ² ~ InvGamma(a, b)`, `τ ~ Gamma(c, d)` (rate form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperDraws {
    pub sigma2: Vec<f64>,
    pub tau: Vec<f64>,
}

/// Exact conditional draws of `σ² | m, y` and `τ | m` for a fixed `m`.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_hyper_updates(
    m: &DVector<f64>,
    y: &DVector<f64>,
    a: &DMatrix<f64>,
    noise: &NoiseModel,
    d: &DifferenceOperator,
    center: &DVector<f64>,
    hp: &HyperPrior,
    n_samples: usize,
    seed: u64,
) -> Result<HyperDraws> {
    if a.nrows() != y.len() || a.ncols() != m.len() || d.matrix.ncols() != m.len() || center.len() != m.len() {
        return Err(Error::shape("inconsistent dimensions for the hyperparameter conditionals"));
    }
    if !(hp.a > 0.0 && hp.c > 0.0 && hp.b >= 0.0 && hp.d >= 0.0) {
        return Err(Error::domain("hyperprior shapes must be positive and rates non-negative"));
    }
    let w = noise.whitener(y.len())?;
    let resid = norm2(&w.whiten_vec(&(a * m - y)));
    let rough = norm2(&(&d.matrix * (m - center)));
    let rate_s = hp.b + 0.5 * resid;
    let rate_t = hp.d + 0.5 * rough;
    if !(rate_s > 0.0) {
        return Err(Error::domain("σ² conditional is improper: zero residual with zero prior rate"));
    }
    if !(rate_t > 0.0) {
        return Err(Error::domain("τ conditional is improper: zero roughness with zero prior rate"));
    }
    let gs = Gamma::new(hp.a + 0.5 * y.len() as f64, 1.0 / rate_s).map_err(|e| Error::domain(e.to_string()))?;
    let gt = Gamma::new(hp.c + 0.5 * d.rank() as f64, 1.0 / rate_t).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = HyperDraws {
        sigma2: Vec::with_capacity(n_samples),
        tau: Vec::with_capacity(n_samples),
    };
    for _ in 0..n_samples {
        out.sigma2.push(1.0 / gs.sample(&mut rng));
        out.tau.push(gt.sample(&mut rng));
    }
    Ok(out)
}
