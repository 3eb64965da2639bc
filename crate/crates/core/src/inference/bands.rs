//! Element-wise credible bands for `EI` from a Gaussian posterior over
//! compliance or log-compliance.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{GaussianPosterior, Parameterization};
use crate::error::{Error, Result};

/// Inner and outer central credible levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Levels {
    fn default() -> Self {
        Levels { inner: 0.75, outer: 0.95 }
    }
}

impl Levels {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(0.0 < inner && inner < outer && outer < 1.0) {
            return Err(Error::domain(format!(
                "credible levels must satisfy 0 < inner < outer < 1, got {inner} and {outer}"
            )));
        }
        Ok(Levels { inner, outer })
    }
}

/// Per-element `EI` point estimate with nested inner/outer bands (N·m²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleBand {
    pub mean: Vec<f64>,
    pub lo_inner: Vec<f64>,
    pub hi_inner: Vec<f64>,
    pub lo_outer: Vec<f64>,
    pub hi_outer: Vec<f64>,
    pub levels: Levels,
    pub method: String,
}

impl CredibleBand {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Outer band width per element.
    pub fn outer_width(&self) -> Vec<f64> {
        self.hi_outer.iter().zip(&self.lo_outer).map(|(h, l)| h - l).collect()
    }

    /// True when `lo_outer ≤ lo_inner ≤ mean ≤ hi_inner ≤ hi_outer` everywhere.
    pub fn is_nested(&self) -> bool {
        (0..self.len()).all(|j| {
            self.lo_outer[j] <= self.lo_inner[j]
                && self.lo_inner[j] <= self.mean[j]
                && self.mean[j] <= self.hi_inner[j]
                && self.hi_inner[j] <= self.hi_outer[j]
        })
    }
}

/// Strategy turning a posterior over compliance parameters into `EI` bands.
pub trait BandEstimator: Send + Sync {
    fn name(&self) -> &str;
    fn band(&self, posterior: &GaussianPosterior, levels: Levels) -> Result<CredibleBand>;
}

fn z_of(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + 0.5 * level)
}

/// `EI` point estimate: `1/v` at the posterior mean (its median).
fn point_estimate(posterior: &GaussianPosterior) -> Result<Vec<f64>> {
    match posterior.parameterization {
        Parameterization::LinearCompliance => posterior
            .mean
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if v > 0.0 {
                    Ok(1.0 / v)
                } else {
                    Err(Error::domain(format!("element {j}: posterior mean compliance {v} is not positive")))
                }
            })
            .collect(),
        Parameterization::LogLatent => Ok(posterior.mean.iter().map(|e| (-e).exp()).collect()),
    }
}

/// First-order propagation: `sd(EI) = sd(v)/v²`, or `EI · sd(η)` in latent form.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeltaBand;

impl BandEstimator for DeltaBand {
    fn name(&self) -> &str {
        "delta"
    }

    fn band(&self, posterior: &GaussianPosterior, levels: Levels) -> Result<CredibleBand> {
        let mean = point_estimate(posterior)?;
        let sd_p = posterior.marginal_sd();
        let sd: Vec<f64> = match posterior.parameterization {
            Parameterization::LinearCompliance => {
                mean.iter().zip(sd_p.iter()).map(|(ei, s)| s * ei * ei).collect()
            }
            Parameterization::LogLatent => mean.iter().zip(sd_p.iter()).map(|(ei, s)| s * ei).collect(),
        };
        let (zi, zo) = (z_of(levels.inner), z_of(levels.outer));
        let at = |z: f64, sign: f64| -> Vec<f64> { mean.iter().zip(&sd).map(|(m, s)| m + sign * z * s).collect() };
        Ok(CredibleBand {
            lo_inner: at(zi, -1.0),
            hi_inner: at(zi, 1.0),
            lo_outer: at(zo, -1.0),
            hi_outer: at(zo, 1.0),
            mean,
            levels,
            method: self.name().into(),
        })
    }
}

/// Exact transform of the latent Gaussian quantiles, `exp(−(η ∓ z sd))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LognormalBand;

impl BandEstimator for LognormalBand {
    fn name(&self) -> &str {
        "lognormal"
    }

    fn band(&self, posterior: &GaussianPosterior, levels: Levels) -> Result<CredibleBand> {
        if posterior.parameterization != Parameterization::LogLatent {
            return Err(Error::model("lognormal bands need the log-latent parameterization"));
        }
        let sd = posterior.marginal_sd();
        let at = |z: f64| -> Vec<f64> {
            posterior.mean.iter().zip(sd.iter()).map(|(e, s)| (-(e + z * s)).exp()).collect()
        };
        let (zi, zo) = (z_of(levels.inner), z_of(levels.outer));
        Ok(CredibleBand {
            mean: point_estimate(posterior)?,
            lo_inner: at(zi),
            hi_inner: at(-zi),
            lo_outer: at(zo),
            hi_outer: at(-zo),
            levels,
            method: self.name().into(),
        })
    }
}

/// Monte-Carlo quantiles of mapped posterior draws.
#[derive(Debug, Clone, Copy)]
pub struct SamplingBand {
    pub draws: usize,
    pub seed: u64,
}

impl Default for SamplingBand {
    fn default() -> Self {
        SamplingBand { draws: 20_000, seed: 0 }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let (a, b) = (sorted[i], sorted[i + 1]);
    if frac == 0.0 || a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

impl BandEstimator for SamplingBand {
    fn name(&self) -> &str {
        "sampling"
    }

    fn band(&self, posterior: &GaussianPosterior, levels: Levels) -> Result<CredibleBand> {
        if self.draws < 2 {
            return Err(Error::domain("sampling bands need at least two draws"));
        }
        let n = posterior.n();
        let l = posterior.covariance().cholesky().ok_or_else(|| Error::numeric("posterior covariance is not SPD"))?;
        let l = l.l();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut samples = vec![Vec::with_capacity(self.draws); n];
        for _ in 0..self.draws {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let x = &posterior.mean + &l * z;
            for (j, xj) in x.iter().enumerate() {
                let ei = match posterior.parameterization {
                    Parameterization::LinearCompliance if *xj > 0.0 => 1.0 / xj,
                    Parameterization::LinearCompliance => f64::INFINITY,
                    Parameterization::LogLatent => (-xj).exp(),
                };
                samples[j].push(ei);
            }
        }
        let mean = point_estimate(posterior)?;
        let mut band = CredibleBand {
            mean,
            lo_inner: vec![0.0; n],
            hi_inner: vec![0.0; n],
            lo_outer: vec![0.0; n],
            hi_outer: vec![0.0; n],
            levels,
            method: self.name().into(),
        };
        for (j, s) in samples.iter_mut().enumerate() {
            s.sort_by(f64::total_cmp);
            band.lo_inner[j] = quantile(s, 0.5 - 0.5 * levels.inner);
            band.hi_inner[j] = quantile(s, 0.5 + 0.5 * levels.inner);
            band.lo_outer[j] = quantile(s, 0.5 - 0.5 * levels.outer);
            band.hi_outer[j] = quantile(s, 0.5 + 0.5 * levels.outer);
        }
        Ok(band)
    }
}

/// `EI` bands from a posterior with the given estimator.
pub fn rigidity_credible_band(
    posterior: &GaussianPosterior,
    estimator: &dyn BandEstimator,
    levels: Levels,
) -> Result<CredibleBand> {
    estimator.band(posterior, levels)
}
