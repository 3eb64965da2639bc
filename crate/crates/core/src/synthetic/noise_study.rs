use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, make_truth, simulate, DamageZone};
use crate::assembly::Mesh;
use crate::beam::{mm_per_m_to_rad, AnalyticSpan, AxleTrain, BeamSystem, SensorStation};
use crate::error::{Error, Result};
use crate::inference::{
    maximize_evidence, rigidity_credible_band, Correlation, CredibleBand, GaussianPosterior, GnControls, Levels,
    LognormalBand, NoiseModel, NonlinearProblem, Parameterization, SearchControls,
};
use crate::linalg::linspace;

/// Damaged simply supported beam inverted at several noise levels with the
/// log-latent parameterization, evidence-selected `τ` at the known noise
/// level and Laplace bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseStudyConfig {
    pub length: f64,
    pub n_elements: usize,
    pub stations: Vec<f64>,
    pub base_ei: f64,
    pub zones: Vec<DamageZone>,
    pub axle_load: f64,
    pub n_positions: usize,
    pub sigmas_mm_per_m: Vec<f64>,
    pub replicates: usize,
    pub order: usize,
}

impl Default for NoiseStudyConfig {
    fn default() -> Self {
        NoiseStudyConfig {
            length: 20.0,
            n_elements: 10,
            stations: vec![5.0, 15.0],
            base_ei: 5e9,
            zones: vec![DamageZone { start: 10.0, end: 14.0, factor: 0.7 }],
            axle_load: 1e5,
            n_positions: 40,
            sigmas_mm_per_m: vec![0.02, 0.01, 0.005, 0.001],
            replicates: 20,
            order: 2,
        }
    }
}

/// Summary of one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevelResult {
    pub sigma_mm_per_m: f64,
    /// Outer band width averaged over elements and replicates (N·m²).
    pub mean_band_width: f64,
    /// Outer band width per element, averaged over replicates.
    pub element_width: Vec<f64>,
    /// Posterior mean `EI` per element, averaged over replicates.
    pub mean_ei: Vec<f64>,
    /// Share of replicates whose damaged-zone mean falls below the typical
    /// outer lower bound of the undamaged elements.
    pub detection_rate: f64,
    /// Detection in at least half the replicates.
    pub detected: bool,
    /// Band of the first replicate, for plotting.
    pub example: CredibleBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudy {
    pub x_left: Vec<f64>,
    pub x_right: Vec<f64>,
    pub truth: Vec<f64>,
    pub damaged: Vec<bool>,
    pub levels: Vec<NoiseLevelResult>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Detection rule: mean posterior `EI` over the damaged elements lies below
/// the median outer lower bound of the undamaged elements.
pub fn damage_detected(band: &CredibleBand, damaged: &[bool]) -> bool {
    let inside: Vec<f64> = band.mean.iter().zip(damaged).filter(|(_, d)| **d).map(|(m, _)| *m).collect();
    let outside: Vec<f64> = band.lo_outer.iter().zip(damaged).filter(|(_, d)| !**d).map(|(l, _)| *l).collect();
    if inside.is_empty() || outside.is_empty() {
        return false;
    }
    inside.iter().sum::<f64>() / (inside.len() as f64) < median(outside)
}

pub fn noise_sweep_study(cfg: &NoiseStudyConfig, master_seed: u64) -> Result<NoiseStudy> {
    if cfg.sigmas_mm_per_m.len() < 2 {
        return Err(Error::domain("the noise study needs at least two noise levels"));
    }
    if cfg.sigmas_mm_per_m.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::domain("noise levels must be positive"));
    }
    if cfg.replicates == 0 {
        return Err(Error::domain("the noise study needs at least one replicate"));
    }
    let system = BeamSystem::simply_supported(cfg.length)?;
    let mesh = Mesh::uniform(cfg.length, cfg.n_elements)?;
    let truth = make_truth(cfg.base_ei, &cfg.zones, &mesh)?;
    let sensors: Vec<SensorStation> =
        cfg.stations.iter().enumerate().map(|(i, &x)| SensorStation::new(format!("S{}", i + 1), x)).collect();
    let margin = 0.5 * cfg.length / cfg.n_positions as f64;
    let train = AxleTrain::point_load(cfg.axle_load, linspace(margin, cfg.length - margin, cfg.n_positions))?;
    let forward = Arc::new(AnalyticSpan::build(cfg.length, &cfg.stations, &train, &mesh)?);
    let center = DVector::from_element(cfg.n_elements, -cfg.base_ei.ln());
    let damaged: Vec<bool> = truth.elementwise.values().iter().map(|e| *e < cfg.base_ei).collect();
    let levels = Levels::default();

    let mut results = Vec::with_capacity(cfg.sigmas_mm_per_m.len());
    for (li, &sigma) in cfg.sigmas_mm_per_m.iter().enumerate() {
        let s2 = mm_per_m_to_rad(sigma).powi(2);
        let bands: Vec<CredibleBand> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(master_seed, (li * cfg.replicates + r) as u64);
                let data = simulate(&system, &truth, &sensors, &train, sigma, Correlation::Identity, seed)?;
                let noise = NoiseModel::white(mm_per_m_to_rad(sigma))?;
                let problem = NonlinearProblem::new(
                    forward.clone(),
                    Parameterization::LogLatent,
                    data.y.clone(),
                    &noise,
                    cfg.order,
                    center.clone(),
                    GnControls::default(),
                )?;
                let hyper = maximize_evidence(&problem, Some(s2), &[], &SearchControls::default())?;
                let map = problem.solve(s2, hyper.tau, &[])?;
                let post = GaussianPosterior::new(map.params, map.hessian, Parameterization::LogLatent, s2, hyper.tau)?;
                rigidity_credible_band(&post, &LognormalBand, levels)
            })
            .collect::<Result<_>>()?;
        let n = cfg.n_elements;
        let reps = bands.len() as f64;
        let mut element_width = vec![0.0; n];
        let mut mean_ei = vec![0.0; n];
        for b in &bands {
            for (j, w) in b.outer_width().iter().enumerate() {
                element_width[j] += w / reps;
                mean_ei[j] += b.mean[j] / reps;
            }
        }
        let hits = bands.iter().filter(|b| damage_detected(b, &damaged)).count();
        let detection_rate = hits as f64 / reps;
        results.push(NoiseLevelResult {
            sigma_mm_per_m: sigma,
            mean_band_width: element_width.iter().sum::<f64>() / n as f64,
            element_width,
            mean_ei,
            detection_rate,
            detected: 2 * hits >= bands.len(),
            example: bands[0].clone(),
        });
    }
    Ok(NoiseStudy {
        x_left: (0..mesh.n_elements()).map(|j| mesh.element(j).0).collect(),
        x_right: (0..mesh.n_elements()).map(|j| mesh.element(j).1).collect(),
        truth: truth.elementwise.values().iter().copied().collect(),
        damaged,
        levels: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_rule() {
        let band = CredibleBand {
            mean: vec![10.0, 6.0, 10.0],
            lo_inner: vec![9.0, 5.0, 9.0],
            hi_inner: vec![11.0, 7.0, 11.0],
            lo_outer: vec![8.0, 4.0, 8.0],
            hi_outer: vec![12.0, 8.0, 12.0],
            levels: Levels::default(),
            method: "delta".into(),
        };
        assert!(damage_detected(&band, &[false, true, false]));
        assert!(!damage_detected(&band, &[true, false, false]));
    }

    #[test]
    fn needs_two_levels() {
        let cfg = NoiseStudyConfig {
            sigmas_mm_per_m: vec![0.01],
            ..Default::default()
        };
        assert!(noise_sweep_study(&cfg, 1).is_err());
    }
}
