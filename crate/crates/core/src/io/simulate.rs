//! Synthetic measurement sets generated from a run configuration.

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::ingest::MeasurementSet;
use crate::assembly::Mesh;
use crate::error::{Error, Result};
use crate::synthetic::{make_truth, simulate, TruthProfile};

/// Truth rigidity on one element of the truth mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub x_left: f64,
    pub x_right: f64,
    pub ei: f64,
}

pub fn truth_rows(truth: &TruthProfile) -> Vec<TruthRow> {
    (0..truth.mesh.n_elements())
        .map(|j| {
            let (a, b) = truth.mesh.element(j);
            TruthRow { x_left: a, x_right: b, ei: truth.elementwise.values()[j] }
        })
        .collect()
}

/// Simulate the configured layout under `[truth]` with the run seed.
pub fn simulate_from_config(cfg: &RunConfig) -> Result<(MeasurementSet, TruthProfile)> {
    let t = cfg
        .truth
        .as_ref()
        .ok_or_else(|| Error::Validation(vec!["simulate needs a [truth] section".into()]))?;
    let system = if cfg.estimate_springs() {
        let springs = t.springs.as_deref().ok_or_else(|| {
            Error::Validation(vec!["[truth] springs are required when [system] springs = \"estimate\"".into()])
        })?;
        cfg.build_system_with(Some(springs))?
    } else {
        cfg.build_system()?
    };
    let mesh = match t.elements {
        Some(n) => Mesh::uniform(system.total_length(), n)?,
        None => cfg.build_mesh()?,
    };
    let truth = make_truth(t.base_ei, &t.zones, &mesh)?;
    let train = cfg.build_train()?;
    let data = simulate(
        &system,
        &truth,
        cfg.sensors(),
        &train,
        cfg.noise.sigma_mm_per_m,
        cfg.correlation(),
        cfg.seed,
    )?;
    let set = MeasurementSet::from_matrix(
        cfg.sensors().iter().map(|s| s.id.clone()).collect(),
        train.positions.clone(),
        &data.rotation_matrix(),
    )?;
    Ok((set, truth))
}
