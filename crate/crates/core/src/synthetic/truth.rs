use serde::{Deserialize, Serialize};

use crate::assembly::Mesh;
use crate::beam::RigidityField;
use crate::error::{Error, Result};

/// Interval `[start, end]` (m) whose rigidity is `factor` times the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageZone {
    pub start: f64,
    pub end: f64,
    pub factor: f64,
}

/// Stepped ground-truth rigidity and its projection onto a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthProfile {
    pub base_ei: f64,
    pub zones: Vec<DamageZone>,
    pub mesh: Mesh,
    pub elementwise: RigidityField,
}

impl TruthProfile {
    /// Pointwise rigidity; zone edges take the zone value.
    pub fn ei_at(&self, x: f64) -> f64 {
        self.zones
            .iter()
            .find(|z| z.start <= x && x <= z.end)
            .map_or(self.base_ei, |z| self.base_ei * z.factor)
    }

    /// Breakpoints of the stepped profile inside the domain.
    pub fn edges(&self) -> Vec<f64> {
        self.zones.iter().flat_map(|z| [z.start, z.end]).collect()
    }

    /// Exact element compliance of the stepped profile on `mesh` refined
    /// with the zone edges; returns the refined mesh and `1/EI` per element.
    pub fn exact_compliance(&self, mesh: &Mesh) -> Result<(Mesh, Vec<f64>)> {
        let fine = mesh.refined_with(&self.edges())?;
        let v = fine.midpoints().iter().map(|&m| 1.0 / self.ei_at(m)).collect();
        Ok((fine, v))
    }
}

/// Validate damage zones and project the stepped profile onto `mesh` by
/// exact area-weighted averaging of `EI`.
pub fn make_truth(base_ei: f64, zones: &[DamageZone], mesh: &Mesh) -> Result<TruthProfile> {
    if !(base_ei > 0.0 && base_ei.is_finite()) {
        return Err(Error::domain(format!("base rigidity must be positive, got {base_ei}")));
    }
    let length = mesh.length();
    for (i, z) in zones.iter().enumerate() {
        if !(0.0 <= z.start && z.start < z.end && z.end <= length) {
            return Err(Error::domain(format!(
                "damage zone {i} [{}, {}] is not a proper interval inside [0, {length}]",
                z.start, z.end
            )));
        }
        if !(z.factor > 0.0 && z.factor < 1.0) {
            return Err(Error::domain(format!("damage zone {i}: factor must lie in (0, 1), got {}", z.factor)));
        }
    }
    let mut sorted = zones.to_vec();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
    for w in sorted.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::domain(format!(
                "damage zones [{}, {}] and [{}, {}] overlap",
                w[0].start, w[0].end, w[1].start, w[1].end
            )));
        }
    }
    let values = (0..mesh.n_elements())
        .map(|j| {
            let (a, b) = mesh.element(j);
            let damaged: f64 = sorted
                .iter()
                .map(|z| (z.end.min(b) - z.start.max(a)).max(0.0) * (1.0 - z.factor))
                .sum();
            base_ei * (1.0 - damaged / (b - a))
        })
        .collect::<Vec<f64>>();
    Ok(TruthProfile {
        base_ei,
        zones: sorted,
        mesh: mesh.clone(),
        elementwise: RigidityField::new(nalgebra::DVector::from_vec(values))?,
    })
}
