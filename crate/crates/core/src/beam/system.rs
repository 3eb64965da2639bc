//! Structural model description: spans, supports, sensors, vehicles and the
//! element-wise compliance / rigidity fields.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rotational condition at a support node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RotationalRestraint {
    /// No rotational restraint.
    Pinned,
    /// Linear rotational spring, stiffness in N·m/rad.
    Spring(f64),
    /// Rotation fully suppressed (the degree of freedom is eliminated).
    Rigid,
}

/// Boundary conditions at one node between spans (or at an end).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub vertical: bool,
    pub rotation: RotationalRestraint,
}

impl Support {
    pub const PINNED: Support = Support {
        vertical: true,
        rotation: RotationalRestraint::Pinned,
    };
    pub const FREE: Support = Support {
        vertical: false,
        rotation: RotationalRestraint::Pinned,
    };

    pub fn spring(k: f64) -> Self {
        Support {
            vertical: true,
            rotation: RotationalRestraint::Spring(k),
        }
    }

    pub fn clamped() -> Self {
        Support {
            vertical: true,
            rotation: RotationalRestraint::Rigid,
        }
    }
}

/// A continuous beam made of one or more spans with a support condition at
/// every span joint (including both ends).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSystem {
    spans: Vec<f64>,
    supports: Vec<Support>,
    load_path: (f64, f64),
}

impl BeamSystem {
    pub fn new(spans: Vec<f64>, supports: Vec<Support>, load_path: Option<(f64, f64)>) -> Result<Self> {
        let mut problems = Vec::new();
        if spans.is_empty() {
            problems.push("at least one span is required".to_string());
        }
        for (i, &l) in spans.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                problems.push(format!("span {i} has non-positive length {l}"));
            }
        }
        if supports.len() != spans.len() + 1 {
            problems.push(format!(
                "expected {} support nodes for {} spans, got {}",
                spans.len() + 1,
                spans.len(),
                supports.len()
            ));
        }
        if supports.iter().filter(|s| s.vertical).count() < 2 {
            problems.push("at least two vertically restrained nodes are required".to_string());
        }
        for (i, s) in supports.iter().enumerate() {
            if let RotationalRestraint::Spring(k) = s.rotation {
                if !(k >= 0.0 && k.is_finite()) {
                    problems.push(format!("support {i}: spring stiffness must be finite and >= 0, got {k}"));
                }
            }
        }
        let total: f64 = spans.iter().sum();
        let load_path = load_path.unwrap_or((0.0, total));
        if total > 0.0 && !(load_path.0 >= 0.0 && load_path.1 <= total * (1.0 + 1e-12) && load_path.0 <= load_path.1) {
            problems.push(format!(
                "load path [{}, {}] is not contained in [0, {total}]",
                load_path.0, load_path.1
            ));
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(BeamSystem {
            spans,
            supports,
            load_path,
        })
    }

    /// Single span, pinned at both ends.
    pub fn simply_supported(length: f64) -> Result<Self> {
        BeamSystem::new(vec![length], vec![Support::PINNED, Support::PINNED], None)
    }

    /// Continuous beam over pinned supports.
    pub fn continuous(spans: Vec<f64>) -> Result<Self> {
        let n = spans.len() + 1;
        BeamSystem::new(spans, vec![Support::PINNED; n], None)
    }

    pub fn spans(&self) -> &[f64] {
        &self.spans
    }

    pub fn supports(&self) -> &[Support] {
        &self.supports
    }

    pub fn load_path(&self) -> (f64, f64) {
        self.load_path
    }

    pub fn total_length(&self) -> f64 {
        self.spans.iter().sum()
    }

    /// Global coordinates of the span joints, `spans.len() + 1` values.
    pub fn joints(&self) -> Vec<f64> {
        let mut x = 0.0;
        let mut out = vec![0.0];
        for l in &self.spans {
            x += l;
            out.push(x);
        }
        out
    }

    /// True when the analytic simply-supported kernel applies.
    pub fn is_simply_supported_span(&self) -> bool {
        self.spans.len() == 1
            && self
                .supports
                .iter()
                .all(|s| s.vertical && s.rotation == RotationalRestraint::Pinned)
    }

    /// Indices of support nodes carrying a finite rotational spring.
    pub fn spring_nodes(&self) -> Vec<usize> {
        self.supports
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s.rotation, RotationalRestraint::Spring(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy of the system with the spring at each listed node replaced.
    pub fn with_springs(&self, nodes: &[usize], stiffness: &[f64]) -> Result<Self> {
        if nodes.len() != stiffness.len() {
            return Err(Error::shape("spring node and stiffness lists differ in length"));
        }
        let mut supports = self.supports.clone();
        for (&n, &k) in nodes.iter().zip(stiffness) {
            let s = supports
                .get_mut(n)
                .ok_or_else(|| Error::domain(format!("support node {n} does not exist")))?;
            s.rotation = RotationalRestraint::Spring(k);
        }
        BeamSystem::new(self.spans.clone(), supports, Some(self.load_path))
    }

    /// Span index containing `x` (joints belong to the span on their left,
    /// except `x = 0`).
    pub fn span_of(&self, x: f64) -> usize {
        let joints = self.joints();
        for i in 0..self.spans.len() {
            if x <= joints[i + 1] {
                return i;
            }
        }
        self.spans.len() - 1
    }
}

/// A rotation measurement station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorStation {
    pub id: String,
    pub position: f64,
}

impl SensorStation {
    pub fn new(id: impl Into<String>, position: f64) -> Self {
        SensorStation {
            id: id.into(),
            position,
        }
    }
}

/// Check a sensor layout against a system: interior positions, distinct.
pub fn validate_layout(sensors: &[SensorStation], system: &BeamSystem) -> Result<()> {
    let total = system.total_length();
    let mut problems = Vec::new();
    for s in sensors {
        if !(s.position > 0.0 && s.position < total) {
            problems.push(format!(
                "sensor '{}' at {} m is not inside the open interval (0, {total})",
                s.id, s.position
            ));
        }
    }
    for (i, a) in sensors.iter().enumerate() {
        for b in &sensors[i + 1..] {
            if a.position == b.position {
                problems.push(format!("sensors '{}' and '{}' share position {}", a.id, b.id, a.position));
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

/// A vehicle as a rigid set of axles, swept over reference positions.
///
/// Axle `a` sits at `z + offsets[a]` when the reference axle is at `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxleTrain {
    pub offsets: Vec<f64>,
    pub loads: Vec<f64>,
    pub positions: Vec<f64>,
}

impl AxleTrain {
    pub fn new(offsets: Vec<f64>, loads: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        let mut problems = Vec::new();
        if offsets.is_empty() || offsets.len() != loads.len() {
            problems.push("axle offsets and loads must be non-empty and of equal length".to_string());
        }
        if loads.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            problems.push("axle loads must be positive and finite".to_string());
        }
        if offsets.iter().chain(&positions).any(|x| !x.is_finite()) {
            problems.push("axle offsets and positions must be finite".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(AxleTrain {
            offsets,
            loads,
            positions,
        })
    }

    /// A single point load `p` swept over `positions`.
    pub fn point_load(p: f64, positions: Vec<f64>) -> Result<Self> {
        AxleTrain::new(vec![0.0], vec![p], positions)
    }

    /// Axle loads derived from a vehicle mass (t) split by fractions.
    pub fn from_mass(mass_t: f64, offsets: Vec<f64>, fractions: &[f64], positions: Vec<f64>) -> Result<Self> {
        let sum: f64 = fractions.iter().sum();
        if fractions.len() != offsets.len() || !(sum > 0.0) {
            return Err(Error::domain("axle fractions must match offsets and sum to a positive value"));
        }
        let total = tonnes_to_newtons(mass_t);
        let loads = fractions.iter().map(|f| total * f / sum).collect();
        AxleTrain::new(offsets, loads, positions)
    }

    pub fn n_positions(&self) -> usize {
        self.positions.len()
    }

    /// Axles of sweep step `k` that lie on `[0, length]`, as `(x, P)`.
    pub fn point_loads(&self, k: usize, length: f64) -> Vec<(f64, f64)> {
        let z = self.positions[k];
        self.offsets
            .iter()
            .zip(&self.loads)
            .map(|(o, p)| (z + o, *p))
            .filter(|(x, _)| *x >= 0.0 && *x <= length)
            .collect()
    }
}

/// Standard gravity used for mass to force conversion.
pub const GRAVITY: f64 = 9.81;

pub fn tonnes_to_newtons(t: f64) -> f64 {
    t * 1000.0 * GRAVITY
}

/// 1 mm/m of tilt is 1 mrad.
pub fn mm_per_m_to_rad(x: f64) -> f64 {
    x * 1e-3
}

pub fn rad_to_mm_per_m(x: f64) -> f64 {
    x * 1e3
}

/// Element-averaged compliance `v_j = 1/EI_j`, 1/(N·m²).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceField(DVector<f64>);

impl ComplianceField {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("compliance field is empty"));
        }
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("compliance of element {j} must be positive, got {v}")));
        }
        Ok(ComplianceField(values))
    }

    pub fn uniform(n: usize, v: f64) -> Result<Self> {
        ComplianceField::new(DVector::from_element(n, v))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_rigidity(&self) -> RigidityField {
        RigidityField(self.0.map(|v| 1.0 / v))
    }
}

/// Element-wise flexural rigidity, N·m².
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityField(DVector<f64>);

impl RigidityField {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("rigidity of element {j} must be positive, got {v}")));
        }
        Ok(RigidityField(values))
    }

    pub fn uniform(n: usize, ei: f64) -> Result<Self> {
        RigidityField::new(DVector::from_element(n, ei))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_compliance(&self) -> ComplianceField {
        ComplianceField(self.0.map(|ei| 1.0 / ei))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mechanism() {
        let e = BeamSystem::new(vec![10.0], vec![Support::PINNED, Support::FREE], None);
        assert!(matches!(e, Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_bad_spans_and_springs_together() {
        let e = BeamSystem::new(vec![-1.0], vec![Support::spring(-5.0), Support::PINNED], None).unwrap_err();
        match e {
            Error::Validation(v) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn joints_and_span_lookup() {
        let s = BeamSystem::continuous(vec![18.0, 18.0]).unwrap();
        assert_eq!(s.joints(), vec![0.0, 18.0, 36.0]);
        assert_eq!(s.span_of(5.0), 0);
        assert_eq!(s.span_of(18.0), 0);
        assert_eq!(s.span_of(20.0), 1);
        assert!(!s.is_simply_supported_span());
        assert!(BeamSystem::simply_supported(3.0).unwrap().is_simply_supported_span());
    }

    #[test]
    fn axles_off_the_bridge_are_dropped() {
        let t = AxleTrain::new(vec![0.0, -2.0], vec![1.0, 2.0], vec![1.0, 5.0]).unwrap();
        assert_eq!(t.point_loads(0, 10.0), vec![(1.0, 1.0)]);
        assert_eq!(t.point_loads(1, 10.0), vec![(5.0, 1.0), (3.0, 2.0)]);
    }

    #[test]
    fn vehicle_mass_split() {
        let t = AxleTrain::from_mass(4.9, vec![0.0, -2.0], &[1.0, 1.0], vec![10.0]).unwrap();
        assert!((t.loads[0] - 24034.5).abs() < 1e-9);
        assert_eq!(t.loads[0], t.loads[1]);
    }

    #[test]
    fn layout_must_be_interior() {
        let s = BeamSystem::simply_supported(10.0).unwrap();
        assert!(validate_layout(&[SensorStation::new("a", 10.0)], &s).is_err());
        assert!(validate_layout(&[SensorStation::new("a", 2.0), SensorStation::new("b", 2.0)], &s).is_err());
        assert!(validate_layout(&[SensorStation::new("a", 2.0)], &s).is_ok());
    }

    #[test]
    fn conversions_are_exact() {
        assert_eq!(mm_per_m_to_rad(0.02), 0.02 * 1e-3);
        assert_eq!(rad_to_mm_per_m(2e-5), 2e-5 * 1e3);
    }
}
