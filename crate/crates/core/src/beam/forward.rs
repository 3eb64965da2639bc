//! Forward maps from element compliance to stacked sensor rotations.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::fe::FeModel;
use super::{AxleTrain, BeamSystem, ComplianceField, SensorStation};
use crate::assembly::{design_matrix, DesignMatrix, Mesh};
use crate::error::{Error, Result};

/// Map from element compliance `v` to stacked rotations (sensor-major).
pub trait ForwardModel: Send + Sync {
    fn name(&self) -> &str;
    fn n_params(&self) -> usize;
    fn n_sensors(&self) -> usize;
    fn n_loads(&self) -> usize;
    fn n_obs(&self) -> usize {
        self.n_sensors() * self.n_loads()
    }
    /// True when `rotations(v) = J v` for a constant `J`.
    fn is_linear(&self) -> bool;
    fn rotations(&self, compliance: &DVector<f64>) -> Result<DVector<f64>>;
    /// `∂θ / ∂v`, shape `n_obs x n_params`.
    fn jacobian(&self, compliance: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Exact linear map for a simply supported span.
#[derive(Debug, Clone)]
pub struct AnalyticSpan {
    design: DesignMatrix,
}

impl AnalyticSpan {
    pub fn new(design: DesignMatrix) -> Self {
        AnalyticSpan { design }
    }

    pub fn build(span: f64, positions: &[f64], train: &AxleTrain, mesh: &Mesh) -> Result<Self> {
        Ok(AnalyticSpan::new(design_matrix(span, positions, train, mesh)?))
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }
}

impl ForwardModel for AnalyticSpan {
    fn name(&self) -> &str {
        "analytic-ss"
    }
    fn n_params(&self) -> usize {
        self.design.matrix.ncols()
    }
    fn n_sensors(&self) -> usize {
        self.design.n_sensors
    }
    fn n_loads(&self) -> usize {
        self.design.n_loads
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn rotations(&self, compliance: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(compliance, self.n_params())?;
        Ok(&self.design.matrix * compliance)
    }
    fn jacobian(&self, compliance: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(compliance, self.n_params())?;
        Ok(self.design.matrix.clone())
    }
}

fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::shape(format!("compliance has {} entries, expected {n}", v.len())));
    }
    Ok(())
}

/// How the finite-element forward map differentiates itself.
pub trait JacobianStrategy: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn jacobian(&self, forward: &FeForward, compliance: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Mutual-energy product `λᵀ K_j u / v_j²` with one adjoint solve per sensor.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdjointJacobian;

impl JacobianStrategy for AdjointJacobian {
    fn name(&self) -> &str {
        "adjoint"
    }

    fn jacobian(&self, fwd: &FeForward, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        let fac = fwd.model.factor(v)?;
        let u = fac.solve_many(&fwd.loads);
        let lambda = fac.solve_many(&fwd.functionals);
        let (r, k, n) = (fwd.n_sensors(), fwd.n_loads(), fwd.n_params());
        let rows: Vec<Vec<f64>> = (0..r * k)
            .into_par_iter()
            .map(|row| {
                let mut out = vec![0.0; n];
                let li = lambda.column(row / k).into_owned();
                let uk = u.column(row % k).into_owned();
                fwd.model.mutual_energy(&li, &uk, &mut out);
                for (o, vj) in out.iter_mut().zip(v.iter()) {
                    *o /= vj * vj;
                }
                out[fwd.sensor_group[row / k]] += fwd.direct[(row / k, row % k)];
                out
            })
            .collect();
        Ok(DMatrix::from_fn(r * k, n, |i, j| rows[i][j]))
    }
}

/// Central differences with step `rel_step · v_j`.
#[derive(Debug, Clone, Copy)]
pub struct CentralDifference {
    pub rel_step: f64,
}

impl Default for CentralDifference {
    fn default() -> Self {
        CentralDifference { rel_step: 1e-6 }
    }
}

impl JacobianStrategy for CentralDifference {
    fn name(&self) -> &str {
        "central-difference"
    }

    fn jacobian(&self, fwd: &FeForward, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(v, fwd.n_params())?;
        let cols: Vec<DVector<f64>> = (0..v.len())
            .into_par_iter()
            .map(|j| {
                let h = self.rel_step * v[j].max(f64::MIN_POSITIVE);
                let (mut up, mut dn) = (v.clone(), v.clone());
                up[j] += h;
                dn[j] -= h;
                let step = up[j] - dn[j];
                if !(step > 0.0) || !step.is_finite() {
                    return Err(Error::numeric(format!(
                        "finite-difference step underflows for element {j} (v = {})",
                        v[j]
                    )));
                }
                Ok((fwd.rotations(&up)? - fwd.rotations(&dn)?) / step)
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_columns(&cols))
    }
}

/// Finite-element forward map for any support configuration.
#[derive(Debug, Clone)]
pub struct FeForward {
    model: FeModel,
    positions: Vec<f64>,
    train: AxleTrain,
    /// Rotation functionals, one column per sensor.
    functionals: DMatrix<f64>,
    /// Nodal load vectors, one column per vehicle position.
    loads: DMatrix<f64>,
    /// In-element rotation at unit rigidity (`R x K`), scaled by the
    /// compliance of `sensor_group`.
    direct: DMatrix<f64>,
    sensor_group: Vec<usize>,
    strategy: Arc<dyn JacobianStrategy>,
}

impl FeForward {
    /// Stations at `positions` may sit anywhere on the beam, supports included.
    pub fn new(
        system: &BeamSystem,
        mesh: &Mesh,
        positions: &[f64],
        train: &AxleTrain,
        strategy: Arc<dyn JacobianStrategy>,
    ) -> Result<Self> {
        let model = FeModel::new(system, mesh, &[])?;
        let total = system.total_length();
        let n_dof = 2 * model.nodes().len();
        let mut functionals = DMatrix::zeros(n_dof, positions.len());
        for (i, &r) in positions.iter().enumerate() {
            functionals.set_column(i, &model.rotation_functional(r)?);
        }
        let mut loads = DMatrix::zeros(n_dof, train.n_positions());
        let mut direct = DMatrix::zeros(positions.len(), train.n_positions());
        let mut sensor_group = vec![0; positions.len()];
        for k in 0..train.n_positions() {
            let axles = train.point_loads(k, total);
            let mut f = DVector::zeros(n_dof);
            for &(x, p) in &axles {
                f += model.force_vector(x, p)?;
            }
            loads.set_column(k, &f);
            for (i, &r) in positions.iter().enumerate() {
                let (g, d) = model.local_rotation(r, &axles)?;
                sensor_group[i] = g;
                direct[(i, k)] = d;
            }
        }
        Ok(FeForward {
            model,
            positions: positions.to_vec(),
            train: train.clone(),
            functionals,
            loads,
            direct,
            sensor_group,
            strategy,
        })
    }

    pub fn system(&self) -> &BeamSystem {
        self.model.system()
    }

    pub fn strategy(&self) -> &Arc<dyn JacobianStrategy> {
        &self.strategy
    }

    pub fn with_strategy(&self, strategy: Arc<dyn JacobianStrategy>) -> Self {
        FeForward {
            strategy,
            ..self.clone()
        }
    }

    /// Same stations, loads and mesh on a system with replaced spring stiffnesses.
    pub fn with_springs(&self, mesh: &Mesh, nodes: &[usize], stiffness: &[f64]) -> Result<Self> {
        let system = self.system().with_springs(nodes, stiffness)?;
        FeForward::new(&system, mesh, &self.positions, &self.train, self.strategy.clone())
    }

    /// Rotations as an `R x K` matrix.
    pub fn rotation_matrix(&self, compliance: &DVector<f64>) -> Result<DMatrix<f64>> {
        let fac = self.model.factor(compliance)?;
        let u = fac.solve_many(&self.loads);
        let mut m = self.functionals.transpose() * u;
        for (i, &g) in self.sensor_group.iter().enumerate() {
            let d = self.direct.row(i) * compliance[g];
            let mut row = m.row_mut(i);
            row += d;
        }
        Ok(m)
    }

    /// Largest entry-wise discrepancy between the configured Jacobian and
    /// central differences, relative to the largest Jacobian entry.
    pub fn check_jacobian(&self, compliance: &DVector<f64>) -> Result<f64> {
        let a = self.jacobian(compliance)?;
        let b = CentralDifference::default().jacobian(self, compliance)?;
        let scale = b.amax();
        if scale == 0.0 {
            return Ok(a.amax());
        }
        Ok((a - b).amax() / scale)
    }
}

impl ForwardModel for FeForward {
    fn name(&self) -> &str {
        "fe"
    }
    fn n_params(&self) -> usize {
        self.model.n_groups()
    }
    fn n_sensors(&self) -> usize {
        self.positions.len()
    }
    fn n_loads(&self) -> usize {
        self.train.n_positions()
    }
    fn is_linear(&self) -> bool {
        self.system().is_simply_supported_span()
    }
    fn rotations(&self, compliance: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.rotation_matrix(compliance)?;
        // row-major flattening of R x K gives sensor-major order
        Ok(DVector::from_iterator(m.len(), m.transpose().iter().copied()))
    }
    fn jacobian(&self, compliance: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.strategy.jacobian(self, compliance)
    }
}

/// Sensor rotations (`R x K`) of a beam system under an axle sweep.
pub fn fe_rotation_matrix(
    system: &BeamSystem,
    field: &ComplianceField,
    sensors: &[SensorStation],
    train: &AxleTrain,
    mesh: &Mesh,
) -> Result<DMatrix<f64>> {
    let positions: Vec<f64> = sensors.iter().map(|s| s.position).collect();
    FeForward::new(system, mesh, &positions, train, Arc::new(AdjointJacobian))?.rotation_matrix(field.values())
}

/// `∂θ/∂v` at `field`: the exact design matrix on a simply supported span,
/// the adjoint finite-element Jacobian otherwise.
pub fn compliance_jacobian(
    system: &BeamSystem,
    field: &ComplianceField,
    sensors: &[SensorStation],
    train: &AxleTrain,
    mesh: &Mesh,
) -> Result<DMatrix<f64>> {
    let positions: Vec<f64> = sensors.iter().map(|s| s.position).collect();
    if system.is_simply_supported_span() {
        return Ok(design_matrix(system.total_length(), &positions, train, mesh)?.matrix);
    }
    FeForward::new(system, mesh, &positions, train, Arc::new(AdjointJacobian))?.jacobian(field.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::Support;
    use crate::linalg::linspace;

    fn forward(system: &BeamSystem, n: usize, pos: &[f64], k: usize) -> FeForward {
        let mesh = Mesh::uniform(system.total_length(), n).unwrap();
        let train = AxleTrain::point_load(1.0e4, linspace(0.5, system.total_length() - 0.5, k)).unwrap();
        FeForward::new(system, &mesh, pos, &train, Arc::new(AdjointJacobian)).unwrap()
    }

    #[test]
    fn stations_next_to_nodes_stay_exact() {
        let s = BeamSystem::simply_supported(20.0).unwrap();
        let mesh = Mesh::uniform(20.0, 12).unwrap();
        let train = AxleTrain::new(vec![0.0, -1.3], vec![2.0, 1.0], linspace(0.5, 21.0, 37)).unwrap();
        let v = DVector::from_fn(12, |j, _| 1.0 + 0.1 * j as f64);
        for r in [13.3, 40.0 / 3.0 - 1e-9, 40.0 / 3.0, 13.5, 19.999] {
            let fe = FeForward::new(&s, &mesh, &[r], &train, Arc::new(AdjointJacobian)).unwrap();
            let an = AnalyticSpan::build(20.0, &[r], &train, &mesh).unwrap();
            let (a, b) = (fe.rotations(&v).unwrap(), an.rotations(&v).unwrap());
            assert!((a - &b).amax() < 1e-12 * b.amax(), "station {r}");
            let ja = fe.jacobian(&v).unwrap();
            assert!((ja - &an.design().matrix).amax() < 1e-12 * an.design().matrix.amax(), "station {r}");
        }
    }

    #[test]
    fn fe_matches_design_matrix_on_simple_span() {
        let s = BeamSystem::simply_supported(10.0).unwrap();
        let mesh = Mesh::uniform(10.0, 6).unwrap();
        let train = AxleTrain::point_load(2.0, linspace(0.3, 9.7, 11)).unwrap();
        let fe = FeForward::new(&s, &mesh, &[2.1, 7.3], &train, Arc::new(AdjointJacobian)).unwrap();
        let an = AnalyticSpan::build(10.0, &[2.1, 7.3], &train, &mesh).unwrap();
        let v = DVector::from_fn(6, |j, _| 1.0 + 0.2 * j as f64);
        let a = fe.rotations(&v).unwrap();
        let b = an.rotations(&v).unwrap();
        assert!((a - &b).amax() < 1e-12 * b.amax());
        let ja = fe.jacobian(&v).unwrap();
        assert!((ja - &an.design().matrix).amax() < 1e-12 * an.design().matrix.amax());
    }

    #[test]
    fn adjoint_matches_central_difference_on_indeterminate_systems() {
        let two = BeamSystem::continuous(vec![12.0, 12.0]).unwrap();
        let sprung = BeamSystem::new(
            vec![18.0, 18.0],
            vec![Support::spring(5e8), Support::PINNED, Support::spring(5e8)],
            None,
        )
        .unwrap();
        for s in [two, sprung] {
            let fwd = forward(&s, 8, &[4.0, 14.0], 9);
            let v = DVector::from_fn(8, |j, _| 1e-10 * (1.0 + 0.3 * (j as f64).sin()));
            assert!(fwd.check_jacobian(&v).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn rotations_are_homogeneous_of_degree_one() {
        let s = BeamSystem::continuous(vec![8.0, 8.0]).unwrap();
        let fwd = forward(&s, 6, &[3.0], 5);
        let v = DVector::from_fn(6, |j, _| 1.0 + j as f64);
        let a = fwd.rotations(&v).unwrap() * 3.0;
        let b = fwd.rotations(&(v * 3.0)).unwrap();
        assert!((a - &b).amax() < 1e-12 * b.amax());
    }

    #[test]
    fn underflowing_step_is_numeric_error() {
        let s = BeamSystem::continuous(vec![8.0, 8.0]).unwrap();
        let fwd = forward(&s, 4, &[3.0], 3);
        let cd = CentralDifference { rel_step: 1e-30 };
        let e = cd.jacobian(&fwd, &DVector::from_element(4, 1.0));
        assert!(matches!(e, Err(Error::Numeric(_))));
    }
}
