//! Euler–Bernoulli finite elements with cubic Hermite interpolation.
//!
//! Each node carries a deflection `w` (positive in the load direction) and a
//! rotation `θ = dw/dx`. Vertical supports and rigid rotational supports remove
//! their degree of freedom; rotational springs add to the diagonal.
//! With element-wise constant `EI` and work-equivalent load vectors the nodal
//! values are exact. Inside an element the exact field is the Hermite
//! interpolant plus the clamped-clamped response to the loads in that element,
//! so stations need not be nodes.

use nalgebra::{DMatrix, DVector};

use crate::assembly::Mesh;
use crate::beam::{BeamSystem, RotationalRestraint};
use crate::error::{Error, Result};
use crate::linalg::{spd_factor, SpdFactor};

/// Hermite shape functions on an element of length `h` at local `ξ ∈ [0, 1]`.
fn shape(xi: f64, h: f64) -> [f64; 4] {
    let (x2, x3) = (xi * xi, xi * xi * xi);
    [
        1.0 - 3.0 * x2 + 2.0 * x3,
        h * (xi - 2.0 * x2 + x3),
        3.0 * x2 - 2.0 * x3,
        h * (x3 - x2),
    ]
}

/// `d/dx` of [`shape`].
fn shape_dx(xi: f64, h: f64) -> [f64; 4] {
    let x2 = xi * xi;
    [
        (6.0 * x2 - 6.0 * xi) / h,
        1.0 - 4.0 * xi + 3.0 * x2,
        (6.0 * xi - 6.0 * x2) / h,
        3.0 * x2 - 2.0 * xi,
    ]
}

/// Rotation at local offset `x` of a clamped-clamped element of length `h`
/// with `EI = 1` under a unit force at local offset `a`.
fn clamped_rotation(h: f64, a: f64, x: f64) -> f64 {
    let b = h - a;
    let c = 6.0 * h * h * h;
    if x <= a {
        b * b * (6.0 * a * h * x - 3.0 * (3.0 * a + b) * x * x) / c
    } else {
        let s = h - x;
        -a * a * (6.0 * b * h * s - 3.0 * (3.0 * b + a) * s * s) / c
    }
}

/// Bending stiffness of an element with `EI = 1`.
fn unit_stiffness(h: f64) -> [[f64; 4]; 4] {
    let c = 1.0 / (h * h * h);
    let (h2, h1) = (h * h, h);
    [
        [12.0 * c, 6.0 * h1 * c, -12.0 * c, 6.0 * h1 * c],
        [6.0 * h1 * c, 4.0 * h2 * c, -6.0 * h1 * c, 2.0 * h2 * c],
        [-12.0 * c, -6.0 * h1 * c, 12.0 * c, -6.0 * h1 * c],
        [6.0 * h1 * c, 2.0 * h2 * c, -6.0 * h1 * c, 4.0 * h2 * c],
    ]
}

/// Discretized beam: FE nodes refine the compliance mesh so that every
/// compliance element is a union of FE elements.
#[derive(Debug, Clone)]
pub struct FeModel {
    system: BeamSystem,
    nodes: Vec<f64>,
    /// Compliance element owning each FE element.
    group: Vec<usize>,
    n_groups: usize,
    /// Global dof -> reduced index.
    dof_map: Vec<Option<usize>>,
    n_free: usize,
    springs: Vec<(usize, f64)>,
}

/// Nodal response of a load case.
#[derive(Debug, Clone, PartialEq)]
pub struct FeResponse {
    pub nodes: Vec<f64>,
    pub deflection: Vec<f64>,
    pub rotation: Vec<f64>,
}

impl FeModel {
    /// Build the FE discretization of `system` over the compliance `mesh`,
    /// inserting `extra_nodes` (typically the sensor stations).
    pub fn new(system: &BeamSystem, mesh: &Mesh, extra_nodes: &[f64]) -> Result<Self> {
        let total = system.total_length();
        if (mesh.length() - total).abs() > 1e-12 * total {
            return Err(Error::shape(format!(
                "mesh covers {} m but the system is {total} m long",
                mesh.length()
            )));
        }
        let tol = 1e-9 * total;
        for j in system.joints() {
            if !mesh.breakpoints().iter().any(|b| (b - j).abs() <= tol) {
                return Err(Error::model(format!("mesh has no breakpoint at the joint {j} m")));
            }
        }
        let fe_mesh = mesh.refined_with(extra_nodes)?;
        let nodes = fe_mesh.breakpoints().to_vec();
        let group = fe_mesh
            .midpoints()
            .iter()
            .map(|&m| mesh.locate(m).expect("midpoint lies in mesh"))
            .collect();

        let n_dof = 2 * nodes.len();
        let mut fixed = vec![false; n_dof];
        let mut springs = Vec::new();
        for (joint, support) in system.joints().iter().zip(system.supports()) {
            let node = nodes
                .iter()
                .position(|x| (x - joint).abs() <= tol)
                .expect("joint is a node");
            if support.vertical {
                fixed[2 * node] = true;
            }
            match support.rotation {
                RotationalRestraint::Pinned => {}
                RotationalRestraint::Rigid => fixed[2 * node + 1] = true,
                RotationalRestraint::Spring(k) => springs.push((2 * node + 1, k)),
            }
        }
        let mut dof_map = vec![None; n_dof];
        let mut n_free = 0;
        for (d, slot) in dof_map.iter_mut().enumerate() {
            if !fixed[d] {
                *slot = Some(n_free);
                n_free += 1;
            }
        }
        Ok(FeModel {
            system: system.clone(),
            nodes,
            group,
            n_groups: mesh.n_elements(),
            dof_map,
            n_free,
            springs,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn system(&self) -> &BeamSystem {
        &self.system
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    fn n_dof(&self) -> usize {
        2 * self.nodes.len()
    }

    /// FE element containing `x` and the local coordinate.
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let total = *self.nodes.last().unwrap();
        if !(0.0..=total).contains(&x) {
            return Err(Error::domain(format!("position {x} m lies outside [0, {total}]")));
        }
        let n_el = self.nodes.len() - 1;
        let e = self.nodes.partition_point(|&b| b <= x).saturating_sub(1).min(n_el - 1);
        let h = self.nodes[e + 1] - self.nodes[e];
        Ok((e, ((x - self.nodes[e]) / h).clamp(0.0, 1.0)))
    }

    fn scatter(&self, e: usize, local: [f64; 4]) -> DVector<f64> {
        let mut v = DVector::zeros(self.n_dof());
        for (a, val) in local.iter().enumerate() {
            v[2 * e + a] += val;
        }
        v
    }

    /// Work-equivalent nodal forces of a point force `p` at `x`.
    pub fn force_vector(&self, x: f64, p: f64) -> Result<DVector<f64>> {
        let (e, xi) = self.locate(x)?;
        let h = self.nodes[e + 1] - self.nodes[e];
        Ok(self.scatter(e, shape(xi, h).map(|n| n * p)))
    }

    /// Work-equivalent nodal forces of a point couple `c` at `x`.
    pub fn couple_vector(&self, x: f64, c: f64) -> Result<DVector<f64>> {
        let (e, xi) = self.locate(x)?;
        let h = self.nodes[e + 1] - self.nodes[e];
        Ok(self.scatter(e, shape_dx(xi, h).map(|n| n * c)))
    }

    /// Row functional `g` with `θ(x) = g · u`.
    pub fn rotation_functional(&self, x: f64) -> Result<DVector<f64>> {
        self.couple_vector(x, 1.0)
    }

    /// Rotation at `x` from the forces `loads` acting inside the FE element
    /// that contains `x`, at unit rigidity, with the compliance group of that
    /// element. The full rotation is `g · u + v_group · value`.
    pub fn local_rotation(&self, x: f64, loads: &[(f64, f64)]) -> Result<(usize, f64)> {
        let (e, _) = self.locate(x)?;
        let (x0, x1) = (self.nodes[e], self.nodes[e + 1]);
        let h = x1 - x0;
        let value = loads
            .iter()
            .filter(|(xp, _)| *xp > x0 && *xp < x1)
            .map(|(xp, p)| p * clamped_rotation(h, xp - x0, x - x0))
            .sum();
        Ok((self.group[e], value))
    }

    /// Row functional `g` with `w(x) = g · u`.
    pub fn deflection_functional(&self, x: f64) -> Result<DVector<f64>> {
        self.force_vector(x, 1.0)
    }

    /// Assemble and factor the reduced stiffness for element-group compliance `v`.
    pub fn factor(&self, compliance: &DVector<f64>) -> Result<FeFactor<'_>> {
        if compliance.len() != self.n_groups {
            return Err(Error::shape(format!(
                "compliance has {} entries, mesh has {} elements",
                compliance.len(),
                self.n_groups
            )));
        }
        if let Some((j, v)) = compliance.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain(format!("element {j}: compliance must be positive, got {v}")));
        }
        let mut k = DMatrix::zeros(self.n_free, self.n_free);
        for e in 0..self.nodes.len() - 1 {
            let h = self.nodes[e + 1] - self.nodes[e];
            let ei = 1.0 / compliance[self.group[e]];
            let ke = unit_stiffness(h);
            for a in 0..4 {
                let Some(ra) = self.dof_map[2 * e + a] else { continue };
                for b in 0..4 {
                    if let Some(rb) = self.dof_map[2 * e + b] {
                        k[(ra, rb)] += ei * ke[a][b];
                    }
                }
            }
        }
        for &(d, kt) in &self.springs {
            if let Some(r) = self.dof_map[d] {
                k[(r, r)] += kt;
            }
        }
        let chol = spd_factor(&k, "stiffness matrix").map_err(|e| match e {
            Error::Identifiability { .. } => {
                Error::model("stiffness matrix is singular: the support conditions allow a mechanism")
            }
            other => other,
        })?;
        Ok(FeFactor { model: self, chol })
    }

    /// `λᵀ k0_e u` summed over the FE elements of each compliance group, where
    /// `k0_e` is the element stiffness at unit rigidity.
    pub(crate) fn mutual_energy(&self, lambda: &DVector<f64>, u: &DVector<f64>, out: &mut [f64]) {
        for e in 0..self.nodes.len() - 1 {
            let h = self.nodes[e + 1] - self.nodes[e];
            let ke = unit_stiffness(h);
            let mut acc = 0.0;
            for a in 0..4 {
                let la = lambda[2 * e + a];
                if la == 0.0 {
                    continue;
                }
                let mut row = 0.0;
                for b in 0..4 {
                    row += ke[a][b] * u[2 * e + b];
                }
                acc += la * row;
            }
            out[self.group[e]] += acc;
        }
    }
}

/// Factored stiffness for one compliance field.
pub struct FeFactor<'a> {
    model: &'a FeModel,
    chol: SpdFactor,
}

impl FeFactor<'_> {
    /// Solve `K u = f` for a full-length load vector; constrained dofs return 0.
    pub fn solve(&self, f: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
        self.solve_many(&m).column(0).into_owned()
    }

    /// Solve for several load vectors stored as columns.
    pub fn solve_many(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        let model = self.model;
        let mut rhs = DMatrix::zeros(model.n_free, f.ncols());
        for (d, slot) in model.dof_map.iter().enumerate() {
            if let Some(r) = slot {
                rhs.row_mut(*r).copy_from(&f.row(d));
            }
        }
        let sol = self.chol.solve(&rhs);
        let mut out = DMatrix::zeros(model.n_dof(), f.ncols());
        for (d, slot) in model.dof_map.iter().enumerate() {
            if let Some(r) = slot {
                out.row_mut(d).copy_from(&sol.row(*r));
            }
        }
        out
    }
}

/// Nodal deflections and rotations for an axle set `loads = [(x, P), ..]`.
pub fn fe_solve(model: &FeModel, compliance: &DVector<f64>, loads: &[(f64, f64)]) -> Result<FeResponse> {
    let fac = model.factor(compliance)?;
    let mut f = DVector::zeros(model.n_dof());
    for &(x, p) in loads {
        f += model.force_vector(x, p)?;
    }
    let u = fac.solve(&f);
    Ok(FeResponse {
        nodes: model.nodes.clone(),
        deflection: (0..model.nodes.len()).map(|i| u[2 * i]).collect(),
        rotation: (0..model.nodes.len()).map(|i| u[2 * i + 1]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::kernel::rotation_uniform_ss;
    use crate::beam::Support;

    fn ss(l: f64, n: usize) -> (BeamSystem, Mesh) {
        (BeamSystem::simply_supported(l).unwrap(), Mesh::uniform(l, n).unwrap())
    }

    #[test]
    fn midspan_load_support_rotation() {
        let (s, m) = ss(8.0, 4);
        let model = FeModel::new(&s, &m, &[]).unwrap();
        let v = DVector::from_element(4, 1.0 / 2.0e6);
        let r = fe_solve(&model, &v, &[(4.0, 1000.0)]).unwrap();
        let want = 1000.0 * 64.0 / (16.0 * 2.0e6);
        assert!((r.rotation[0] - want).abs() < 1e-12 * want);
        assert!((r.rotation[4] + want).abs() < 1e-12 * want);
    }

    #[test]
    fn loads_between_nodes_are_exact_at_nodes() {
        let (s, m) = ss(10.0, 3);
        let model = FeModel::new(&s, &m, &[2.5]).unwrap();
        let v = DVector::from_element(3, 1.0);
        let r = fe_solve(&model, &v, &[(6.1, 1.0)]).unwrap();
        let i = model.nodes().iter().position(|&x| x == 2.5).unwrap();
        let want = rotation_uniform_ss(10.0, 2.5, 6.1, 1.0, 1.0).unwrap();
        assert!((r.rotation[i] - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn zero_springs_match_pinned() {
        let s0 = BeamSystem::new(vec![6.0], vec![Support::spring(0.0), Support::spring(0.0)], None).unwrap();
        let (s1, m) = ss(6.0, 5);
        let v = DVector::from_fn(5, |j, _| 1.0 + 0.1 * j as f64);
        let a = fe_solve(&FeModel::new(&s0, &m, &[]).unwrap(), &v, &[(2.2, 3.0)]).unwrap();
        let b = fe_solve(&FeModel::new(&s1, &m, &[]).unwrap(), &v, &[(2.2, 3.0)]).unwrap();
        for (x, y) in a.rotation.iter().zip(&b.rotation) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn clamped_ends_do_not_rotate() {
        let s = BeamSystem::new(vec![6.0], vec![Support::clamped(), Support::clamped()], None).unwrap();
        let m = Mesh::uniform(6.0, 4).unwrap();
        let r = fe_solve(&FeModel::new(&s, &m, &[]).unwrap(), &DVector::from_element(4, 1.0), &[(3.0, 1.0)]).unwrap();
        assert_eq!(r.rotation[0], 0.0);
        assert_eq!(*r.rotation.last().unwrap(), 0.0);
        // fixed-fixed midspan deflection P L³ / (192 EI)
        assert!((r.deflection[2] - 216.0 / 192.0).abs() < 1e-12);
    }

    #[test]
    fn overhang_factors_and_bad_compliance_is_rejected() {
        let s = BeamSystem::new(vec![4.0, 4.0], vec![Support::FREE, Support::PINNED, Support::PINNED], None).unwrap();
        let m = Mesh::uniform(8.0, 4).unwrap();
        let model = FeModel::new(&s, &m, &[]).unwrap();
        assert!(model.factor(&DVector::from_element(4, 1.0)).is_ok());
        assert!(matches!(model.factor(&DVector::from_element(4, -1.0)), Err(Error::Domain(_))));
        assert!(matches!(model.factor(&DVector::from_element(3, 1.0)), Err(Error::Shape(_))));
    }
}
