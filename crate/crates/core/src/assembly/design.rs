use nalgebra::DMatrix;
use rayon::prelude::*;

use super::integrals::element_integral_unchecked;
use super::Mesh;
use crate::beam::{AxleTrain, BeamSystem, SensorStation};
use crate::error::{Error, Result};

/// Stacked sensitivity of rotations to element compliance.
///
/// Rows are ordered sensor-major, load-minor (`row = i * K + k`); columns are
/// mesh elements. For the element-average kernel, divide column `j` by the
/// element width.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub n_sensors: usize,
    pub n_loads: usize,
}

impl DesignMatrix {
    /// Rows belonging to sensor `i`.
    pub fn sensor_block(&self, i: usize) -> DMatrix<f64> {
        self.matrix.rows(i * self.n_loads, self.n_loads).into_owned()
    }
}

/// Design matrix of a simply supported span for stations at `positions`
/// (support limits `0` and `L` allowed) and an axle train sweep.
pub fn design_matrix(span: f64, positions: &[f64], train: &AxleTrain, mesh: &Mesh) -> Result<DesignMatrix> {
    if (mesh.length() - span).abs() > 1e-12 * span {
        return Err(Error::shape(format!(
            "mesh covers {} m but the span is {span} m",
            mesh.length()
        )));
    }
    if let Some(r) = positions.iter().find(|r| !(0.0..=span).contains(*r)) {
        return Err(Error::domain(format!("station at {r} m lies outside [0, {span}]")));
    }
    let k = train.n_positions();
    let n = mesh.n_elements();
    let elements: Vec<(f64, f64)> = (0..n).map(|j| mesh.element(j)).collect();
    let rows: Vec<Vec<f64>> = (0..positions.len() * k)
        .into_par_iter()
        .map(|row| {
            let r = positions[row / k];
            let loads = train.point_loads(row % k, span);
            elements
                .iter()
                .map(|&(a, b)| {
                    loads
                        .iter()
                        .map(|&(z, p)| element_integral_unchecked(span, r, z, p, a, b))
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut matrix = DMatrix::zeros(rows.len(), n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            matrix[(i, j)] = *v;
        }
    }
    Ok(DesignMatrix {
        matrix,
        n_sensors: positions.len(),
        n_loads: k,
    })
}

/// Analytic design matrix for a simply supported single-span system.
///
/// Statically indeterminate systems must go through the finite-element
/// Jacobian instead.
pub fn build_design_matrix(
    system: &BeamSystem,
    sensors: &[SensorStation],
    train: &AxleTrain,
    mesh: &Mesh,
) -> Result<DesignMatrix> {
    if !system.is_simply_supported_span() {
        return Err(Error::model(
            "analytic design matrix requires a simply supported single span; use the finite-element Jacobian",
        ));
    }
    let positions: Vec<f64> = sensors.iter().map(|s| s.position).collect();
    design_matrix(system.total_length(), &positions, train, mesh)
}
