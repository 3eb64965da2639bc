use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spectrum::{identifiability_spectrum, Spectrum};
use crate::assembly::{design_matrix, Mesh};
use crate::beam::AxleTrain;
use crate::error::{Error, Result};
use crate::inference::NoiseModel;
use crate::linalg::symmetrize;

/// `𝓘 = (1/σ²) JᵀΓ⁻¹J` in the compliance parameterization.
pub fn fisher_information(j: &DMatrix<f64>, noise: &NoiseModel) -> Result<DMatrix<f64>> {
    let jw = noise.whitener(j.nrows())?.whiten(j);
    Ok(symmetrize(&(jw.transpose() * &jw)) / noise.sigma2())
}

/// Per-sensor information `𝓘⁽ⁱ⁾` for sensor-major rows with `n_sensors`
/// equal blocks; the blocks sum to the total information.
pub fn per_sensor_fisher(j: &DMatrix<f64>, noise: &NoiseModel, n_sensors: usize) -> Result<Vec<DMatrix<f64>>> {
    if n_sensors == 0 || j.nrows() % n_sensors != 0 {
        return Err(Error::shape(format!("{} rows do not split into {n_sensors} sensor blocks", j.nrows())));
    }
    let k = j.nrows() / n_sensors;
    if !noise.is_block_diagonal(j.nrows(), k) {
        return Err(Error::model(
            "noise correlation couples sensors; per-sensor information is undefined, use the total form",
        ));
    }
    // a block-diagonal Γ has a block-diagonal Cholesky factor
    let jw = noise.whitener(j.nrows())?.whiten(j);
    Ok((0..n_sensors)
        .map(|i| {
            let b = jw.rows(i * k, k);
            symmetrize(&(b.transpose() * b)) / noise.sigma2()
        })
        .collect())
}

/// `𝓘_EI = W⁻¹ 𝓘_v W⁻¹` with `W = diag(EI²)`.
pub fn fisher_in_rigidity(i_v: &DMatrix<f64>, ei: &[f64]) -> Result<DMatrix<f64>> {
    if i_v.nrows() != ei.len() || !i_v.is_square() {
        return Err(Error::shape(format!("information is {}x{}, EI has {}", i_v.nrows(), i_v.ncols(), ei.len())));
    }
    if let Some((j, e)) = ei.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(Error::domain(format!("element {j}: EI must be positive, got {e}")));
    }
    Ok(DMatrix::from_fn(i_v.nrows(), i_v.ncols(), |a, b| {
        i_v[(a, b)] / (ei[a] * ei[a] * ei[b] * ei[b])
    }))
}

/// Per-element diagonal `Σ_k J²_{k,j} / (σ² EI_j⁴)` of one sensor's rows
/// (white noise).
pub fn informativeness_from_rows(rows: &DMatrix<f64>, ei: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if rows.nrows() == 0 {
        return Err(Error::domain("informativeness needs at least one load position"));
    }
    if rows.ncols() != ei.len() {
        return Err(Error::shape("Jacobian columns and EI values differ"));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain("noise level must be positive"));
    }
    Ok((0..rows.ncols())
        .map(|j| rows.column(j).norm_squared() / (sigma * sigma * ei[j].powi(4)))
        .collect())
}

/// Informativeness curve of a single station on a simply supported span.
pub fn informativeness_curve(
    span: f64,
    position: f64,
    mesh: &Mesh,
    train: &AxleTrain,
    ei: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    if train.n_positions() == 0 {
        return Err(Error::domain("informativeness needs a non-empty sweep"));
    }
    let a = design_matrix(span, &[position], train, mesh)?;
    informativeness_from_rows(&a.matrix, ei, sigma)
}

/// Fisher diagnostics at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub total: DMatrixData,
    pub per_sensor: Vec<DMatrixData>,
    pub rigidity: DMatrixData,
    /// Per-sensor informativeness curves (EI parameterization), one value per element.
    pub curves: Vec<Vec<f64>>,
    pub x_mid: Vec<f64>,
    pub spectrum: Spectrum,
    /// `W = diag(EI²)`.
    pub w_diag: Vec<f64>,
}

/// Row-major dense matrix for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DMatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for DMatrixData {
    fn from(m: &DMatrix<f64>) -> Self {
        DMatrixData {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
        }
    }
}

impl DMatrixData {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

pub fn fisher_report(
    j: &DMatrix<f64>,
    noise: &NoiseModel,
    n_sensors: usize,
    ei: &[f64],
    mesh: &Mesh,
) -> Result<FisherReport> {
    let total = fisher_information(j, noise)?;
    let blocks = per_sensor_fisher(j, noise, n_sensors)?;
    let rigidity = fisher_in_rigidity(&total, ei)?;
    let curves = blocks
        .iter()
        .map(|b| (0..ei.len()).map(|c| b[(c, c)] / ei[c].powi(4)).collect())
        .collect();
    Ok(FisherReport {
        spectrum: identifiability_spectrum(&total, 1e-10),
        total: (&total).into(),
        per_sensor: blocks.iter().map(Into::into).collect(),
        rigidity: (&rigidity).into(),
        curves,
        x_mid: mesh.midpoints(),
        w_diag: ei.iter().map(|e| e * e).collect(),
    })
}

/// Rigidity-parameterization Jacobian `∂θ/∂EI = −J_v / EI²` (column scaling).
pub fn rigidity_jacobian(j_v: &DMatrix<f64>, ei: &DVector<f64>) -> DMatrix<f64> {
    let mut out = j_v.clone();
    for (c, e) in ei.iter().enumerate() {
        out.column_mut(c).scale_mut(-1.0 / (e * e));
    }
    out
}
