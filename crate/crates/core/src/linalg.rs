//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a Cholesky factor is treated as singular.
const PIVOT_RTOL: f64 = 1e-13;

/// Relative eigenvalue threshold used when naming null directions.
const NULL_RTOL: f64 = 1e-10;

pub type SpdFactor = Cholesky<f64, Dyn>;

/// Average a square matrix with its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// On failure the eigen-decomposition is used to report the (near) null
/// directions in an [`Error::Identifiability`].
pub fn spd_factor(m: &DMatrix<f64>, what: &str) -> Result<SpdFactor> {
    if !m.is_square() {
        return Err(Error::shape(format!("{what}: matrix is {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric(format!("{what}: non-finite entries")));
    }
    let sym = symmetrize(m);
    let max_diag = sym.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if let Some(chol) = Cholesky::new(sym.clone()) {
        let l = chol.l_dirty();
        let ok = (0..l.nrows()).all(|i| {
            let p = l[(i, i)] * l[(i, i)];
            p > PIVOT_RTOL * max_diag
        });
        if ok {
            return Ok(chol);
        }
    }
    Err(identifiability(&sym, what))
}

fn identifiability(sym: &DMatrix<f64>, what: &str) -> Error {
    let eig = SymmetricEigen::new(sym.clone());
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let null_directions: Vec<Vec<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &ev)| ev <= NULL_RTOL * lmax.max(f64::MIN_POSITIVE))
        .map(|(i, _)| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    Error::Identifiability {
        message: format!(
            "{what} is not positive definite ({} weakly/un-determined direction(s))",
            null_directions.len().max(1)
        ),
        null_directions,
    }
}

/// log-determinant from a Cholesky factor.
pub fn log_det(chol: &SpdFactor) -> f64 {
    chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0
}

/// Euclidean norm squared.
pub fn norm2(v: &DVector<f64>) -> f64 {
    v.dot(v)
}

/// Stack rows of `v` into a column vector.
pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Maximum absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Relative difference `|a-b| / max(|a|,|b|)` for vectors, using the 2-norm.
pub fn rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// `n` points evenly spaced in log10 between `lo` and `hi` (inclusive).
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// `n` points evenly spaced between `lo` and `hi` (inclusive).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
