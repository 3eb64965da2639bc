use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::linalg::symmetrize;

/// Eigen-decomposition of an information matrix, strongest direction first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as rows, aligned with `eigenvalues`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Count of eigenvalues above `threshold · λ_max`.
    pub rank: usize,
    pub threshold: f64,
}

impl Spectrum {
    /// Basis of the weakly informed subspace.
    pub fn weak_subspace(&self) -> &[Vec<f64>] {
        &self.eigenvectors[self.rank..]
    }
}

pub fn identifiability_spectrum(fim: &DMatrix<f64>, threshold: f64) -> Spectrum {
    let eig = SymmetricEigen::new(symmetrize(fim));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lmax = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let rank = eigenvalues.iter().filter(|&&l| l > threshold * lmax).count();
    Spectrum {
        eigenvectors: order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect(),
        eigenvalues,
        rank,
        threshold,
    }
}
