use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Interior finite-difference operator of order 0, 1 or 2, shape `(N - order) x N`.
///
/// No boundary rows are added, so constants (order 1) and affine sequences
/// (order 2) are left unpenalized. Order 0 is the identity (ridge penalty).
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOperator {
    pub order: usize,
    pub matrix: DMatrix<f64>,
}

impl DifferenceOperator {
    pub fn rank(&self) -> usize {
        self.matrix.nrows()
    }

    /// `DᵀD`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.matrix.transpose() * &self.matrix
    }
}

pub fn difference_operator(order: usize, n: usize) -> Result<DifferenceOperator> {
    let stencil: &[f64] = match order {
        0 => &[1.0],
        1 => &[-1.0, 1.0],
        2 => &[1.0, -2.0, 1.0],
        _ => return Err(Error::domain(format!("difference order must be 0, 1 or 2, got {order}"))),
    };
    if n <= order {
        return Err(Error::domain(format!(
            "difference operator of order {order} needs more than {order} element(s), got {n}"
        )));
    }
    let rows = n - order;
    let mut matrix = DMatrix::zeros(rows, n);
    for i in 0..rows {
        for (k, c) in stencil.iter().enumerate() {
            matrix[(i, i + k)] = *c;
        }
    }
    Ok(DifferenceOperator { order, matrix })
}
