use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{log_det, spd_factor, SpdFactor};

/// Relative correlation `Γ` of the stacked (sensor-major) measurements.
#[derive(Debug, Clone, PartialEq)]
pub enum Correlation {
    Identity,
    /// AR(1) across load positions within each sensor block of length `block`.
    Ar1 { rho: f64, block: usize },
    /// Explicit symmetric positive-definite matrix.
    Dense(DMatrix<f64>),
}

/// Additive Gaussian noise `ε ~ N(0, σ² Γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    sigma2: f64,
    correlation: Correlation,
}

impl NoiseModel {
    pub fn new(sigma2: f64, correlation: Correlation) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(format!("noise variance must be positive, got {sigma2}")));
        }
        match &correlation {
            Correlation::Identity => {}
            Correlation::Ar1 { rho, block } => {
                if !(rho.abs() < 1.0) || *block == 0 {
                    return Err(Error::domain(format!(
                        "AR(1) correlation needs |rho| < 1 and a positive block length, got rho = {rho}, block = {block}"
                    )));
                }
            }
            Correlation::Dense(g) => {
                if !g.is_square() {
                    return Err(Error::shape("noise correlation matrix must be square"));
                }
                if (g - g.transpose()).amax() > 1e-12 * g.amax() {
                    return Err(Error::domain("noise correlation matrix must be symmetric"));
                }
                spd_factor(g, "noise correlation matrix")?;
            }
        }
        Ok(NoiseModel { sigma2, correlation })
    }

    /// White noise with standard deviation `sigma`.
    pub fn white(sigma: f64) -> Result<Self> {
        NoiseModel::new(sigma * sigma, Correlation::Identity)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn correlation(&self) -> &Correlation {
        &self.correlation
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        NoiseModel::new(sigma2, self.correlation.clone())
    }

    /// Dense `Γ` for `m` stacked measurements.
    pub fn gamma(&self, m: usize) -> Result<DMatrix<f64>> {
        match &self.correlation {
            Correlation::Identity => Ok(DMatrix::identity(m, m)),
            Correlation::Ar1 { rho, block } => {
                check_blocks(m, *block)?;
                Ok(DMatrix::from_fn(m, m, |i, j| {
                    if i / block == j / block {
                        rho.powi((i as i64 - j as i64).unsigned_abs() as i32)
                    } else {
                        0.0
                    }
                }))
            }
            Correlation::Dense(g) => {
                if g.nrows() != m {
                    return Err(Error::shape(format!("Γ is {}x{0}, data have {m} rows", g.nrows())));
                }
                Ok(g.clone())
            }
        }
    }

    /// Whitening operator `L⁻¹` with `Γ = L Lᵀ` for `m` measurements.
    pub fn whitener(&self, m: usize) -> Result<Whitener> {
        let kind = match &self.correlation {
            Correlation::Identity => WhitenKind::Identity,
            Correlation::Ar1 { rho, block } => {
                check_blocks(m, *block)?;
                WhitenKind::Ar1 { rho: *rho, block: *block }
            }
            Correlation::Dense(g) => {
                if g.nrows() != m {
                    return Err(Error::shape(format!("Γ is {}x{0}, data have {m} rows", g.nrows())));
                }
                WhitenKind::Dense(Box::new(spd_factor(g, "noise correlation matrix")?))
            }
        };
        Ok(Whitener { m, kind })
    }

    /// True when `Γ` has no coupling between sensor blocks of length `block`.
    pub fn is_block_diagonal(&self, m: usize, block: usize) -> bool {
        match &self.correlation {
            Correlation::Identity => true,
            Correlation::Ar1 { block: b, .. } => block % b == 0,
            Correlation::Dense(g) => {
                if block == 0 || g.nrows() != m || m % block != 0 {
                    return false;
                }
                (0..m).all(|i| (0..m).all(|j| i / block == j / block || g[(i, j)] == 0.0))
            }
        }
    }

    /// One draw of `ε ~ N(0, σ² Γ)`.
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<DVector<f64>> {
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = self.sigma2.sqrt();
        Ok(self.whitener(m)?.colour(&z) * sigma)
    }
}

fn check_blocks(m: usize, block: usize) -> Result<()> {
    if m % block != 0 {
        return Err(Error::shape(format!(
            "{m} measurements do not split into AR(1) blocks of length {block}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum WhitenKind {
    Identity,
    Ar1 { rho: f64, block: usize },
    Dense(Box<SpdFactor>),
}

/// Applies `L⁻¹` (and `L`) for the Cholesky factor of `Γ`.
#[derive(Debug, Clone)]
pub struct Whitener {
    m: usize,
    kind: WhitenKind,
}

impl Whitener {
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// `log det Γ`.
    pub fn log_det(&self) -> f64 {
        match &self.kind {
            WhitenKind::Identity => 0.0,
            WhitenKind::Ar1 { rho, block } => {
                (self.m / block * (block - 1)) as f64 * (1.0 - rho * rho).ln()
            }
            WhitenKind::Dense(c) => log_det(c),
        }
    }

    /// `L⁻¹ X` column by column.
    pub fn whiten(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.m, "whitener dimension");
        match &self.kind {
            WhitenKind::Identity => x.clone(),
            WhitenKind::Ar1 { rho, block } => {
                let s = (1.0 - rho * rho).sqrt();
                let mut out = x.clone();
                for i in 0..self.m {
                    if i % block != 0 {
                        for c in 0..x.ncols() {
                            out[(i, c)] = (x[(i, c)] - rho * x[(i - 1, c)]) / s;
                        }
                    }
                }
                out
            }
            WhitenKind::Dense(c) => c
                .l()
                .solve_lower_triangular(x)
                .expect("Cholesky factor has a positive diagonal"),
        }
    }

    pub fn whiten_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        self.whiten(&m).column(0).into_owned()
    }

    /// `L z`, mapping white noise to correlated noise.
    pub fn colour(&self, z: &DVector<f64>) -> DVector<f64> {
        assert_eq!(z.len(), self.m, "whitener dimension");
        match &self.kind {
            WhitenKind::Identity => z.clone(),
            WhitenKind::Ar1 { rho, block } => {
                let s = (1.0 - rho * rho).sqrt();
                let mut out = z.clone();
                for i in 0..self.m {
                    if i % block != 0 {
                        out[i] = rho * out[i - 1] + s * z[i];
                    }
                }
                out
            }
            WhitenKind::Dense(c) => c.l() * z,
        }
    }
}
