use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::{difference_operator, DifferenceOperator};
use crate::error::{Error, Result};

/// What the inversion parameters represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    /// Element compliance `v = 1/EI`.
    LinearCompliance,
    /// `η = log v`, so `EI = exp(-η)`.
    LogLatent,
}

/// Gaussian Markov random field prior `N(center, (τ DᵀD)⁺)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub parameterization: Parameterization,
    pub order: usize,
    pub tau: f64,
    pub center: DVector<f64>,
}

impl PriorSpec {
    pub fn new(parameterization: Parameterization, order: usize, tau: f64, center: DVector<f64>) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("prior precision must be positive, got {tau}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("prior center must be finite"));
        }
        difference_operator(order, center.len())?;
        Ok(PriorSpec {
            parameterization,
            order,
            tau,
            center,
        })
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn difference(&self) -> DifferenceOperator {
        difference_operator(self.order, self.n()).expect("validated at construction")
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        PriorSpec::new(self.parameterization, self.order, tau, self.center.clone())
    }
}
