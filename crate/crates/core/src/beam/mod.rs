//! Beam mechanics: structural description, the rotation kernel of a simply
//! supported span and a finite-element solver for general support conditions.

mod fe;
mod forward;
pub mod kernel;
mod system;

pub use fe::{fe_solve, FeFactor, FeModel, FeResponse};
pub use forward::{
    compliance_jacobian, fe_rotation_matrix, AdjointJacobian, AnalyticSpan, CentralDifference, FeForward,
    ForwardModel, JacobianStrategy,
};
pub use system::*;
