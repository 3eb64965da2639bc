//! Identification of element-wise flexural rigidity from rotation influence
//! lines measured under a moving vehicle.

pub mod assembly;
pub mod beam;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod registry;
pub mod synthetic;

pub use error::{Error, Result};
