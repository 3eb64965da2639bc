//! Discretization of the rotation integral: meshes, exact element integrals,
//! the stacked design matrix and roughness operators.

mod design;
mod difference;
mod integrals;
mod mesh;

pub use design::{build_design_matrix, design_matrix, DesignMatrix};
pub use difference::{difference_operator, DifferenceOperator};
pub use integrals::element_integral;
pub use mesh::{build_mesh, Mesh, MeshSpec};
