//! Three-dimensional Saint-Venant-Kirchhoff finite elements.
//!
//! Meshes come from [`templates::generate_mesh`] or [`msh::parse_msh`]. An
//! [`assembly::FeModel`] removes clamped DOFs, assembles `M` and `K` and evaluates the exact
//! quadratic and cubic internal-force operators element by element.

pub mod assembly;
pub mod material;
pub mod mesh;
pub mod msh;
pub mod quadrature;
pub mod step;
pub mod templates;

use thiserror::Error;

pub use assembly::{FeModel, FeOperators, StrainKernels};
pub use material::Material;
pub use mesh::Mesh;
pub use msh::{parse_msh, parse_msh_str, write_msh, write_msh_string};
pub use quadrature::{ElementKind, RuleChoice};
pub use step::{step_extract, StepVectors};
pub use templates::{generate_mesh, ArchParams, BeamLayout, BeamParams, BlockParams, Template};

#[derive(Debug, Error)]
pub enum FeError {
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("non-positive Jacobian {det:e} in element {element}")]
    NegativeJacobian { element: usize, det: f64 },
    #[error("invalid material {0}")]
    Material(String),
    #[error("node set {0:?} not found")]
    MissingSet(String),
    #[error("vector length {got} does not match the {expected} free DOFs")]
    Length { expected: usize, got: usize },
    #[error("unsupported element type {0}")]
    UnsupportedElement(u32),
    #[error("{0}")]
    Msh(String),
    #[error("{0}")]
    Io(String),
    #[error("force extraction: {0}")]
    Step(String),
    #[error(transparent)]
    LinAlg(#[from] dnf_core::LinAlgError),
    #[error(transparent)]
    Model(#[from] dnf_core::ModelError),
}
