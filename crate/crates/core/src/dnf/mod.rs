//! Second-order direct normal form: resonance detection, homological solves and reduced models.

pub mod cubic;
pub mod pairs;
pub mod poly;
pub mod realform;
pub mod reduced;
pub mod resonance;
pub mod table;

use thiserror::Error;

use crate::model::ModelError;
use crate::sparse::LinAlgError;
use crate::spectral::SpectralError;

pub use cubic::{compute_cubic_coefficients, CubicCoefficients, Projections};
pub use pairs::{realize_quadratic_maps, solve_real_pair, velocity_map, PairKind, PairSolution, QuadraticMapSet, RealMaps};
pub use realform::CorrectionTerm;
pub use reduced::{build_reduced_model, run_dnf, Diagnostics, DnfOutput, MappingVectors, ReducedModel};
pub use resonance::{detect_resonances, ResonanceEntry, ResonanceTable, DEFAULT_EPS_REL};
pub use table::Table;

#[derive(Debug, Error)]
pub enum DnfError {
    #[error("resonance tolerance {0} outside (0, 0.2]")]
    InvalidTolerance(f64),
    #[error("pair operator singular at shift {sigma} (closest master frequency {omega_r}): {detail}")]
    UndetectedResonance { sigma: f64, omega_r: f64, detail: String },
    #[error("invalid master selection: {0}")]
    InvalidMasters(String),
    #[error("inconsistent normal form: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}
