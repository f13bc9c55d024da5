//! Direct normal form reduction of geometrically nonlinear mechanical systems.
//!
//! A [`model::MechanicalSystem`] exposes its quadratic and cubic internal forces as operator
//! evaluations. [`spectral`] computes the master modes, [`dnf`] solves the second-order
//! homological equations on the physical DOFs and [`rom`] turns the result into real
//! oscillator equations together with the maps back to displacements and velocities.

pub mod discrete;
pub mod dnf;
pub mod model;
pub mod rom;
pub mod sparse;
pub mod spectral;

pub use discrete::{build_discrete_system, DiscreteOperators, DiscreteSystemDoc};
pub use dnf::{build_reduced_model, run_dnf, DnfError, ReducedModel};
pub use model::{DofVector, LinearOnly, MechanicalSystem, ModelError, NonlinearOperators};
pub use rom::{reconstruct_physical, reduced_rhs, DampingSpec, DriveSpec, ForcingSpec, RomOperator, RomState};
pub use sparse::{LinAlgError, LinearSolver, SparseSymmetricMatrix};
pub use spectral::{solve_modes, ComplexSpectrum, ModeSelector, ModeSet};
