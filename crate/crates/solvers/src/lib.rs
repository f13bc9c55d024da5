//! Periodic response of small polynomial oscillator systems and implicit time integration.
//!
//! [`hb`] balances a truncated Fourier series, [`continuation`] follows it in the forcing
//! frequency through folds, [`floquet`] classifies stability along the way and [`time`]
//! integrates either a small [`ode::Ode`] or a sparse mechanical system in time.

pub mod continuation;
pub mod floquet;
pub mod hb;
pub mod ode;
pub mod time;

use thiserror::Error;

pub use continuation::{hb_continue, Branch, BranchPoint, ContinuationConfig};
pub use floquet::{floquet_stability, Bifurcation, Floquet};
pub use hb::{HBConfig, HarmonicBalance, Orbit};
pub use ode::{Ode, PolynomialForce};
pub use time::{
    integrate_to_steady, steady_amplitude, DrivenOde, DrivenSystem, Dynamics, GeneralizedAlpha, IntegratorConfig,
    SteadyState, Trajectory,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    LinAlg(#[from] dnf_core::LinAlgError),
    #[error(transparent)]
    Model(#[from] dnf_core::ModelError),
}
