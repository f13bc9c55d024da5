//! Floquet multipliers from the monodromy matrix of the variational equation.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::hb::Orbit;
use crate::ode::Ode;
use crate::SolverError;

/// Multipliers with modulus above `1 + STABILITY_BAND` count as unstable.
pub const STABILITY_BAND: f64 = 1e-6;

/// Bifurcation detected between two consecutive branch points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bifurcation {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Saddle-node: a real multiplier through `+1`.
    SN,
    /// Neimark-Sacker: a complex pair through the unit circle.
    NS,
    /// Period doubling: a real multiplier through `−1`.
    PD,
}

impl fmt::Display for Bifurcation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::SN => "SN",
            Self::NS => "NS",
            Self::PD => "PD",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Floquet {
    pub multipliers: Vec<Complex<f64>>,
    pub stable: bool,
}

impl Floquet {
    pub fn from_multipliers(mut multipliers: Vec<Complex<f64>>) -> Self {
        multipliers.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
        let stable = multipliers.iter().all(|m| m.norm() <= 1.0 + STABILITY_BAND);
        Self { multipliers, stable }
    }

    pub fn unstable_count(&self) -> usize {
        self.multipliers.iter().filter(|m| m.norm() > 1.0 + STABILITY_BAND).count()
    }

    pub fn max_modulus(&self) -> f64 {
        self.multipliers.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }
}

/// `dy/dt = A(t) y` with `y = (δq, δq̇)` along `orbit`.
fn variational(ode: &Ode, minv: &DMatrix<f64>, orbit: &Orbit, t: f64) -> DMatrix<f64> {
    let n = ode.dim();
    let (q, v) = orbit.state_at(t);
    let (dq, dv) = ode.restoring_jacobians(&q, &v);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-(minv * dq)));
    a.view_mut((n, n), (n, n)).copy_from(&(-(minv * dv)));
    a
}

/// Monodromy matrix over one forcing period, integrated with classical Runge-Kutta.
pub fn monodromy(ode: &Ode, orbit: &Orbit) -> Result<DMatrix<f64>, SolverError> {
    let n = ode.dim();
    let minv = ode
        .mass
        .clone()
        .try_inverse()
        .ok_or_else(|| SolverError::Singular("mass matrix".into()))?;
    let period = 2.0 * PI / orbit.omega;
    let fastest = ode.max_frequency().max(3.0 * orbit.omega);
    let steps = ((128.0 * fastest / orbit.omega).ceil() as usize).max(256);
    let h = period / steps as f64;
    let mut phi = DMatrix::<f64>::identity(2 * n, 2 * n);
    for s in 0..steps {
        let t = s as f64 * h;
        let a0 = variational(ode, &minv, orbit, t);
        let am = variational(ode, &minv, orbit, t + 0.5 * h);
        let a1 = variational(ode, &minv, orbit, t + h);
        let k1 = &a0 * &phi;
        let k2 = &am * (&phi + &k1 * (0.5 * h));
        let k3 = &am * (&phi + &k2 * (0.5 * h));
        let k4 = &a1 * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !phi.iter().all(|v| v.is_finite()) {
            return Err(SolverError::Diverged(format!("monodromy integration at t = {t}")));
        }
    }
    Ok(phi)
}

pub fn floquet_stability(ode: &Ode, orbit: &Orbit) -> Result<Floquet, SolverError> {
    let phi = monodromy(ode, orbit)?;
    Ok(Floquet::from_multipliers(phi.complex_eigenvalues().iter().copied().collect()))
}

/// Marker for the segment ending at `cur`; `fold` flags a turning point in frequency.
pub fn classify(prev: &Floquet, cur: &Floquet, fold: bool) -> Bifurcation {
    if fold {
        return Bifurcation::SN;
    }
    let (before, after) = (prev.unstable_count(), cur.unstable_count());
    if before == after {
        return Bifurcation::None;
    }
    let outside = if after > before { cur } else { prev };
    // The multiplier that crossed is the outside one closest to the circle.
    let crossing = outside
        .multipliers
        .iter()
        .filter(|m| m.norm() > 1.0 + STABILITY_BAND)
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .copied()
        .unwrap_or_default();
    let complex = crossing.im.abs() > 1e-6 * crossing.norm().max(1.0);
    if complex {
        Bifurcation::NS
    } else if crossing.re < 0.0 {
        Bifurcation::PD
    } else {
        Bifurcation::SN
    }
}
