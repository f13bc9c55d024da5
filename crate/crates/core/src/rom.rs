//! Executable reduced dynamics and reconstruction of physical fields.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dnf::pairs::pair_index;
use crate::dnf::ReducedModel;

#[derive(Debug, Error)]
pub enum RomError {
    #[error("state has {got} entries for {expected} masters")]
    Length { expected: usize, got: usize },
    #[error("reduced model carries no mapping vectors")]
    MissingMaps,
}

/// Mass-proportional modal damping `c = ω_ref / Q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingSpec {
    pub quality: f64,
    pub omega_ref: f64,
}

impl DampingSpec {
    pub fn undamped() -> Self {
        Self { quality: f64::INFINITY, omega_ref: 0.0 }
    }

    pub fn coefficient(&self) -> f64 {
        if self.quality.is_infinite() {
            0.0
        } else {
            self.omega_ref / self.quality
        }
    }
}

/// Driven master (0-based position among the masters) and load multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub master: usize,
    pub kappa: f64,
}

/// Harmonic load `κ cos(ωt)` on one master.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub master: usize,
    pub kappa: f64,
    pub omega: f64,
}

impl ForcingSpec {
    pub fn from_drive(drive: DriveSpec, omega: f64) -> Self {
        Self { master: drive.master, kappa: drive.kappa, omega }
    }
}

/// Master displacements and their time derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct RomState {
    pub r: Vec<f64>,
    pub rdot: Vec<f64>,
}

impl RomState {
    pub fn zeros(n: usize) -> Self {
        Self { r: vec![0.0; n], rdot: vec![0.0; n] }
    }
}

/// Sparse polynomial restoring force `f(r, ṙ) = g r r + C r r r + D r ṙ ṙ`.
#[derive(Clone, Debug)]
pub struct RomOperator {
    omegas: Vec<f64>,
    quad: Vec<([usize; 3], f64)>,
    cubic_r: Vec<([usize; 4], f64)>,
    cubic_v: Vec<([usize; 4], f64)>,
}

fn entries<const D: usize>(t: &crate::dnf::Table) -> Vec<([usize; D], f64)> {
    t.nonzero()
        .into_iter()
        .map(|(i, v)| (i.try_into().expect("table order matches"), v))
        .collect()
}

impl RomOperator {
    pub fn new(model: &ReducedModel) -> Self {
        Self {
            omegas: model.frequencies.clone(),
            quad: entries(&model.g),
            cubic_r: entries(&model.cubic_displacement()),
            cubic_v: entries(&model.cubic_velocity()),
        }
    }

    pub fn dim(&self) -> usize {
        self.omegas.len()
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn has_quadratic(&self) -> bool {
        !self.quad.is_empty()
    }

    /// Nonlinear restoring force.
    pub fn force(&self, r: &[f64], v: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.dim()];
        for &([p, k, l], c) in &self.quad {
            f[p] += c * r[k] * r[l];
        }
        for &([p, k, l, m], c) in &self.cubic_r {
            f[p] += c * r[k] * r[l] * r[m];
        }
        for &([p, k, l, m], c) in &self.cubic_v {
            f[p] += c * r[k] * v[l] * v[m];
        }
        f
    }

    /// `(∂f/∂r, ∂f/∂ṙ)`.
    pub fn jacobians(&self, r: &[f64], v: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut dr = DMatrix::zeros(n, n);
        let mut dv = DMatrix::zeros(n, n);
        for &([p, k, l], c) in &self.quad {
            dr[(p, k)] += c * r[l];
            dr[(p, l)] += c * r[k];
        }
        for &([p, k, l, m], c) in &self.cubic_r {
            dr[(p, k)] += c * r[l] * r[m];
            dr[(p, l)] += c * r[k] * r[m];
            dr[(p, m)] += c * r[k] * r[l];
        }
        for &([p, k, l, m], c) in &self.cubic_v {
            dr[(p, k)] += c * v[l] * v[m];
            dv[(p, l)] += c * r[k] * v[m];
            dv[(p, m)] += c * r[k] * v[l];
        }
        (dr, dv)
    }
}

/// `(ṙ, r̈)` of the damped, forced reduced dynamics.
pub fn reduced_rhs(
    model: &ReducedModel,
    state: &RomState,
    t: f64,
    forcing: Option<&ForcingSpec>,
    damping: &DampingSpec,
) -> Result<RomState, RomError> {
    let n = model.masters();
    for len in [state.r.len(), state.rdot.len()] {
        if len != n {
            return Err(RomError::Length { expected: n, got: len });
        }
    }
    let op = RomOperator::new(model);
    let c = damping.coefficient();
    let f = op.force(&state.r, &state.rdot);
    let mut acc: Vec<f64> = (0..n)
        .map(|p| -c * state.rdot[p] - op.omegas[p] * op.omegas[p] * state.r[p] - f[p])
        .collect();
    if let Some(fs) = forcing {
        acc[fs.master] += fs.kappa * (fs.omega * t).cos();
    }
    Ok(RomState { r: state.rdot.clone(), rdot: acc })
}

/// Normal velocities `s = ṙ − C(r, ṙ)` with the cubic correction of the model.
pub fn normal_velocity(model: &ReducedModel, state: &RomState) -> Vec<f64> {
    let n = model.masters();
    let var = |i: usize| if i < n { state.r[i] } else { state.rdot[i - n] };
    let mut s = state.rdot.clone();
    for t in &model.velocity_correction {
        s[t.equation] -= t.coeff * var(t.vars[0]) * var(t.vars[1]) * var(t.vars[2]);
    }
    s
}

/// `U = Σ φ r + Σ (â r r + b̂ s s)`, `V = Σ φ s + Σ γ̂ r s` on the free DOFs.
pub fn reconstruct_physical(model: &ReducedModel, state: &RomState) -> Result<(Vec<f64>, Vec<f64>), RomError> {
    let maps = model.maps.as_ref().ok_or(RomError::MissingMaps)?;
    let n = model.masters();
    for len in [state.r.len(), state.rdot.len()] {
        if len != n {
            return Err(RomError::Length { expected: n, got: len });
        }
    }
    let s = normal_velocity(model, state);
    let r = &state.r;
    let mut u = vec![0.0; maps.dofs];
    let mut v = vec![0.0; maps.dofs];
    let add = |out: &mut [f64], c: f64, x: &[f64]| {
        if c != 0.0 {
            out.iter_mut().zip(x).for_each(|(o, xi)| *o += c * xi);
        }
    };
    for a in 0..n {
        add(&mut u, r[a], &maps.phi[a]);
        add(&mut v, s[a], &maps.phi[a]);
    }
    for k in 0..n {
        for l in k..n {
            let mult = if k == l { 1.0 } else { 2.0 };
            let idx = pair_index(k, l, n);
            add(&mut u, mult * r[k] * r[l], &maps.a_hat[idx]);
            add(&mut u, mult * s[k] * s[l], &maps.b_hat[idx]);
        }
    }
    for k in 0..n {
        for l in 0..n {
            add(&mut v, r[k] * s[l], maps.gamma_hat(k, l));
        }
    }
    Ok((u, v))
}
