//! Generalized-α time integration of `M q̈ + f(q, q̇) = F(t)` and steady-state measurement.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use dnf_core::sparse::{norm, LinearSolver};
use dnf_core::{MechanicalSystem, SparseSymmetricMatrix};

use crate::ode::Ode;
use crate::SolverError;

/// A factorized effective matrix.
pub trait StepSolver {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError>;
}

/// Second-order system seen by the integrator.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn mass_apply(&self, a: &[f64]) -> Vec<f64>;
    /// Restoring force including damping.
    fn restoring(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>, SolverError>;
    fn load(&self, t: f64) -> Vec<f64>;
    /// Factorizes `cm M + cv ∂f/∂q̇ + cq ∂f/∂q` at `(q, v)`.
    fn factor(&self, q: &[f64], v: &[f64], cm: f64, cv: f64, cq: f64) -> Result<Box<dyn StepSolver>, SolverError>;
}

struct DenseLu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>);

impl StepSolver for DenseLu {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.0
            .solve(&DVector::from_column_slice(rhs))
            .map(|x| x.as_slice().to_vec())
            .ok_or_else(|| SolverError::Singular("effective matrix".into()))
    }
}

/// An [`Ode`] driven at a fixed frequency.
#[derive(Clone, Debug)]
pub struct DrivenOde<'a> {
    pub ode: &'a Ode,
    pub omega: f64,
}

impl Dynamics for DrivenOde<'_> {
    fn dim(&self) -> usize {
        self.ode.dim()
    }

    fn mass_apply(&self, a: &[f64]) -> Vec<f64> {
        (&self.ode.mass * DVector::from_column_slice(a)).as_slice().to_vec()
    }

    fn restoring(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>, SolverError> {
        Ok(self.ode.restoring(q, v))
    }

    fn load(&self, t: f64) -> Vec<f64> {
        let c = (self.omega * t).cos();
        self.ode.load.iter().map(|f| f * c).collect()
    }

    fn factor(&self, q: &[f64], v: &[f64], cm: f64, cv: f64, cq: f64) -> Result<Box<dyn StepSolver>, SolverError> {
        let (dq, dv) = self.ode.restoring_jacobians(q, v);
        let a: DMatrix<f64> = &self.ode.mass * cm + dv * cv + dq * cq;
        Ok(Box::new(DenseLu(a.lu())))
    }
}

struct Sparse(LinearSolver);

impl StepSolver for Sparse {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        Ok(self.0.solve(rhs)?)
    }
}

/// Mechanical system with damping `c M` and load `load · cos ωt`.
#[derive(Clone, Debug)]
pub struct DrivenSystem<'a> {
    pub system: &'a MechanicalSystem,
    pub damping: f64,
    pub load: Vec<f64>,
    pub omega: f64,
}

/// Largest system whose tangent may be probed column by column.
const PROBE_LIMIT: usize = 256;

impl Dynamics for DrivenSystem<'_> {
    fn dim(&self) -> usize {
        self.system.dof_count()
    }

    fn mass_apply(&self, a: &[f64]) -> Vec<f64> {
        self.system.mass().mul_vec(a)
    }

    fn restoring(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>, SolverError> {
        let mut f = self.system.full_internal_force(q)?;
        let mv = self.system.mass().mul_vec(v);
        f.iter_mut().zip(mv).for_each(|(fi, m)| *fi += self.damping * m);
        Ok(f)
    }

    fn load(&self, t: f64) -> Vec<f64> {
        let c = (self.omega * t).cos();
        self.load.iter().map(|f| f * c).collect()
    }

    fn factor(&self, q: &[f64], _v: &[f64], cm: f64, cv: f64, cq: f64) -> Result<Box<dyn StepSolver>, SolverError> {
        let kt = self.system.tangent_matrix(q, PROBE_LIMIT)?;
        let a = SparseSymmetricMatrix::combine(cm + cv * self.damping, self.system.mass(), cq, &kt);
        let solver = match LinearSolver::cholesky(&a) {
            Ok(s) => s,
            Err(_) => LinearSolver::symmetric_indefinite(&a)?,
        };
        Ok(Box::new(Sparse(solver)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    /// Spectral radius at infinite frequency.
    pub rho_inf: f64,
    /// Newton tolerance relative to the force scale of the step.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Norm beyond which the run is declared divergent.
    pub blow_up: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rho_inf: 0.9, tolerance: 1e-10, max_iterations: 25, blow_up: 1e12 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

/// Recorded samples of selected coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Observed displacements per sample.
    pub q: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// Relative Newton increment at which a step is accepted even if the residual sits on its rounding floor.
const INCREMENT_FLOOR: f64 = 1e-12;

/// Chung-Hulbert generalized-α scheme with a modified Newton corrector.
pub struct GeneralizedAlpha<'a, D: Dynamics + ?Sized> {
    dynamics: &'a D,
    dt: f64,
    alpha_m: f64,
    alpha_f: f64,
    beta: f64,
    gamma: f64,
    config: IntegratorConfig,
    solver: Option<Box<dyn StepSolver>>,
    pub state: State,
}

impl<'a, D: Dynamics + ?Sized> GeneralizedAlpha<'a, D> {
    /// Starts from `(q0, v0)` at `t0` with a consistent acceleration.
    pub fn new(
        dynamics: &'a D,
        dt: f64,
        config: IntegratorConfig,
        t0: f64,
        q0: Vec<f64>,
        v0: Vec<f64>,
    ) -> Result<Self, SolverError> {
        let n = dynamics.dim();
        if q0.len() != n || v0.len() != n {
            return Err(SolverError::Config(format!("initial state lengths {} and {} for {n} DOFs", q0.len(), v0.len())));
        }
        if !(dt > 0.0) || !(0.0..=1.0).contains(&config.rho_inf) {
            return Err(SolverError::Config(format!("step {dt} or spectral radius {} out of range", config.rho_inf)));
        }
        let rho = config.rho_inf;
        let alpha_m = (2.0 * rho - 1.0) / (rho + 1.0);
        let alpha_f = rho / (rho + 1.0);
        let gamma = 0.5 - alpha_m + alpha_f;
        let beta = 0.25 * (1.0 - alpha_m + alpha_f).powi(2);
        let mut rhs = dynamics.load(t0);
        let f = dynamics.restoring(&q0, &v0)?;
        rhs.iter_mut().zip(f).for_each(|(r, fi)| *r -= fi);
        let a0 = dynamics.factor(&q0, &v0, 1.0, 0.0, 0.0)?.solve(&rhs)?;
        Ok(Self {
            dynamics,
            dt,
            alpha_m,
            alpha_f,
            beta,
            gamma,
            config,
            solver: None,
            state: State { t: t0, q: q0, v: v0, a: a0 },
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<(), SolverError> {
        let (h, am, af, b, g) = (self.dt, self.alpha_m, self.alpha_f, self.beta, self.gamma);
        let n = self.dynamics.dim();
        let s = &self.state;
        let t_new = s.t + h;
        let t_mid = t_new - af * h;
        let load = self.dynamics.load(t_mid);
        // Kinematics of the new state as functions of q_{n+1}.
        let predict_a = |q1: &[f64]| -> Vec<f64> {
            (0..n).map(|i| (q1[i] - s.q[i] - h * s.v[i]) / (b * h * h) - (0.5 - b) / b * s.a[i]).collect()
        };
        let mut q1: Vec<f64> = (0..n).map(|i| s.q[i] + h * s.v[i] + 0.5 * h * h * s.a[i]).collect();
        let cm = (1.0 - am) / (b * h * h);
        let cv = (1.0 - af) * g / (b * h);
        let cq = 1.0 - af;
        let mut fresh = false;
        let mut last_norm = f64::INFINITY;
        for it in 0..self.config.max_iterations {
            let a1 = predict_a(&q1);
            let v1: Vec<f64> = (0..n).map(|i| s.v[i] + h * ((1.0 - g) * s.a[i] + g * a1[i])).collect();
            let qm: Vec<f64> = (0..n).map(|i| (1.0 - af) * q1[i] + af * s.q[i]).collect();
            let vm: Vec<f64> = (0..n).map(|i| (1.0 - af) * v1[i] + af * s.v[i]).collect();
            let amix: Vec<f64> = (0..n).map(|i| (1.0 - am) * a1[i] + am * s.a[i]).collect();
            let inertia = self.dynamics.mass_apply(&amix);
            let f = self.dynamics.restoring(&qm, &vm)?;
            let r: Vec<f64> = (0..n).map(|i| inertia[i] + f[i] - load[i]).collect();
            let rn = norm(&r);
            let scale = norm(&load).max(norm(&f)).max(norm(&inertia)).max(f64::MIN_POSITIVE);
            if !rn.is_finite() {
                return Err(SolverError::Diverged(format!("non-finite residual at t = {t_new}")));
            }
            if rn <= self.config.tolerance * scale {
                let q_norm = norm(&q1);
                if q_norm > self.config.blow_up {
                    return Err(SolverError::Diverged(format!("state norm {q_norm:e} at t = {t_new}")));
                }
                self.state = State { t: t_new, q: q1, v: v1, a: a1 };
                return Ok(());
            }
            // Refactor when the reused matrix stalls.
            if self.solver.is_none() || (it > 0 && rn > 0.25 * last_norm && !fresh) {
                self.solver = Some(self.dynamics.factor(&qm, &vm, cm, cv, cq)?);
                fresh = true;
            } else {
                fresh = false;
            }
            last_norm = rn;
            let dq = self.solver.as_ref().expect("factorized above").solve(&r)?;
            let scale_q = norm(&q1).max(norm(&s.q)).max(h * norm(&s.v)).max(f64::MIN_POSITIVE);
            q1.iter_mut().zip(&dq).for_each(|(q, d)| *q -= d);
            if norm(&dq) <= INCREMENT_FLOOR * scale_q && it > 0 {
                let a1 = predict_a(&q1);
                let v1: Vec<f64> = (0..n).map(|i| s.v[i] + h * ((1.0 - g) * s.a[i] + g * a1[i])).collect();
                self.state = State { t: t_new, q: q1, v: v1, a: a1 };
                return Ok(());
            }
        }
        Err(SolverError::NoConvergence(format!("time step ending at t = {t_new}")))
    }

    /// Advances `steps` steps, recording `observe` coordinates every `every` steps.
    pub fn run(&mut self, steps: usize, observe: &[usize], every: usize) -> Result<Trajectory, SolverError> {
        let mut tr = Trajectory::default();
        let record = |tr: &mut Trajectory, s: &State| {
            tr.times.push(s.t);
            tr.q.push(observe.iter().map(|&i| s.q[i]).collect());
            tr.v.push(observe.iter().map(|&i| s.v[i]).collect());
        };
        record(&mut tr, &self.state);
        for k in 1..=steps {
            self.step()?;
            if k % every.max(1) == 0 {
                record(&mut tr, &self.state);
            }
        }
        Ok(tr)
    }
}

/// Mechanical energy `½ v·M v + ½ q·K q` of a linear [`Ode`].
pub fn linear_energy(ode: &Ode, q: &[f64], v: &[f64]) -> f64 {
    let qv = DVector::from_column_slice(q);
    let vv = DVector::from_column_slice(v);
    0.5 * (vv.dot(&(&ode.mass * &vv)) + qv.dot(&(&ode.stiffness * &qv)))
}

/// Per-coordinate `max |q|` over the samples with `t ≥ from`, refined by a parabola through the top sample.
pub fn steady_amplitude(trajectory: &Trajectory, from: f64) -> Vec<f64> {
    let start = trajectory.times.iter().position(|&t| t >= from).unwrap_or(trajectory.times.len());
    let dofs = trajectory.q.first().map_or(0, Vec::len);
    (0..dofs)
        .map(|i| {
            let series: Vec<f64> = trajectory.q[start..].iter().map(|q| q[i].abs()).collect();
            let Some((k, &top)) = series.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
                return 0.0;
            };
            if k == 0 || k + 1 == series.len() {
                return top;
            }
            let (l, r) = (series[k - 1], series[k + 1]);
            let denom = l - 2.0 * top + r;
            if denom >= 0.0 {
                return top;
            }
            top - 0.125 * (r - l).powi(2) / denom
        })
        .collect()
}

/// Outcome of [`integrate_to_steady`].
#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub amplitudes: Vec<f64>,
    pub periods: usize,
    pub converged: bool,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    /// Time of the final state, a whole number of periods after the start.
    pub t: f64,
}

/// Integrates whole forcing periods until the per-period amplitudes of `observe` settle.
#[allow(clippy::too_many_arguments)]
pub fn integrate_to_steady<D: Dynamics + ?Sized>(
    dynamics: &D,
    omega: f64,
    steps_per_period: usize,
    config: IntegratorConfig,
    q0: Vec<f64>,
    v0: Vec<f64>,
    observe: &[usize],
    tolerance: f64,
    max_periods: usize,
) -> Result<SteadyState, SolverError> {
    let period = 2.0 * PI / omega;
    let mut integ = GeneralizedAlpha::new(dynamics, period / steps_per_period as f64, config, 0.0, q0, v0)?;
    let mut previous: Option<Vec<f64>> = None;
    let mut settled = 0;
    for p in 1..=max_periods {
        let tr = integ.run(steps_per_period, observe, 1)?;
        let amps = steady_amplitude(&tr, f64::NEG_INFINITY);
        if let Some(prev) = &previous {
            let top = amps.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let change = amps.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / top;
            settled = if change < tolerance { settled + 1 } else { 0 };
            if settled >= 3 {
                return Ok(SteadyState {
                    amplitudes: amps,
                    periods: p,
                    converged: true,
                    q: integ.state.q.clone(),
                    v: integ.state.v.clone(),
                    t: integ.state.t,
                });
            }
        }
        previous = Some(amps);
    }
    Ok(SteadyState {
        amplitudes: previous.unwrap_or_default(),
        periods: max_periods,
        converged: false,
        q: integ.state.q.clone(),
        v: integ.state.v.clone(),
        t: integ.state.t,
    })
}
