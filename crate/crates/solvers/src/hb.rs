//! Harmonic balance with real Fourier blocks and alternating frequency-time evaluation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ode::Ode;
use crate::SolverError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HBConfig {
    /// Highest retained harmonic `H`.
    pub harmonics: usize,
    /// Newton tolerance on the residual relative to the load norm.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for HBConfig {
    fn default() -> Self {
        Self { harmonics: 9, tolerance: 1e-10, max_iterations: 30 }
    }
}

impl HBConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.harmonics == 0 {
            return Err(SolverError::Config("at least one harmonic is required".into()));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(SolverError::Config(format!(
                "tolerance {} and iteration cap {} must be positive",
                self.tolerance, self.max_iterations
            )));
        }
        Ok(())
    }
}

/// Truncated real Fourier basis `1, cos τ, sin τ, …, cos Hτ, sin Hτ` on a uniform grid.
#[derive(Clone, Debug)]
pub struct Fourier {
    harmonics: usize,
    /// `T_b(τ_j)`, one row per sample.
    basis: DMatrix<f64>,
    /// `T_b'(τ_j)`.
    derivative: DMatrix<f64>,
    /// Projection weights per block.
    weights: Vec<f64>,
}

impl Fourier {
    /// Grid of `4H + 1` samples, enough to project cubic products onto `H` harmonics exactly.
    pub fn new(harmonics: usize) -> Self {
        Self::with_samples(harmonics, 4 * harmonics + 1)
    }

    pub fn with_samples(harmonics: usize, samples: usize) -> Self {
        let blocks = 2 * harmonics + 1;
        let mut basis = DMatrix::zeros(samples, blocks);
        let mut derivative = DMatrix::zeros(samples, blocks);
        for j in 0..samples {
            let tau = 2.0 * PI * j as f64 / samples as f64;
            let (b, d) = Self::row(harmonics, tau);
            basis.row_mut(j).copy_from_slice(&b);
            derivative.row_mut(j).copy_from_slice(&d);
        }
        let n = samples as f64;
        let weights = (0..blocks).map(|b| if b == 0 { 1.0 / n } else { 2.0 / n }).collect();
        Self { harmonics, basis, derivative, weights }
    }

    /// Basis values and τ-derivatives at `tau`.
    pub fn row(harmonics: usize, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let blocks = 2 * harmonics + 1;
        let mut b = vec![0.0; blocks];
        let mut d = vec![0.0; blocks];
        b[0] = 1.0;
        for k in 1..=harmonics {
            let kf = k as f64;
            let (s, c) = (kf * tau).sin_cos();
            b[2 * k - 1] = c;
            b[2 * k] = s;
            d[2 * k - 1] = -kf * s;
            d[2 * k] = kf * c;
        }
        (b, d)
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    pub fn blocks(&self) -> usize {
        2 * self.harmonics + 1
    }

    pub fn samples(&self) -> usize {
        self.basis.nrows()
    }
}

/// Fourier coefficients of one periodic orbit, block-major: `x[b·n + i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    pub dofs: usize,
    pub harmonics: usize,
    pub omega: f64,
    pub coefficients: Vec<f64>,
}

impl Orbit {
    pub fn coefficient(&self, block: usize, dof: usize) -> f64 {
        self.coefficients[block * self.dofs + dof]
    }

    /// `(q, q̇)` at time `t`.
    pub fn state_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let (b, d) = Fourier::row(self.harmonics, self.omega * t);
        let mut q = vec![0.0; self.dofs];
        let mut v = vec![0.0; self.dofs];
        for (blk, (bv, dv)) in b.iter().zip(&d).enumerate() {
            for i in 0..self.dofs {
                let c = self.coefficient(blk, i);
                q[i] += bv * c;
                v[i] += self.omega * dv * c;
            }
        }
        (q, v)
    }

    /// States at `count` equally spaced instants over one period.
    pub fn sample(&self, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let period = 2.0 * PI / self.omega;
        (0..count).map(|j| self.state_at(period * j as f64 / count as f64)).collect()
    }

    /// Amplitude `√(a_k² + b_k²)` of harmonic `k` of `dof`.
    pub fn harmonic_amplitude(&self, dof: usize, k: usize) -> f64 {
        if k == 0 {
            return self.coefficient(0, dof).abs();
        }
        self.coefficient(2 * k - 1, dof).hypot(self.coefficient(2 * k, dof))
    }

    /// `max_t |q_dof(t)|`, located on a fine grid and polished by Newton on `q' = 0`.
    pub fn peak(&self, dof: usize) -> f64 {
        let h = self.harmonics;
        let coeffs: Vec<f64> = (0..2 * h + 1).map(|b| self.coefficient(b, dof)).collect();
        let eval = |tau: f64| {
            let mut q = coeffs[0];
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for k in 1..=h {
                let kf = k as f64;
                let (s, c) = (kf * tau).sin_cos();
                let (a, b) = (coeffs[2 * k - 1], coeffs[2 * k]);
                q += a * c + b * s;
                d1 += kf * (b * c - a * s);
                d2 -= kf * kf * (a * c + b * s);
            }
            (q, d1, d2)
        };
        let grid = 32 * (2 * h + 1);
        let (mut best_tau, mut best) = (0.0, 0.0);
        for j in 0..grid {
            let tau = 2.0 * PI * j as f64 / grid as f64;
            let q = eval(tau).0.abs();
            if q > best {
                best = q;
                best_tau = tau;
            }
        }
        let mut tau = best_tau;
        for _ in 0..20 {
            let (_, d1, d2) = eval(tau);
            if d2 == 0.0 {
                break;
            }
            let step = d1 / d2;
            tau -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let polished = eval(tau).0.abs();
        if (tau - best_tau).abs() < 2.0 * PI / grid as f64 && polished >= best {
            polished
        } else {
            best
        }
    }
}

/// Residual and Jacobians of the balanced equations at one frequency.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// `∂R/∂ω`.
    pub d_omega: DVector<f64>,
}

/// Harmonic balance discretization of an [`Ode`].
#[derive(Clone, Debug)]
pub struct HarmonicBalance<'a> {
    ode: &'a Ode,
    fourier: Fourier,
    config: HBConfig,
}

impl<'a> HarmonicBalance<'a> {
    pub fn new(ode: &'a Ode, config: HBConfig) -> Result<Self, SolverError> {
        config.validate()?;
        Ok(Self { ode, fourier: Fourier::new(config.harmonics), config })
    }

    pub fn ode(&self) -> &Ode {
        self.ode
    }

    pub fn config(&self) -> &HBConfig {
        &self.config
    }

    pub fn unknowns(&self) -> usize {
        self.ode.dim() * self.fourier.blocks()
    }

    /// Norm against which residuals are measured.
    pub fn residual_scale(&self) -> f64 {
        let f = self.ode.load.norm();
        if f > 0.0 {
            f
        } else {
            1.0
        }
    }

    pub fn orbit(&self, coefficients: Vec<f64>, omega: f64) -> Orbit {
        Orbit { dofs: self.ode.dim(), harmonics: self.fourier.harmonics(), omega, coefficients }
    }

    pub fn evaluate(&self, x: &[f64], omega: f64) -> Evaluation {
        let n = self.ode.dim();
        let nb = self.fourier.blocks();
        let m = n * nb;
        let mut r = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, m);
        let mut dw = DVector::zeros(m);
        let (mass, damp, stiff) = (&self.ode.mass, &self.ode.damping, &self.ode.stiffness);
        let at = |b: usize, i: usize| b * n + i;

        for i in 0..n {
            for k in 0..n {
                r[at(0, i)] += stiff[(i, k)] * x[at(0, k)];
                jac[(at(0, i), at(0, k))] += stiff[(i, k)];
            }
        }
        for h in 1..=self.fourier.harmonics() {
            let (c, s) = (2 * h - 1, 2 * h);
            let hf = h as f64;
            for i in 0..n {
                for k in 0..n {
                    let dyn_ik = stiff[(i, k)] - hf * hf * omega * omega * mass[(i, k)];
                    let cw = hf * omega * damp[(i, k)];
                    let (a, b) = (x[at(c, k)], x[at(s, k)]);
                    r[at(c, i)] += dyn_ik * a + cw * b;
                    r[at(s, i)] += dyn_ik * b - cw * a;
                    jac[(at(c, i), at(c, k))] += dyn_ik;
                    jac[(at(c, i), at(s, k))] += cw;
                    jac[(at(s, i), at(s, k))] += dyn_ik;
                    jac[(at(s, i), at(c, k))] -= cw;
                    let dm = -2.0 * hf * hf * omega * mass[(i, k)];
                    let dc = hf * damp[(i, k)];
                    dw[at(c, i)] += dm * a + dc * b;
                    dw[at(s, i)] += dm * b - dc * a;
                }
            }
        }
        for i in 0..n {
            r[at(1, i)] -= self.ode.load[i];
        }

        if self.ode.force.is_empty() {
            return Evaluation { residual: r, jacobian: jac, d_omega: dw };
        }
        let basis = &self.fourier.basis;
        let deriv = &self.fourier.derivative;
        let w = &self.fourier.weights;
        let mut q = vec![0.0; n];
        let mut qp = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut f = vec![0.0; n];
        let mut jq = DMatrix::zeros(n, n);
        let mut jv = DMatrix::zeros(n, n);
        // Per-sample coupling of block b' into DOF k for the Jacobian.
        let mut gk = DMatrix::zeros(n * n, nb);
        for j in 0..self.fourier.samples() {
            q.iter_mut().for_each(|e| *e = 0.0);
            qp.iter_mut().for_each(|e| *e = 0.0);
            for b in 0..nb {
                let (tb, db) = (basis[(j, b)], deriv[(j, b)]);
                for i in 0..n {
                    q[i] += tb * x[at(b, i)];
                    qp[i] += db * x[at(b, i)];
                }
            }
            for i in 0..n {
                v[i] = omega * qp[i];
            }
            self.ode.force.eval(&q, &v, &mut f);
            jq.fill(0.0);
            jv.fill(0.0);
            self.ode.force.add_jacobians(&q, &v, &mut jq, &mut jv);
            for bp in 0..nb {
                let (tb, db) = (basis[(j, bp)], omega * deriv[(j, bp)]);
                for i in 0..n {
                    for k in 0..n {
                        gk[(i * n + k, bp)] = jq[(i, k)] * tb + jv[(i, k)] * db;
                    }
                }
            }
            let jvq = &jv * DVector::from_column_slice(&qp);
            for b in 0..nb {
                let wt = w[b] * basis[(j, b)];
                if wt == 0.0 {
                    continue;
                }
                for i in 0..n {
                    r[at(b, i)] += wt * f[i];
                    dw[at(b, i)] += wt * jvq[i];
                    for bp in 0..nb {
                        for k in 0..n {
                            jac[(at(b, i), at(bp, k))] += wt * gk[(i * n + k, bp)];
                        }
                    }
                }
            }
        }
        Evaluation { residual: r, jacobian: jac, d_omega: dw }
    }

    /// First-harmonic response of the linearized system.
    pub fn linear_guess(&self, omega: f64) -> Result<Vec<f64>, SolverError> {
        let n = self.ode.dim();
        let dyn_m = &self.ode.stiffness - &self.ode.mass * (omega * omega);
        let cw = &self.ode.damping * omega;
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, 0), (n, n)).copy_from(&dyn_m);
        a.view_mut((0, n), (n, n)).copy_from(&cw);
        a.view_mut((n, n), (n, n)).copy_from(&dyn_m);
        a.view_mut((n, 0), (n, n)).copy_from(&(-cw));
        let mut rhs = DVector::zeros(2 * n);
        rhs.rows_mut(0, n).copy_from(&self.ode.load);
        let sol = a.lu().solve(&rhs).ok_or_else(|| SolverError::Singular(format!("linear response at ω = {omega}")))?;
        let mut x = vec![0.0; self.unknowns()];
        for i in 0..n {
            x[n + i] = sol[i];
            x[2 * n + i] = sol[n + i];
        }
        Ok(x)
    }

    /// Newton iterations at fixed `omega`; returns the coefficients and the iteration count.
    pub fn solve(&self, guess: &[f64], omega: f64) -> Result<(Vec<f64>, usize), SolverError> {
        let mut x = DVector::from_column_slice(guess);
        let tol = self.config.tolerance * self.residual_scale();
        for it in 0..=self.config.max_iterations {
            let ev = self.evaluate(x.as_slice(), omega);
            let rn = ev.residual.norm();
            if !rn.is_finite() {
                break;
            }
            if rn <= tol {
                return Ok((x.as_slice().to_vec(), it));
            }
            let dx = ev
                .jacobian
                .lu()
                .solve(&(-ev.residual))
                .ok_or_else(|| SolverError::Singular(format!("balance Jacobian at ω = {omega}")))?;
            x += dx;
        }
        Err(SolverError::NoConvergence(format!(
            "harmonic balance at ω = {omega} after {} iterations",
            self.config.max_iterations
        )))
    }
}
