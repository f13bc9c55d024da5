//! Small dense second-order systems `M q̈ + C q̇ + K q + f(q, q̇) = F cos ωt`.

use nalgebra::{DMatrix, DVector};

use dnf_core::dnf::{ReducedModel, Table};
use dnf_core::{MechanicalSystem, NonlinearOperators};

use crate::SolverError;

/// Sparse polynomial `f_p = Σ g q_k q_l + Σ h q_k q_l q_m + Σ d q_k q̇_l q̇_m`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolynomialForce {
    pub quadratic: Vec<([usize; 3], f64)>,
    pub cubic: Vec<([usize; 4], f64)>,
    pub cubic_velocity: Vec<([usize; 4], f64)>,
}

fn entries<const D: usize>(t: &Table) -> Vec<([usize; D], f64)> {
    t.nonzero()
        .into_iter()
        .map(|(i, v)| (i.try_into().expect("table order matches"), v))
        .collect()
}

impl PolynomialForce {
    pub fn from_rom(model: &ReducedModel) -> Self {
        Self {
            quadratic: entries(&model.g),
            cubic: entries(&model.cubic_displacement()),
            cubic_velocity: entries(&model.cubic_velocity()),
        }
    }

    /// Reads the coefficient tables of `ops` off its action on unit vectors.
    pub fn probe(ops: &dyn NonlinearOperators) -> Self {
        let n = ops.dof_count();
        let unit = |i: usize| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        };
        let mut force = Self::default();
        for k in 0..n {
            for l in 0..n {
                let (ek, el) = (unit(k), unit(l));
                for (p, &v) in ops.quadratic(&ek, &el).iter().enumerate() {
                    if v != 0.0 {
                        force.quadratic.push(([p, k, l], v));
                    }
                }
                for m in 0..n {
                    for (p, &v) in ops.cubic(&ek, &el, &unit(m)).iter().enumerate() {
                        if v != 0.0 {
                            force.cubic.push(([p, k, l, m], v));
                        }
                    }
                }
            }
        }
        force
    }

    pub fn is_empty(&self) -> bool {
        self.quadratic.is_empty() && self.cubic.is_empty() && self.cubic_velocity.is_empty()
    }

    pub fn eval(&self, q: &[f64], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &([p, k, l], c) in &self.quadratic {
            out[p] += c * q[k] * q[l];
        }
        for &([p, k, l, m], c) in &self.cubic {
            out[p] += c * q[k] * q[l] * q[m];
        }
        for &([p, k, l, m], c) in &self.cubic_velocity {
            out[p] += c * q[k] * v[l] * v[m];
        }
    }

    /// Adds `∂f/∂q` to `dq` and `∂f/∂q̇` to `dv`.
    pub fn add_jacobians(&self, q: &[f64], v: &[f64], dq: &mut DMatrix<f64>, dv: &mut DMatrix<f64>) {
        for &([p, k, l], c) in &self.quadratic {
            dq[(p, k)] += c * q[l];
            dq[(p, l)] += c * q[k];
        }
        for &([p, k, l, m], c) in &self.cubic {
            dq[(p, k)] += c * q[l] * q[m];
            dq[(p, l)] += c * q[k] * q[m];
            dq[(p, m)] += c * q[k] * q[l];
        }
        for &([p, k, l, m], c) in &self.cubic_velocity {
            dq[(p, k)] += c * v[l] * v[m];
            dv[(p, l)] += c * q[k] * v[m];
            dv[(p, m)] += c * q[k] * v[l];
        }
    }
}

/// Dense second-order ODE with a harmonic load of shape `load`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ode {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub load: DVector<f64>,
    pub force: PolynomialForce,
}

impl Ode {
    pub fn new(
        mass: DMatrix<f64>,
        damping: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        load: DVector<f64>,
        force: PolynomialForce,
    ) -> Result<Self, SolverError> {
        let n = mass.nrows();
        let square = |m: &DMatrix<f64>| m.nrows() == n && m.ncols() == n;
        if n == 0 || !square(&mass) || !square(&damping) || !square(&stiffness) || load.len() != n {
            return Err(SolverError::Config(format!(
                "inconsistent dimensions: mass {}x{}, damping {}x{}, stiffness {}x{}, load {}",
                mass.nrows(),
                mass.ncols(),
                damping.nrows(),
                damping.ncols(),
                stiffness.nrows(),
                stiffness.ncols(),
                load.len()
            )));
        }
        let bad = force
            .quadratic
            .iter()
            .map(|(i, _)| i.as_slice())
            .chain(force.cubic.iter().map(|(i, _)| i.as_slice()))
            .chain(force.cubic_velocity.iter().map(|(i, _)| i.as_slice()))
            .any(|i| i.iter().any(|&x| x >= n));
        if bad {
            return Err(SolverError::Config(format!("polynomial index beyond dimension {n}")));
        }
        if mass.clone().cholesky().is_none() {
            return Err(SolverError::Config("mass matrix is not positive definite".into()));
        }
        Ok(Self { mass, damping, stiffness, load, force })
    }

    /// Single oscillator `q̈ + c q̇ + ω₀² q + f = F cos ωt`.
    pub fn oscillator(omega0: f64, c: f64, amplitude: f64, force: PolynomialForce) -> Result<Self, SolverError> {
        Self::new(
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, omega0 * omega0),
            DVector::from_element(1, amplitude),
            force,
        )
    }

    /// Reduced dynamics of `model` driven on its own master with its own load multiplier.
    pub fn from_rom(model: &ReducedModel) -> Result<Self, SolverError> {
        Self::from_rom_with_load(model, model.drive.kappa)
    }

    /// Reduced dynamics of `model` with the load multiplier replaced by `kappa`.
    pub fn from_rom_with_load(model: &ReducedModel, kappa: f64) -> Result<Self, SolverError> {
        let n = model.masters();
        let c = model.damping.coefficient();
        let mut load = DVector::zeros(n);
        load[model.drive.master] = kappa;
        let k = DMatrix::from_diagonal(&DVector::from_iterator(n, model.frequencies.iter().map(|w| w * w)));
        Self::new(DMatrix::identity(n, n), DMatrix::identity(n, n) * c, k, load, PolynomialForce::from_rom(model))
    }

    /// Dense copy of a small `system` with mass-proportional damping `c M` and load `load`.
    pub fn from_system(system: &MechanicalSystem, c: f64, load: DVector<f64>) -> Result<Self, SolverError> {
        let m = system.mass().to_dense();
        let force = PolynomialForce::probe(system.operators().as_ref());
        Self::new(m.clone(), m * c, system.stiffness().to_dense(), load, force)
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    /// Copy with another load vector.
    pub fn with_load(&self, load: DVector<f64>) -> Self {
        Self { load, ..self.clone() }
    }

    /// `C q̇ + K q + f(q, q̇)`.
    pub fn restoring(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        self.force.eval(q, v, &mut out);
        for i in 0..n {
            for j in 0..n {
                out[i] += self.damping[(i, j)] * v[j] + self.stiffness[(i, j)] * q[j];
            }
        }
        out
    }

    /// `(∂/∂q, ∂/∂q̇)` of [`restoring`](Self::restoring).
    pub fn restoring_jacobians(&self, q: &[f64], v: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut dq = self.stiffness.clone();
        let mut dv = self.damping.clone();
        self.force.add_jacobians(q, v, &mut dq, &mut dv);
        (dq, dv)
    }

    /// Rough upper bound of the largest natural frequency.
    pub fn max_frequency(&self) -> f64 {
        let minv = self.mass.clone().try_inverse().unwrap_or_else(|| DMatrix::identity(self.dim(), self.dim()));
        let a = minv * &self.stiffness;
        let gersh = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        gersh.sqrt()
    }
}
