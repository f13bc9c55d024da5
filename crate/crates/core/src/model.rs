//! Mechanical systems with polynomial internal forces.

use std::sync::Arc;

use thiserror::Error;

use crate::sparse::SparseSymmetricMatrix;

/// Plain displacement or force vector on the free DOFs.
pub type DofVector = Vec<f64>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("vector length {got} does not match the {expected} DOFs of the system")]
    Length { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("coefficient table is not symmetric at {index:?}: {value} vs {mirror}")]
    Asymmetric { index: Vec<usize>, value: f64, mirror: f64 },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("failed to parse discrete system: {0}")]
    Parse(String),
}

/// Quadratic and cubic parts of the internal force, evaluated without materialized tensors.
pub trait NonlinearOperators: Send + Sync {
    fn dof_count(&self) -> usize;

    /// `G(a, b)`, bilinear and symmetric.
    fn quadratic(&self, a: &[f64], b: &[f64]) -> DofVector;

    /// `H(a, b, c)`, trilinear and symmetric.
    fn cubic(&self, a: &[f64], b: &[f64], c: &[f64]) -> DofVector;

    /// Complete internal force including the linear part, when an independent evaluator exists.
    fn full_force(&self, _u: &[f64]) -> Option<DofVector> {
        None
    }

    /// Consistent tangent of [`full_force`](Self::full_force) at `u`, when it can be assembled.
    fn tangent_matrix(&self, _u: &[f64]) -> Option<SparseSymmetricMatrix> {
        None
    }
}

/// Operator pair that is identically zero.
#[derive(Clone, Debug)]
pub struct LinearOnly {
    pub dofs: usize,
}

impl NonlinearOperators for LinearOnly {
    fn dof_count(&self) -> usize {
        self.dofs
    }
    fn quadratic(&self, _a: &[f64], _b: &[f64]) -> DofVector {
        vec![0.0; self.dofs]
    }
    fn cubic(&self, _a: &[f64], _b: &[f64], _c: &[f64]) -> DofVector {
        vec![0.0; self.dofs]
    }
}

/// `M Ü + K U + G(U,U) + H(U,U,U) = 0` on the free DOFs.
#[derive(Clone)]
pub struct MechanicalSystem {
    mass: SparseSymmetricMatrix,
    stiffness: SparseSymmetricMatrix,
    nonlinear: Arc<dyn NonlinearOperators>,
    constrained_dofs: Vec<usize>,
}

impl std::fmt::Debug for MechanicalSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MechanicalSystem")
            .field("dofs", &self.dof_count())
            .field("constrained", &self.constrained_dofs.len())
            .finish()
    }
}

impl MechanicalSystem {
    pub fn new(
        mass: SparseSymmetricMatrix,
        stiffness: SparseSymmetricMatrix,
        nonlinear: Arc<dyn NonlinearOperators>,
        constrained_dofs: Vec<usize>,
    ) -> Result<Self, ModelError> {
        let n = mass.dim();
        if stiffness.dim() != n || nonlinear.dof_count() != n {
            return Err(ModelError::Dimension(format!(
                "mass {n}, stiffness {}, operators {}",
                stiffness.dim(),
                nonlinear.dof_count()
            )));
        }
        if n == 0 {
            return Err(ModelError::Invalid("system without free DOFs".into()));
        }
        if mass.diagonal().iter().any(|&d| d <= 0.0) {
            return Err(ModelError::Invalid("mass matrix has a non-positive diagonal entry".into()));
        }
        Ok(Self { mass, stiffness, nonlinear, constrained_dofs })
    }

    pub fn dof_count(&self) -> usize {
        self.mass.dim()
    }

    pub fn mass(&self) -> &SparseSymmetricMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseSymmetricMatrix {
        &self.stiffness
    }

    pub fn operators(&self) -> &Arc<dyn NonlinearOperators> {
        &self.nonlinear
    }

    /// DOF indices removed from the original numbering.
    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained_dofs
    }

    fn check(&self, v: &[f64]) -> Result<(), ModelError> {
        if v.len() != self.dof_count() {
            return Err(ModelError::Length { expected: self.dof_count(), got: v.len() });
        }
        Ok(())
    }

    pub fn eval_quadratic(&self, a: &[f64], b: &[f64]) -> Result<DofVector, ModelError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.nonlinear.quadratic(a, b))
    }

    pub fn eval_cubic(&self, a: &[f64], b: &[f64], c: &[f64]) -> Result<DofVector, ModelError> {
        self.check(a)?;
        self.check(b)?;
        self.check(c)?;
        Ok(self.nonlinear.cubic(a, b, c))
    }

    /// Internal force `K u + G(u,u) + H(u,u,u)`, or the independent evaluator when present.
    pub fn full_internal_force(&self, u: &[f64]) -> Result<DofVector, ModelError> {
        self.check(u)?;
        if let Some(f) = self.nonlinear.full_force(u) {
            return Ok(f);
        }
        Ok(self.split_internal_force(u))
    }

    /// `K u + G(u,u) + H(u,u,u)` from the polynomial pieces.
    pub fn split_internal_force(&self, u: &[f64]) -> DofVector {
        let mut f = self.stiffness.mul_vec(u);
        let g = self.nonlinear.quadratic(u, u);
        let h = self.nonlinear.cubic(u, u, u);
        for i in 0..f.len() {
            f[i] += g[i] + h[i];
        }
        f
    }

    /// Sparse tangent at `u`: assembled by the operators, or probed column by column up to `dense_limit` DOFs.
    pub fn tangent_matrix(&self, u: &[f64], dense_limit: usize) -> Result<SparseSymmetricMatrix, ModelError> {
        self.check(u)?;
        if let Some(t) = self.nonlinear.tangent_matrix(u) {
            return Ok(t);
        }
        let n = self.dof_count();
        if n > dense_limit {
            return Err(ModelError::Invalid(format!("no assembled tangent for {n} DOFs")));
        }
        let cols: Vec<DofVector> = (0..n).map(|j| self.tangent_apply(u, &unit(n, j))).collect();
        let trip = (0..n)
            .flat_map(|j| (0..=j).map(move |i| (i, j)))
            .map(|(i, j)| (i, j, 0.5 * (cols[j][i] + cols[i][j])))
            .filter(|t| t.2 != 0.0);
        SparseSymmetricMatrix::from_triplets(n, trip).map_err(|e| ModelError::Invalid(e.to_string()))
    }

    /// Tangent action `(K + 2G(u,·) + 3H(u,u,·)) v`.
    pub fn tangent_apply(&self, u: &[f64], v: &[f64]) -> DofVector {
        let mut f = self.stiffness.mul_vec(v);
        let g = self.nonlinear.quadratic(u, v);
        let h = self.nonlinear.cubic(u, u, v);
        for i in 0..f.len() {
            f[i] += 2.0 * g[i] + 3.0 * h[i];
        }
        f
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}
