//! Generalized eigensolution and state-space spectrum bookkeeping.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{dot, LinAlgError, LinearSolver, SparseSymmetricMatrix};

/// Systems up to this size are solved with a dense eigen-decomposition.
pub const DENSE_LIMIT: usize = 500;

const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("mode {index} requested but only {available} are available")]
    IndexBeyondSpectrum { index: usize, available: usize },
    #[error("invalid selector: {0}")]
    Selector(String),
    #[error("zero or repeated frequency at position {0}: rigid mode or duplicate master")]
    DegenerateFrequency(usize),
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
}

/// Which eigenpairs to keep, ordered by increasing frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelector {
    /// The lowest `n` modes.
    Count(usize),
    /// 1-based positions in the ascending spectrum.
    Indices(Vec<usize>),
    /// Every mode with `lo <= ω <= hi` (rad/time).
    Window { lo: f64, hi: f64 },
}

/// Mass-normalized eigenpairs `K φ = ω² M φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    /// 1-based positions of the modes in the ascending spectrum.
    pub indices: Vec<usize>,
    pub frequencies: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Keeps the listed positions (0-based into this set).
    pub fn subset(&self, keep: &[usize]) -> ModeSet {
        ModeSet {
            indices: keep.iter().map(|&i| self.indices[i]).collect(),
            frequencies: keep.iter().map(|&i| self.frequencies[i]).collect(),
            vectors: keep.iter().map(|&i| self.vectors[i].clone()).collect(),
        }
    }

    /// Largest `|Kφ − ω²Mφ| / (ω²|Mφ|)` over the set.
    pub fn max_residual(&self, m: &SparseSymmetricMatrix, k: &SparseSymmetricMatrix) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.vectors)
            .map(|(w, v)| eigen_residual(m, k, w * w, v))
            .fold(0.0, f64::max)
    }
}

fn eigen_residual(m: &SparseSymmetricMatrix, k: &SparseSymmetricMatrix, lambda: f64, v: &[f64]) -> f64 {
    let kv = k.mul_vec(v);
    let mv = m.mul_vec(v);
    let r: f64 = kv.iter().zip(&mv).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    let scale = lambda.abs().max(f64::EPSILON) * crate::sparse::norm(&mv);
    r / scale
}

/// Accepted residual: the nominal tolerance or a multiple of the rounding floor of `K v − λ M v`.
///
/// Representing `v` in floating point leaves components of relative size `ε` along the stiffest
/// modes, so the attainable residual is about `ε (|K||v| + λ|M||v|) / (λ ‖Mv‖)`.
pub fn residual_tolerance(m: &SparseSymmetricMatrix, k: &SparseSymmetricMatrix, lambda: f64, v: &[f64]) -> f64 {
    let abs_mul = |a: &SparseSymmetricMatrix| {
        let mut y = vec![0.0; v.len()];
        for (i, j, x) in a.iter_upper() {
            y[i] += x.abs() * v[j].abs();
            if i != j {
                y[j] += x.abs() * v[i].abs();
            }
        }
        crate::sparse::norm(&y)
    };
    let mv = crate::sparse::norm(&m.mul_vec(v));
    let lam = lambda.abs().max(f64::EPSILON);
    let floor = f64::EPSILON * (abs_mul(k) + lam * abs_mul(m)) / (lam * mv);
    RESIDUAL_TOL.max(32.0 * floor)
}

fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(&pivot) = v.iter().find(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn normalize_mass(m: &SparseSymmetricMatrix, v: &mut [f64]) {
    let s = m.bilinear(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

fn dense_all(m: &SparseSymmetricMatrix, k: &SparseSymmetricMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectralError> {
    let md = m.to_dense();
    let kd = k.to_dense();
    let chol = md
        .cholesky()
        .ok_or(SpectralError::LinAlg(LinAlgError::NotPositiveDefinite))?;
    let l = chol.l();
    let linv_k = l
        .solve_lower_triangular(&kd)
        .ok_or_else(|| SpectralError::NoConvergence("triangular solve".into()))?;
    let a = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| SpectralError::NoConvergence("triangular solve".into()))?;
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut vals = Vec::with_capacity(order.len());
    let mut vecs = Vec::with_capacity(order.len());
    for i in order {
        let y = eig.eigenvectors.column(i).into_owned();
        let phi = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| SpectralError::NoConvergence("back substitution".into()))?;
        vals.push(eig.eigenvalues[i]);
        vecs.push(phi.as_slice().to_vec());
    }
    Ok((vals, vecs))
}

fn m_orthonormalize(
    m: &SparseSymmetricMatrix,
    basis: &[Vec<f64>],
    basis_m: &[Vec<f64>],
    mut block: Vec<Vec<f64>>,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut out_m: Vec<Vec<f64>> = Vec::new();
    for v in block.iter_mut() {
        let start = dot(v, &m.mul_vec(v)).sqrt();
        for _ in 0..2 {
            for (b, bm) in basis.iter().zip(basis_m).chain(out.iter().zip(&out_m)) {
                let c = dot(bm, v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let mv = m.mul_vec(v);
        let nrm = dot(v, &mv).sqrt();
        if nrm > 1e-10 * start && nrm > 0.0 {
            out.push(v.iter().map(|x| x / nrm).collect());
            out_m.push(mv.iter().map(|x| x / nrm).collect());
        }
    }
    (out, out_m)
}

/// One step of iterative refinement keeps stiff-direction rounding out of the Krylov basis.
fn refined_solve(
    solver: &LinearSolver,
    a: &SparseSymmetricMatrix,
    rhs: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, SpectralError> {
    let mut x = solver.solve_many(rhs)?;
    let residuals: Vec<Vec<f64>> = x
        .iter()
        .zip(rhs)
        .map(|(xi, b)| {
            let ax = a.mul_vec(xi);
            b.iter().zip(&ax).map(|(p, q)| p - q).collect()
        })
        .collect();
    for (xi, d) in x.iter_mut().zip(solver.solve_many(&residuals)?) {
        xi.iter_mut().zip(&d).for_each(|(p, q)| *p += q);
    }
    Ok(x)
}

/// Lowest `count` eigenpairs by shift-invert block Krylov iteration with Rayleigh-Ritz restarts.
fn sparse_lowest(
    m: &SparseSymmetricMatrix,
    k: &SparseSymmetricMatrix,
    count: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectralError> {
    let n = m.dim();
    let shifted;
    let (solver, op) = match LinearSolver::cholesky(k) {
        Ok(s) => (s, k),
        Err(_) => {
            let scale = k.diagonal().iter().sum::<f64>() / m.diagonal().iter().sum::<f64>();
            shifted = SparseSymmetricMatrix::combine(1.0, k, 1e-6 * scale, m);
            (LinearSolver::cholesky(&shifted)?, &shifted)
        }
    };
    let width = (count + 4).min(n);
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let mut start: Vec<Vec<f64>> = (0..width)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect();
    let steps = 3;
    let mut previous = f64::INFINITY;
    for _restart in 0..60 {
        let seed_m: Vec<Vec<f64>> = start.iter().map(|v| m.mul_vec(v)).collect();
        let seed = refined_solve(&solver, op, &seed_m)?;
        let (mut basis, mut basis_m) = m_orthonormalize(m, &[], &[], seed);
        let mut last_m = basis_m.clone();
        for _ in 1..steps {
            if basis.len() >= n {
                break;
            }
            let next = refined_solve(&solver, op, &last_m)?;
            let (nb, nbm) = m_orthonormalize(m, &basis, &basis_m, next);
            if nb.is_empty() {
                break;
            }
            basis.extend(nb);
            basis_m.extend(nbm.iter().cloned());
            last_m = nbm;
        }
        let dim = basis.len();
        let kb: Vec<Vec<f64>> = basis.iter().map(|b| k.mul_vec(b)).collect();
        let proj = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (dot(&basis[i], &kb[j]) + dot(&basis[j], &kb[i])));
        let eig = SymmetricEigen::new(proj);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let ritz: Vec<(f64, Vec<f64>)> = order
            .iter()
            .take(width)
            .map(|&c| {
                let q = eig.eigenvectors.column(c);
                let mut y = vec![0.0; n];
                for (j, b) in basis.iter().enumerate() {
                    let w = q[j];
                    y.iter_mut().zip(b).for_each(|(a, x)| *a += w * x);
                }
                (eig.eigenvalues[c], y)
            })
            .collect();
        let worst = ritz
            .iter()
            .take(count)
            .map(|(l, y)| eigen_residual(m, k, *l, y) / residual_tolerance(m, k, *l, y))
            .fold(0.0, f64::max);
        let stalled = worst < 1.0 && worst > 0.5 * previous;
        previous = worst;
        if worst < 1e-3 || stalled || dim >= n {
            let take = count.min(ritz.len());
            return Ok((
                ritz[..take].iter().map(|r| r.0).collect(),
                ritz[..take].iter().map(|r| r.1.clone()).collect(),
            ));
        }
        start = ritz.into_iter().map(|r| r.1).collect();
    }
    Err(SpectralError::NoConvergence(format!("{count} modes after 60 restarts")))
}

fn finish(
    m: &SparseSymmetricMatrix,
    k: &SparseSymmetricMatrix,
    vecs: Vec<Vec<f64>>,
    positions: Vec<usize>,
) -> Result<ModeSet, SpectralError> {
    let mut set = ModeSet { indices: Vec::new(), frequencies: Vec::new(), vectors: Vec::new() };
    for p in positions {
        let mut v = vecs[p].clone();
        normalize_mass(m, &mut v);
        fix_sign(&mut v);
        let lambda = k.bilinear(&v, &v);
        let res = eigen_residual(m, k, lambda, &v);
        if res > residual_tolerance(m, k, lambda, &v) {
            return Err(SpectralError::NoConvergence(format!(
                "mode {} residual {res:.3e}",
                p + 1
            )));
        }
        set.indices.push(p + 1);
        set.frequencies.push(lambda.max(0.0).sqrt());
        set.vectors.push(v);
    }
    Ok(set)
}

/// Solves `K φ = ω² M φ` for the selected modes; ascending, mass-normalized, sign-fixed.
pub fn solve_modes(
    m: &SparseSymmetricMatrix,
    k: &SparseSymmetricMatrix,
    selector: &ModeSelector,
) -> Result<ModeSet, SpectralError> {
    let n = m.dim();
    if k.dim() != n {
        return Err(LinAlgError::Dimension { expected: n, got: k.dim() }.into());
    }
    let needed = match selector {
        ModeSelector::Count(c) => {
            if *c == 0 {
                return Err(SpectralError::Selector("zero modes requested".into()));
            }
            *c
        }
        ModeSelector::Indices(list) => {
            if list.is_empty() || list.contains(&0) {
                return Err(SpectralError::Selector("indices are 1-based and nonempty".into()));
            }
            *list.iter().max().expect("nonempty")
        }
        ModeSelector::Window { lo, hi } => {
            if !(lo <= hi) {
                return Err(SpectralError::Selector(format!("empty window [{lo}, {hi}]")));
            }
            0
        }
    };
    if needed > n {
        return Err(SpectralError::IndexBeyondSpectrum { index: needed, available: n });
    }
    let (vals, vecs) = if n <= DENSE_LIMIT {
        dense_all(m, k)?
    } else if let ModeSelector::Window { hi, .. } = selector {
        let mut count = 4usize.min(n);
        loop {
            let (v, x) = sparse_lowest(m, k, count)?;
            let top = v.last().copied().unwrap_or(0.0).max(0.0).sqrt();
            if top > *hi || count >= n {
                break (v, x);
            }
            count = (count * 2).min(n);
        }
    } else {
        sparse_lowest(m, k, needed)?
    };
    let positions: Vec<usize> = match selector {
        ModeSelector::Count(c) => (0..*c).collect(),
        ModeSelector::Indices(list) => list.iter().map(|i| i - 1).collect(),
        ModeSelector::Window { lo, hi } => (0..vals.len())
            .filter(|&i| {
                let w = vals[i].max(0.0).sqrt();
                w >= *lo && w <= *hi
            })
            .collect(),
    };
    finish(m, k, vecs, positions)
}

/// `λ_s = +iω_s`, `λ_{s+n} = −iω_s` for `n` masters, stored as signed frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum {
    omegas: Vec<f64>,
}

impl ComplexSpectrum {
    pub fn new(omegas: &[f64]) -> Result<Self, SpectralError> {
        if omegas.is_empty() {
            return Err(SpectralError::Selector("empty mode set".into()));
        }
        let scale = omegas.iter().fold(0.0f64, |a, w| a.max(w.abs()));
        for (i, w) in omegas.iter().enumerate() {
            if !(*w > 1e-12 * scale.max(1e-300)) {
                return Err(SpectralError::DegenerateFrequency(i));
            }
            if omegas[..i].iter().any(|o| (o - w).abs() <= 1e-13 * scale) {
                return Err(SpectralError::DegenerateFrequency(i));
            }
        }
        Ok(Self { omegas: omegas.to_vec() })
    }

    pub fn from_modes(modes: &ModeSet) -> Result<Self, SpectralError> {
        Self::new(&modes.frequencies)
    }

    /// Number of masters `n`; the state indices run over `0..2n`.
    pub fn masters(&self) -> usize {
        self.omegas.len()
    }

    pub fn omega(&self, master: usize) -> f64 {
        self.omegas[master]
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Underlying master of state index `s`.
    pub fn master_of(&self, s: usize) -> usize {
        s % self.omegas.len()
    }

    /// Conjugate partner `s ± n`.
    pub fn conjugate(&self, s: usize) -> usize {
        let n = self.omegas.len();
        if s < n {
            s + n
        } else {
            s - n
        }
    }

    /// Imaginary part of `λ_s`.
    pub fn lambda_imag(&self, s: usize) -> f64 {
        let n = self.omegas.len();
        if s < n {
            self.omegas[s]
        } else {
            -self.omegas[s - n]
        }
    }

    pub fn lambda(&self, s: usize) -> Complex64 {
        Complex64::new(0.0, self.lambda_imag(s))
    }
}

/// `z_s = ½(r − i s/ω)`, `z_{s+n} = conj(z_s)`.
pub fn z_from_rs(r: f64, s: f64, omega: f64) -> (Complex64, Complex64) {
    let z = Complex64::new(0.5 * r, -0.5 * s / omega);
    (z, z.conj())
}

/// Inverse of [`z_from_rs`]: `r = z + z̄`, `s = iω(z − z̄)`.
pub fn rs_from_z(z: Complex64, zbar: Complex64, omega: f64) -> (f64, f64) {
    let r = z + zbar;
    let s = Complex64::new(0.0, omega) * (z - zbar);
    (r.re, s.re)
}

/// Dense helper used by small eigenproblems: `(ω², φ)` of a symmetric pencil, ascending.
pub fn dense_pencil(m: &DMatrix<f64>, k: &DMatrix<f64>) -> Option<(Vec<f64>, Vec<DVector<f64>>)> {
    let chol = m.clone().cholesky()?;
    let l = chol.l();
    let a = l.solve_lower_triangular(&l.solve_lower_triangular(k)?.transpose())?;
    let eig = SymmetricEigen::new((&a + a.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut vals = Vec::new();
    let mut vecs = Vec::new();
    for i in order {
        vals.push(eig.eigenvalues[i]);
        vecs.push(lt.solve_upper_triangular(&eig.eigenvectors.column(i).into_owned())?);
    }
    Some((vals, vecs))
}
