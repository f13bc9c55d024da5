//! Symmetric sparse storage and direct solvers.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinAlgError {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("index ({row}, {col}) outside a {dim}x{dim} matrix")]
    OutOfBounds { row: usize, col: usize, dim: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("matrix is numerically singular (relative residual {residual:.3e})")]
    Singular { residual: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Real symmetric matrix holding only its upper triangle in compressed rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetricMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetricMatrix {
    /// Builds from `(i, j, v)` triplets; either triangle may be given and duplicates are summed.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self, LinAlgError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(LinAlgError::OutOfBounds { row: i, col: j, dim });
            }
            if !v.is_finite() {
                return Err(LinAlgError::NonFinite { row: i, col: j });
            }
            entries.push((i.min(j), i.max(j), v));
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { dim, row_ptr, cols, vals })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: diag.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored upper-triangle entries.
    pub fn stored_len(&self) -> usize {
        self.vals.len()
    }

    /// Iterates the stored upper triangle as `(i, j, v)` with `i <= j`.
    pub fn iter_upper(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.cols[p], self.vals[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(p) => self.vals[self.row_ptr[i] + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim, "vector length must match matrix dimension");
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.dim {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[p];
                let v = self.vals[p];
                acc += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
            y[i] += acc;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `α A + β B` over the union of both patterns.
    pub fn combine(alpha: f64, a: &Self, beta: f64, b: &Self) -> Self {
        assert_eq!(a.dim, b.dim, "combined matrices must share a dimension");
        let trip = a
            .iter_upper()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(b.iter_upper().map(|(i, j, v)| (i, j, beta * v)));
        Self::from_triplets(a.dim, trip).expect("finite inputs give finite combination")
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Keeps the rows and columns listed in `keep` (ascending original indices).
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.dim];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let trip = self.iter_upper().filter_map(|(i, j, v)| {
            let (a, b) = (map[i], map[j]);
            (a != usize::MAX && b != usize::MAX).then_some((a, b, v))
        });
        Self::from_triplets(keep.len(), trip).expect("restriction of a valid matrix")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.iter_upper()
            .map(|(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.iter_upper() {
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
        d
    }

    pub(crate) fn full_triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        let mut t = Vec::with_capacity(2 * self.vals.len());
        for (i, j, v) in self.iter_upper() {
            t.push(Triplet::new(i, j, v));
            if i != j {
                t.push(Triplet::new(j, i, v));
            }
        }
        t
    }

    fn upper_triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        self.iter_upper().map(|(i, j, v)| Triplet::new(i, j, v)).collect()
    }
}

enum Backend {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// A factorized square operator that can be applied to right-hand sides.
pub struct LinearSolver {
    dim: usize,
    backend: Backend,
    check: Option<(Vec<Triplet<usize, usize, f64>>, f64)>,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.backend {
            Backend::Llt(_) => "llt",
            Backend::Lu(_) => "lu",
        };
        f.debug_struct("LinearSolver").field("dim", &self.dim).field("kind", &kind).finish()
    }
}

impl LinearSolver {
    /// Sparse Cholesky for a symmetric positive definite matrix.
    pub fn cholesky(a: &SparseSymmetricMatrix) -> Result<Self, LinAlgError> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.dim, a.dim, &a.upper_triplets())
            .map_err(|e| LinAlgError::Factorization(format!("{e:?}")))?;
        let llt = mat.sp_cholesky(Side::Upper).map_err(|_| LinAlgError::NotPositiveDefinite)?;
        Ok(Self { dim: a.dim, backend: Backend::Llt(llt), check: None })
    }

    /// Pivoted sparse LU of a symmetric, possibly indefinite matrix.
    pub fn symmetric_indefinite(a: &SparseSymmetricMatrix) -> Result<Self, LinAlgError> {
        Self::general(a.dim, a.full_triplets())
    }

    /// Pivoted sparse LU of a general square matrix given by triplets.
    pub fn general(dim: usize, triplets: Vec<Triplet<usize, usize, f64>>) -> Result<Self, LinAlgError> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &triplets)
            .map_err(|e| LinAlgError::Factorization(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| LinAlgError::Factorization(format!("{e:?}")))?;
        let scale = triplets.iter().map(|t| t.val.abs()).fold(0.0, f64::max);
        Ok(Self { dim, backend: Backend::Lu(lu), check: Some((triplets, scale)) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinAlgError> {
        Ok(self.solve_many(&[b.to_vec()])?.pop().expect("one column"))
    }

    /// Solves for several right-hand sides; pivoted factorizations are residual-checked.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LinAlgError> {
        for b in rhs {
            if b.len() != self.dim {
                return Err(LinAlgError::Dimension { expected: self.dim, got: b.len() });
            }
        }
        let b = Mat::<f64>::from_fn(self.dim, rhs.len(), |i, j| rhs[j][i]);
        let x = match &self.backend {
            Backend::Llt(f) => f.solve(&b),
            Backend::Lu(f) => f.solve(&b),
        };
        let cols: Vec<Vec<f64>> = (0..rhs.len())
            .map(|j| (0..self.dim).map(|i| x[(i, j)]).collect())
            .collect();
        for (xj, bj) in cols.iter().zip(rhs) {
            if xj.iter().any(|v| !v.is_finite()) {
                return Err(LinAlgError::Singular { residual: f64::INFINITY });
            }
            if let Some((trip, scale)) = &self.check {
                let mut r: Vec<f64> = bj.iter().map(|v| -v).collect();
                for t in trip {
                    r[t.row] += t.val * xj[t.col];
                }
                let rn = norm(&r);
                let xn = norm(xj);
                let denom = (scale * xn).max(norm(bj)).max(f64::MIN_POSITIVE);
                let rel = rn / denom;
                if rel > 1e-8 {
                    return Err(LinAlgError::Singular { residual: rel });
                }
            }
        }
        Ok(cols)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `y += α x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SparseSymmetricMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSymmetricMatrix::from_triplets(n, t).unwrap()
    }

    #[test]
    fn duplicates_sum_and_lower_entries_fold() {
        let a = SparseSymmetricMatrix::from_triplets(2, [(1, 0, 1.0), (0, 1, 2.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.stored_len(), 2);
    }

    #[test]
    fn rejects_nan() {
        assert!(SparseSymmetricMatrix::from_triplets(1, [(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let a = laplacian(5);
        let x = [1.0, -2.0, 0.5, 3.0, 1.5];
        let y = a.mul_vec(&x);
        let d = a.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..5 {
            assert!((y[i] - d[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_and_lu_agree() {
        let a = laplacian(6);
        let b = vec![1.0; 6];
        let x1 = LinearSolver::cholesky(&a).unwrap().solve(&b).unwrap();
        let x2 = LinearSolver::symmetric_indefinite(&a).unwrap().solve(&b).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-12);
        }
        let r = a.mul_vec(&x1);
        for v in r {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_solve() {
        let a = SparseSymmetricMatrix::from_triplets(2, [(0, 0, 2.0), (1, 1, -3.0), (0, 1, 1.0)]).unwrap();
        let x = LinearSolver::symmetric_indefinite(&a).unwrap().solve(&[1.0, 2.0]).unwrap();
        assert!((x[0] - 5.0 / 7.0).abs() < 1e-14);
        assert!((x[1] + 3.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SparseSymmetricMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(LinearSolver::cholesky(&a).is_err());
    }

    #[test]
    fn restrict_drops_rows() {
        let a = laplacian(4);
        let r = a.restrict(&[0, 2, 3]);
        assert_eq!(r.dim(), 3);
        assert_eq!(r.get(1, 2), -1.0);
        assert_eq!(r.get(0, 1), 0.0);
    }
}
