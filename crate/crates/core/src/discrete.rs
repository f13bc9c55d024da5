//! Systems given directly in modal coordinates (`M = I`, `K = diag(ω²)`).

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{DofVector, MechanicalSystem, ModelError, NonlinearOperators};
use crate::sparse::SparseSymmetricMatrix;

const SYMMETRY_TOL: f64 = 1e-12;

/// Sparse modal coefficient tables, 0-based internally.
#[derive(Clone, Debug, Default)]
pub struct DiscreteOperators {
    dofs: usize,
    quad: Vec<([usize; 3], f64)>,
    cubic: Vec<([usize; 4], f64)>,
}

impl DiscreteOperators {
    pub fn quadratic_entries(&self) -> &[([usize; 3], f64)] {
        &self.quad
    }

    pub fn cubic_entries(&self) -> &[([usize; 4], f64)] {
        &self.cubic
    }

    /// `g[s][k][l]` (0-based), zero when absent.
    pub fn g(&self, s: usize, k: usize, l: usize) -> f64 {
        self.quad.iter().filter(|(i, _)| *i == [s, k, l]).map(|(_, v)| v).sum()
    }

    /// `h[s][k][l][m]` (0-based), zero when absent.
    pub fn h(&self, s: usize, k: usize, l: usize, m: usize) -> f64 {
        self.cubic.iter().filter(|(i, _)| *i == [s, k, l, m]).map(|(_, v)| v).sum()
    }
}

impl NonlinearOperators for DiscreteOperators {
    fn dof_count(&self) -> usize {
        self.dofs
    }

    fn quadratic(&self, a: &[f64], b: &[f64]) -> DofVector {
        let mut out = vec![0.0; self.dofs];
        for &([s, k, l], v) in &self.quad {
            out[s] += v * a[k] * b[l];
        }
        out
    }

    fn cubic(&self, a: &[f64], b: &[f64], c: &[f64]) -> DofVector {
        let mut out = vec![0.0; self.dofs];
        for &([s, k, l, m], v) in &self.cubic {
            out[s] += v * a[k] * b[l] * c[m];
        }
        out
    }
}

fn collect<const D: usize>(
    n: usize,
    entries: &[([usize; D], f64)],
) -> Result<BTreeMap<[usize; D], f64>, ModelError> {
    let mut map = BTreeMap::new();
    for (idx, v) in entries {
        if !v.is_finite() {
            return Err(ModelError::Invalid(format!("non-finite coefficient at {idx:?}")));
        }
        let mut zero_based = [0usize; D];
        for (d, &i) in idx.iter().enumerate() {
            if i == 0 || i > n {
                return Err(ModelError::Dimension(format!(
                    "index {i} in {idx:?} outside 1..={n}"
                )));
            }
            zero_based[d] = i - 1;
        }
        *map.entry(zero_based).or_insert(0.0) += v;
    }
    Ok(map)
}

fn permutations(tail: &[usize]) -> Vec<Vec<usize>> {
    if tail.len() <= 1 {
        return vec![tail.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..tail.len() {
        let mut rest = tail.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn check_symmetric<const D: usize>(map: &BTreeMap<[usize; D], f64>) -> Result<(), ModelError> {
    for (idx, &v) in map {
        for p in permutations(&idx[1..]) {
            let mut mirror_idx = *idx;
            mirror_idx[1..].copy_from_slice(&p);
            let mirror = map.get(&mirror_idx).copied().unwrap_or(0.0);
            if (mirror - v).abs() > SYMMETRY_TOL * v.abs().max(mirror.abs()) {
                return Err(ModelError::Asymmetric {
                    index: mirror_idx.iter().map(|i| i + 1).collect(),
                    value: v,
                    mirror,
                });
            }
        }
    }
    Ok(())
}

/// Builds the modal system from 1-based coefficient tables.
///
/// Every permutation of the trailing indices must be listed explicitly with the same value.
pub fn build_discrete_system(
    frequencies: &[f64],
    quad_coeffs: &[([usize; 3], f64)],
    cubic_coeffs: &[([usize; 4], f64)],
) -> Result<MechanicalSystem, ModelError> {
    let n = frequencies.len();
    if n == 0 {
        return Err(ModelError::Invalid("no frequencies given".into()));
    }
    if let Some(w) = frequencies.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(ModelError::Invalid(format!("frequency {w} is not positive")));
    }
    let quad = collect(n, quad_coeffs)?;
    let cubic = collect(n, cubic_coeffs)?;
    check_symmetric(&quad)?;
    check_symmetric(&cubic)?;
    let ops = DiscreteOperators {
        dofs: n,
        quad: quad.into_iter().filter(|(_, v)| *v != 0.0).collect(),
        cubic: cubic.into_iter().filter(|(_, v)| *v != 0.0).collect(),
    };
    let mass = SparseSymmetricMatrix::identity(n);
    let stiffness = SparseSymmetricMatrix::from_diagonal(&frequencies.iter().map(|w| w * w).collect::<Vec<_>>());
    MechanicalSystem::new(mass, stiffness, Arc::new(ops), Vec::new())
}

/// JSON layout of a discrete system with 1-based indices.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct DiscreteSystemDoc {
    pub frequencies: Vec<f64>,
    #[serde(default)]
    pub g: Vec<Vec<f64>>,
    #[serde(default)]
    pub h: Vec<Vec<f64>>,
}

fn index_of(x: f64) -> Result<usize, ModelError> {
    if x.fract() != 0.0 || x < 1.0 {
        return Err(ModelError::Parse(format!("index {x} is not a positive integer")));
    }
    Ok(x as usize)
}

impl DiscreteSystemDoc {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn quadratic_table(&self) -> Result<Vec<([usize; 3], f64)>, ModelError> {
        self.g
            .iter()
            .map(|row| match row.as_slice() {
                [s, k, l, v] => Ok(([index_of(*s)?, index_of(*k)?, index_of(*l)?], *v)),
                _ => Err(ModelError::Parse(format!("g entry {row:?} must have 4 numbers"))),
            })
            .collect()
    }

    pub fn cubic_table(&self) -> Result<Vec<([usize; 4], f64)>, ModelError> {
        self.h
            .iter()
            .map(|row| match row.as_slice() {
                [s, k, l, m, v] => {
                    Ok(([index_of(*s)?, index_of(*k)?, index_of(*l)?, index_of(*m)?], *v))
                }
                _ => Err(ModelError::Parse(format!("h entry {row:?} must have 5 numbers"))),
            })
            .collect()
    }

    pub fn build(&self) -> Result<MechanicalSystem, ModelError> {
        build_discrete_system(&self.frequencies, &self.quadratic_table()?, &self.cubic_table()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_cover_all_orders() {
        assert_eq!(permutations(&[1, 2, 3]).len(), 6);
        assert_eq!(permutations(&[1, 2]), vec![vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn json_round_trip() {
        let doc = DiscreteSystemDoc::from_json(r#"{"frequencies":[1.0],"h":[[1,1,1,1,0.5]]}"#).unwrap();
        let sys = doc.build().unwrap();
        let f = sys.full_internal_force(&[2.0]).unwrap();
        assert!((f[0] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn json_rejects_fractional_index() {
        let doc = DiscreteSystemDoc::from_json(r#"{"frequencies":[1.0],"g":[[1.5,1,1,1.0]]}"#).unwrap();
        assert!(doc.build().is_err());
    }
}
