//! Unstructured volume meshes with named node sets.

use std::collections::BTreeMap;

use crate::quadrature::{rule, shape, ElementKind, RuleChoice};
use crate::FeError;

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 3]>,
    /// Connectivity, `kind.nodes()` entries per element.
    pub elements: Vec<Vec<usize>>,
    pub kind: ElementKind,
    /// Named node sets, sorted and deduplicated.
    pub sets: BTreeMap<String, Vec<usize>>,
}

/// Determinant and inverse-transpose of a 3×3 Jacobian.
pub(crate) fn invert(j: &[[f64; 3]; 3]) -> (f64, [[f64; 3]; 3]) {
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    let c = |r: usize, s: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (s1, s2) = ((s + 1) % 3, (s + 2) % 3);
        j[r1][s1] * j[r2][s2] - j[r1][s2] * j[r2][s1]
    };
    // inverse-transpose entries are cofactor / det
    let mut it = [[0.0; 3]; 3];
    for (r, row) in it.iter_mut().enumerate() {
        for (s, v) in row.iter_mut().enumerate() {
            *v = c(r, s) / det;
        }
    }
    (det, it)
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Three displacement components per node.
    pub fn dof_count(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn set(&self, name: &str) -> Result<&[usize], FeError> {
        self.sets.get(name).map(Vec::as_slice).ok_or_else(|| FeError::MissingSet(name.to_string()))
    }

    /// Jacobian `∂X/∂ξ` of element `e` at reference point `p`.
    pub(crate) fn jacobian(&self, e: usize, p: [f64; 3], values: &mut [f64], derivs: &mut [[f64; 3]]) -> [[f64; 3]; 3] {
        shape(self.kind, p, values, derivs);
        let mut j = [[0.0; 3]; 3];
        for (a, &node) in self.elements[e].iter().enumerate() {
            let x = self.nodes[node];
            for r in 0..3 {
                for s in 0..3 {
                    j[r][s] += x[r] * derivs[a][s];
                }
            }
        }
        j
    }

    /// Checks connectivity bounds and positive Jacobians at every integration point.
    pub fn validate(&self) -> Result<(), FeError> {
        let nn = self.kind.nodes();
        let n = self.nodes.len();
        for (e, conn) in self.elements.iter().enumerate() {
            if conn.len() != nn {
                return Err(FeError::Mesh(format!("element {e} has {} nodes, expected {nn}", conn.len())));
            }
            if let Some(&bad) = conn.iter().find(|&&c| c >= n) {
                return Err(FeError::Mesh(format!("element {e} references node {bad} of {n}")));
            }
        }
        for (name, set) in &self.sets {
            if let Some(&bad) = set.iter().find(|&&c| c >= n) {
                return Err(FeError::Mesh(format!("set {name} references node {bad} of {n}")));
            }
        }
        let mut values = vec![0.0; nn];
        let mut derivs = vec![[0.0; 3]; nn];
        for choice in [RuleChoice::Standard, RuleChoice::Mass] {
            let r = rule(self.kind, choice);
            for e in 0..self.elements.len() {
                for p in &r.points {
                    let (det, _) = invert(&self.jacobian(e, *p, &mut values, &mut derivs));
                    if !(det > 0.0) {
                        return Err(FeError::NegativeJacobian { element: e, det });
                    }
                }
            }
        }
        Ok(())
    }

    /// Total volume from the standard rule.
    pub fn volume(&self) -> f64 {
        let nn = self.kind.nodes();
        let mut values = vec![0.0; nn];
        let mut derivs = vec![[0.0; 3]; nn];
        let r = rule(self.kind, RuleChoice::Standard);
        let mut v = 0.0;
        for e in 0..self.elements.len() {
            for (p, w) in r.points.iter().zip(&r.weights) {
                v += w * invert(&self.jacobian(e, *p, &mut values, &mut derivs)).0;
            }
        }
        v
    }

    /// Nodes satisfying `pred`, useful for ad hoc boundary sets.
    pub fn nodes_where(&self, pred: impl Fn([f64; 3]) -> bool) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| pred(self.nodes[i])).collect()
    }
}
