//! Reference shape functions and integration rules.

use serde::{Deserialize, Serialize};

/// Supported continuum elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    /// Trilinear 8-node hexahedron.
    Hex8,
    /// Quadratic 10-node tetrahedron.
    Tet10,
}

impl ElementKind {
    pub fn nodes(self) -> usize {
        match self {
            ElementKind::Hex8 => 8,
            ElementKind::Tet10 => 10,
        }
    }
}

/// Integration points in reference coordinates with their weights.
#[derive(Clone, Debug)]
pub struct Rule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Which rule an assembly uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleChoice {
    /// 2×2×2 Gauss for hexahedra, 4 points for tetrahedra.
    Standard,
    /// One order higher: 3×3×3 Gauss and a 14-point degree-5 tetrahedral rule.
    Raised,
    /// Rule exact for the consistent mass integrand.
    Mass,
}

/// Tetrahedral edges in node order 4..9.
pub const TET10_EDGES: [[usize; 2]; 6] = [[0, 1], [1, 2], [0, 2], [0, 3], [2, 3], [1, 3]];

/// Corner signs of the hexahedron in node order.
pub const HEX8_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

fn gauss_1d(n: usize) -> Vec<(f64, f64)> {
    match n {
        2 => {
            let a = 1.0 / 3f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (0.6f64).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        _ => unreachable!("only 2- and 3-point Gauss rules are used"),
    }
}

fn tensor_rule(n: usize) -> Rule {
    let g = gauss_1d(n);
    let mut rule = Rule { points: Vec::new(), weights: Vec::new() };
    for &(z, wz) in &g {
        for &(y, wy) in &g {
            for &(x, wx) in &g {
                rule.points.push([x, y, z]);
                rule.weights.push(wx * wy * wz);
            }
        }
    }
    rule
}

/// Points of a barycentric orbit mapped to `(L1, L2, L3)`.
fn push_orbit(rule: &mut Rule, bary: &[[f64; 4]], weight: f64) {
    for b in bary {
        rule.points.push([b[1], b[2], b[3]]);
        rule.weights.push(weight);
    }
}

fn orbit_31(a: f64) -> Vec<[f64; 4]> {
    let b = 1.0 - 3.0 * a;
    vec![[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]]
}

fn orbit_22(a: f64) -> Vec<[f64; 4]> {
    let b = 0.5 - a;
    vec![[a, a, b, b], [a, b, a, b], [a, b, b, a], [b, a, a, b], [b, a, b, a], [b, b, a, a]]
}

fn tet_rule_4() -> Rule {
    let mut rule = Rule { points: Vec::new(), weights: Vec::new() };
    push_orbit(&mut rule, &orbit_31(0.138_196_601_125_010_5), 1.0 / 24.0);
    rule
}

fn tet_rule_14() -> Rule {
    let mut rule = Rule { points: Vec::new(), weights: Vec::new() };
    push_orbit(&mut rule, &orbit_31(0.310_885_919_263_300_6), 0.112_687_925_718_015_9 / 6.0);
    push_orbit(&mut rule, &orbit_31(0.092_735_250_310_891_2), 0.073_493_043_116_361_9 / 6.0);
    push_orbit(&mut rule, &orbit_22(0.045_503_704_125_649_6), 0.042_546_020_777_081_2 / 6.0);
    rule
}

pub fn rule(kind: ElementKind, choice: RuleChoice) -> Rule {
    match (kind, choice) {
        (ElementKind::Hex8, RuleChoice::Standard | RuleChoice::Mass) => tensor_rule(2),
        (ElementKind::Hex8, RuleChoice::Raised) => tensor_rule(3),
        (ElementKind::Tet10, RuleChoice::Standard) => tet_rule_4(),
        (ElementKind::Tet10, RuleChoice::Raised | RuleChoice::Mass) => tet_rule_14(),
    }
}

/// Shape values and reference derivatives at `p`.
pub fn shape(kind: ElementKind, p: [f64; 3], values: &mut [f64], derivs: &mut [[f64; 3]]) {
    match kind {
        ElementKind::Hex8 => {
            for (a, c) in HEX8_CORNERS.iter().enumerate() {
                let f = [1.0 + c[0] * p[0], 1.0 + c[1] * p[1], 1.0 + c[2] * p[2]];
                values[a] = 0.125 * f[0] * f[1] * f[2];
                derivs[a] = [0.125 * c[0] * f[1] * f[2], 0.125 * f[0] * c[1] * f[2], 0.125 * f[0] * f[1] * c[2]];
            }
        }
        ElementKind::Tet10 => {
            let l = [1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]];
            let dl = [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            for i in 0..4 {
                values[i] = l[i] * (2.0 * l[i] - 1.0);
                let s = 4.0 * l[i] - 1.0;
                derivs[i] = [s * dl[i][0], s * dl[i][1], s * dl[i][2]];
            }
            for (e, &[i, j]) in TET10_EDGES.iter().enumerate() {
                values[4 + e] = 4.0 * l[i] * l[j];
                derivs[4 + e] = std::array::from_fn(|d| 4.0 * (dl[i][d] * l[j] + l[i] * dl[j][d]));
            }
        }
    }
}
