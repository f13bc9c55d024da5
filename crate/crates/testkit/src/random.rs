//! Randomized modal systems with fully symmetric polynomial potentials.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// 1-based coefficient lists with every index permutation listed explicitly.
#[derive(Clone, Debug)]
pub struct RandomModal {
    pub omegas: Vec<f64>,
    pub g: Vec<([usize; 3], f64)>,
    pub h: Vec<([usize; 4], f64)>,
}

fn perms<const D: usize>(idx: [usize; D]) -> Vec<[usize; D]> {
    let mut out = vec![idx];
    let mut i = 0;
    while i < out.len() {
        let cur = out[i];
        for a in 0..D {
            for b in a + 1..D {
                let mut p = cur;
                p.swap(a, b);
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        i += 1;
    }
    out
}

/// Coefficients derived from a random cubic plus quartic potential, so that `g` and `h` are
/// symmetric in all indices.
pub fn random_potential(omegas: &[f64], seed: u64, density: f64) -> RandomModal {
    let n = omegas.len();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut g = Vec::new();
    let mut h = Vec::new();
    for j in 0..n {
        for k in j..n {
            for l in k..n {
                if rng.gen::<f64>() < density {
                    let v = rng.gen_range(-1.0..1.0);
                    for p in perms([j + 1, k + 1, l + 1]) {
                        g.push((p, v));
                    }
                }
                for m in l..n {
                    if rng.gen::<f64>() < density {
                        let v = rng.gen_range(0.1..1.0);
                        for p in perms([j + 1, k + 1, l + 1, m + 1]) {
                            h.push((p, v));
                        }
                    }
                }
            }
        }
    }
    RandomModal { omegas: omegas.to_vec(), g, h }
}

/// Coefficients symmetric only in their trailing indices, as for non-conservative forces.
pub fn random_trailing_symmetric(omegas: &[f64], seed: u64, density: f64) -> RandomModal {
    let n = omegas.len();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut g = Vec::new();
    let mut h = Vec::new();
    for j in 0..n {
        for k in 0..n {
            for l in k..n {
                if rng.gen::<f64>() < density {
                    let v = rng.gen_range(-1.0..1.0);
                    for [a, b] in perms([k + 1, l + 1]) {
                        g.push(([j + 1, a, b], v));
                    }
                }
                for m in l..n {
                    if rng.gen::<f64>() < density {
                        let v = rng.gen_range(-1.0..1.0);
                        for [a, b, c] in perms([k + 1, l + 1, m + 1]) {
                            h.push(([j + 1, a, b, c], v));
                        }
                    }
                }
            }
        }
    }
    RandomModal { omegas: omegas.to_vec(), g, h }
}
