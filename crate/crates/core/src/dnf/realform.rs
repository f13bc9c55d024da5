//! Conversion of the complex normal form to real oscillator equations in `(r, ṙ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Poly;
use super::table::Table;
use super::DnfError;

const ZERO_TOL: f64 = 1e-9;

/// One monomial of `ṙ_eq − s_eq`; variables below `n` are `r`, the others are `s` (read as `ṙ`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTerm {
    pub equation: usize,
    pub vars: [usize; 3],
    pub coeff: f64,
}

#[derive(Clone, Debug)]
pub struct RealForm {
    pub g: Table,
    pub total_rrr: Table,
    pub total_rvv: Table,
    pub velocity_correction: Vec<CorrectionTerm>,
}

fn i() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

/// `z_k` in terms of `(r, s)`: `½ r − i s /(2ω)` and its conjugate for `k >= n`.
fn z_poly(k: usize, omegas: &[f64]) -> Poly {
    let n = omegas.len();
    let a = k % n;
    let sign = if k < n { -1.0 } else { 1.0 };
    let mut p = Poly::var(a, Complex64::new(0.5, 0.0));
    p.add_term(vec![n + a], Complex64::new(0.0, sign * 0.5 / omegas[a]));
    p
}

fn distinct_permutations(idx: &[usize]) -> f64 {
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    let mut counts = std::collections::BTreeMap::new();
    for &i in idx {
        *counts.entry(i).or_insert(0usize) += 1;
    }
    fact(idx.len()) / counts.values().map(|&c| fact(c)).product::<f64>()
}

fn check_small(what: &str, value: f64, scale: f64) -> Result<(), DnfError> {
    if value > ZERO_TOL * scale {
        return Err(DnfError::Inconsistent(format!("{what}: {value:e} against scale {scale:e}")));
    }
    Ok(())
}

/// Real restoring-force tables of `r̈_p + ω_p² r_p + f_p(r, ṙ) = 0` from `Im f²`, `Im f³`.
pub fn real_form(omegas: &[f64], f2: &Table, f3: &Table) -> Result<RealForm, DnfError> {
    let n = omegas.len();
    let nn = 2 * n;
    let z: Vec<Poly> = (0..nn).map(|k| z_poly(k, omegas)).collect();

    let mut nonlinear = vec![Poly::zero(); nn];
    for (s, out) in nonlinear.iter_mut().enumerate() {
        for k in 0..nn {
            for l in k..nn {
                let c = f2.get(&[s, k, l]) + if k != l { f2.get(&[s, l, k]) } else { 0.0 };
                if c != 0.0 {
                    out.add_scaled(i() * c, &z[k].mul(&z[l]));
                }
            }
        }
        for k in 0..nn {
            for l in k..nn {
                let zkl = z[k].mul(&z[l]);
                for m in l..nn {
                    let mut c = 0.0;
                    for perm in unique_perms([k, l, m]) {
                        c += f3.get(&[s, perm[0], perm[1], perm[2]]);
                    }
                    if c != 0.0 {
                        out.add_scaled(i() * c, &zkl.mul(&z[m]));
                    }
                }
            }
        }
    }

    let mut total_g = Table::zeros(n, 3);
    let mut total_rrr = Table::zeros(n, 4);
    let mut total_rvv = Table::zeros(n, 4);
    let mut velocity_correction = Vec::new();
    for a in 0..n {
        let mut rdot = nonlinear[a].clone();
        rdot.add_scaled(Complex64::new(1.0, 0.0), &nonlinear[a + n]);
        let mut diff = nonlinear[a].clone();
        diff.add_scaled(Complex64::new(-1.0, 0.0), &nonlinear[a + n]);
        let mut sdot = Poly::zero();
        sdot.add_scaled(i() * omegas[a], &diff);

        let scale = rdot.max_abs().max(sdot.max_abs()).max(f64::MIN_POSITIVE);
        check_small("imaginary part of the real dynamics", rdot.max_imag().max(sdot.max_imag()), scale)?;
        check_small("quadratic terms in the displacement equation", rdot.homogeneous(2).max_abs(), scale)?;
        let cr = rdot.homogeneous(3);

        let mut rhs = sdot.homogeneous(2);
        rhs.add_scaled(Complex64::new(1.0, 0.0), &sdot.homogeneous(3));
        for j in 0..n {
            rhs.add_scaled(Complex64::new(1.0, 0.0), &cr.derivative(j).mul(&Poly::var(n + j, Complex64::new(1.0, 0.0))));
            rhs.add_scaled(
                Complex64::new(1.0, 0.0),
                &cr.derivative(n + j).mul(&Poly::var(j, Complex64::new(-omegas[j] * omegas[j], 0.0))),
            );
        }
        let scale = rhs.max_abs().max(f64::MIN_POSITIVE);
        check_small("imaginary part of the oscillator form", rhs.max_imag(), scale)?;

        for (mono, c) in rhs.iter() {
            let force = -c.re;
            let rs = mono.iter().filter(|&&v| v < n).count();
            match (mono.len(), rs) {
                (2, 2) => {
                    let (k, l) = (mono[0], mono[1]);
                    if k == l {
                        total_g.add(&[a, k, k], force);
                    } else {
                        total_g.add(&[a, k, l], 0.5 * force);
                        total_g.add(&[a, l, k], 0.5 * force);
                    }
                }
                (3, 3) => {
                    let np = distinct_permutations(mono);
                    for perm in unique_perms([mono[0], mono[1], mono[2]]) {
                        total_rrr.add(&[a, perm[0], perm[1], perm[2]], force / np);
                    }
                }
                (3, 1) => {
                    let (k, l, m) = (mono[0], mono[1] - n, mono[2] - n);
                    if l == m {
                        total_rvv.add(&[a, k, l, l], force);
                    } else {
                        total_rvv.add(&[a, k, l, m], 0.5 * force);
                        total_rvv.add(&[a, k, m, l], 0.5 * force);
                    }
                }
                _ => check_small(&format!("monomial {mono:?} in the oscillator form"), c.norm(), scale)?,
            }
        }
        for (mono, c) in cr.iter() {
            if c.re != 0.0 {
                velocity_correction.push(CorrectionTerm { equation: a, vars: [mono[0], mono[1], mono[2]], coeff: c.re });
            }
        }
    }
    Ok(RealForm { g: total_g, total_rrr, total_rvv, velocity_correction })
}

fn unique_perms([a, b, c]: [usize; 3]) -> Vec<[usize; 3]> {
    let mut v = vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
    v.sort_unstable();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_counts() {
        assert_eq!(distinct_permutations(&[1, 1, 1]), 1.0);
        assert_eq!(distinct_permutations(&[1, 1, 2]), 3.0);
        assert_eq!(distinct_permutations(&[0, 1, 2]), 6.0);
    }

    #[test]
    fn duffing_cubic_term() {
        // Single mode: Im f³ chosen so that the oscillator force is h r³.
        let w = 1.5;
        let h = 0.7;
        let mut f3 = Table::zeros(2, 4);
        // Im f³_s = h/(2ω) on every ordered monomial gives ṡ = −h r³.
        for k in 0..2 {
            for l in 0..2 {
                for m in 0..2 {
                    f3.set(&[0, k, l, m], h / (2.0 * w));
                    f3.set(&[1, k, l, m], -h / (2.0 * w));
                }
            }
        }
        let rf = real_form(&[w], &Table::zeros(2, 3), &f3).unwrap();
        assert!((rf.total_rrr.get(&[0, 0, 0, 0]) - h).abs() < 1e-14);
        assert!(rf.velocity_correction.is_empty());
    }
}
