//! Third-order reduced-dynamics coefficients and their real-valued tables.

use rayon::prelude::*;

use super::pairs::{pair_index, PairKind, QuadraticMapSet};
use super::realform::{real_form, CorrectionTerm};
use super::table::Table;
use super::DnfError;
use crate::model::MechanicalSystem;
use crate::sparse::dot;
use crate::spectral::{ComplexSpectrum, ModeSet};

/// Modal projections of the nonlinear operators needed at third order.
#[derive(Clone, Debug)]
pub struct Projections {
    n: usize,
    /// `φ_sᵀ M Ψ^kind_ab`, indexed `[kind][pair][s]`.
    pub psi: [Vec<Vec<f64>>; 2],
    /// `φ_sᵀ G(Ψ^kind_ab, φ_c)`, indexed `[kind][pair][c][s]`.
    pub g_psi: [Vec<Vec<Vec<f64>>>; 2],
    /// `φ_sᵀ H(φ_k, φ_l, φ_m)`.
    pub h: Table,
}

impl Projections {
    pub fn compute(system: &MechanicalSystem, modes: &ModeSet, maps: &QuadraticMapSet) -> Result<Self, DnfError> {
        let n = modes.len();
        let mphi: Vec<Vec<f64>> = modes.vectors.iter().map(|v| system.mass().mul_vec(v)).collect();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
        let mut psi: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        let mut g_psi: [Vec<Vec<Vec<f64>>>; 2] = [Vec::new(), Vec::new()];
        for kind in [PairKind::Plus, PairKind::Minus] {
            let blocks: Vec<(Vec<f64>, Vec<Vec<f64>>)> = pairs
                .par_iter()
                .map(|&(a, b)| {
                    let v = &maps.get(kind, a, b).psi;
                    let proj = mphi.iter().map(|m| dot(m, v)).collect();
                    let g = modes
                        .vectors
                        .iter()
                        .map(|phi_c| {
                            let gv = system.eval_quadratic(v, phi_c)?;
                            Ok(modes.vectors.iter().map(|phi_s| dot(phi_s, &gv)).collect())
                        })
                        .collect::<Result<Vec<Vec<f64>>, DnfError>>()?;
                    Ok((proj, g))
                })
                .collect::<Result<_, DnfError>>()?;
            for (p, g) in blocks {
                psi[kind.index()].push(p);
                g_psi[kind.index()].push(g);
            }
        }
        let triples: Vec<[usize; 3]> = (0..n)
            .flat_map(|k| (k..n).flat_map(move |l| (l..n).map(move |m| [k, l, m])))
            .collect();
        let hv: Vec<Vec<f64>> = triples
            .par_iter()
            .map(|&[k, l, m]| {
                let v = system.eval_cubic(&modes.vectors[k], &modes.vectors[l], &modes.vectors[m])?;
                Ok(modes.vectors.iter().map(|phi| dot(phi, &v)).collect())
            })
            .collect::<Result<_, DnfError>>()?;
        let mut h = Table::zeros(n, 4);
        for (t, proj) in triples.iter().zip(&hv) {
            for perm in permutations3(*t) {
                for (s, v) in proj.iter().enumerate() {
                    h.set(&[s, perm[0], perm[1], perm[2]], *v);
                }
            }
        }
        Ok(Self { n, psi, g_psi, h })
    }

    /// `φ_sᵀ M Ψ²_{kl}` for state indices `k, l` and master `s`.
    pub fn psi_state(&self, s: usize, k: usize, l: usize) -> f64 {
        let kind = PairKind::of_states(k, l, self.n);
        self.psi[kind.index()][pair_index(k % self.n, l % self.n, self.n)][s]
    }

    /// `φ_sᵀ G(Ψ²_{kl}, φ_c)` for state indices `k, l` and masters `c, s`.
    pub fn g_state(&self, s: usize, k: usize, l: usize, c: usize) -> f64 {
        let kind = PairKind::of_states(k, l, self.n);
        self.g_psi[kind.index()][pair_index(k % self.n, l % self.n, self.n)][c][s]
    }
}

fn permutations3([a, b, c]: [usize; 3]) -> Vec<[usize; 3]> {
    let mut v = vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
    v.sort_unstable();
    v.dedup();
    v
}

/// Complex reduced-dynamics coefficients (imaginary parts) and the real tables derived from them.
#[derive(Clone, Debug)]
pub struct CubicCoefficients {
    /// `Im f²_{s,k,l}` over state indices.
    pub f2: Table,
    /// `Im f³_{s,k,l,m}` over state indices, in the ordered (unsymmetrized) form.
    pub f3: Table,
    /// Quadratic restoring-force table `g_{pkl}`, symmetric in `(k, l)`.
    pub g: Table,
    pub h: Table,
    /// `A` symmetrized over its three trailing indices.
    pub a: Table,
    /// `B`, symmetric in its last two indices.
    pub b: Table,
    pub p: Table,
    pub q: Table,
    /// Cubic part of `ṙ − s`, nonzero only under second-order resonance.
    pub velocity_correction: Vec<CorrectionTerm>,
}

/// Dense `Im f²` over state indices from the solved pair maps.
pub fn quadratic_coefficients(maps: &QuadraticMapSet) -> Table {
    let n = maps.masters();
    let mut f2 = Table::zeros(2 * n, 3);
    for k in 0..2 * n {
        for l in 0..2 * n {
            let sol = maps.state_map(k, l);
            for (&r, &f) in sol.targets.iter().zip(&sol.f2) {
                f2.set(&[r, k, l], f);
                f2.set(&[r + n, k, l], -f);
            }
        }
    }
    f2
}

pub fn compute_cubic_coefficients(
    system: &MechanicalSystem,
    modes: &ModeSet,
    maps: &QuadraticMapSet,
) -> Result<CubicCoefficients, DnfError> {
    let proj = Projections::compute(system, modes, maps)?;
    cubic_from_projections(&proj, modes, maps)
}

/// Third-order coefficients from precomputed projections.
pub fn cubic_from_projections(
    proj: &Projections,
    modes: &ModeSet,
    maps: &QuadraticMapSet,
) -> Result<CubicCoefficients, DnfError> {
    let n = modes.len();
    let spectrum = ComplexSpectrum::from_modes(modes)?;
    let f2 = quadratic_coefficients(maps);
    let nn = 2 * n;
    let sigma = |k: usize, l: usize| spectrum.lambda_imag(k) + spectrum.lambda_imag(l);
    // Im of the velocity-map projection φ_sᵀMΥ²_{kl}.
    let upsilon =
        |s: usize, k: usize, l: usize| sigma(k, l) * proj.psi_state(s, k, l) + f2.get(&[s, k, l]) + f2.get(&[s + n, k, l]);

    let mut f3 = Table::zeros(nn, 4);
    for s in 0..n {
        let w = spectrum.omega(s);
        for k in 0..nn {
            for l in 0..nn {
                for m in 0..nn {
                    let xi = proj.g_state(s, k, l, m % n)
                        + proj.g_state(s, l, m, k % n)
                        + proj.h.get(&[s, k % n, l % n, m % n]);
                    let mut rhs = -xi;
                    let mut bb = 0.0;
                    for p in 0..nn {
                        let fkl = f2.get(&[p, k, l]);
                        let flm = f2.get(&[p, l, m]);
                        if fkl != 0.0 {
                            rhs += upsilon(s, p, m) * fkl;
                            bb -= proj.psi_state(s, p, m) * fkl;
                        }
                        if flm != 0.0 {
                            rhs += upsilon(s, k, p) * flm;
                            bb -= proj.psi_state(s, k, p) * flm;
                        }
                    }
                    f3.set(&[s, k, l, m], 0.5 * (bb - rhs / w));
                    f3.set(&[s + n, k, l, m], 0.5 * (bb + rhs / w));
                }
            }
        }
    }

    let real = real_form(spectrum.omegas(), &f2, &f3)?;

    let h = proj.h.clone();
    let mut a_raw = Table::zeros(n, 4);
    let mut b = Table::zeros(n, 4);
    for p in 0..n {
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let gp = proj.g_psi[0][pair_index(l, m, n)][k][p];
                    let gn = proj.g_psi[1][pair_index(l, m, n)][k][p];
                    a_raw.set(&[p, k, l, m], gp + gn);
                    b.set(&[p, k, l, m], (gn - gp) / (spectrum.omega(l) * spectrum.omega(m)));
                }
            }
        }
    }
    let a = a_raw.symmetrized_from(1);
    let p = real.total_rrr.difference(&h.sum(&a));
    let q = real.total_rvv.difference(&b);
    Ok(CubicCoefficients {
        f2,
        f3,
        g: real.g,
        h,
        a,
        b,
        p,
        q,
        velocity_correction: real.velocity_correction,
    })
}

impl CubicCoefficients {
    /// Largest `|f³_s + f³_{s+n}|` relative to the largest `|f³|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let nn = self.f3.size();
        let n = nn / 2;
        let scale = self.f3.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for s in 0..n {
            for k in 0..nn {
                for l in 0..nn {
                    for m in 0..nn {
                        let d = self.f3.get(&[s, k, l, m]) + self.f3.get(&[s + n, k, l, m]);
                        worst = worst.max(d.abs());
                    }
                }
            }
        }
        worst / scale
    }

    /// Sets `P` and `Q` to exact zeros when they are round-off relative to the cubic tables.
    pub fn snap_corrections(&mut self, rel_tol: f64) -> Result<(), DnfError> {
        let scale = self.h.max_abs().max(self.a.max_abs()).max(self.b.max_abs()).max(f64::MIN_POSITIVE);
        let worst = self.p.max_abs().max(self.q.max_abs());
        if worst > rel_tol * scale {
            return Err(DnfError::Inconsistent(format!(
                "resonance corrections of size {worst:e} without resonance (scale {scale:e})"
            )));
        }
        let n = self.p.size();
        self.p = Table::zeros(n, 4);
        self.q = Table::zeros(n, 4);
        Ok(())
    }
}
