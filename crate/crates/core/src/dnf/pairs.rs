//! Second-order homological solves and the real quadratic maps built from them.

use faer::sparse::Triplet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::resonance::ResonanceTable;
use super::DnfError;
use crate::model::MechanicalSystem;
use crate::sparse::{dot, norm, LinAlgError, LinearSolver, SparseSymmetricMatrix};
use crate::spectral::{ComplexSpectrum, ModeSet};

/// Sign pattern of a master pair: equal signs (`ω_a + ω_b`) or opposite signs (`ω_a − ω_b`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    Plus,
    Minus,
}

impl PairKind {
    pub fn index(self) -> usize {
        match self {
            PairKind::Plus => 0,
            PairKind::Minus => 1,
        }
    }

    /// Kind of the state pair `(k, l)` for `n` masters.
    pub fn of_states(k: usize, l: usize, n: usize) -> Self {
        if (k < n) == (l < n) {
            PairKind::Plus
        } else {
            PairKind::Minus
        }
    }

    /// Shift `μ` of the real operator `K − μ² M`.
    pub fn shift(self, wa: f64, wb: f64) -> f64 {
        match self {
            PairKind::Plus => wa + wb,
            PairKind::Minus => wa - wb,
        }
    }
}

/// Solution of one real pair operator, possibly bordered against resonant masters.
#[derive(Clone, Debug)]
pub struct PairSolution {
    pub a: usize,
    pub b: usize,
    pub kind: PairKind,
    pub psi: Vec<f64>,
    /// Resonant masters the map is made mass-orthogonal to.
    pub targets: Vec<usize>,
    /// Border multipliers, one per target.
    pub multipliers: Vec<f64>,
    /// `Im f²_{r,k,l}` for each target `r`; the conjugate target carries the opposite value.
    pub f2: Vec<f64>,
    /// `‖(K − μ²M)Ψ + MΦ_R y + G‖ / ‖G‖`.
    pub residual: f64,
    /// `max_r |φ_rᵀ M Ψ| / ‖Ψ‖_M` over the targets, zero without targets.
    pub orthogonality: f64,
}

fn shifted(system: &MechanicalSystem, mu: f64) -> SparseSymmetricMatrix {
    SparseSymmetricMatrix::combine(1.0, system.stiffness(), -mu * mu, system.mass())
}

/// Solves `(K − μ²M)Ψ = −G(φ_a, φ_b)`, bordered by `MΦ_R` when `targets` is nonempty.
pub fn solve_real_pair(
    system: &MechanicalSystem,
    modes: &ModeSet,
    a: usize,
    b: usize,
    kind: PairKind,
    targets: &[usize],
) -> Result<PairSolution, DnfError> {
    let n_dof = system.dof_count();
    let (wa, wb) = (modes.frequencies[a], modes.frequencies[b]);
    let mu = kind.shift(wa, wb);
    let g = system.eval_quadratic(&modes.vectors[a], &modes.vectors[b])?;
    let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    let gnorm = norm(&g);
    let op = shifted(system, mu);
    let mphi: Vec<Vec<f64>> = targets.iter().map(|&r| system.mass().mul_vec(&modes.vectors[r])).collect();

    let (psi, multipliers) = if gnorm == 0.0 {
        (vec![0.0; n_dof], vec![0.0; targets.len()])
    } else if targets.is_empty() {
        let solver = if mu == 0.0 {
            LinearSolver::cholesky(&op)
        } else {
            LinearSolver::symmetric_indefinite(&op)
        };
        let solver = solver.map_err(|e| undetected(e, mu, modes))?;
        let mut x = solver.solve(&rhs).map_err(|e| undetected(e, mu, modes))?;
        refine(&solver, &|v: &[f64]| op.mul_vec(v), &rhs, &mut x)?;
        (x, Vec::new())
    } else {
        let dim = n_dof + targets.len();
        let mut trip = op.full_triplets();
        for (j, col) in mphi.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    trip.push(Triplet::new(i, n_dof + j, v));
                    trip.push(Triplet::new(n_dof + j, i, v));
                }
            }
        }
        let apply = |v: &[f64]| {
            let mut out = op.mul_vec(&v[..n_dof]);
            out.resize(dim, 0.0);
            for (j, col) in mphi.iter().enumerate() {
                for i in 0..n_dof {
                    out[i] += col[i] * v[n_dof + j];
                }
                out[n_dof + j] = dot(col, &v[..n_dof]);
            }
            out
        };
        let solver = LinearSolver::general(dim, trip)?;
        let mut full_rhs = rhs.clone();
        full_rhs.resize(dim, 0.0);
        let mut x = solver.solve(&full_rhs)?;
        refine(&solver, &apply, &full_rhs, &mut x)?;
        let y = x.split_off(n_dof);
        (x, y)
    };

    let mut res = op.mul_vec(&psi);
    for (col, y) in mphi.iter().zip(&multipliers) {
        for i in 0..n_dof {
            res[i] += col[i] * y;
        }
    }
    for i in 0..n_dof {
        res[i] += g[i];
    }
    let residual = if gnorm == 0.0 { norm(&res) } else { norm(&res) / gnorm };
    let m_norm = system.mass().bilinear(&psi, &psi).sqrt();
    let orthogonality = mphi
        .iter()
        .map(|c| if m_norm > 0.0 { dot(c, &psi).abs() / m_norm } else { 0.0 })
        .fold(0.0, f64::max);
    let f2 = targets
        .iter()
        .zip(&multipliers)
        .map(|(&r, y)| -y / (2.0 * modes.frequencies[r]))
        .collect();
    Ok(PairSolution { a, b, kind, psi, targets: targets.to_vec(), multipliers, f2, residual, orthogonality })
}

fn undetected(e: LinAlgError, mu: f64, modes: &ModeSet) -> DnfError {
    match e {
        LinAlgError::Singular { .. } | LinAlgError::Factorization(_) | LinAlgError::NotPositiveDefinite => {
            let closest = modes
                .frequencies
                .iter()
                .copied()
                .min_by(|x, y| (x - mu.abs()).abs().total_cmp(&(y - mu.abs()).abs()))
                .unwrap_or(f64::NAN);
            DnfError::UndetectedResonance { sigma: mu, omega_r: closest, detail: e.to_string() }
        }
        other => other.into(),
    }
}

/// One step of iterative refinement with the same factorization.
fn refine(
    solver: &LinearSolver,
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    x: &mut [f64],
) -> Result<(), DnfError> {
    let ax = apply(x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    if norm(&r) == 0.0 {
        return Ok(());
    }
    let d = solver.solve(&r)?;
    for (xi, di) in x.iter_mut().zip(d) {
        *xi += di;
    }
    Ok(())
}

/// Both real pair maps for every unordered master pair `a <= b`.
#[derive(Clone, Debug)]
pub struct QuadraticMapSet {
    masters: usize,
    plus: Vec<PairSolution>,
    minus: Vec<PairSolution>,
}

/// Position of the unordered pair `(a, b)` in the canonical `a <= b` ordering.
pub fn pair_index(a: usize, b: usize, n: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    a * n - a * (a + 1) / 2 + b
}

impl QuadraticMapSet {
    /// Solves all pair maps, constraining each pair against its resonance closure.
    pub fn solve(system: &MechanicalSystem, modes: &ModeSet, table: &ResonanceTable) -> Result<Self, DnfError> {
        let n = modes.len();
        let mut jobs = Vec::new();
        for a in 0..n {
            for b in a..n {
                for kind in [PairKind::Plus, PairKind::Minus] {
                    jobs.push((a, b, kind));
                }
            }
        }
        let solved: Vec<PairSolution> = jobs
            .par_iter()
            .map(|&(a, b, kind)| solve_real_pair(system, modes, a, b, kind, &table.closure_targets(a, b)))
            .collect::<Result<_, _>>()?;
        let (plus, minus): (Vec<_>, Vec<_>) = solved.into_iter().partition(|s| s.kind == PairKind::Plus);
        Ok(Self { masters: n, plus, minus })
    }

    pub fn masters(&self) -> usize {
        self.masters
    }

    pub fn get(&self, kind: PairKind, a: usize, b: usize) -> &PairSolution {
        let i = pair_index(a, b, self.masters);
        match kind {
            PairKind::Plus => &self.plus[i],
            PairKind::Minus => &self.minus[i],
        }
    }

    /// Map of the state pair `(k, l)`.
    pub fn state_map(&self, k: usize, l: usize) -> &PairSolution {
        let n = self.masters;
        self.get(PairKind::of_states(k, l, n), k % n, l % n)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PairSolution> {
        self.plus.iter().chain(self.minus.iter())
    }

    pub fn max_residual(&self) -> f64 {
        self.iter().map(|p| p.residual).fold(0.0, f64::max)
    }

    pub fn max_orthogonality(&self) -> f64 {
        self.iter().map(|p| p.orthogonality).fold(0.0, f64::max)
    }

    /// Real maps `(â, b̂, γ̂)` for the ordered pair `(k, l)`.
    pub fn real_maps(&self, modes: &ModeSet, k: usize, l: usize) -> Result<RealMaps, DnfError> {
        realize_quadratic_maps(
            &self.get(PairKind::Plus, k, l).psi,
            &self.get(PairKind::Minus, k, l).psi,
            modes.frequencies[k],
            modes.frequencies[l],
        )
    }

    /// Writes the retained `Im f²` values into the resonance table entries.
    pub fn fill_retained(&self, table: &mut ResonanceTable) {
        let n = self.masters;
        for e in &mut table.entries {
            let (k, l) = e.pair;
            let sol = self.state_map(k, l);
            e.retained = sol
                .targets
                .iter()
                .zip(&sol.f2)
                .filter(|(r, _)| e.modes.contains(r))
                .flat_map(|(&r, &f)| [(r, f), (r + n, -f)])
                .collect();
        }
    }
}

/// Real displacement and velocity maps of an ordered master pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RealMaps {
    pub a_hat: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub gamma_hat: Vec<f64>,
}

/// `â = ½(Ψ^P + Ψ^N)`, `b̂ = (Ψ^N − Ψ^P)/(2ω_kω_l)`, `γ̂ = ((ω_l+ω_k)/ω_l)Ψ^P + ((ω_l−ω_k)/ω_l)Ψ^N`.
pub fn realize_quadratic_maps(psi_p: &[f64], psi_n: &[f64], wk: f64, wl: f64) -> Result<RealMaps, DnfError> {
    if !(wk > 0.0 && wl > 0.0) {
        return Err(DnfError::InvalidMasters(format!("non-positive frequency ({wk}, {wl})")));
    }
    let cp = (wl + wk) / wl;
    let cn = (wl - wk) / wl;
    let inv = 1.0 / (2.0 * wk * wl);
    Ok(RealMaps {
        a_hat: psi_p.iter().zip(psi_n).map(|(p, q)| 0.5 * (p + q)).collect(),
        b_hat: psi_p.iter().zip(psi_n).map(|(p, q)| (q - p) * inv).collect(),
        gamma_hat: psi_p.iter().zip(psi_n).map(|(p, q)| cp * p + cn * q).collect(),
    })
}

/// `Υ²_{kl} = (λ_k + λ_l)Ψ² + Σ_s f²_{s,k,l} φ_s`, returned as its imaginary part.
///
/// `f2` lists `(state index, Im f²)`; every term is purely imaginary so the result is real.
pub fn velocity_map(
    psi: &[f64],
    f2: &[(usize, f64)],
    spectrum: &ComplexSpectrum,
    k: usize,
    l: usize,
    modes: &ModeSet,
) -> Vec<f64> {
    let sigma = spectrum.lambda_imag(k) + spectrum.lambda_imag(l);
    let mut out: Vec<f64> = psi.iter().map(|v| sigma * v).collect();
    for &(s, f) in f2 {
        let phi = &modes.vectors[spectrum.master_of(s)];
        for (o, p) in out.iter_mut().zip(phi) {
            *o += f * p;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_indexing_is_dense() {
        let n = 4;
        let mut seen = Vec::new();
        for a in 0..n {
            for b in a..n {
                seen.push(pair_index(a, b, n));
            }
        }
        assert_eq!(seen, (0..n * (n + 1) / 2).collect::<Vec<_>>());
        assert_eq!(pair_index(3, 1, n), pair_index(1, 3, n));
    }

    #[test]
    fn degenerate_real_maps() {
        let v = vec![1.0, -2.0];
        let m = realize_quadratic_maps(&v, &v, 1.3, 1.3).unwrap();
        assert_eq!(m.a_hat, v);
        assert_eq!(m.b_hat, vec![0.0, 0.0]);
        assert_eq!(m.gamma_hat, vec![2.0, -4.0]);
    }
}
