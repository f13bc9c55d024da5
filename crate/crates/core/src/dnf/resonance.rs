//! Second-order resonance detection on the conjugate spectrum.

use serde::{Deserialize, Serialize};

use super::DnfError;
use crate::spectral::ComplexSpectrum;

/// Default relative detuning tolerance.
pub const DEFAULT_EPS_REL: f64 = 0.05;

/// One resonant state-index pair `(k, l)` with `k <= l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceEntry {
    /// State indices (0-based, `s >= n` is the conjugate of `s - n`).
    pub pair: (usize, usize),
    /// `Im(λ_k + λ_l)`.
    pub sigma: f64,
    /// Resonant masters (0-based positions).
    pub modes: Vec<usize>,
    /// Retained `Im f²_{r,k,l}` keyed by target state index, filled after the pair solves.
    #[serde(default)]
    pub retained: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceTable {
    pub eps_rel: f64,
    pub masters: usize,
    pub entries: Vec<ResonanceEntry>,
}

impl ResonanceTable {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entry for `(k, l)` in either order.
    pub fn get(&self, k: usize, l: usize) -> Option<&ResonanceEntry> {
        let key = (k.min(l), k.max(l));
        self.entries.iter().find(|e| e.pair == key)
    }

    /// Masters resonant with any sign combination of the master pair `(a, b)`.
    ///
    /// The pair maps `Ψ^(P)_ab` and `Ψ^(N)_ab` are both constrained against this set so that
    /// the real-valued reduced dynamics keeps only displacement monomials at second order.
    pub fn closure_targets(&self, a: usize, b: usize) -> Vec<usize> {
        let n = self.masters;
        let mut out: Vec<usize> = [(a, b), (a, b + n), (a + n, b), (a + n, b + n)]
            .iter()
            .filter_map(|&(k, l)| self.get(k, l))
            .flat_map(|e| e.modes.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Flags every state pair whose combined frequency lies within `eps_rel` of a master frequency.
pub fn detect_resonances(spectrum: &ComplexSpectrum, eps_rel: f64) -> Result<ResonanceTable, DnfError> {
    if !(eps_rel > 0.0 && eps_rel <= 0.2) {
        return Err(DnfError::InvalidTolerance(eps_rel));
    }
    let n = spectrum.masters();
    let mut entries = Vec::new();
    for k in 0..2 * n {
        for l in k..2 * n {
            let sigma = spectrum.lambda_imag(k) + spectrum.lambda_imag(l);
            let modes: Vec<usize> = (0..n)
                .filter(|&r| {
                    let w = spectrum.omega(r);
                    (sigma.abs() - w).abs() / w < eps_rel
                })
                .collect();
            if !modes.is_empty() {
                entries.push(ResonanceEntry { pair: (k, l), sigma, modes, retained: Vec::new() });
            }
        }
    }
    Ok(ResonanceTable { eps_rel, masters: n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_to_two() {
        let sp = ComplexSpectrum::new(&[1.0, 1.989]).unwrap();
        let t = detect_resonances(&sp, 0.02).unwrap();
        let pairs: Vec<_> = t.entries.iter().map(|e| (e.pair, e.modes.clone())).collect();
        assert_eq!(pairs, vec![((0, 0), vec![1]), ((0, 3), vec![0]), ((1, 2), vec![0]), ((2, 2), vec![1])]);
        assert_eq!(t.closure_targets(0, 0), vec![1]);
        assert_eq!(t.closure_targets(0, 1), vec![0]);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let sp = ComplexSpectrum::new(&[1.0]).unwrap();
        assert!(detect_resonances(&sp, 0.0).is_err());
        assert!(detect_resonances(&sp, 0.3).is_err());
    }
}
