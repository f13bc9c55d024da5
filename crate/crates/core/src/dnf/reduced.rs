//! Aggregation of the normal-form pipeline into a serializable reduced model.

use serde::{Deserialize, Serialize};

use super::cubic::{compute_cubic_coefficients, CubicCoefficients};
use super::pairs::{pair_index, PairKind, QuadraticMapSet};
use super::realform::CorrectionTerm;
use super::resonance::{detect_resonances, ResonanceTable};
use super::table::Table;
use super::DnfError;
use crate::model::MechanicalSystem;
use crate::rom::{DampingSpec, DriveSpec};
use crate::spectral::{ComplexSpectrum, ModeSet};

/// Residual summary of the pair solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostic {
    pub a: usize,
    pub b: usize,
    pub kind: PairKind,
    pub targets: Vec<usize>,
    pub residual: f64,
    pub orthogonality: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub pairs: Vec<PairDiagnostic>,
    pub max_residual: f64,
    pub max_orthogonality: f64,
    /// `max |f³_s + f³_{s+n}| / max |f³|`.
    pub antisymmetry_defect: f64,
}

/// Physical vectors needed to map `(r, ṙ)` back to displacements and velocities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingVectors {
    pub dofs: usize,
    /// One master mode per row.
    pub phi: Vec<Vec<f64>>,
    /// `â_{kl}` for `k <= l` in canonical pair order.
    pub a_hat: Vec<Vec<f64>>,
    /// `b̂_{kl}` for `k <= l` in canonical pair order.
    pub b_hat: Vec<Vec<f64>>,
    /// `γ̂_{kl}` for every ordered pair, row `k·n + l`.
    pub gamma_hat: Vec<Vec<f64>>,
}

impl MappingVectors {
    pub fn from_maps(modes: &ModeSet, maps: &QuadraticMapSet) -> Result<Self, DnfError> {
        let n = modes.len();
        let mut a_hat = Vec::new();
        let mut b_hat = Vec::new();
        for k in 0..n {
            for l in k..n {
                let m = maps.real_maps(modes, k, l)?;
                a_hat.push(m.a_hat);
                b_hat.push(m.b_hat);
            }
        }
        let mut gamma_hat = Vec::new();
        for k in 0..n {
            for l in 0..n {
                gamma_hat.push(maps.real_maps(modes, k, l)?.gamma_hat);
            }
        }
        Ok(Self { dofs: modes.vectors.first().map_or(0, Vec::len), phi: modes.vectors.clone(), a_hat, b_hat, gamma_hat })
    }

    pub fn masters(&self) -> usize {
        self.phi.len()
    }

    pub fn a_hat(&self, k: usize, l: usize) -> &[f64] {
        &self.a_hat[pair_index(k, l, self.masters())]
    }

    pub fn b_hat(&self, k: usize, l: usize) -> &[f64] {
        &self.b_hat[pair_index(k, l, self.masters())]
    }

    pub fn gamma_hat(&self, k: usize, l: usize) -> &[f64] {
        &self.gamma_hat[k * self.masters() + l]
    }

    fn rows(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.phi.iter().chain(&self.a_hat).chain(&self.b_hat).chain(&self.gamma_hat)
    }

    /// Little-endian `f64` rows in the order `φ, â, b̂, γ̂`.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.rows().flat_map(|r| r.iter().flat_map(|v| v.to_le_bytes())).collect()
    }

    pub fn from_le_bytes(bytes: &[u8], dofs: usize, masters: usize) -> Result<Self, DnfError> {
        let pairs = masters * (masters + 1) / 2;
        let rows = masters + 2 * pairs + masters * masters;
        if bytes.len() != rows * dofs * 8 {
            return Err(DnfError::Inconsistent(format!(
                "sidecar holds {} bytes, expected {}",
                bytes.len(),
                rows * dofs * 8
            )));
        }
        let mut all: Vec<Vec<f64>> = bytes
            .chunks_exact(dofs * 8)
            .map(|row| row.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
            .collect();
        let gamma_hat = all.split_off(masters + 2 * pairs);
        let b_hat = all.split_off(masters + pairs);
        let a_hat = all.split_off(masters);
        Ok(Self { dofs, phi: all, a_hat, b_hat, gamma_hat })
    }
}

/// Real reduced dynamics `r̈_p + c ṙ_p + ω_p² r_p + f_p(r, ṙ) = κ δ_{pI} cos ωt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub frequencies: Vec<f64>,
    /// 1-based spectrum positions of the masters.
    pub modes: Vec<usize>,
    pub eps_rel: f64,
    pub damping: DampingSpec,
    pub drive: DriveSpec,
    pub resonances: ResonanceTable,
    /// `g_{pkl}`, symmetric in `(k, l)`.
    pub g: Table,
    pub h: Table,
    /// Symmetrized `A`.
    pub a: Table,
    pub b: Table,
    pub p: Table,
    pub q: Table,
    /// Cubic part of `ṙ − s` used by the reconstruction.
    #[serde(default)]
    pub velocity_correction: Vec<CorrectionTerm>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<MappingVectors>,
    /// Relative path of a binary file holding the mapping vectors instead of `maps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps_sidecar: Option<String>,
}

impl ReducedModel {
    pub fn masters(&self) -> usize {
        self.frequencies.len()
    }

    /// `h + A + P`, the coefficient of `r_k r_l r_m`.
    pub fn cubic_displacement(&self) -> Table {
        self.h.sum(&self.a).sum(&self.p)
    }

    /// `B + Q`, the coefficient of `r_k ṙ_l ṙ_m`.
    pub fn cubic_velocity(&self) -> Table {
        self.b.sum(&self.q)
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Moves the mapping vectors out as sidecar bytes and records `name` in their place.
    pub fn detach_maps(&mut self, name: &str) -> Option<Vec<u8>> {
        let maps = self.maps.take()?;
        self.maps_sidecar = Some(name.to_string());
        Some(maps.to_le_bytes())
    }

    /// Inverse of [`detach_maps`](Self::detach_maps).
    pub fn attach_maps(&mut self, bytes: &[u8]) -> Result<(), DnfError> {
        let m = self.masters();
        let rows = m + m * (m + 1) + m * m;
        if bytes.is_empty() || bytes.len() % (rows * 8) != 0 {
            return Err(DnfError::Inconsistent(format!("sidecar of {} bytes does not hold {rows} rows", bytes.len())));
        }
        self.maps = Some(MappingVectors::from_le_bytes(bytes, bytes.len() / (rows * 8), m)?);
        self.maps_sidecar = None;
        Ok(())
    }
}

/// All intermediate products of one normal-form run.
#[derive(Clone, Debug)]
pub struct DnfOutput {
    pub modes: ModeSet,
    pub table: ResonanceTable,
    pub maps: QuadraticMapSet,
    pub cubic: CubicCoefficients,
    pub model: ReducedModel,
}

fn select_masters(modes: &ModeSet, masters: &[usize]) -> Result<ModeSet, DnfError> {
    if masters.is_empty() {
        return Err(DnfError::InvalidMasters("no masters selected".into()));
    }
    let mut sorted = masters.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != masters.len() {
        return Err(DnfError::InvalidMasters(format!("duplicate master in {masters:?}")));
    }
    let positions = sorted
        .iter()
        .map(|m| {
            modes
                .indices
                .iter()
                .position(|i| i == m)
                .ok_or_else(|| DnfError::InvalidMasters(format!("mode {m} not in the computed set {:?}", modes.indices)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(modes.subset(&positions))
}

/// Runs detection, pair solves and third-order coefficients for the listed masters.
///
/// `masters` are 1-based spectrum positions present in `modes`; `driven` is one of them.
pub fn run_dnf(
    system: &MechanicalSystem,
    modes: &ModeSet,
    masters: &[usize],
    eps_rel: f64,
    quality: f64,
    driven: usize,
    kappa: f64,
) -> Result<DnfOutput, DnfError> {
    let sel = select_masters(modes, masters)?;
    let drive_pos = sel
        .indices
        .iter()
        .position(|&i| i == driven)
        .ok_or_else(|| DnfError::InvalidMasters(format!("driven mode {driven} is not a master")))?;
    if !(quality > 0.0) || !(kappa >= 0.0) {
        return Err(DnfError::InvalidMasters(format!("quality {quality} and load {kappa} must be positive")));
    }
    let spectrum = ComplexSpectrum::from_modes(&sel)?;
    let mut table = detect_resonances(&spectrum, eps_rel)?;
    let maps = QuadraticMapSet::solve(system, &sel, &table)?;
    maps.fill_retained(&mut table);
    let mut cubic = compute_cubic_coefficients(system, &sel, &maps)?;
    let antisymmetry_defect = cubic.antisymmetry_defect();
    if table.is_empty() {
        cubic.snap_corrections(1e-8)?;
    }
    let pairs: Vec<PairDiagnostic> = maps
        .iter()
        .map(|p| PairDiagnostic {
            a: p.a,
            b: p.b,
            kind: p.kind,
            targets: p.targets.clone(),
            residual: p.residual,
            orthogonality: p.orthogonality,
        })
        .collect();
    let diagnostics = Diagnostics {
        max_residual: maps.max_residual(),
        max_orthogonality: maps.max_orthogonality(),
        antisymmetry_defect,
        pairs,
    };
    let model = ReducedModel {
        frequencies: sel.frequencies.clone(),
        modes: sel.indices.clone(),
        eps_rel,
        damping: DampingSpec { quality, omega_ref: sel.frequencies[drive_pos] },
        drive: DriveSpec { master: drive_pos, kappa },
        resonances: table.clone(),
        g: cubic.g.clone(),
        h: cubic.h.clone(),
        a: cubic.a.clone(),
        b: cubic.b.clone(),
        p: cubic.p.clone(),
        q: cubic.q.clone(),
        velocity_correction: cubic.velocity_correction.clone(),
        diagnostics,
        maps: Some(MappingVectors::from_maps(&sel, &maps)?),
        maps_sidecar: None,
    };
    Ok(DnfOutput { modes: sel, table, maps, cubic, model })
}

/// Reduced model for `masters`, damped by `ω_I/Q` and driven on master `driven` with load `κ`.
pub fn build_reduced_model(
    system: &MechanicalSystem,
    modes: &ModeSet,
    masters: &[usize],
    eps_rel: f64,
    quality: f64,
    driven: usize,
    kappa: f64,
) -> Result<ReducedModel, DnfError> {
    Ok(run_dnf(system, modes, masters, eps_rel, quality, driven, kappa)?.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_round_trip() {
        let mv = MappingVectors {
            dofs: 2,
            phi: vec![vec![1.0, 2.0]],
            a_hat: vec![vec![3.0, 4.0]],
            b_hat: vec![vec![5.0, 6.0]],
            gamma_hat: vec![vec![7.0, 8.0]],
        };
        let back = MappingVectors::from_le_bytes(&mv.to_le_bytes(), 2, 1).unwrap();
        assert_eq!(mv, back);
        assert!(MappingVectors::from_le_bytes(&mv.to_le_bytes()[8..], 2, 1).is_err());
    }
}
