//! Stage sequence: system, modes, reduced model, frequency responses.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use dnf_core::dnf::{run_dnf, DnfOutput, Table};
use dnf_core::spectral::residual_tolerance;
use dnf_core::{reconstruct_physical, solve_modes, DiscreteSystemDoc, MechanicalSystem, ModeSet, ReducedModel, RomState};
use dnf_fe::{generate_mesh, parse_msh, FeModel, Mesh};
use dnf_solvers::{hb_continue, Branch, Ode};

use crate::artifacts::{fmt17, frf_name, modes_csv, ArtifactWriter};
use crate::config::{PipelineConfig, SystemSource};
use crate::PipelineError;

/// Relative homological residual every pair must satisfy.
pub const HOMOLOGICAL_TOL: f64 = 1e-9;
/// Mass-orthogonality of resonant pair maps to their targets.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Samples per period when reconstructing physical amplitudes.
const PHYSICAL_SAMPLES: usize = 64;

#[derive(Debug)]
pub struct RunSummary {
    pub report: Value,
    pub files: Vec<PathBuf>,
    /// Residual thresholds violated by the run.
    pub failures: Vec<String>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Timer {
    stages: Vec<Value>,
}

impl Timer {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.stages.push(json!({ "name": name, "seconds": t0.elapsed().as_secs_f64() }));
        out
    }
}

fn fe_system(mesh: Mesh, cfg: &PipelineConfig, clamp: &[String]) -> Result<MechanicalSystem, PipelineError> {
    let sets: Vec<&str> = clamp.iter().map(String::as_str).collect();
    let model = FeModel::new(mesh, cfg.material, &sets).map_err(|e| PipelineError::Config(e.to_string()))?;
    FeModel::system(&Arc::new(model)).map_err(|e| PipelineError::numerical("system", e))
}

/// Builds the mechanical system named by the configuration.
pub fn build_system(cfg: &PipelineConfig) -> Result<MechanicalSystem, PipelineError> {
    match &cfg.system {
        SystemSource::Template { template, clamp } => {
            let mesh = generate_mesh(template).map_err(|e| PipelineError::Config(e.to_string()))?;
            fe_system(mesh, cfg, clamp)
        }
        SystemSource::Msh { path, clamp } => {
            if !path.is_file() {
                return Err(PipelineError::Config(format!("mesh file {} does not exist", path.display())));
            }
            let mesh = parse_msh(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
            fe_system(mesh, cfg, clamp)
        }
        SystemSource::Discrete { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
            let doc = DiscreteSystemDoc::from_json(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
            doc.build().map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
        }
    }
}

fn mode_residuals(system: &MechanicalSystem, modes: &ModeSet) -> (Vec<f64>, Vec<String>) {
    let (m, k) = (system.mass(), system.stiffness());
    let mut failures = Vec::new();
    let residuals = (0..modes.len())
        .map(|i| {
            let r = modes.subset(&[i]).max_residual(m, k);
            let w = modes.frequencies[i];
            let tol = residual_tolerance(m, k, w * w, &modes.vectors[i]);
            if !(r <= tol) {
                failures.push(format!("mode {} residual {r:e} above {tol:e}", modes.indices[i]));
            }
            r
        })
        .collect();
    (residuals, failures)
}

fn modes_report(modes: &ModeSet, residuals: &[f64]) -> Value {
    modes
        .indices
        .iter()
        .zip(&modes.frequencies)
        .zip(residuals)
        .map(|((i, w), r)| json!({ "mode": i, "omega": w, "residual": r }))
        .collect()
}

fn solve_rom(cfg: &PipelineConfig, system: &MechanicalSystem, modes: &ModeSet) -> Result<DnfOutput, PipelineError> {
    let rom = cfg.rom.as_ref().ok_or_else(|| PipelineError::Config("missing [rom] section".into()))?;
    let driven = cfg.driven()?;
    let kappa = cfg.frf.as_ref().and_then(|f| f.kappa.first().copied()).unwrap_or(0.0);
    run_dnf(system, modes, &rom.masters, rom.eps_rel, rom.quality, driven, kappa).map_err(|e| match e {
        dnf_core::DnfError::InvalidMasters(msg) => PipelineError::Config(msg),
        other => PipelineError::numerical("rom", other),
    })
}

fn dnf_failures(out: &DnfOutput) -> Vec<String> {
    let d = &out.model.diagnostics;
    let mut failures = Vec::new();
    if !(d.max_residual < HOMOLOGICAL_TOL) {
        failures.push(format!("homological residual {:e} above {HOMOLOGICAL_TOL:e}", d.max_residual));
    }
    if !(d.max_orthogonality < ORTHOGONALITY_TOL) {
        failures.push(format!("mass orthogonality {:e} above {ORTHOGONALITY_TOL:e}", d.max_orthogonality));
    }
    failures
}

fn table_summary(t: &Table) -> Value {
    json!({ "nonzero": t.nonzero().len(), "max_abs": t.max_abs() })
}

fn coefficient_report(model: &ReducedModel) -> Value {
    json!({
        "g": table_summary(&model.g),
        "h": table_summary(&model.h),
        "a": table_summary(&model.a),
        "b": table_summary(&model.b),
        "p": table_summary(&model.p),
        "q": table_summary(&model.q),
    })
}

/// Largest physical displacement component over one period at every branch point.
pub fn physical_amplitudes(model: &ReducedModel, branch: &Branch) -> Result<Vec<f64>, PipelineError> {
    (0..branch.points.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for (r, rdot) in branch.orbit(i).sample(PHYSICAL_SAMPLES) {
                let (u, _) =
                    reconstruct_physical(model, &RomState { r, rdot }).map_err(|e| PipelineError::numerical("frf", e))?;
                best = u.iter().fold(best, |b, x| b.max(x.abs()));
            }
            Ok(best)
        })
        .collect()
}

fn branch_report(kappa: f64, file: &str, branch: &Branch, driven: usize) -> Value {
    let peak = branch.peak(driven).map(|i| &branch.points[i]);
    json!({
        "kappa": kappa,
        "file": file,
        "points": branch.points.len(),
        "peak_omega": peak.map(|p| p.omega),
        "peak_amplitude": peak.map(|p| p.amplitudes[driven]),
        "bifurcations": branch
            .bifurcations()
            .iter()
            .map(|(i, b)| json!({ "omega": branch.points[*i].omega, "kind": b.to_string() }))
            .collect::<Vec<_>>(),
        "truncated": branch.truncated,
    })
}

/// One response curve per load multiplier, computed concurrently.
fn frequency_responses(cfg: &PipelineConfig, model: &ReducedModel) -> Result<Vec<(f64, String, Branch)>, PipelineError> {
    let frf = cfg.frf.as_ref().ok_or_else(|| PipelineError::Config("missing [frf] section".into()))?;
    let scale = if frf.absolute { 1.0 } else { model.frequencies[model.drive.master] };
    let cont = cfg.continuation_for(frf.range[0] * scale, frf.range[1] * scale);
    frf.kappa
        .par_iter()
        .map(|&kappa| {
            let ode = Ode::from_rom_with_load(model, kappa).map_err(|e| PipelineError::numerical("frf", e))?;
            let branch = hb_continue(&ode, &cfg.hb, &cont).map_err(|e| PipelineError::numerical("frf", e))?;
            let csv = if frf.physical {
                branch.to_csv(Some(&physical_amplitudes(model, &branch)?))
            } else {
                branch.to_csv(None)
            };
            Ok((kappa, csv, branch))
        })
        .collect()
}

fn write_json(w: &mut ArtifactWriter, name: &str, v: &impl serde::Serialize) -> Result<PathBuf, PipelineError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| PipelineError::numerical("output", e))?;
    w.write(name, text.as_bytes())
}

/// Writes `modes.csv` and a short `report.json`.
pub fn run_modes(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate(false, false)?;
    let mut timer = Timer { stages: Vec::new() };
    let system = timer.time("system", || build_system(cfg))?;
    let modes = timer
        .time("modes", || solve_modes(system.mass(), system.stiffness(), &cfg.modes))
        .map_err(|e| PipelineError::numerical("modes", e))?;
    let (residuals, failures) = mode_residuals(&system, &modes);
    let mut w = ArtifactWriter::create(&cfg.output)?;
    w.write("modes.csv", modes_csv(&modes, &residuals).as_bytes())?;
    let report = json!({
        "status": if failures.is_empty() { "ok" } else { "failed" },
        "failures": failures,
        "dofs": system.dof_count(),
        "stages": timer.stages,
        "modes": modes_report(&modes, &residuals),
    });
    write_json(&mut w, "report.json", &report)?;
    Ok(RunSummary { report, files: w.commit(), failures })
}

/// Full pipeline. Stage errors remove every artifact already written.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate(true, true)?;
    let mut timer = Timer { stages: Vec::new() };
    let mut w = ArtifactWriter::create(&cfg.output)?;

    let system = timer.time("system", || build_system(cfg))?;
    let modes = timer
        .time("modes", || solve_modes(system.mass(), system.stiffness(), &cfg.modes))
        .map_err(|e| PipelineError::numerical("modes", e))?;
    let (residuals, mut failures) = mode_residuals(&system, &modes);
    w.write("modes.csv", modes_csv(&modes, &residuals).as_bytes())?;

    let out = timer.time("rom", || solve_rom(cfg, &system, &modes))?;
    failures.extend(dnf_failures(&out));
    write_json(&mut w, "resonances.json", &out.table)?;
    let model = out.model;
    let mut stored = model.clone();
    if cfg.rom.as_ref().is_some_and(|r| r.sidecar) {
        if let Some(bytes) = stored.detach_maps("rom.maps.bin") {
            w.write("rom.maps.bin", &bytes)?;
        }
    }
    write_json(&mut w, "rom.json", &stored)?;

    let branches = timer.time("frf", || frequency_responses(cfg, &model))?;
    let mut frf = Vec::new();
    for (kappa, csv, branch) in &branches {
        let name = frf_name(*kappa);
        w.write(&name, csv.as_bytes())?;
        frf.push(branch_report(*kappa, &name, branch, model.drive.master));
    }

    let d = &model.diagnostics;
    let report = json!({
        "status": if failures.is_empty() { "ok" } else { "failed" },
        "failures": failures,
        "dofs": system.dof_count(),
        "stages": timer.stages,
        "modes": modes_report(&modes, &residuals),
        "residuals": {
            "homological": d.max_residual,
            "orthogonality": d.max_orthogonality,
            "antisymmetry": d.antisymmetry_defect,
        },
        "thresholds": { "homological": HOMOLOGICAL_TOL, "orthogonality": ORTHOGONALITY_TOL },
        "resonances": model.resonances,
        "rom": {
            "masters": model.modes,
            "frequencies": model.frequencies,
            "damping": model.damping.coefficient(),
            "driven": model.modes[model.drive.master],
        },
        "coefficients": coefficient_report(&model),
        "frf": frf,
    });
    write_json(&mut w, "report.json", &report)?;
    Ok(RunSummary { report, files: w.commit(), failures })
}

/// Residual-only verification; writes nothing.
pub fn check(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate(true, false)?;
    let mut timer = Timer { stages: Vec::new() };
    let system = timer.time("system", || build_system(cfg))?;
    let modes = timer
        .time("modes", || solve_modes(system.mass(), system.stiffness(), &cfg.modes))
        .map_err(|e| PipelineError::numerical("modes", e))?;
    let (residuals, mut failures) = mode_residuals(&system, &modes);
    let out = timer.time("rom", || solve_rom(cfg, &system, &modes))?;
    failures.extend(dnf_failures(&out));
    let d = &out.model.diagnostics;
    let pairs: Vec<Value> = d
        .pairs
        .iter()
        .map(|p| json!({ "a": p.a, "b": p.b, "residual": fmt17(p.residual), "orthogonality": fmt17(p.orthogonality) }))
        .collect();
    let report = json!({
        "status": if failures.is_empty() { "ok" } else { "failed" },
        "failures": failures,
        "dofs": system.dof_count(),
        "stages": timer.stages,
        "modes": modes_report(&modes, &residuals),
        "residuals": {
            "homological": d.max_residual,
            "orthogonality": d.max_orthogonality,
            "antisymmetry": d.antisymmetry_defect,
        },
        "pairs": pairs,
    });
    Ok(RunSummary { report, files: Vec::new(), failures })
}
