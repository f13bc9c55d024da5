//! Pipeline configuration read from a TOML document.
//!
//! ```toml
//! output = "out"                      # relative to the config file
//!
//! [system]
//! source = "template"                 # "template", "msh" or "discrete"
//! template = "beam"                   # any mesh template with its parameters inline
//! layout = "single"
//! length = 400.0
//! thickness = 4.0
//! depth = 8.0
//! divisions = [20, 1, 1]
//! element = "hex8"
//! clamp = ["clamped"]                 # node sets to fix (mesh sources only)
//!
//! [material]                          # defaults to polysilicon
//! young_modulus = 167e3
//! poisson_ratio = 0.22
//! density = 2.33e-3
//!
//! [modes]
//! count = 4                           # or `indices = [1, 4]`, or `window = { lo, hi }`
//!
//! [rom]
//! masters = [1]
//! driven = 1
//! eps_rel = 0.05
//! quality = 50.0
//! sidecar = false                     # write mapping vectors to rom.maps.bin
//!
//! [frf]
//! kappa = [1e-4, 2e-4]
//! range = [0.9, 1.2]                  # multiples of the driven frequency unless `absolute`
//! absolute = false
//! physical = true                     # add the max_physical_amp column
//!
//! [hb]                                # optional, defaults shown
//! harmonics = 9
//!
//! [continuation]                      # optional step controls
//! max_step = 0.02
//! ```
//!
//! `source = "msh"` takes `path`, `source = "discrete"` takes a JSON `path` with
//! `frequencies`, `g` rows `[s, k, l, value]` and `h` rows `[s, k, l, m, value]`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use dnf_core::ModeSelector;
use dnf_fe::{Material, Template};
use dnf_solvers::{ContinuationConfig, HBConfig};

use crate::PipelineError;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum SystemSource {
    Template {
        #[serde(flatten)]
        template: Template,
        #[serde(default = "default_clamp")]
        clamp: Vec<String>,
    },
    Msh {
        path: PathBuf,
        #[serde(default = "default_clamp")]
        clamp: Vec<String>,
    },
    Discrete {
        path: PathBuf,
    },
}

fn default_clamp() -> Vec<String> {
    vec!["clamped".into()]
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RomSection {
    pub masters: Vec<usize>,
    /// Defaults to the first master.
    pub driven: Option<usize>,
    #[serde(default = "default_eps")]
    pub eps_rel: f64,
    pub quality: f64,
    #[serde(default)]
    pub sidecar: bool,
}

fn default_eps() -> f64 {
    dnf_core::dnf::DEFAULT_EPS_REL
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FrfSection {
    pub kappa: Vec<f64>,
    pub range: [f64; 2],
    #[serde(default)]
    pub absolute: bool,
    #[serde(default)]
    pub physical: bool,
}

/// Step controls of the continuation; the frequency range comes from [`FrfSection`].
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StepSection {
    pub initial_step: Option<f64>,
    pub min_step: Option<f64>,
    pub max_step: Option<f64>,
    pub max_points: Option<usize>,
    pub amplitude_scale: Option<f64>,
    pub stability: Option<bool>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output: PathBuf,
    pub system: SystemSource,
    #[serde(default = "Material::polysilicon")]
    pub material: Material,
    pub modes: ModeSelector,
    pub rom: Option<RomSection>,
    pub frf: Option<FrfSection>,
    #[serde(default)]
    pub hb: HBConfig,
    #[serde(default)]
    pub continuation: StepSection,
}

fn invalid(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl PipelineConfig {
    /// Parses `text`, resolving relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output);
        match &mut cfg.system {
            SystemSource::Msh { path, .. } | SystemSource::Discrete { path } => resolve(path),
            SystemSource::Template { .. } => {}
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Checks referenced files and value ranges; `needs_frf` also requires a forcing list.
    pub fn validate(&self, needs_rom: bool, needs_frf: bool) -> Result<(), PipelineError> {
        match &self.system {
            SystemSource::Msh { path, .. } | SystemSource::Discrete { path } if !path.is_file() => {
                return Err(invalid(format!("system file {} does not exist", path.display())));
            }
            SystemSource::Msh { clamp, .. } | SystemSource::Template { clamp, .. } if clamp.is_empty() => {
                return Err(invalid("clamp list is empty"));
            }
            _ => {}
        }
        self.material.validate().map_err(|e| invalid(e.to_string()))?;
        if needs_rom {
            let rom = self.rom.as_ref().ok_or_else(|| invalid("missing [rom] section"))?;
            if rom.masters.is_empty() {
                return Err(invalid("rom.masters is empty"));
            }
            if !rom.masters.contains(&self.driven()?) {
                return Err(invalid("rom.driven must be one of rom.masters"));
            }
            if !(rom.quality > 0.0) {
                return Err(invalid(format!("rom.quality {} must be positive", rom.quality)));
            }
            if !(rom.eps_rel > 0.0 && rom.eps_rel <= 0.2) {
                return Err(invalid(format!("rom.eps_rel {} outside (0, 0.2]", rom.eps_rel)));
            }
        }
        if needs_frf {
            let frf = self.frf.as_ref().ok_or_else(|| invalid("missing [frf] section"))?;
            if frf.kappa.is_empty() {
                return Err(invalid("frf.kappa is empty"));
            }
            if frf.kappa.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
                return Err(invalid("frf.kappa values must be finite and non-negative"));
            }
            let [lo, hi] = frf.range;
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(invalid(format!("frf.range [{lo}, {hi}] is not an increasing positive interval")));
            }
            self.hb.validate().map_err(|e| invalid(e.to_string()))?;
            self.continuation_for(lo, hi).validate().map_err(|e| invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn driven(&self) -> Result<usize, PipelineError> {
        let rom = self.rom.as_ref().ok_or_else(|| invalid("missing [rom] section"))?;
        rom.driven.or_else(|| rom.masters.first().copied()).ok_or_else(|| invalid("rom.masters is empty"))
    }

    /// Continuation settings over `[lo, hi]` in rad per time unit.
    pub fn continuation_for(&self, lo: f64, hi: f64) -> ContinuationConfig {
        let s = &self.continuation;
        let base = ContinuationConfig::range(lo, hi);
        ContinuationConfig {
            initial_step: s.initial_step.unwrap_or(base.initial_step),
            min_step: s.min_step.unwrap_or(base.min_step),
            max_step: s.max_step.unwrap_or(base.max_step),
            max_points: s.max_points.unwrap_or(base.max_points),
            amplitude_scale: s.amplitude_scale.or(base.amplitude_scale),
            stability: s.stability.unwrap_or(base.stability),
            ..base
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DUFFING: &str = r#"
        output = "out"
        modes = { count = 1 }
        [system]
        source = "discrete"
        path = "duffing.json"
        [rom]
        masters = [1]
        quality = 50.0
        [frf]
        kappa = [0.01]
        range = [0.8, 1.2]
    "#;

    #[test]
    fn relative_paths_follow_the_config() {
        let cfg = PipelineConfig::from_toml(DUFFING, Path::new("/data/run")).unwrap();
        assert_eq!(cfg.output, Path::new("/data/run/out"));
        assert_eq!(cfg.system, SystemSource::Discrete { path: "/data/run/duffing.json".into() });
        assert_eq!(cfg.driven().unwrap(), 1);
        assert_eq!(cfg.hb, HBConfig::default());
        assert_eq!(cfg.material, Material::polysilicon());
    }

    #[test]
    fn template_parameters_are_inline() {
        let text = r#"
            output = "o"
            modes = { indices = [1, 4] }
            [system]
            source = "template"
            template = "block"
            size = [10.0, 2.0, 2.0]
            divisions = [4, 1, 1]
            element = "tet10"
            clamp = ["x0"]
        "#;
        let cfg = PipelineConfig::from_toml(text, Path::new(".")).unwrap();
        let SystemSource::Template { template: Template::Block(b), clamp } = &cfg.system else {
            panic!("{:?}", cfg.system)
        };
        assert_eq!(b.divisions, [4, 1, 1]);
        assert_eq!(clamp, &["x0".to_string()]);
        assert_eq!(cfg.modes, ModeSelector::Indices(vec![1, 4]));
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_rejected() {
        let typo = DUFFING.replace("quality", "qualty");
        assert!(PipelineConfig::from_toml(&typo, Path::new(".")).is_err());
        let cfg = PipelineConfig::from_toml(&DUFFING.replace("[0.8, 1.2]", "[1.2, 0.8]"), Path::new(".")).unwrap();
        assert!(matches!(cfg.validate(true, true), Err(PipelineError::Config(_))));
    }
}
