//! Atomic artifact files and their text formats.

use std::fs;
use std::path::{Path, PathBuf};

use dnf_core::ModeSet;

use crate::PipelineError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// File name of the response curve for load multiplier `kappa`.
pub fn frf_name(kappa: f64) -> String {
    format!("frf_{kappa:e}.csv")
}

/// `mode,omega,frequency,residual` with `frequency = ω / 2π`.
pub fn modes_csv(modes: &ModeSet, residuals: &[f64]) -> String {
    let mut out = String::from("mode,omega,frequency,residual\n");
    for ((idx, w), r) in modes.indices.iter().zip(&modes.frequencies).zip(residuals) {
        out.push_str(&format!("{idx},{},{},{}\n", fmt17(*w), fmt17(w / std::f64::consts::TAU), fmt17(*r)));
    }
    out
}

/// Writes files via a temporary name and a rename; removes everything on [`abort`](Self::abort) or drop.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new(), committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| PipelineError::io(&tmp, e))?;
        if let Err(e) = fs::rename(&tmp, &target) {
            let _ = fs::remove_file(&tmp);
            return Err(PipelineError::io(&target, e));
        }
        if !self.written.contains(&target) {
            self.written.push(target.clone());
        }
        Ok(target)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Keeps the files written so far.
    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }

    pub fn abort(self) {}
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}
