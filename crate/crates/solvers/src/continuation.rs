//! Pseudo-arclength continuation of harmonic balance solutions in the forcing frequency.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::floquet::{classify, floquet_stability, Bifurcation, Floquet};
use crate::hb::{HBConfig, HarmonicBalance, Orbit};
use crate::ode::Ode;
use crate::SolverError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationConfig {
    pub omega_start: f64,
    pub omega_end: f64,
    /// Steps are measured in the unit box spanned by the frequency range and the amplitude scale.
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub grow: f64,
    pub shrink: f64,
    pub max_points: usize,
    /// Largest accepted angle between consecutive tangents, in radians.
    pub max_turn: f64,
    /// Reference for the coefficients; derived from the linear response when absent.
    pub amplitude_scale: Option<f64>,
    pub stability: bool,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            omega_start: 0.9,
            omega_end: 1.1,
            initial_step: 2e-3,
            min_step: 1e-8,
            max_step: 2e-2,
            grow: 1.4,
            shrink: 0.5,
            max_points: 20_000,
            max_turn: 0.15,
            amplitude_scale: None,
            stability: true,
        }
    }
}

impl ContinuationConfig {
    pub fn range(omega_start: f64, omega_end: f64) -> Self {
        Self { omega_start, omega_end, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let steps = [self.initial_step, self.min_step, self.max_step];
        if !(self.omega_start > 0.0 && self.omega_end > 0.0) || self.omega_start == self.omega_end {
            return Err(SolverError::Config(format!(
                "frequency range [{}, {}] must be nonempty and positive",
                self.omega_start, self.omega_end
            )));
        }
        if steps.iter().any(|s| !(*s > 0.0)) || self.min_step > self.max_step {
            return Err(SolverError::Config(format!("invalid step bounds {steps:?}")));
        }
        if !(self.grow >= 1.0) || !(self.shrink > 0.0 && self.shrink < 1.0) || self.max_points < 2 {
            return Err(SolverError::Config("step factors or point budget out of range".into()));
        }
        if !(self.max_turn > 0.0) {
            return Err(SolverError::Config(format!("turning limit {} must be positive", self.max_turn)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchPoint {
    pub omega: f64,
    pub coefficients: Vec<f64>,
    /// `max_t |q_i(t)|` per coordinate.
    pub amplitudes: Vec<f64>,
    pub multipliers: Vec<Complex<f64>>,
    pub stable: bool,
    pub bifurcation: Bifurcation,
    /// Frequency component of the unit tangent.
    pub tangent_omega: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub dofs: usize,
    pub harmonics: usize,
    pub points: Vec<BranchPoint>,
    /// Why the branch stopped before leaving the frequency range, if it did.
    pub truncated: Option<String>,
}

impl Branch {
    pub fn orbit(&self, index: usize) -> Orbit {
        let p = &self.points[index];
        Orbit { dofs: self.dofs, harmonics: self.harmonics, omega: p.omega, coefficients: p.coefficients.clone() }
    }

    pub fn bifurcations(&self) -> Vec<(usize, Bifurcation)> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.bifurcation != Bifurcation::None)
            .map(|(i, p)| (i, p.bifurcation))
            .collect()
    }

    /// Index of the point with the largest amplitude of `dof`.
    pub fn peak(&self, dof: usize) -> Option<usize> {
        (0..self.points.len()).max_by(|&a, &b| self.points[a].amplitudes[dof].total_cmp(&self.points[b].amplitudes[dof]))
    }

    /// CSV with columns `omega, amp_r<p>…, [max_physical_amp], stable, bifurcation`.
    pub fn to_csv(&self, physical: Option<&[f64]>) -> String {
        let mut out = String::from("omega");
        for p in 1..=self.dofs {
            let _ = write!(out, ",amp_r{p}");
        }
        if physical.is_some() {
            out.push_str(",max_physical_amp");
        }
        out.push_str(",stable,bifurcation\n");
        for (i, pt) in self.points.iter().enumerate() {
            let _ = write!(out, "{:.16e}", pt.omega);
            for a in &pt.amplitudes {
                let _ = write!(out, ",{a:.16e}");
            }
            if let Some(ph) = physical {
                let _ = write!(out, ",{:.16e}", ph[i]);
            }
            let _ = writeln!(out, ",{},{}", u8::from(pt.stable), pt.bifurcation);
        }
        out
    }
}

struct Scaled<'a> {
    hb: &'a HarmonicBalance<'a>,
    amp: f64,
    freq: f64,
}

impl Scaled<'_> {
    fn unscale(&self, y: &DVector<f64>) -> (Vec<f64>, f64) {
        let m = y.len() - 1;
        ((0..m).map(|i| y[i] * self.amp).collect(), y[m] * self.freq)
    }

    fn scale(&self, x: &[f64], omega: f64) -> DVector<f64> {
        DVector::from_iterator(x.len() + 1, x.iter().map(|v| v / self.amp).chain([omega / self.freq]))
    }

    /// Residual and scaled Jacobian `[J_x·a  J_ω·f]`.
    fn eval(&self, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (x, omega) = self.unscale(y);
        let ev = self.hb.evaluate(&x, omega);
        let m = x.len();
        let mut j = DMatrix::zeros(m, m + 1);
        j.view_mut((0, 0), (m, m)).copy_from(&(ev.jacobian * self.amp));
        j.set_column(m, &(ev.d_omega * self.freq));
        (ev.residual, j)
    }

    fn tangent(&self, jac: &DMatrix<f64>, previous: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
        let m = jac.nrows();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        a.view_mut((0, 0), (m, m + 1)).copy_from(jac);
        a.set_row(m, &previous.transpose());
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = 1.0;
        let t = a.lu().solve(&rhs).ok_or_else(|| SolverError::Singular("tangent system".into()))?;
        let t = t.normalize();
        Ok(if t.dot(previous) < 0.0 { -t } else { t })
    }
}

fn amplitude_reference(hb: &HarmonicBalance<'_>, cfg: &ContinuationConfig) -> Result<f64, SolverError> {
    if let Some(a) = cfg.amplitude_scale {
        if !(a > 0.0) {
            return Err(SolverError::Config(format!("amplitude scale {a} must be positive")));
        }
        return Ok(a);
    }
    let mut best: f64 = 0.0;
    for j in 0..=400 {
        let w = cfg.omega_start + (cfg.omega_end - cfg.omega_start) * j as f64 / 400.0;
        if let Ok(x) = hb.linear_guess(w) {
            best = best.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    Ok(if best > 0.0 && best.is_finite() { best } else { 1.0 })
}

fn make_point(
    ode: &Ode,
    orbit: &Orbit,
    tangent_omega: f64,
    stability: bool,
) -> Result<(BranchPoint, Option<Floquet>), SolverError> {
    let amplitudes = (0..orbit.dofs).map(|i| orbit.peak(i)).collect();
    let floq = if stability { Some(floquet_stability(ode, orbit)?) } else { None };
    let point = BranchPoint {
        omega: orbit.omega,
        coefficients: orbit.coefficients.clone(),
        amplitudes,
        multipliers: floq.as_ref().map(|f| f.multipliers.clone()).unwrap_or_default(),
        stable: floq.as_ref().map_or(true, |f| f.stable),
        bifurcation: Bifurcation::None,
        tangent_omega,
    };
    Ok((point, floq))
}

/// Traces the periodic response over the frequency range, following folds.
pub fn hb_continue(ode: &Ode, hb_cfg: &HBConfig, cfg: &ContinuationConfig) -> Result<Branch, SolverError> {
    cfg.validate()?;
    let hb = HarmonicBalance::new(ode, *hb_cfg)?;
    let sc = Scaled { hb: &hb, amp: amplitude_reference(&hb, cfg)?, freq: (cfg.omega_end - cfg.omega_start).abs() };
    let (lo, hi) = (cfg.omega_start.min(cfg.omega_end), cfg.omega_start.max(cfg.omega_end));
    let direction = (cfg.omega_end - cfg.omega_start).signum();
    let tol = hb_cfg.tolerance * hb.residual_scale();

    let (x0, _) = hb.solve(&hb.linear_guess(cfg.omega_start)?, cfg.omega_start)?;
    let mut y = sc.scale(&x0, cfg.omega_start);
    let m = x0.len();
    let mut seed = DVector::zeros(m + 1);
    seed[m] = direction;
    let mut t = sc.tangent(&sc.eval(&y).1, &seed)?;

    let mut points = Vec::new();
    let mut floqs: Vec<Option<Floquet>> = Vec::new();
    let (p0, f0) = make_point(ode, &hb.orbit(x0, cfg.omega_start), t[m], cfg.stability)?;
    points.push(p0);
    floqs.push(f0);

    let mut step = cfg.initial_step;
    let mut truncated = None;
    let cos_turn = cfg.max_turn.cos();
    'outer: while points.len() < cfg.max_points {
        let pred = &y + &t * step;
        let mut z = pred.clone();
        let mut converged = None;
        for it in 0..hb_cfg.max_iterations {
            let (r, j) = sc.eval(&z);
            let rn = r.norm();
            if !rn.is_finite() {
                break;
            }
            if rn <= tol && it > 0 {
                converged = Some((it, j));
                break;
            }
            let mut a = DMatrix::zeros(m + 1, m + 1);
            a.view_mut((0, 0), (m, m + 1)).copy_from(&j);
            a.set_row(m, &t.transpose());
            let mut rhs = DVector::zeros(m + 1);
            rhs.rows_mut(0, m).copy_from(&(-r));
            rhs[m] = -t.dot(&(&z - &pred));
            match a.lu().solve(&rhs) {
                Some(dz) => z += dz,
                None => break,
            }
        }
        let accepted = match converged {
            Some((it, jac)) => {
                let tn = sc.tangent(&jac, &t)?;
                if tn.dot(&t) < cos_turn && step > cfg.min_step {
                    None
                } else {
                    Some((it, tn))
                }
            }
            None => None,
        };
        let Some((iters, tn)) = accepted else {
            step *= cfg.shrink;
            if step < cfg.min_step {
                truncated = Some(format!(
                    "corrector failed below the minimum step near ω = {}",
                    sc.unscale(&y).1
                ));
                break 'outer;
            }
            continue;
        };
        let (x, omega) = sc.unscale(&z);
        if omega < lo || omega > hi {
            break;
        }
        let fold = tn[m] * t[m] < 0.0;
        let (mut pt, fl) = make_point(ode, &hb.orbit(x, omega), tn[m], cfg.stability)?;
        if let (Some(Some(prev)), Some(cur)) = (floqs.last(), fl.as_ref()) {
            pt.bifurcation = classify(prev, cur, fold);
        } else if fold {
            pt.bifurcation = Bifurcation::SN;
        }
        points.push(pt);
        floqs.push(fl);
        y = z;
        t = tn;
        if iters <= 3 {
            step = (step * cfg.grow).min(cfg.max_step);
        } else if iters > 6 {
            step = (step * cfg.shrink).max(cfg.min_step);
        }
    }
    if truncated.is_none() && points.len() >= cfg.max_points {
        truncated = Some(format!("point budget of {} exhausted", cfg.max_points));
    }
    Ok(Branch { dofs: ode.dim(), harmonics: hb_cfg.harmonics, points, truncated })
}
