//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test -p dnf-cli --test acceptance -- 8 9`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{both, oracle_deviation};
use dnf_core::dnf::{velocity_map, DnfOutput, PairKind, Projections, DEFAULT_EPS_REL};
use dnf_core::sparse::{dot, norm};
use dnf_core::spectral::z_from_rs;
use dnf_core::{
    build_discrete_system, reconstruct_physical, run_dnf, solve_modes, ComplexSpectrum, MechanicalSystem, ModeSelector,
    ModeSet, ReducedModel, RomState,
};
use dnf_fe::{generate_mesh, step_extract, BeamParams, BlockParams, ElementKind, FeModel, Material, Template};
use dnf_solvers::{
    hb_continue, integrate_to_steady, Bifurcation, Branch, ContinuationConfig, DrivenOde, DrivenSystem,
    GeneralizedAlpha, HBConfig, HarmonicBalance, IntegratorConfig, Ode, PolynomialForce,
};
use dnf_testkit::closed_form::linear_frf_amplitude;
use dnf_testkit::random::{random_potential, random_trailing_symmetric};

type Outcome = Result<String, String>;

fn text<E: Display>(e: E) -> String {
    e.to_string()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

fn fe_system(template: Template, clamp: &str) -> Result<(Arc<FeModel>, MechanicalSystem), String> {
    let mesh = generate_mesh(&template).map_err(text)?;
    let model = Arc::new(FeModel::new(mesh, Material::polysilicon(), &[clamp]).map_err(text)?);
    let system = FeModel::system(&model).map_err(text)?;
    Ok((model, system))
}

/// Beam of about a thousand free DOFs whose first mode bends through the 4-unit thickness.
fn small_beam() -> Result<(Arc<FeModel>, MechanicalSystem), String> {
    fe_system(Template::Beam(BeamParams::single(400.0, 4.0, 8.0, [40, 2, 2], ElementKind::Hex8)), "clamped")
}

// ---------------------------------------------------------------------------------------------
// 1

fn exact_decomposition() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for draw in 0..20 {
        let kind = if draw % 2 == 0 { ElementKind::Hex8 } else { ElementKind::Tet10 };
        let (template, clamp, thickness) = if draw % 4 < 2 {
            let t = rng.gen_range(1.0..3.0);
            let divs = [rng.gen_range(4..9), rng.gen_range(1..3), rng.gen_range(1..3)];
            (Template::Beam(BeamParams::single(rng.gen_range(20.0..60.0), t, rng.gen_range(1.0..4.0), divs, kind)), "clamped", t)
        } else {
            let size = [rng.gen_range(2.0..6.0), rng.gen_range(1.0..3.0), rng.gen_range(1.0..3.0)];
            let divs = [rng.gen_range(2..5), rng.gen_range(1..3), rng.gen_range(1..3)];
            (Template::Block(BlockParams { size, divisions: divs, element: kind }), "x0", size[1])
        };
        let mesh = generate_mesh(&template).map_err(text)?;
        let model = FeModel::new(mesh, Material::polysilicon(), &[clamp]).map_err(text)?;
        let scale = thickness * rng.gen_range(0.05..0.5);
        let u: Vec<f64> = (0..model.free_dof_count()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let full = model.full_internal_force(&u).map_err(text)?;
        let mut split = model.stiffness().map_err(text)?.mul_vec(&u);
        let g = model.quadratic_force(&u, &u).map_err(text)?;
        let h = model.cubic_force(&u, &u, &u).map_err(text)?;
        for i in 0..split.len() {
            split[i] += g[i] + h[i];
        }
        worst = worst.max(rel_diff(&split, &full));
    }
    ensure(worst < 1e-10, || format!("worst relative split error {worst:.2e}"))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!("20 draws over hex8 and tet10, worst {worst:.1e}"))
}

// ---------------------------------------------------------------------------------------------
// 2

/// Residual and mass-orthogonality of every pair map, rebuilt from the system operators.
fn recomputed_pair_checks(system: &MechanicalSystem, out: &DnfOutput) -> Result<(f64, f64, usize), String> {
    let (m, k) = (system.mass(), system.stiffness());
    let modes = &out.modes;
    let (mut residual, mut orthogonality, mut bordered) = (0.0f64, 0.0f64, 0);
    for p in out.maps.iter() {
        let mu = p.kind.shift(modes.frequencies[p.a], modes.frequencies[p.b]);
        let g = system.eval_quadratic(&modes.vectors[p.a], &modes.vectors[p.b]).map_err(text)?;
        let kpsi = k.mul_vec(&p.psi);
        let mpsi = m.mul_vec(&p.psi);
        let mut r: Vec<f64> = (0..g.len()).map(|i| kpsi[i] - mu * mu * mpsi[i] + g[i]).collect();
        for (&t, &y) in p.targets.iter().zip(&p.multipliers) {
            let mphi = m.mul_vec(&modes.vectors[t]);
            r.iter_mut().zip(&mphi).for_each(|(ri, x)| *ri += y * x);
        }
        let gn = norm(&g);
        residual = residual.max(if gn > 0.0 { norm(&r) / gn } else { norm(&r) });
        if !p.targets.is_empty() {
            bordered += 1;
            let psi_m = dot(&p.psi, &mpsi).sqrt().max(f64::MIN_POSITIVE);
            for &t in &p.targets {
                orthogonality = orthogonality.max(dot(&modes.vectors[t], &mpsi).abs() / psi_m);
            }
        }
    }
    Ok((residual, orthogonality, bordered))
}

fn discrete_run(omegas: &[f64], seed: u64, masters: &[usize], eps: f64) -> Result<(MechanicalSystem, DnfOutput), String> {
    let sys = random_potential(omegas, seed, 0.9);
    let mech = build_discrete_system(&sys.omegas, &sys.g, &sys.h).map_err(text)?;
    let modes = solve_modes(mech.mass(), mech.stiffness(), &ModeSelector::Count(omegas.len())).map_err(text)?;
    let out = run_dnf(&mech, &modes, masters, eps, f64::INFINITY, masters[0], 0.0).map_err(text)?;
    Ok((mech, out))
}

fn homological_residuals() -> Outcome {
    let start = Instant::now();
    let mut cases: Vec<(&str, MechanicalSystem, DnfOutput)> = Vec::new();
    for (seed, omegas) in [(0u64, vec![1.0, 1.45, 2.7, 3.9]), (1, vec![0.8, 1.7, 2.9])] {
        let (s, o) = discrete_run(&omegas, seed, &[1, 2], 0.05)?;
        cases.push(("non-resonant discrete", s, o));
    }
    for (seed, omegas) in [(2u64, vec![1.0, 1.989, 3.3, 4.1]), (3, vec![1.0, 2.02, 3.4])] {
        let (s, o) = discrete_run(&omegas, seed, &[1, 2], 0.05)?;
        cases.push(("1:2 discrete", s, o));
    }
    let (_, beam) = small_beam()?;
    let modes = solve_modes(beam.mass(), beam.stiffness(), &ModeSelector::Count(2)).map_err(text)?;
    let out = run_dnf(&beam, &modes, &[1, 2], DEFAULT_EPS_REL, f64::INFINITY, 1, 0.0).map_err(text)?;
    cases.push(("FE beam", beam, out));

    let (mut res, mut orth, mut bordered, mut pairs) = (0.0f64, 0.0f64, 0, 0);
    for (name, system, out) in &cases {
        let (r, o, b) = recomputed_pair_checks(system, out)?;
        if name.starts_with("1:2") {
            ensure(b > 0, || format!("{name}: no bordered pair"))?;
        }
        res = res.max(r);
        orth = orth.max(o);
        bordered += b;
        pairs += out.maps.iter().count();
    }
    ensure(res < 1e-9, || format!("worst residual {res:.2e}"))?;
    ensure(orth < 1e-10, || format!("worst orthogonality {orth:.2e}"))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!("{pairs} pairs ({bordered} bordered), residual {res:.1e}, orthogonality {orth:.1e}"))
}

// ---------------------------------------------------------------------------------------------
// 3

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut cases = Vec::new();
    for seed in 0..3u64 {
        let omegas: Vec<f64> = (0..5).map(|i| 1.0 + 0.37 * i as f64 + 0.05 * seed as f64).collect();
        cases.push((random_potential(&omegas, seed, 0.7), vec![0, 1], 0.02));
    }
    cases.push((random_potential(&[1.0, 1.989, 3.3, 4.1], 11, 0.8), vec![0, 1], 0.02));
    cases.push((random_potential(&[1.0, 2.3, 3.001, 4.6], 5, 0.8), vec![0, 2], 0.02));
    cases.push((random_potential(&[1.3, 2.9, 3.7, 5.2, 6.1, 7.7], 3, 1.0), vec![0], 0.05));
    for seed in 0..4u64 {
        cases.push((random_trailing_symmetric(&[1.0, 1.989, 3.3], seed, 0.9), vec![0, 1], 0.02));
    }
    let mut worst = 0.0f64;
    let mut resonant = 0;
    for (sys, masters, eps) in &cases {
        ensure(sys.omegas.len() <= 6, || "system larger than six modes".into())?;
        let (out, nf) = both(sys, masters, *eps);
        if !out.table.is_empty() {
            resonant += 1;
        }
        worst = worst.max(oracle_deviation(&out, &nf));
    }
    ensure(resonant > 0 && resonant < cases.len(), || format!("{resonant} of {} resonant", cases.len()))?;
    ensure(worst < 1e-10, || format!("worst deviation {worst:.2e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("{} systems ({resonant} resonant), worst deviation {worst:.1e}", cases.len()))
}

// ---------------------------------------------------------------------------------------------
// 4

/// Complex displacement and velocity maps evaluated on `z(r, s)`.
fn complex_maps(out: &DnfOutput, spectrum: &ComplexSpectrum, r: &[f64], s: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = out.modes.len();
    let dofs = out.modes.vectors[0].len();
    let mut z = vec![Complex64::new(0.0, 0.0); 2 * n];
    for a in 0..n {
        let (za, zb) = z_from_rs(r[a], s[a], spectrum.omega(a));
        z[a] = za;
        z[a + n] = zb;
    }
    let mut u = vec![Complex64::new(0.0, 0.0); dofs];
    let mut v = vec![Complex64::new(0.0, 0.0); dofs];
    for k in 0..2 * n {
        for l in 0..2 * n {
            let sol = out.maps.state_map(k, l);
            let f2: Vec<(usize, f64)> = (0..2 * n)
                .map(|t| (t, out.cubic.f2.get(&[t, k, l])))
                .filter(|(_, f)| *f != 0.0)
                .collect();
            let ups = velocity_map(&sol.psi, &f2, spectrum, k, l, &out.modes);
            let zz = z[k] * z[l];
            for i in 0..dofs {
                u[i] += sol.psi[i] * zz;
                v[i] += Complex64::new(0.0, ups[i]) * zz;
            }
        }
    }
    (u, v)
}

/// Worst violation of the real-map identities, relative to the largest map entry.
fn real_map_defect(out: &DnfOutput) -> Result<f64, String> {
    let n = out.modes.len();
    let w = &out.modes.frequencies;
    let spectrum = ComplexSpectrum::from_modes(&out.modes).map_err(text)?;
    let stored = out.model.maps.as_ref().ok_or("no mapping vectors")?;
    let scale = out.maps.iter().flat_map(|p| p.psi.iter()).fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    let mut cmp = |a: f64, b: f64| worst = worst.max((a - b).abs() / scale);

    let unit = |i: usize| -> Vec<f64> { (0..n).map(|j| if j == i { 1.0 } else { 0.0 }).collect() };
    let zero = vec![0.0; n];
    let add = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
    let eval = |r: &[f64], s: &[f64]| complex_maps(out, &spectrum, r, s);
    // Bilinear coefficient between two coordinate directions of a quadratic form.
    let cross = |ra: &[f64], sa: &[f64], rb: &[f64], sb: &[f64]| {
        let (ab_u, ab_v) = eval(&add(ra, rb), &add(sa, sb));
        let (a_u, a_v) = eval(ra, sa);
        let (b_u, b_v) = eval(rb, sb);
        let c = |x: &[Complex64], y: &[Complex64], z: &[Complex64]| -> Vec<Complex64> {
            x.iter().zip(y).zip(z).map(|((p, q), t)| p - q - t).collect()
        };
        (c(&ab_u, &a_u, &b_u), c(&ab_v, &a_v, &b_v))
    };

    for k in 0..n {
        for l in 0..n {
            let p = &out.maps.get(PairKind::Plus, k, l).psi;
            let q = &out.maps.get(PairKind::Minus, k, l).psi;
            let (wk, wl) = (w[k], w[l]);
            for i in 0..p.len() {
                let a_hat = 0.5 * (p[i] + q[i]);
                let b_hat = (q[i] - p[i]) / (2.0 * wk * wl);
                let gamma_hat = ((wl + wk) * p[i] + (wl - wk) * q[i]) / wl;
                cmp(stored.a_hat(k, l)[i], a_hat);
                cmp(stored.b_hat(k, l)[i], b_hat);
                cmp(stored.gamma_hat(k, l)[i], gamma_hat);
                if k == l {
                    cmp(stored.gamma_hat(k, k)[i], 2.0 * p[i]);
                }
            }
            // r_k s_l: displacement part ĉ vanishes, velocity part is γ̂_kl.
            let (u_rs, v_rs) = if k == l {
                let (u, v) = eval(&unit(k), &unit(k));
                let (u1, v1) = eval(&unit(k), &zero);
                let (u2, v2) = eval(&zero, &unit(k));
                let d = |x: &[Complex64], y: &[Complex64], z: &[Complex64]| -> Vec<Complex64> {
                    x.iter().zip(y).zip(z).map(|((a, b), c)| a - b - c).collect()
                };
                (d(&u, &u1, &u2), d(&v, &v1, &v2))
            } else {
                cross(&unit(k), &zero, &zero, &unit(l))
            };
            for i in 0..p.len() {
                cmp(u_rs[i].re, 0.0);
                cmp(u_rs[i].im, 0.0);
                cmp(v_rs[i].re, stored.gamma_hat(k, l)[i]);
                cmp(v_rs[i].im, 0.0);
            }
            if k <= l {
                // r_k r_l and s_k s_l: displacement parts are â and b̂, velocity parts α̂ and β̂ vanish.
                let mult = if k == l { 1.0 } else { 2.0 };
                let (u_rr, v_rr) =
                    if k == l { eval(&unit(k), &zero) } else { cross(&unit(k), &zero, &unit(l), &zero) };
                let (u_ss, v_ss) =
                    if k == l { eval(&zero, &unit(k)) } else { cross(&zero, &unit(k), &zero, &unit(l)) };
                for i in 0..p.len() {
                    cmp(u_rr[i].re, mult * stored.a_hat(k, l)[i]);
                    cmp(u_ss[i].re, mult * stored.b_hat(k, l)[i]);
                    for x in [u_rr[i].im, u_ss[i].im, v_rr[i].re, v_rr[i].im, v_ss[i].re, v_ss[i].im] {
                        cmp(x, 0.0);
                    }
                }
            }
        }
    }
    Ok(worst)
}

fn complex_real_equivalence() -> Outcome {
    let mut outs = Vec::new();
    for (seed, omegas) in [(0u64, vec![1.0, 1.989, 3.3]), (1, vec![1.1, 1.7, 2.9, 3.6])] {
        outs.push(both(&random_trailing_symmetric(&omegas, seed, 0.9), &[0, 1], 0.02).0);
    }
    outs.push(both(&random_potential(&[1.0, 1.45, 2.7, 3.9], 2, 0.9), &[0, 1, 2], 0.02).0);
    let (_, beam) = small_beam()?;
    let modes = solve_modes(beam.mass(), beam.stiffness(), &ModeSelector::Count(2)).map_err(text)?;
    outs.push(run_dnf(&beam, &modes, &[1, 2], DEFAULT_EPS_REL, f64::INFINITY, 1, 0.0).map_err(text)?);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for out in &outs {
        worst = worst.max(real_map_defect(out)?);
        pairs += out.modes.len() * out.modes.len();
    }
    ensure(worst < 1e-12, || format!("worst identity defect {worst:.2e}"))?;
    Ok(format!("{pairs} ordered pairs in {} models, worst {worst:.1e}", outs.len()))
}

// ---------------------------------------------------------------------------------------------
// 5

fn third_order_structure() -> Outcome {
    let mut antisym = 0.0f64;
    for seed in 0..4u64 {
        let (out, _) = both(&random_trailing_symmetric(&[1.0, 1.45, 2.7, 3.9], seed, 0.9), &[0, 1], 0.05);
        ensure(out.table.is_empty(), || format!("seed {seed} unexpectedly resonant"))?;
        antisym = antisym.max(out.cubic.antisymmetry_defect());
    }
    ensure(antisym < 1e-12, || format!("antisymmetry defect {antisym:.2e}"))?;

    let sys = random_trailing_symmetric(&[1.0, 1.989, 3.3], 4, 0.9);
    let mech = build_discrete_system(&sys.omegas, &sys.g, &sys.h).map_err(text)?;
    let modes = solve_modes(mech.mass(), mech.stiffness(), &ModeSelector::Count(3)).map_err(text)?;
    let out = run_dnf(&mech, &modes, &[1, 2], 0.02, f64::INFINITY, 1, 0.0).map_err(text)?;
    ensure(!out.table.is_empty(), || "1:2 case not detected as resonant".into())?;
    let proj = Projections::compute(&mech, &out.modes, &out.maps).map_err(text)?;
    let spectrum = ComplexSpectrum::from_modes(&out.modes).map_err(text)?;
    let (n, nn) = (2, 4);
    let f2 = &out.cubic.f2;
    let lam = |k: usize| spectrum.lambda_imag(k);
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for s in 0..n {
        for k in 0..nn {
            for l in 0..nn {
                for m in 0..nn {
                    let mut rhs = -(proj.g_state(s, k, l, m % n) + proj.g_state(s, l, m, k % n)
                        + proj.h.get(&[s, k % n, l % n, m % n]));
                    for p in 0..nn {
                        let u = |a: usize, b: usize| {
                            (lam(a) + lam(b)) * proj.psi_state(s, a, b) + f2.get(&[s, a, b]) + f2.get(&[s + n, a, b])
                        };
                        rhs += u(p, m) * f2.get(&[p, k, l]) + u(k, p) * f2.get(&[p, l, m]);
                    }
                    let got = spectrum.omega(s) * (out.cubic.f3.get(&[s + n, k, l, m]) - out.cubic.f3.get(&[s, k, l, m]));
                    worst = worst.max((got - rhs).abs());
                    scale = scale.max(rhs.abs());
                }
            }
        }
    }
    let rel = worst / scale.max(f64::MIN_POSITIVE);
    ensure(rel < 1e-10, || format!("resonant right-hand side mismatch {rel:.2e}"))?;
    Ok(format!("antisymmetry {antisym:.1e}, resonant right-hand side {rel:.1e}"))
}

// ---------------------------------------------------------------------------------------------
// 6

fn step_equivalence() -> Outcome {
    let start = Instant::now();
    let (model, system) = small_beam()?;
    let modes = solve_modes(system.mass(), system.stiffness(), &ModeSelector::Count(3)).map_err(text)?;
    let peak = modes.vectors.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    // Imposed displacements of about a quarter thickness.
    let amplitude = 1.0 / peak;
    let force = |u: &[f64]| model.full_internal_force(u).expect("force");
    let step = step_extract(force, Some(system.stiffness()), &modes.vectors, amplitude).map_err(text)?;
    let mut worst = 0.0f64;
    for i in 0..modes.len() {
        for j in i..modes.len() {
            let g = system.eval_quadratic(&modes.vectors[i], &modes.vectors[j]).map_err(text)?;
            worst = worst.max(rel_diff(step.quadratic(i, j).ok_or("missing quadratic vector")?, &g));
        }
        let phi = &modes.vectors[i];
        let h = system.eval_cubic(phi, phi, phi).map_err(text)?;
        worst = worst.max(rel_diff(step.cubic(i).ok_or("missing cubic vector")?, &h));
    }
    ensure(worst < 1e-8, || format!("worst deviation {worst:.2e}"))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!("{} DOFs, 3 modes, worst {worst:.1e}", system.dof_count()))
}

// ---------------------------------------------------------------------------------------------
// 7

fn duffing(h: f64, c: f64, force: f64) -> Result<Ode, String> {
    let poly = PolynomialForce { cubic: vec![([0, 0, 0, 0], h)], ..Default::default() };
    Ode::oscillator(1.0, c, force, poly).map_err(text)
}

/// Free-vibration frequency of the undamped Duffing oscillator released from rest at `amplitude`.
fn free_frequency(h: f64, amplitude: f64) -> Result<f64, String> {
    let ode = duffing(h, 0.0, 0.0)?;
    let dynamics = DrivenOde { ode: &ode, omega: 1.0 };
    let steps_per_unit = 400.0;
    let cfg = IntegratorConfig { rho_inf: 1.0, ..IntegratorConfig::default() };
    let mut integ =
        GeneralizedAlpha::new(&dynamics, 1.0 / steps_per_unit, cfg, 0.0, vec![amplitude], vec![0.0]).map_err(text)?;
    let tr = integ.run((60.0 * steps_per_unit) as usize, &[0], 1).map_err(text)?;
    let crossings: Vec<f64> = tr
        .q
        .windows(2)
        .zip(tr.times.windows(2))
        .filter(|(q, _)| q[0][0] < 0.0 && q[1][0] >= 0.0)
        .map(|(q, t)| t[0] + (t[1] - t[0]) * q[0][0] / (q[0][0] - q[1][0]))
        .collect();
    ensure(crossings.len() >= 3, || "too few oscillations".into())?;
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Ok(2.0 * std::f64::consts::PI / period)
}

fn duffing_harmonic_balance() -> Outcome {
    let linear = Ode::oscillator(1.3, 0.05, 0.2, PolynomialForce::default()).map_err(text)?;
    let mut cfg = ContinuationConfig::range(0.5, 2.0);
    cfg.stability = false;
    let branch = hb_continue(&linear, &HBConfig::default(), &cfg).map_err(text)?;
    let linear_err = branch
        .points
        .iter()
        .map(|p| {
            let exact = linear_frf_amplitude(0.2, 1.3, 0.05, p.omega);
            (p.amplitudes[0] - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    ensure(linear_err < 1e-10, || format!("linear FRF error {linear_err:.2e}"))?;

    let h = 0.5;
    let (mut frf_err, mut backbone_err) = (0.0f64, 0.0f64);
    for force in [0.005, 0.01, 0.02] {
        let ode = duffing(h, 0.02, force)?;
        let branch = hb_continue(&ode, &HBConfig::default(), &ContinuationConfig::range(0.8, 1.3)).map_err(text)?;
        let peak = &branch.points[branch.peak(0).ok_or("empty branch")?];
        // Steady states at the peak and on the stable flanks, each started on the HB orbit.
        let hb = HarmonicBalance::new(&ode, HBConfig::default()).map_err(text)?;
        for target in [peak.omega, 0.9, 1.2] {
            let p = branch
                .points
                .iter()
                .filter(|p| p.stable)
                .min_by(|a, b| (a.omega - target).abs().total_cmp(&(b.omega - target).abs()))
                .ok_or("no stable point")?;
            let (x, _) = hb.solve(&p.coefficients, p.omega).map_err(text)?;
            let orbit = hb.orbit(x, p.omega);
            let expected = orbit.peak(0);
            let (q0, v0) = orbit.state_at(0.0);
            let dynamics = DrivenOde { ode: &ode, omega: p.omega };
            let ss = integrate_to_steady(&dynamics, p.omega, 256, IntegratorConfig::default(), q0, v0, &[0], 1e-8, 2000)
                .map_err(text)?;
            ensure(ss.converged, || format!("ω = {} did not settle", p.omega))?;
            frf_err = frf_err.max((ss.amplitudes[0] - expected).abs() / expected);
        }
        let omega_free = free_frequency(h, peak.amplitudes[0])?;
        backbone_err = backbone_err.max((peak.omega - omega_free).abs() / omega_free);
    }
    ensure(frf_err < 0.01, || format!("FRF deviation {:.2}%", 100.0 * frf_err))?;
    ensure(backbone_err < 0.01, || format!("backbone deviation {:.2}%", 100.0 * backbone_err))?;
    Ok(format!(
        "linear {linear_err:.1e}, FRF {:.3}%, backbone {:.3}%",
        100.0 * frf_err,
        100.0 * backbone_err
    ))
}

// ---------------------------------------------------------------------------------------------
// 8

/// Vertex of the parabola through three `(x, y)` samples.
fn parabola_vertex(p: [(f64, f64); 3]) -> (f64, f64) {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a >= 0.0 {
        let best = p.iter().cloned().fold((x1, f64::NEG_INFINITY), |b, q| if q.1 > b.1 { q } else { b });
        return best;
    }
    let b = d01 - a * (x0 + x1);
    let x = -b / (2.0 * a);
    (x, y0 + d01 * (x - x0) + a * (x - x0) * (x - x1))
}

/// Largest `|u_dof|` of the reconstructed physical motion over one period.
fn physical_peak(model: &ReducedModel, orbit: &dnf_solvers::Orbit, dof: usize) -> Result<f64, String> {
    let mut best = 0.0f64;
    for (r, rdot) in orbit.sample(128) {
        let (u, _) = reconstruct_physical(model, &RomState { r, rdot }).map_err(text)?;
        best = best.max(u[dof].abs());
    }
    Ok(best)
}

fn fe_beam_validation() -> Outcome {
    let start = Instant::now();
    let quality = 20.0;
    let (_, system) = small_beam()?;
    let modes: ModeSet = solve_modes(system.mass(), system.stiffness(), &ModeSelector::Count(1)).map_err(text)?;
    let (w1, phi) = (modes.frequencies[0], modes.vectors[0].clone());
    let dof = (0..phi.len()).max_by(|&a, &b| phi[a].abs().total_cmp(&phi[b].abs())).ok_or("empty mode")?;
    let rom = run_dnf(&system, &modes, &[1], DEFAULT_EPS_REL, quality, 1, 1.0).map_err(text)?.model;
    let c = rom.damping.coefficient();
    let mphi = system.mass().mul_vec(&phi);
    let half_thickness = 2.0;

    let mut report = Vec::new();
    let (mut worst_w, mut worst_a) = (0.0f64, 0.0f64);
    for level in [0.2, 0.4, 0.6, 0.8, 1.0] {
        // Forcing whose linear resonant response reaches `level` half-thicknesses.
        let kappa = level * half_thickness * w1 * w1 / (quality * phi[dof].abs());
        let ode = Ode::from_rom_with_load(&rom, kappa).map_err(text)?;
        let cfg = ContinuationConfig { max_step: 0.002 * w1, ..ContinuationConfig::range(0.95 * w1, 1.08 * w1) };
        let branch = hb_continue(&ode, &HBConfig::default(), &cfg).map_err(text)?;
        let amps: Vec<f64> =
            (0..branch.points.len()).map(|i| physical_peak(&rom, &branch.orbit(i), dof)).collect::<Result<_, _>>()?;
        let i = (1..amps.len() - 1).max_by(|&a, &b| amps[a].total_cmp(&amps[b])).ok_or("short branch")?;
        let (w_rom, a_rom) = parabola_vertex([
            (branch.points[i - 1].omega, amps[i - 1]),
            (branch.points[i].omega, amps[i]),
            (branch.points[i + 1].omega, amps[i + 1]),
        ]);

        let hb = HarmonicBalance::new(&ode, HBConfig::default()).map_err(text)?;
        let load: Vec<f64> = mphi.iter().map(|x| kappa * x).collect();
        let mut samples = [(0.0, 0.0); 3];
        for (slot, shift) in samples.iter_mut().zip([-0.003, 0.0, 0.003]) {
            let omega = w_rom * (1.0 + shift);
            let near = branch
                .points
                .iter()
                .min_by(|a, b| (a.omega - omega).abs().total_cmp(&(b.omega - omega).abs()))
                .ok_or("empty branch")?;
            let (x, _) = hb.solve(&near.coefficients, omega).map_err(text)?;
            let (r, rdot) = hb.orbit(x, omega).state_at(0.0);
            let (q0, v0) = reconstruct_physical(&rom, &RomState { r, rdot }).map_err(text)?;
            let dynamics = DrivenSystem { system: &system, damping: c, load: load.clone(), omega };
            let ss = integrate_to_steady(&dynamics, omega, 64, IntegratorConfig::default(), q0, v0, &[dof], 1e-5, 400)
                .map_err(text)?;
            ensure(ss.converged, || format!("full model at ω = {omega:.4} did not settle"))?;
            *slot = (omega, ss.amplitudes[0]);
        }
        let (w_full, a_full) = parabola_vertex(samples);
        let (ew, ea) = ((w_rom - w_full).abs() / w_full, (a_rom - a_full).abs() / a_full);
        worst_w = worst_w.max(ew);
        worst_a = worst_a.max(ea);
        report.push(format!("{:.2}/{:.2}", a_full / half_thickness, 100.0 * (w_full / w1 - 1.0)));
    }
    ensure(worst_w < 0.01, || format!("peak frequency deviation {:.2}%", 100.0 * worst_w))?;
    ensure(worst_a < 0.03, || format!("peak amplitude deviation {:.2}%", 100.0 * worst_a))?;
    within(start.elapsed(), 900.0)?;
    Ok(format!(
        "{} DOFs, frequency {:.2}%, amplitude {:.2}% (peak/half-thickness, shift %: {})",
        system.dof_count(),
        100.0 * worst_w,
        100.0 * worst_a,
        report.join(" ")
    ))
}

// ---------------------------------------------------------------------------------------------
// 9, 10

struct ToyComparison {
    full: Branch,
    rom: Branch,
    full_peaks: [f64; 2],
    rom_peaks: [f64; 2],
}

fn compare_toy(
    omegas: [f64; 2],
    g: &[([usize; 3], f64)],
    h: &[([usize; 4], f64)],
    quality: f64,
    kappa: f64,
    cfg: &ContinuationConfig,
) -> Result<ToyComparison, String> {
    let system = build_discrete_system(&omegas, g, h).map_err(text)?;
    let modes = solve_modes(system.mass(), system.stiffness(), &ModeSelector::Count(2)).map_err(text)?;
    let rom = run_dnf(&system, &modes, &[1, 2], DEFAULT_EPS_REL, quality, 1, kappa).map_err(text)?.model;
    let load: Vec<f64> = system.mass().mul_vec(&modes.vectors[0]).iter().map(|x| kappa * x).collect();
    let full_ode = Ode::from_system(&system, rom.damping.coefficient(), DVector::from_vec(load)).map_err(text)?;
    let rom_ode = Ode::from_rom(&rom).map_err(text)?;
    let full = hb_continue(&full_ode, &HBConfig::default(), cfg).map_err(text)?;
    let rom_branch = hb_continue(&rom_ode, &HBConfig::default(), cfg).map_err(text)?;
    for (name, b) in [("full", &full), ("reduced", &rom_branch)] {
        ensure(b.truncated.is_none(), || format!("{name} branch truncated: {:?}", b.truncated))?;
    }
    let mut full_peaks = [0.0; 2];
    for p in &full.points {
        for d in 0..2 {
            full_peaks[d] = f64::max(full_peaks[d], p.amplitudes[d]);
        }
    }
    let mut rom_peaks = [0.0f64; 2];
    for i in 0..rom_branch.points.len() {
        for d in 0..2 {
            rom_peaks[d] = rom_peaks[d].max(physical_peak(&rom, &rom_branch.orbit(i), d)?);
        }
    }
    Ok(ToyComparison { full, rom: rom_branch, full_peaks, rom_peaks })
}

impl ToyComparison {
    fn peak_error(&self) -> f64 {
        (0..2).map(|d| (self.rom_peaks[d] - self.full_peaks[d]).abs() / self.full_peaks[d]).fold(0.0, f64::max)
    }
}

fn sequence(b: &Branch) -> Vec<Bifurcation> {
    b.bifurcations().into_iter().map(|(_, k)| k).collect()
}

fn fmt_sequence(s: &[Bifurcation]) -> String {
    s.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("-")
}

/// Local maxima of the amplitude of `dof` along the branch.
fn local_maxima(b: &Branch, dof: usize) -> usize {
    let a: Vec<f64> = b.points.iter().map(|p| p.amplitudes[dof]).collect();
    a.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

fn contains_in_order(seq: &[Bifurcation], pattern: &[Bifurcation]) -> bool {
    let mut it = seq.iter();
    pattern.iter().all(|p| it.any(|s| s == p))
}

fn one_to_two_toy() -> Outcome {
    let start = Instant::now();
    let (a, c1, c2, d) = (0.5, 0.1, 0.1, 0.2);
    let g = [
        ([1, 1, 2], a),
        ([1, 2, 1], a),
        ([2, 1, 1], a),
        ([1, 1, 1], 3.0 * c1),
        ([2, 2, 2], 3.0 * c2),
        ([1, 2, 2], d),
        ([2, 1, 2], d),
        ([2, 2, 1], d),
    ];
    let h = [([1, 1, 1, 1], 0.2), ([2, 2, 2, 2], 0.2)];
    let cfg = ContinuationConfig { max_step: 0.01, ..ContinuationConfig::range(0.85, 1.15) };
    let cmp = compare_toy([1.0, 1.989], &g, &h, 50.0, 0.015, &cfg)?;
    let (fs, rs) = (sequence(&cmp.full), sequence(&cmp.rom));
    use Bifurcation::{NS, SN};
    ensure(contains_in_order(&fs, &[SN, NS, NS, SN]), || format!("full sequence {}", fmt_sequence(&fs)))?;
    ensure(fs == rs, || format!("sequences differ: full {} reduced {}", fmt_sequence(&fs), fmt_sequence(&rs)))?;
    let (mf, mr) = (local_maxima(&cmp.full, 0), local_maxima(&cmp.rom, 0));
    ensure(mf >= 2 && mf == mr, || format!("driven-mode maxima: full {mf}, reduced {mr}"))?;
    let err = cmp.peak_error();
    ensure(err < 0.05, || format!("peak amplitude deviation {:.2}%", 100.0 * err))?;
    within(start.elapsed(), 300.0)?;
    Ok(format!("sequence {}, {mf} maxima, peak deviation {:.2}%", fmt_sequence(&fs), 100.0 * err))
}

/// Number of self-intersections of the `(ω, amplitude)` polyline of `dof`.
fn self_intersections(b: &Branch, dof: usize) -> usize {
    let p: Vec<(f64, f64)> = b.points.iter().map(|x| (x.omega, x.amplitudes[dof])).collect();
    let orient = |o: (f64, f64), u: (f64, f64), v: (f64, f64)| (u.0 - o.0) * (v.1 - o.1) - (u.1 - o.1) * (v.0 - o.0);
    let mut count = 0;
    for i in 0..p.len().saturating_sub(1) {
        for j in i + 2..p.len().saturating_sub(1) {
            let (a, bb, c, d) = (p[i], p[i + 1], p[j], p[j + 1]);
            if orient(a, bb, c) * orient(a, bb, d) < 0.0 && orient(c, d, a) * orient(c, d, bb) < 0.0 {
                count += 1;
            }
        }
    }
    count
}

fn one_to_three_toy() -> Outcome {
    let (a, b1, b2, cross) = (0.1, 0.1, 0.1, 1.15);
    let mut h = vec![([1, 1, 1, 1], b1), ([2, 2, 2, 2], b2)];
    for p in [[1, 1, 1, 2], [1, 1, 2, 1], [1, 2, 1, 1], [2, 1, 1, 1]] {
        h.push((p, a));
    }
    for p in [[1, 1, 2, 2], [1, 2, 1, 2], [1, 2, 2, 1], [2, 1, 1, 2], [2, 1, 2, 1], [2, 2, 1, 1]] {
        h.push((p, cross / 3.0));
    }
    let (e, c2, d) = (0.1, 0.1, 0.1);
    let g = [
        ([1, 1, 2], e),
        ([1, 2, 1], e),
        ([2, 1, 1], e),
        ([2, 2, 2], 3.0 * c2),
        ([1, 2, 2], d),
        ([2, 1, 2], d),
        ([2, 2, 1], d),
    ];
    let cfg = ContinuationConfig { max_step: 0.001, ..ContinuationConfig::range(0.99, 1.03) };
    let cmp = compare_toy([1.0, 3.001], &g, &h, 3000.0, 1e-4, &cfg)?;
    let (lf, lr) = (self_intersections(&cmp.full, 1), self_intersections(&cmp.rom, 1));
    ensure(lf > 0, || "no loop in the full response".into())?;
    ensure(lr > 0, || "no loop in the reduced response".into())?;
    let err = cmp.peak_error();
    ensure(err < 0.05, || format!("peak amplitude deviation {:.2}%", 100.0 * err))?;
    Ok(format!("loops full {lf} reduced {lr}, peak deviation {:.2}%", 100.0 * err))
}

// ---------------------------------------------------------------------------------------------
// 11

fn eigen_ratio() -> Outcome {
    let target = 3.001;
    let mut ratios = Vec::new();
    for divisions in [[100, 1, 1], [200, 2, 2]] {
        let (_, system) = fe_system(Template::Beam(BeamParams::double_beam(divisions, 5.0, ElementKind::Tet10)), "clamped")?;
        let modes = solve_modes(system.mass(), system.stiffness(), &ModeSelector::Count(4)).map_err(text)?;
        ratios.push((divisions, system.dof_count(), modes.frequencies[3] / modes.frequencies[0]));
    }
    let summary: Vec<String> =
        ratios.iter().map(|(d, n, r)| format!("{d:?} ({n} DOFs): {r:.4}")).collect();
    let worst = ratios.iter().map(|(_, _, r)| (r - target).abs() / target).fold(0.0, f64::max);
    ensure(worst < 0.02, || format!("ω4/ω1 {} vs {target}", summary.join(", ")))?;
    Ok(format!("ω4/ω1 {}", summary.join(", ")))
}

// ---------------------------------------------------------------------------------------------
// 12

fn scaling() -> Outcome {
    let mut points = Vec::new();
    for nx in [22usize, 44, 70] {
        let ny = (nx as f64 / 4.4).round() as usize;
        let side = 100.0 * ny as f64 / nx as f64;
        let template =
            Template::Block(BlockParams { size: [100.0, side, side], divisions: [nx, ny, ny], element: ElementKind::Hex8 });
        let start = Instant::now();
        let (_, system) = fe_system(template, "x0")?;
        let modes = solve_modes(system.mass(), system.stiffness(), &ModeSelector::Count(1)).map_err(text)?;
        run_dnf(&system, &modes, &[1], DEFAULT_EPS_REL, 100.0, 1, 0.0).map_err(text)?;
        points.push((system.dof_count() as f64, start.elapsed().as_secs_f64()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(n, t)| (n.ln(), t.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let table: Vec<String> = points.iter().map(|(n, t)| format!("{n:.0}: {t:.2} s")).collect();
    ensure(slope < 2.0, || format!("log-log slope {slope:.2} ({})", table.join(", ")))?;
    Ok(format!("log-log slope {slope:.2} ({})", table.join(", ")))
}

// ---------------------------------------------------------------------------------------------

/// Criteria whose failure is recorded as a deviation rather than failing the suite.
const ADVISORY: &[usize] = &[11];

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("exact cubic decomposition", exact_decomposition),
        ("homological residuals", homological_residuals),
        ("modal oracle equivalence", oracle_equivalence),
        ("complex/real map equivalence", complex_real_equivalence),
        ("third-order antisymmetry and resonant terms", third_order_structure),
        ("STEP against intrusive forces", step_equivalence),
        ("Duffing harmonic balance", duffing_harmonic_balance),
        ("FE beam against full-order integration", fe_beam_validation),
        ("1:2 internal resonance toy", one_to_two_toy),
        ("1:3 internal resonance toy", one_to_three_toy),
        ("double-beam eigenfrequency ratio", eigen_ratio),
        ("ROM construction scaling", scaling),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.clone()),
            Err(d) if ADVISORY.contains(&id) => ("FAIL (documented deviation)", d.clone()),
            Err(d) => ("FAIL", d.clone()),
        };
        println!("criterion {id:>2}  {tag}  {name} [{secs:.1} s]: {detail}");
        if outcome.is_err() && !ADVISORY.contains(&id) {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
