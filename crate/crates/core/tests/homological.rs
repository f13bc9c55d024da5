mod common;

use common::both;
use dnf_core::dnf::{realize_quadratic_maps, velocity_map, PairKind, Projections};
use dnf_core::spectral::z_from_rs;
use dnf_core::{build_discrete_system, run_dnf, solve_modes, ComplexSpectrum, ModeSelector};
use dnf_testkit::random::{random_potential, random_trailing_symmetric};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn residuals_and_orthogonality_are_tight() {
    for (i, omegas) in [vec![1.0, 1.989, 3.3, 4.1], vec![1.0, 2.2, 3.001, 4.7, 5.3], vec![0.8, 1.7, 2.9]]
        .into_iter()
        .enumerate()
    {
        let sys = random_potential(&omegas, i as u64, 0.9);
        let masters: Vec<usize> = (0..omegas.len().min(3)).collect();
        let (out, _) = both(&sys, &masters, 0.05);
        assert!(out.maps.max_residual() < 1e-9, "{}", out.maps.max_residual());
        assert!(out.maps.max_orthogonality() < 1e-10, "{}", out.maps.max_orthogonality());
        assert_eq!(out.model.diagnostics.max_residual, out.maps.max_residual());
    }
}

#[test]
fn slave_mode_example() {
    let mech = build_discrete_system(&[1.0, 10.0], &[([2, 1, 1], 1.0)], &[]).unwrap();
    let modes = solve_modes(mech.mass(), mech.stiffness(), &ModeSelector::Count(2)).unwrap();
    let out = run_dnf(&mech, &modes, &[1], 0.05, f64::INFINITY, 1, 0.0).unwrap();
    let plus = &out.maps.get(PairKind::Plus, 0, 0).psi;
    let minus = &out.maps.get(PairKind::Minus, 0, 0).psi;
    assert!((plus[1] + 1.0 / 96.0).abs() < 1e-15, "{plus:?}");
    assert!((minus[1] + 1.0 / 100.0).abs() < 1e-15, "{minus:?}");
    assert!(plus[0].abs() < 1e-15 && minus[0].abs() < 1e-15);
}

#[test]
fn exact_one_to_two_quadratic_coefficient() {
    let mech = build_discrete_system(&[1.0, 2.0], &[([2, 1, 1], 0.3)], &[]).unwrap();
    let modes = solve_modes(mech.mass(), mech.stiffness(), &ModeSelector::Count(2)).unwrap();
    let out = run_dnf(&mech, &modes, &[1, 2], 0.05, 100.0, 1, 1.0).unwrap();
    assert!((out.cubic.f2.get(&[1, 0, 0]) - 0.075).abs() < 1e-15);
    assert!((out.cubic.f2.get(&[3, 0, 0]) + 0.075).abs() < 1e-15);
    let entry = out.model.resonances.get(0, 0).expect("z₁² is resonant");
    assert_eq!(entry.modes, vec![1]);
    assert!(entry.retained.contains(&(1, 0.075)));
}

#[test]
fn real_map_identities() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let dofs = 9;
        let p: Vec<f64> = (0..dofs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..dofs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (wk, wl) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0));
        let m = realize_quadratic_maps(&p, &q, wk, wl).unwrap();
        for i in 0..dofs {
            assert!((m.a_hat[i] - 0.5 * (p[i] + q[i])).abs() < 1e-12);
            assert!((m.b_hat[i] * 2.0 * wk * wl - (q[i] - p[i])).abs() < 1e-12);
            let g = ((wl + wk) * p[i] + (wl - wk) * q[i]) / wl;
            assert!((m.gamma_hat[i] - g).abs() < 1e-12);
        }
        let diag = realize_quadratic_maps(&p, &q, wk, wk).unwrap();
        for i in 0..dofs {
            assert!((diag.gamma_hat[i] - 2.0 * p[i]).abs() < 1e-12);
        }
    }
}

/// Complex maps evaluated on `z(r, s)` agree with the real maps on `(r, s)`.
#[test]
fn complex_and_real_reconstruction_agree() {
    let mut rng = StdRng::seed_from_u64(3);
    for (seed, omegas) in [(0u64, vec![1.0, 1.989, 3.3]), (1, vec![1.1, 1.7, 2.9, 3.6])] {
        let sys = random_trailing_symmetric(&omegas, seed, 0.9);
        let (out, _) = both(&sys, &[0, 1], 0.02);
        let n = out.modes.len();
        let spectrum = ComplexSpectrum::from_modes(&out.modes).unwrap();
        let maps = out.model.maps.as_ref().unwrap();
        for _ in 0..5 {
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut z = vec![Complex64::new(0.0, 0.0); 2 * n];
            for a in 0..n {
                let (za, zb) = z_from_rs(r[a], s[a], spectrum.omega(a));
                z[a] = za;
                z[a + n] = zb;
            }
            let dofs = maps.dofs;
            let mut u_c = vec![Complex64::new(0.0, 0.0); dofs];
            let mut v_c = vec![Complex64::new(0.0, 0.0); dofs];
            for k in 0..2 * n {
                for l in 0..2 * n {
                    let sol = out.maps.state_map(k, l);
                    let f2: Vec<(usize, f64)> = (0..2 * n)
                        .map(|t| (t, out.cubic.f2.get(&[t, k, l])))
                        .filter(|(_, f)| *f != 0.0)
                        .collect();
                    let ups = velocity_map(&sol.psi, &f2, &spectrum, k, l, &out.modes);
                    let zz = z[k] * z[l];
                    for i in 0..dofs {
                        u_c[i] += sol.psi[i] * zz;
                        v_c[i] += Complex64::new(0.0, ups[i]) * zz;
                    }
                }
            }
            let mut u_r = vec![0.0; dofs];
            let mut v_r = vec![0.0; dofs];
            for k in 0..n {
                for l in 0..n {
                    for i in 0..dofs {
                        u_r[i] += maps.a_hat(k, l)[i] * r[k] * r[l] + maps.b_hat(k, l)[i] * s[k] * s[l];
                        v_r[i] += maps.gamma_hat(k, l)[i] * r[k] * s[l];
                    }
                }
            }
            for i in 0..dofs {
                assert!(u_c[i].im.abs() < 1e-12 && v_c[i].im.abs() < 1e-12);
                assert!((u_c[i].re - u_r[i]).abs() < 1e-12, "u {i}: {} vs {}", u_c[i].re, u_r[i]);
                assert!((v_c[i].re - v_r[i]).abs() < 1e-12, "v {i}: {} vs {}", v_c[i].re, v_r[i]);
            }
        }
    }
}

#[test]
fn cubic_antisymmetry_without_resonance() {
    for seed in 0..4u64 {
        let sys = random_trailing_symmetric(&[1.0, 1.45, 2.7, 3.9], seed, 0.9);
        let (out, _) = both(&sys, &[0, 1], 0.05);
        assert!(out.table.is_empty());
        assert!(out.cubic.antisymmetry_defect() < 1e-12, "{}", out.cubic.antisymmetry_defect());
    }
}

/// `ω_s (f³_{s̄} − f³_s)` equals the resonant right-hand side built from the projections.
#[test]
fn resonant_third_order_right_hand_side() {
    let sys = random_trailing_symmetric(&[1.0, 1.989, 3.3], 4, 0.9);
    let mech = build_discrete_system(&sys.omegas, &sys.g, &sys.h).unwrap();
    let modes = solve_modes(mech.mass(), mech.stiffness(), &ModeSelector::Count(3)).unwrap();
    let out = run_dnf(&mech, &modes, &[1, 2], 0.02, f64::INFINITY, 1, 0.0).unwrap();
    let proj = Projections::compute(&mech, &out.modes, &out.maps).unwrap();
    let spectrum = ComplexSpectrum::from_modes(&out.modes).unwrap();
    let n = 2;
    let nn = 4;
    let f2 = &out.cubic.f2;
    let lam = |k: usize| spectrum.lambda_imag(k);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for s in 0..n {
        for k in 0..nn {
            for l in 0..nn {
                for m in 0..nn {
                    let mut rhs = -(proj.g_state(s, k, l, m % n)
                        + proj.g_state(s, l, m, k % n)
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
    assert!(scale > 0.1);
    assert!(worst < 1e-10 * scale, "{worst:e}");
}

#[test]
fn slave_resonance_is_reported() {
    let sys = random_potential(&[1.0, 2.2, 4.4], 1, 1.0);
    let mech = build_discrete_system(&sys.omegas, &sys.g, &sys.h).unwrap();
    let modes = solve_modes(mech.mass(), mech.stiffness(), &ModeSelector::Count(3)).unwrap();
    let err = run_dnf(&mech, &modes, &[1, 2], 0.05, f64::INFINITY, 1, 0.0).unwrap_err();
    assert!(matches!(err, dnf_core::DnfError::UndetectedResonance { .. }), "{err}");
}
