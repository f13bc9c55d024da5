use std::f64::consts::PI;

use dnf_solvers::{
    floquet_stability, hb_continue, Bifurcation, ContinuationConfig, DrivenOde, GeneralizedAlpha, HBConfig,
    HarmonicBalance, IntegratorConfig, Ode, PolynomialForce,
};
use dnf_testkit::closed_form::damped_linear_multipliers;

fn duffing() -> Ode {
    let poly = PolynomialForce { cubic: vec![([0, 0, 0, 0], 0.5)], ..Default::default() };
    Ode::oscillator(1.0, 0.02, 0.01, poly).unwrap()
}

#[test]
fn damped_linear_multipliers_match_closed_form() {
    let (omega0, c, omega) = (1.4, 0.08, 1.1);
    let ode = Ode::oscillator(omega0, c, 0.3, PolynomialForce::default()).unwrap();
    let hb = HarmonicBalance::new(&ode, HBConfig::default()).unwrap();
    let (x, _) = hb.solve(&hb.linear_guess(omega).unwrap(), omega).unwrap();
    let fl = floquet_stability(&ode, &hb.orbit(x, omega)).unwrap();
    assert!(fl.stable);
    let mut expected = damped_linear_multipliers(c, omega0, 2.0 * PI / omega).to_vec();
    expected.sort_by(|a, b| b.im.total_cmp(&a.im));
    for (got, want) in fl.multipliers.iter().zip(&expected) {
        assert!((got - want).norm() < 1e-8, "{got} vs {want}");
    }
    assert!((fl.max_modulus() - (-c * PI / omega).exp()).abs() < 1e-8);
}

/// Arclength position where `f` changes sign between points `i - 1` and `i`.
fn crossing(s: &[f64], f: &[f64], i: usize) -> f64 {
    s[i - 1] + (s[i] - s[i - 1]) * f[i - 1] / (f[i - 1] - f[i])
}

#[test]
fn fold_multiplier_crosses_one_at_turning_points() {
    let ode = duffing();
    let cfg = ContinuationConfig { max_step: 4e-3, ..ContinuationConfig::range(0.9, 1.1) };
    let branch = hb_continue(&ode, &HBConfig::default(), &cfg).unwrap();
    let pts = &branch.points;
    let mut s = vec![0.0];
    for w in pts.windows(2) {
        let d = ((w[1].omega - w[0].omega) / 0.2).powi(2) + ((w[1].amplitudes[0] - w[0].amplitudes[0]) / 0.5).powi(2);
        s.push(s.last().unwrap() + d.sqrt());
    }
    let real_minus_one: Vec<f64> = pts
        .iter()
        .map(|p| p.multipliers.iter().filter(|m| m.im.abs() < 1e-9).map(|m| m.re).fold(f64::MIN, f64::max) - 1.0)
        .collect();
    let tangent: Vec<f64> = pts.iter().map(|p| p.tangent_omega).collect();
    let folds: Vec<usize> = branch.bifurcations().iter().filter(|(_, b)| *b == Bifurcation::SN).map(|(i, _)| *i).collect();
    assert_eq!(folds.len(), 2);
    for &i in &folds {
        assert!(real_minus_one[i - 1] * real_minus_one[i] < 0.0, "multiplier does not cross 1 at point {i}");
        let from_multiplier = crossing(&s, &real_minus_one, i);
        let from_tangent = crossing(&s, &tangent, i);
        let spacing = s[i] - s[i - 1];
        assert!((from_multiplier - from_tangent).abs() < 0.05 * spacing.max(1e-4), "fold {i}");
    }
    let unstable: Vec<bool> = pts.iter().map(|p| !p.stable).collect();
    let inside: Vec<bool> = (0..pts.len()).map(|i| i >= folds[0] && i < folds[1]).collect();
    assert_eq!(unstable, inside);
}

#[test]
fn stability_agrees_with_long_time_integration() {
    let ode = duffing();
    let branch = hb_continue(&ode, &HBConfig::default(), &ContinuationConfig::range(0.9, 1.1)).unwrap();
    let candidates: Vec<usize> =
        (0..branch.points.len()).filter(|&i| (branch.points[i].multipliers[0].norm() - 1.0).abs() > 0.02).collect();
    let stride = (candidates.len() / 20).max(1);
    let sampled: Vec<usize> = candidates.iter().step_by(stride).take(20).cloned().collect();
    assert_eq!(sampled.len(), 20);
    assert!(sampled.iter().any(|&i| !branch.points[i].stable));
    for &i in &sampled {
        let orbit = branch.orbit(i);
        let omega = orbit.omega;
        let (q0, v0) = orbit.state_at(0.0);
        let amp = branch.points[i].amplitudes[0];
        let kick = 0.01 * amp;
        let dynamics = DrivenOde { ode: &ode, omega };
        let steps = 400;
        let mut integ = GeneralizedAlpha::new(
            &dynamics,
            2.0 * PI / omega / steps as f64,
            IntegratorConfig::default(),
            0.0,
            vec![q0[0] + kick],
            v0.clone(),
        )
        .unwrap();
        integ.run(300 * steps, &[], steps).unwrap();
        let dist = ((integ.state.q[0] - q0[0]).powi(2) + ((integ.state.v[0] - v0[0]) / omega).powi(2)).sqrt();
        let returned = dist < 0.5 * kick;
        assert_eq!(returned, branch.points[i].stable, "ω = {omega}, amplitude {amp}: distance {dist} after kick {kick}");
    }
}
