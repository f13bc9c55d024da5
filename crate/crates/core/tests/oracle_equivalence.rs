mod common;

use common::{both, oracle_deviation};
use dnf_testkit::random::{random_potential, random_trailing_symmetric};

const TOL: f64 = 1e-10;

#[test]
fn nonresonant_random_systems_match_modal_oracle() {
    for seed in 0..6u64 {
        let omegas: Vec<f64> = (0..5).map(|i| 1.0 + 0.37 * i as f64 + 0.05 * seed as f64).collect();
        let sys = random_potential(&omegas, seed, 0.7);
        let (out, nf) = both(&sys, &[0, 1], 0.02);
        assert!(out.table.is_empty(), "seed {seed}: {:?}", out.table);
        let dev = oracle_deviation(&out, &nf);
        assert!(dev < TOL, "seed {seed}: deviation {dev:e}");
    }
}

#[test]
fn one_to_two_resonance_matches_modal_oracle() {
    let sys = random_potential(&[1.0, 1.989, 3.3, 4.1], 11, 0.8);
    let (out, nf) = both(&sys, &[0, 1], 0.02);
    assert!(!out.table.is_empty());
    let dev = oracle_deviation(&out, &nf);
    assert!(dev < TOL, "deviation {dev:e}");
}

#[test]
fn one_to_three_resonance_matches_modal_oracle() {
    let sys = random_potential(&[1.0, 2.3, 3.001, 4.6], 5, 0.8);
    let (out, nf) = both(&sys, &[0, 2], 0.02);
    let dev = oracle_deviation(&out, &nf);
    assert!(dev < TOL, "deviation {dev:e}");
}

#[test]
fn single_master_with_all_slaves_matches_modal_oracle() {
    let sys = random_potential(&[1.3, 2.9, 3.7, 5.2, 6.1, 7.7], 3, 1.0);
    let (out, nf) = both(&sys, &[0], 0.05);
    let dev = oracle_deviation(&out, &nf);
    assert!(dev < TOL, "deviation {dev:e}");
}

#[test]
fn nonconservative_one_to_two_resonance_matches_modal_oracle() {
    for seed in 0..4u64 {
        let sys = random_trailing_symmetric(&[1.0, 1.989, 3.3], seed, 0.9);
        let (out, nf) = both(&sys, &[0, 1], 0.02);
        let dev = oracle_deviation(&out, &nf);
        assert!(dev < TOL, "seed {seed}: deviation {dev:e}");
    }
}
