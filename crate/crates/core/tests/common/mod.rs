#![allow(dead_code)]

use std::collections::BTreeMap;

use dnf_core::dnf::{run_dnf, DnfOutput, PairKind};
use dnf_core::{build_discrete_system, solve_modes, ModeSelector};
use dnf_testkit::modal::{modal_normal_form, ModalNormalForm, ModalSystem};
use dnf_testkit::random::RandomModal;

/// Runs the engine on a discrete system and the modal oracle on the same data.
pub fn both(sys: &RandomModal, masters: &[usize], eps: f64) -> (DnfOutput, ModalNormalForm) {
    let mech = build_discrete_system(&sys.omegas, &sys.g, &sys.h).expect("valid system");
    let modes = solve_modes(mech.mass(), mech.stiffness(), &ModeSelector::Count(sys.omegas.len())).expect("modes");
    let one_based: Vec<usize> = masters.iter().map(|m| m + 1).collect();
    let out = run_dnf(&mech, &modes, &one_based, eps, f64::INFINITY, one_based[0], 0.0).expect("dnf");
    let oracle = modal_normal_form(&ModalSystem::from_lists(&sys.omegas, &sys.g, &sys.h), masters, eps);
    (out, oracle)
}

/// Largest entry-wise deviation between engine and oracle, relative to the oracle scale.
pub fn oracle_deviation(out: &DnfOutput, nf: &ModalNormalForm) -> f64 {
    let n = out.modes.len();
    let nn = 2 * n;
    let m = &out.model;
    let mut worst = 0.0f64;
    let mut scale = 1e-300f64;
    let mut cmp = |a: f64, b: f64| {
        worst = worst.max((a - b).abs());
        scale = scale.max(b.abs());
    };
    for s in 0..nn {
        for k in 0..nn {
            for l in 0..nn {
                cmp(out.cubic.f2.get(&[s, k, l]), nf.r2[s][k][l].im);
                cmp(0.0, nf.r2[s][k][l].re);
            }
        }
    }
    for s in 0..nn {
        for k in 0..nn {
            for l in 0..nn {
                for q in 0..nn {
                    let perms = [[k, l, q], [k, q, l], [l, k, q], [l, q, k], [q, k, l], [q, l, k]];
                    let sym = perms.iter().map(|p| out.cubic.f3.get(&[s, p[0], p[1], p[2]])).sum::<f64>() / 6.0;
                    cmp(sym, nf.r3[s][k][l][q].im);
                }
            }
        }
    }
    let rrr = m.cubic_displacement();
    let rvv = m.cubic_velocity();
    for p in 0..n {
        for k in 0..n {
            for l in 0..n {
                cmp(m.g.get(&[p, k, l]), nf.g[p][k][l]);
                for q in 0..n {
                    cmp(rrr.get(&[p, k, l, q]), nf.rrr[p][k][l][q]);
                    cmp(rvv.get(&[p, k, l, q]), nf.rvv[p][k][l][q]);
                }
            }
        }
    }
    let mut corr: BTreeMap<(usize, [usize; 3]), f64> = BTreeMap::new();
    for t in &m.velocity_correction {
        let mut v = t.vars;
        v.sort_unstable();
        *corr.entry((t.equation, v)).or_default() += t.coeff;
    }
    for e in 0..n {
        for a in 0..nn {
            for b in a..nn {
                for c in b..nn {
                    let count = distinct([a, b, c]);
                    let oracle = count * nf.velocity_correction[e][a][b][c];
                    cmp(corr.get(&(e, [a, b, c])).copied().unwrap_or(0.0), oracle);
                }
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            for (kind, l) in [(PairKind::Plus, b), (PairKind::Minus, b + n)] {
                let engine = &out.maps.get(kind, a, b).psi;
                let reference = nf.psi(a, l);
                for (x, y) in engine.iter().zip(&reference) {
                    cmp(*x, *y);
                }
            }
        }
    }
    worst / scale
}

fn distinct(idx: [usize; 3]) -> f64 {
    match (idx[0] == idx[1], idx[1] == idx[2]) {
        (true, true) => 1.0,
        (false, false) if idx[0] != idx[2] => 6.0,
        _ => 3.0,
    }
}
