use std::sync::Arc;

use dnf_core::sparse::norm;
use dnf_fe::{
    generate_mesh, BeamParams, BlockParams, ElementKind, FeModel, Material, Mesh, RuleChoice, Template,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn steel_like() -> Material {
    Material::new(200.0, 0.3, 7.8).unwrap()
}

fn beam_mesh(kind: ElementKind) -> Mesh {
    generate_mesh(&Template::Beam(BeamParams::single(40.0, 2.0, 3.0, [10, 2, 2], kind))).unwrap()
}

fn random_vec(rng: &mut StdRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

#[test]
fn single_block_cell() {
    let m = generate_mesh(&Template::Block(BlockParams { size: [1.0; 3], divisions: [1; 3], element: ElementKind::Hex8 }))
        .unwrap();
    assert_eq!(m.node_count(), 8);
    assert_eq!(m.element_count(), 1);
    assert!((m.volume() - 1.0).abs() < 1e-14);
}

#[test]
fn degenerate_geometry_is_rejected() {
    let t = Template::Block(BlockParams { size: [1.0, 0.0, 1.0], divisions: [1; 3], element: ElementKind::Hex8 });
    assert!(generate_mesh(&t).is_err());
}

#[test]
fn exact_cubic_decomposition() {
    let mut rng = StdRng::seed_from_u64(1);
    for kind in [ElementKind::Hex8, ElementKind::Tet10] {
        let model = FeModel::new(beam_mesh(kind), steel_like(), &["clamped"]).unwrap();
        let k = model.stiffness().unwrap();
        for draw in 0..5 {
            let u = random_vec(&mut rng, model.free_dof_count(), 0.05 * (1 + draw) as f64);
            let full = model.full_internal_force(&u).unwrap();
            let mut split = k.mul_vec(&u);
            let g = model.quadratic_force(&u, &u).unwrap();
            let h = model.cubic_force(&u, &u, &u).unwrap();
            for i in 0..split.len() {
                split[i] += g[i] + h[i];
            }
            let err = rel_diff(&split, &full);
            assert!(err < 1e-10, "{kind:?} draw {draw}: {err:e}");
            // the element-loop linear force agrees with the assembled matrix
            assert!(rel_diff(&model.linear_force(&u).unwrap(), &k.mul_vec(&u)) < 1e-12);
        }
    }
}

#[test]
fn operator_symmetry_and_linearity() {
    let mut rng = StdRng::seed_from_u64(2);
    let model = FeModel::new(beam_mesh(ElementKind::Tet10), steel_like(), &["clamped"]).unwrap();
    let n = model.free_dof_count();
    let (a, b, c) = (random_vec(&mut rng, n, 1.0), random_vec(&mut rng, n, 1.0), random_vec(&mut rng, n, 1.0));
    let gab = model.quadratic_force(&a, &b).unwrap();
    assert!(rel_diff(&model.quadratic_force(&b, &a).unwrap(), &gab) < 1e-13);
    let habc = model.cubic_force(&a, &b, &c).unwrap();
    for (x, y, z) in [(&c, &a, &b), (&b, &c, &a), (&b, &a, &c), (&a, &c, &b), (&c, &b, &a)] {
        assert!(rel_diff(&model.cubic_force(x, y, z).unwrap(), &habc) < 1e-13);
    }
    let alpha = 1.7;
    let comb: Vec<f64> = a.iter().zip(&c).map(|(x, y)| alpha * x + y).collect();
    let lhs = model.quadratic_force(&comb, &b).unwrap();
    let gcb = model.quadratic_force(&c, &b).unwrap();
    let rhs: Vec<f64> = gab.iter().zip(&gcb).map(|(x, y)| alpha * x + y).collect();
    assert!(rel_diff(&lhs, &rhs) < 1e-13);
    assert!(norm(&model.quadratic_force(&vec![0.0; n], &b).unwrap()) == 0.0);
}

#[test]
fn tangent_is_consistent() {
    let mut rng = StdRng::seed_from_u64(3);
    for kind in [ElementKind::Hex8, ElementKind::Tet10] {
        let model = FeModel::new(beam_mesh(kind), steel_like(), &["clamped"]).unwrap();
        let n = model.free_dof_count();
        let u = random_vec(&mut rng, n, 0.1);
        let v = random_vec(&mut rng, n, 1.0);
        let kt = model.tangent(&u).unwrap().mul_vec(&v);
        let mut expect = model.stiffness().unwrap().mul_vec(&v);
        let g = model.quadratic_force(&u, &v).unwrap();
        let h = model.cubic_force(&u, &u, &v).unwrap();
        for i in 0..n {
            expect[i] += 2.0 * g[i] + 3.0 * h[i];
        }
        assert!(rel_diff(&kt, &expect) < 1e-11, "{kind:?}");
    }
}

#[test]
fn free_free_rigid_body_properties() {
    for kind in [ElementKind::Hex8, ElementKind::Tet10] {
        let mesh =
            generate_mesh(&Template::Block(BlockParams { size: [2.0, 1.0, 1.5], divisions: [3, 2, 2], element: kind }))
                .unwrap();
        let volume = mesh.volume();
        let mat = steel_like();
        let model = FeModel::new(mesh.clone(), mat, &[]).unwrap();
        let (m, k) = model.linear().unwrap();
        let knorm = k.frobenius_norm();
        for d in 0..3 {
            let t: Vec<f64> = (0..model.free_dof_count()).map(|i| if i % 3 == d { 1.0 } else { 0.0 }).collect();
            assert!(norm(&k.mul_vec(&t)) / knorm < 1e-10);
            assert!((m.bilinear(&t, &t) - mat.density * volume).abs() < 1e-10 * mat.density * volume);
        }
        // finite rotation about z: Green-Lagrange strain vanishes exactly
        let theta: f64 = 0.3;
        let (c, s) = (theta.cos(), theta.sin());
        let u: Vec<f64> = mesh
            .nodes
            .iter()
            .flat_map(|x| [(c - 1.0) * x[0] - s * x[1], s * x[0] + (c - 1.0) * x[1], 0.0])
            .collect();
        let f = model.full_internal_force(&u).unwrap();
        assert!(norm(&f) < 1e-8 * knorm * theta * theta, "{:e}", norm(&f));
        let mut rng = StdRng::seed_from_u64(9);
        let x = random_vec(&mut rng, model.free_dof_count(), 1.0);
        assert!(m.bilinear(&x, &x) > 0.0);
    }
}

#[test]
fn raised_quadrature_leaves_affine_stiffness_unchanged() {
    for kind in [ElementKind::Hex8, ElementKind::Tet10] {
        let mesh =
            generate_mesh(&Template::Block(BlockParams { size: [1.0, 2.0, 0.5], divisions: [2, 2, 1], element: kind }))
                .unwrap();
        let a = FeModel::with_rule(mesh.clone(), steel_like(), &["x0"], RuleChoice::Standard).unwrap();
        let b = FeModel::with_rule(mesh, steel_like(), &["x0"], RuleChoice::Raised).unwrap();
        let (ka, kb) = (a.stiffness().unwrap(), b.stiffness().unwrap());
        let scale = ka.iter_upper().map(|(_, _, v)| v.abs()).fold(0.0, f64::max);
        let worst = ka.iter_upper().map(|(i, j, v)| (v - kb.get(i, j)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10 * scale, "{kind:?}: {worst:e}");
    }
}

#[test]
fn parallel_assembly_is_deterministic() {
    let mesh = beam_mesh(ElementKind::Tet10);
    let model = Arc::new(FeModel::new(mesh, steel_like(), &["clamped"]).unwrap());
    let mut rng = StdRng::seed_from_u64(4);
    let u = random_vec(&mut rng, model.free_dof_count(), 0.1);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| (model.full_internal_force(&u).unwrap(), model.stiffness().unwrap()))
    };
    let (f1, k1) = run(1);
    let (f4, k4) = run(4);
    assert_eq!(f1, f4);
    assert_eq!(k1, k4);
}
