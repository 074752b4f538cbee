use std::f64::consts::PI;

use ibse_core::boundary::{Circle, Domain};
use ibse_core::lu::matvec;
use ibse_core::operators::BoundaryOperator;
use ibse_core::schur::{
    EllipticOperator, IbseSystem, SchurFactorization, SchurKind, SystemConfig,
};
use ibse_core::IbseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disk(radius: f64) -> Domain {
    Domain::curve(
        Circle {
            center: [PI, PI],
            radius,
        },
        true,
    )
}

fn poisson(n: usize, k: usize) -> IbseSystem {
    IbseSystem::build(
        &disk(2.0),
        n,
        SystemConfig {
            k,
            theta: None,
            bc: BoundaryOperator::DIRICHLET,
            op: EllipticOperator::Poisson(None),
        },
    )
    .unwrap()
}

fn helmholtz(n: usize, k: usize, bc: BoundaryOperator) -> IbseSystem {
    IbseSystem::build(
        &disk(1.5),
        n,
        SystemConfig {
            k,
            theta: None,
            bc,
            op: EllipticOperator::Helmholtz { c: 0.1 },
        },
    )
    .unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn disk_error(sys: &IbseSystem, u: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
    let spec = sys.grid().spec();
    (0..spec.len())
        .filter(|&i| sys.chi_omega()[i] == 1.0)
        .map(|i| {
            let [x, y] = spec.point(i);
            (u[i] - exact(x, y)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn sizes_follow_block_structure() {
    let s = poisson(32, 2);
    let nb = s.boundary().len();
    assert_eq!(s.size(), 4 * nb + 1);
    assert_eq!(s.kind(), SchurKind::AugmentedPoisson);
    let h = helmholtz(32, 0, BoundaryOperator::DIRICHLET);
    assert_eq!(h.size(), h.boundary().len());
    assert_eq!(h.kind(), SchurKind::InvertibleL);
}

#[test]
fn assembled_matrix_matches_matrix_free_product() {
    for sys in [
        poisson(32, 3),
        helmholtz(32, 2, BoundaryOperator::robin(1.0, 0.5).unwrap()),
    ] {
        let fact = sys.assemble(1).unwrap();
        let m = sys.size();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x = random_vec(&mut rng, m);
            let a = matvec(m, fact.matrix(), &x);
            let b = sys.apply(&x).unwrap();
            let scale = max_abs(&b).max(1e-300);
            let d = a.iter().zip(&b).fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
            assert!(d <= 1e-11 * scale, "difference {d:e}, scale {scale:e}");
        }
    }
}

#[test]
fn lambda_column_shifts_value_rows_only() {
    let sys = poisson(64, 2);
    let nb = sys.boundary().len();
    let beta = sys.mu_beta().unwrap().beta;
    assert_eq!(beta, nb as f64);
    let col = sys.column(sys.size() - 1);
    for v in &col[..nb] {
        assert!((v - 1.0 / beta).abs() <= 1e-12 / beta);
    }
    for v in &col[nb..3 * nb] {
        assert!(v.abs() <= 1e-6 / beta);
    }
    for v in &col[3 * nb..4 * nb] {
        assert!((v - 1.0 / beta).abs() <= 1e-12 / beta);
    }
    assert_eq!(col[4 * nb], 0.0);
}

#[test]
fn factorization_is_independent_of_thread_count() {
    let sys = poisson(32, 1);
    let a = sys.assemble(1).unwrap();
    let b = sys.assemble(3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_data_gives_zero_solution_and_unit_vector_round_trips() {
    let sys = helmholtz(32, 1, BoundaryOperator::DIRICHLET);
    let fact = sys.assemble(1).unwrap();
    let len = sys.grid().len();
    let sol = sys
        .solve(&fact, &vec![0.0; len], &vec![0.0; sys.boundary().len()])
        .unwrap();
    assert!(sol.u.iter().all(|&v| v == 0.0));
    let mut e1 = vec![0.0; sys.size()];
    e1[0] = 1.0;
    let col = matvec(sys.size(), fact.matrix(), &e1);
    let back = fact.solve(&col).unwrap();
    for (i, v) in back.x.iter().enumerate() {
        let want = if i == 0 { 1.0 } else { 0.0 };
        assert!((v - want).abs() < 1e-8, "entry {i}: {v}");
    }
}

#[test]
fn dirichlet_poisson_on_disk_converges_at_order_k_plus_one() {
    // u = 4 - r², Δu = -4, u = 0 on r = 2
    let exact = |x: f64, y: f64| 4.0 - (x - PI).powi(2) - (y - PI).powi(2);
    for (k, min_slope) in [(1, 1.7), (2, 2.6), (3, 3.5)] {
        let mut errs = Vec::new();
        for n in [64, 128] {
            let sys = poisson(n, k);
            let fact = sys.assemble(1).unwrap();
            let f = vec![-4.0; sys.grid().len()];
            let g = vec![0.0; sys.boundary().len()];
            let sol = sys.solve(&fact, &f, &g).unwrap();
            errs.push(disk_error(&sys, &sol.u, exact));
            let r = sys.block_residuals(&sol, &f, &g).unwrap();
            assert!(sol.schur_residual < 1e-9, "{}", sol.schur_residual);
            assert!(r.elliptic < 1e-10, "{r:?}");
            assert!(r.extension < 1e-12, "{r:?}");
            assert!(r.mean.unwrap() < 1e-9, "{r:?}");
            assert!(r.matching < 1e-7, "{r:?}");
            assert!(r.boundary < 1e-10, "{r:?}");
        }
        let p = (errs[0] / errs[1]).log2();
        assert!(p >= min_slope, "k = {k}: errors {errs:?}");
    }
}

#[test]
fn helmholtz_error_decreases_with_extension_order() {
    // u = e^{x/2} cos y is not periodic, so the box forcing alone cannot
    // reproduce it; (I - cΔ)u = (1 + 3c/4)u
    let exact = |x: f64, y: f64| (0.5 * x).exp() * y.cos();
    let mut errs = Vec::new();
    for k in 0..=3 {
        let sys = helmholtz(128, k, BoundaryOperator::DIRICHLET);
        let fact = sys.assemble(1).unwrap();
        let spec = *sys.grid().spec();
        let f: Vec<f64> = (0..spec.len())
            .map(|i| {
                let [x, y] = spec.point(i);
                1.075 * exact(x, y)
            })
            .collect();
        let g: Vec<f64> = sys.boundary().nodes().iter().map(|p| exact(p[0], p[1])).collect();
        let sol = sys.solve(&fact, &f, &g).unwrap();
        errs.push(disk_error(&sys, &sol.u, exact));
    }
    assert!(errs[3] < errs[2] && errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
    let scale = (0.5 * (PI + 1.5)).exp();
    assert!(errs[3] < 1e-5 * scale, "{errs:?}");
}

#[test]
fn solve_is_linear_in_data() {
    let sys = helmholtz(32, 2, BoundaryOperator::NEUMANN);
    let fact = sys.assemble(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (len, nb) = (sys.grid().len(), sys.boundary().len());
    let (f1, g1) = (random_vec(&mut rng, len), random_vec(&mut rng, nb));
    let (f2, g2) = (random_vec(&mut rng, len), random_vec(&mut rng, nb));
    let a = 1.7;
    let f3: Vec<f64> = f1.iter().zip(&f2).map(|(p, q)| a * p + q).collect();
    let g3: Vec<f64> = g1.iter().zip(&g2).map(|(p, q)| a * p + q).collect();
    let s1 = sys.solve(&fact, &f1, &g1).unwrap().u;
    let s2 = sys.solve(&fact, &f2, &g2).unwrap().u;
    let s3 = sys.solve(&fact, &f3, &g3).unwrap().u;
    let scale = max_abs(&s3).max(1.0);
    for i in 0..len {
        assert!((s3[i] - (a * s1[i] + s2[i])).abs() <= 1e-9 * scale);
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sc.bin");
    let sys = poisson(32, 1);
    let fact = sys.assemble(1).unwrap();
    fact.save(&path).unwrap();
    let back = SchurFactorization::load_matching(&path, &sys.meta()).unwrap();
    assert_eq!(back, fact);

    let other = poisson(64, 1);
    assert!(matches!(
        SchurFactorization::load_matching(&path, &other.meta()),
        Err(IbseError::FactorizationMismatch(_))
    ));
    let f = vec![0.0; other.grid().len()];
    let g = vec![0.0; other.boundary().len()];
    assert!(other.solve(&back, &f, &g).is_err());

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(
        SchurFactorization::load(&path),
        Err(IbseError::CorruptFile { .. })
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(
        SchurFactorization::load(&path),
        Err(IbseError::CorruptFile { .. })
    ));
}

#[test]
fn excessive_order_is_refused() {
    let r = IbseSystem::build(
        &disk(2.0),
        32,
        SystemConfig {
            k: 4,
            theta: None,
            bc: BoundaryOperator::DIRICHLET,
            op: EllipticOperator::Poisson(None),
        },
    );
    assert!(matches!(r, Err(IbseError::RegularityExceeded { .. })));
    let r = IbseSystem::build(
        &disk(2.0),
        32,
        SystemConfig {
            k: 0,
            theta: None,
            bc: BoundaryOperator::NEUMANN,
            op: EllipticOperator::Poisson(None),
        },
    );
    assert!(matches!(r, Err(IbseError::InvalidParameter { name: "k", .. })));
}
