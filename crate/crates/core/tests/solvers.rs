use std::f64::consts::PI;

use ibse_core::boundary::{Circle, Domain};
use ibse_core::grid::Grid;
use ibse_core::operators::BoundaryOperator;
use ibse_core::problems::{run, ProblemId, RunConfig};
use ibse_core::schur::{EllipticOperator, IbseSystem, SystemConfig};
use ibse_core::solvers::{
    burgers_explicit, integrate_heat, integrate_imex, Component, EllipticSolver, History,
    BDF4_GAMMA,
};
use ibse_core::study::fit_slope;
use ibse_core::IbseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn disk() -> Domain {
    Domain::curve(
        Circle {
            center: [PI, PI],
            radius: 2.0,
        },
        true,
    )
}

fn solver(domain: &Domain, n: usize, k: usize, bc: BoundaryOperator, op: EllipticOperator) -> EllipticSolver {
    let sys = IbseSystem::build(
        domain,
        n,
        SystemConfig {
            k,
            theta: None,
            bc,
            op,
        },
    )
    .unwrap();
    EllipticSolver::new(sys, 1).unwrap()
}

fn sample(s: &EllipticSolver, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let spec = s.grid().spec();
    (0..spec.len())
        .map(|i| {
            let [x, y] = spec.point(i);
            f(x, y)
        })
        .collect()
}

fn on_nodes(s: &EllipticSolver, g: impl Fn([f64; 2], [f64; 2]) -> f64) -> Vec<f64> {
    let b = s.system().boundary();
    b.nodes().iter().zip(b.normals()).map(|(p, n)| g(*p, *n)).collect()
}

#[test]
fn burgers_advection_matches_closed_form() {
    let grid = Grid::with_size(2, 64).unwrap();
    let spec = *grid.spec();
    let pts: Vec<[f64; 2]> = (0..spec.len()).map(|i| spec.point(i)).collect();
    let u = vec![
        pts.iter().map(|p| p[1].sin()).collect::<Vec<_>>(),
        pts.iter().map(|p| p[0].sin()).collect::<Vec<_>>(),
    ];
    let e = burgers_explicit(&grid, &u);
    for (i, p) in pts.iter().enumerate() {
        assert!((e[0][i] + p[0].sin() * p[1].cos()).abs() < 1e-10);
        assert!((e[1][i] + p[1].sin() * p[0].cos()).abs() < 1e-10);
    }
    let c = burgers_explicit(&grid, &[vec![0.7; spec.len()], vec![-0.2; spec.len()]]);
    assert!(c.iter().all(|comp| max_abs(comp) < 1e-13));
}

#[test]
fn imex_without_explicit_terms_is_plain_bdf4() {
    let dt = 0.05;
    let s = solver(
        &disk(),
        32,
        2,
        BoundaryOperator::DIRICHLET,
        EllipticOperator::Helmholtz { c: BDF4_GAMMA * dt },
    );
    let psi = sample(&s, |x, y| (x - PI).cos() * (y - PI).sin() + 0.3);
    let g = on_nodes(&s, |p, _| p[0].cos());
    let len = psi.len();
    let heat = integrate_heat(
        &s,
        dt,
        6,
        0.0,
        History::constant(psi.clone()),
        |_| vec![0.0; len],
        |_| g.clone(),
        |_, _, _| {},
    )
    .unwrap();
    let imex = integrate_imex(
        &s,
        dt,
        1.0,
        6,
        &[Component::Diffusive { boundary: g.clone() }],
        vec![psi],
        |_, u| vec![vec![0.0; u[0].len()]],
        |_, _, _| {},
    )
    .unwrap();
    let d: Vec<f64> = heat.iter().zip(&imex[0]).map(|(a, b)| a - b).collect();
    assert!(max_abs(&d) <= 1e-12 * max_abs(&heat));
}

#[test]
fn time_step_must_match_the_factored_operator() {
    let s = solver(
        &disk(),
        32,
        1,
        BoundaryOperator::DIRICHLET,
        EllipticOperator::Helmholtz { c: BDF4_GAMMA * 0.1 },
    );
    let len = s.grid().len();
    let nb = s.system().boundary().len();
    let go = |dt: f64| {
        integrate_heat(
            &s,
            dt,
            1,
            0.0,
            History::constant(vec![0.0; len]),
            |_| vec![0.0; len],
            |_| vec![0.0; nb],
            |_, _, _| {},
        )
    };
    assert!(go(0.1).is_ok());
    assert!(matches!(go(0.05), Err(IbseError::InvalidParameter { name: "dt", .. })));
    assert!(go(-0.1).is_err());
}

#[test]
fn stepping_settles_on_a_steady_state() {
    // large steps damp every transient; the fixed point is then kept
    let dt = 50.0;
    let id = ProblemId::HeatObstacle;
    let s = solver(
        &id.domain(),
        64,
        3,
        BoundaryOperator::DIRICHLET,
        EllipticOperator::Helmholtz { c: BDF4_GAMMA * dt },
    );
    let exact = |x: f64, y: f64| x.sin().exp() + y.cos();
    let f = sample(&s, |x, y| -lap(x, y));
    let g = on_nodes(&s, |p, _| exact(p[0], p[1]));
    let u0 = sample(&s, exact);
    let settled = integrate_heat(&s, dt, 40, 0.0, History::constant(u0.clone()), |_| f.clone(), |_| g.clone(), |_, _, _| {})
        .unwrap();
    let chi = s.system().chi_omega();
    let err: Vec<f64> = settled.iter().zip(&u0).zip(chi).map(|((a, b), c)| c * (a - b)).collect();
    assert!(max_abs(&err) < 1e-4, "{}", max_abs(&err));
    let again = integrate_heat(&s, dt, 5, 0.0, History::constant(settled.clone()), |_| f.clone(), |_| g.clone(), |_, _, _| {})
        .unwrap();
    let d: Vec<f64> = again.iter().zip(&settled).map(|(a, b)| a - b).collect();
    assert!(max_abs(&d) < 1e-10 * max_abs(&settled), "{}", max_abs(&d));
}

/// `Δ(e^{sin x} + cos y)`.
fn lap(x: f64, y: f64) -> f64 {
    x.sin().exp() * (x.cos().powi(2) - x.sin()) - y.cos()
}

#[test]
fn symmetric_data_gives_mirror_symmetric_solution() {
    let n = 64;
    let s = solver(
        &disk(),
        n,
        3,
        BoundaryOperator::DIRICHLET,
        EllipticOperator::Poisson(None),
    );
    let f = sample(&s, |x, y| (2.0 * y).cos() + x.sin());
    let g = on_nodes(&s, |p, _| p[1].cos() + 0.5 * p[0]);
    let u = s.solve(&f, &g).unwrap().u;
    let mut worst = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let m = ((n - iy) % n) * n + ix;
            worst = worst.max((u[iy * n + ix] - u[m]).abs());
        }
    }
    assert!(worst <= 1e-10 * max_abs(&u), "{worst}");
}

#[test]
fn extended_solution_has_no_spurious_derivative_growth() {
    // derivatives up to order k over the whole box stay comparable to
    // those well inside Ω, and do not grow under refinement
    let id = ProblemId::NeumannCircle;
    for k in 1..=3 {
        let mut maxima = Vec::new();
        for n in [64, 128] {
            let out = run(id, &RunConfig::new(k, n)).unwrap();
            let grid = Grid::with_size(2, n).unwrap();
            let spec = *grid.spec();
            let inner = 2.0 - 4.0 * spec.dx();
            let deep: Vec<f64> = (0..spec.len())
                .map(|i| {
                    let [x, y] = spec.point(i);
                    f64::from(((x - PI).powi(2) + (y - PI).powi(2)).sqrt() <= inner)
                })
                .collect();
            let mut row = Vec::new();
            for j in 1..=k as u32 {
                let d = grid.derivative(&out.fields[0], 0, j);
                let whole = max_abs(&d);
                let inside = max_abs(&d.iter().zip(&deep).map(|(a, c)| a * c).collect::<Vec<_>>());
                assert!(whole <= 10.0 * inside, "k={k} n={n} j={j}: {whole} vs {inside}");
                row.push(whole);
            }
            maxima.push(row);
        }
        for (a, b) in maxima[0].iter().zip(&maxima[1]) {
            assert!(b / a < 1.5, "k={k}: {a} -> {b}");
        }
    }
}

#[test]
fn neumann_and_robin_solutions_satisfy_every_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (BoundaryOperator::NEUMANN, EllipticOperator::Poisson(None)),
        (BoundaryOperator::robin(1.0, 0.5).unwrap(), EllipticOperator::Helmholtz { c: 0.05 }),
    ];
    for (bc, op) in cases {
        for k in 1..=3 {
            let s = solver(&disk(), 64, k, bc, op);
            let f = sample(&s, |x, y| (x + 2.0 * y).sin() + 0.2);
            let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let g = on_nodes(&s, |p, nrm| a * p[0].sin() + b * (p[1] * nrm[0]).cos());
            let sol = s.solve(&f, &g).unwrap();
            let r = s.system().block_residuals(&sol, &f, &g).unwrap();
            assert!(r.elliptic < 1e-10, "{bc:?} k={k} {r:?}");
            assert!(r.extension < 1e-12, "{bc:?} k={k} {r:?}");
            assert!(r.matching < 1e-7, "{bc:?} k={k} {r:?}");
            assert!(r.boundary < 1e-9, "{bc:?} k={k} {r:?}");
            if let Some(m) = r.mean {
                assert!(m < 1e-9, "{bc:?} k={k} {r:?}");
            }
            assert!(sol.schur_residual < 1e-9, "{bc:?} k={k} {}", sol.schur_residual);
        }
    }
}

#[test]
fn bdf4_converges_at_fourth_order_in_time() {
    let id = ProblemId::HeatObstacle;
    let dts = [0.25, 0.125, 0.0625];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let mut cfg = RunConfig::new(3, 128);
            cfg.t_final = Some(2.0);
            cfg.dt = Some(dt);
            run(id, &cfg).unwrap().linf_error.unwrap()
        })
        .collect();
    let inv: Vec<usize> = dts.iter().map(|dt| (1.0 / dt) as usize).collect();
    let slope = fit_slope(&inv, &errs);
    assert!(slope > 3.5, "{errs:?} slope {slope}");
}
