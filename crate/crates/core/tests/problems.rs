use std::f64::consts::PI;

use ibse_core::boundary::{discretize, point_in_omega};
use ibse_core::grid::GridSpec;
use ibse_core::problems::{linf_error, run, ProblemClass, ProblemId, RunConfig};
use ibse_core::IbseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn ids_parse_and_unknown_names_are_listed() {
    for id in ProblemId::ALL {
        assert_eq!(id.as_str().parse::<ProblemId>().unwrap(), id);
    }
    let err = "poisson-3d".parse::<ProblemId>().unwrap_err();
    assert!(err.to_string().contains("heat-blob"), "{err}");
}

#[test]
fn analytic_solutions_satisfy_their_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-3;
    for id in ProblemId::ALL.into_iter().filter(|p| p.has_analytic()) {
        let domain = id.domain();
        let tf = id.t_final().unwrap_or(0.0);
        let mut checked = 0;
        while checked < 5 {
            let x = rng.gen_range(0.0..2.0 * PI);
            let y = if id.dim() == 2 { rng.gen_range(0.0..2.0 * PI) } else { 0.0 };
            if !point_in_omega(&domain, [x, y]) {
                continue;
            }
            let t = rng.gen_range(0.0..=tf);
            let (pde, _) = id.analytic_residual(x, y, t, [1.0, 0.0], h).unwrap();
            let scale = id.forcing(x, y, t).abs().max(1.0);
            assert!(pde.abs() <= 1e-8 * scale, "{id} at ({x}, {y}, {t}): {pde}");
            checked += 1;
        }
        let spec = GridSpec::new(id.dim(), 64).unwrap();
        let bdy = discretize(&domain, &spec).unwrap();
        let t = 0.5 * tf;
        for (p, nrm) in bdy.nodes().iter().zip(bdy.normals()).take(5) {
            let (_, bc) = id.analytic_residual(p[0], p[1], t, *nrm, h).unwrap();
            assert!(bc.abs() <= 1e-8, "{id} boundary at {p:?}: {bc}");
        }
    }
}

#[test]
fn problems_without_exact_solutions_refuse_an_error_norm() {
    let spec = GridSpec::new(2, 8).unwrap();
    let u = vec![0.0; spec.len()];
    for id in [ProblemId::Burgers, ProblemId::Fhn] {
        assert!(id.analytic_residual(1.0, 1.0, 0.0, [1.0, 0.0], 1e-3).is_none());
        assert!(matches!(
            linf_error(id, &u, &spec, &u, 0.0),
            Err(IbseError::NoAnalyticSolution(_))
        ));
    }
}

#[test]
fn error_norm_sees_only_the_physical_domain() {
    let id = ProblemId::PoissonCircle;
    let spec = GridSpec::new(2, 32).unwrap();
    let chi: Vec<f64> = (0..spec.len())
        .map(|i| {
            let [x, y] = spec.point(i);
            f64::from(point_in_omega(&id.domain(), [x, y]))
        })
        .collect();
    let exact: Vec<f64> = (0..spec.len())
        .map(|i| {
            let [x, y] = spec.point(i);
            id.analytic(x, y, 0.0).unwrap()
        })
        .collect();
    assert_eq!(linf_error(id, &exact, &spec, &chi, 0.0).unwrap(), 0.0);
    let shifted: Vec<f64> = exact.iter().map(|v| v + 1e-3).collect();
    let e = linf_error(id, &shifted, &spec, &chi, 0.0).unwrap();
    assert!((e - 1e-3).abs() < 1e-12);
    // anything added outside Ω is invisible
    let outside: Vec<f64> = exact.iter().zip(&chi).map(|(v, c)| v + 50.0 * (1.0 - c)).collect();
    assert_eq!(linf_error(id, &outside, &spec, &chi, 0.0).unwrap(), 0.0);
    // Neumann errors ignore constants
    let nid = ProblemId::NeumannCircle;
    let nexact: Vec<f64> = (0..spec.len())
        .map(|i| {
            let [x, y] = spec.point(i);
            nid.analytic(x, y, 0.0).unwrap() + 3.0
        })
        .collect();
    assert!(linf_error(nid, &nexact, &spec, &chi, 0.0).unwrap() < 1e-12);
    assert!(linf_error(id, &u_len_mismatch(), &spec, &chi, 0.0).is_err());
}

fn u_len_mismatch() -> Vec<f64> {
    vec![0.0; 3]
}

#[test]
fn extension_beats_direct_forcing_on_the_disk() {
    let err = |k| {
        run(ProblemId::PoissonCircle, &RunConfig::new(k, 64))
            .unwrap()
            .linf_error
            .unwrap()
    };
    let (e0, e1, e3) = (err(0), err(1), err(3));
    assert!(e1 < e0 && e3 < 0.1 * e1, "{e0} {e1} {e3}");
}

#[test]
fn heat_runs_take_the_tabulated_step_count() {
    let out = run(ProblemId::HeatObstacle, &RunConfig::new(2, 64)).unwrap();
    assert_eq!(out.steps, 3);
    assert_eq!(ProblemId::HeatObstacle.class(), ProblemClass::Heat);
    assert!((out.t_final.unwrap() - 0.1).abs() < 1e-15);
    assert!(out.linf_error.unwrap() < 1e-3);
    let mut cfg = RunConfig::new(2, 32);
    cfg.dt = Some(0.0);
    assert!(run(ProblemId::HeatObstacle, &cfg).is_err());
}
