use std::f64::consts::PI;

use ibse_core::boundary::{discretize, discretize_curve, BoundaryDiscretization, Circle, Domain};
use ibse_core::grid::{Grid, GridField, GridSpec};
use ibse_core::kernel::tilde_delta;
use ibse_core::operators::{BoundaryOperator, Operators, SpreadStencilSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn circle_setup(n: usize, k: usize) -> (GridSpec, BoundaryDiscretization, Operators) {
    let spec = GridSpec::new(2, n).unwrap();
    let d = Domain::curve(
        Circle {
            center: [PI, PI],
            radius: 2.0,
        },
        true,
    );
    let b = discretize(&d, &spec).unwrap();
    let ops = Operators::new(&b, &spec, tilde_delta(), k).unwrap();
    (spec, b, ops)
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Cauchy-Schwarz scale `‖u‖ ‖v‖` of a grid inner product; random inputs
/// make `⟨u, v⟩` itself cancel to far below its terms.
fn scale(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    (grid.inner(u, u) * grid.inner(v, v)).sqrt()
}

fn slope(ns: &[usize], errs: &[f64]) -> f64 {
    ibse_core::study::fit_slope(ns, errs)
}

#[test]
fn node_on_grid_point_has_squared_center_weight() {
    let spec = GridSpec::new(2, 32).unwrap();
    let dx = spec.dx();
    let b = BoundaryDiscretization::new(
        2,
        vec![[10.0 * dx, 12.0 * dx]],
        vec![[1.0, 0.0]],
        vec![1.0],
        1.0,
    )
    .unwrap();
    let st = SpreadStencilSet::new(&b, &spec, tilde_delta(), 3).unwrap();
    let idx = st.node_indices(0);
    let l = idx.iter().position(|&i| i == spec.index(10, 12)).unwrap();
    let d0 = tilde_delta().value(0.0, 0);
    let w = st.node_weights(0, 0)[l];
    assert!((w - d0 * d0 / (dx * dx)).abs() <= 1e-12 * w);
    // four layers at order 3, all zero outside the window
    assert_eq!(st.max_order(), 3);
    for j in 0..=3 {
        let mut f = vec![0.0; spec.len()];
        st.add_scaled(j, 0, 1.0, &mut f);
        for (i, v) in f.iter().enumerate() {
            if !idx.contains(&i) {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

#[test]
fn spreading_is_conservative() {
    let (spec, b, ops) = circle_setup(64, 3);
    let grid = Grid::new(spec);
    let zero = ops.spread_s(&vec![0.0; b.len()]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
    let one = ops.spread_s(&vec![1.0; b.len()]).unwrap();
    assert!((grid.integral(&one) - b.length()).abs() <= 1e-12 * b.length());
    assert!((b.length() - 4.0 * PI).abs() <= 1e-12);
    let ones = ops.interp_s_star(&vec![1.0; spec.len()]).unwrap();
    assert!(ones.iter().all(|v| (v - 1.0).abs() <= 1e-12));
}

#[test]
fn value_interpolation_is_fourth_order() {
    let ns = [64, 128, 256];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let (spec, b, ops) = circle_setup(n, 0);
            let u = GridField::from_fn(spec, |x, y| x.sin() * (2.0 * y).cos());
            let s = ops.interp_s_star(u.values()).unwrap();
            b.nodes()
                .iter()
                .zip(&s)
                .map(|(x, v)| (v - x[0].sin() * (2.0 * x[1]).cos()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let p = slope(&ns, &errs);
    assert!(p >= 3.5, "slope {p}, errors {errs:?}");
}

#[test]
fn normal_derivative_interpolation_is_third_order() {
    let ns = [64, 128, 256];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let (spec, b, ops) = circle_setup(n, 1);
            let u = GridField::from_fn(spec, |x, _| x.sin());
            let t = ops.interp_t_star(1, u.values()).unwrap();
            b.nodes()
                .iter()
                .zip(b.normals())
                .zip(&t)
                .map(|((x, nrm), v)| (v - nrm[0] * x[0].cos()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let p = slope(&ns, &errs);
    assert!(p >= 2.5, "slope {p}, errors {errs:?}");
}

#[test]
fn locally_constant_field_has_no_normal_derivatives() {
    let (spec, b, ops) = circle_setup(128, 3);
    let u = vec![2.5; spec.len()];
    let t = ops.interp_tk_star(&u).unwrap();
    let m = b.len();
    assert!(t[..m].iter().all(|v| (v - 2.5).abs() < 1e-12));
    assert!(t[m..].iter().all(|v| v.abs() < 1e-6 * 2.5), "{:?}", &t[m..m + 3]);
}

#[test]
fn tk_with_only_first_block_equals_s() {
    let (_, b, ops) = circle_setup(64, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f0 = random_vec(&mut rng, b.len());
    let mut stacked = f0.clone();
    stacked.extend(vec![0.0; 2 * b.len()]);
    assert_eq!(ops.spread_tk(&stacked).unwrap(), ops.spread_s(&f0).unwrap());
    assert!(ops.spread_tk(&f0).is_err());
}

#[test]
fn robin_rows_combine_value_and_derivative() {
    let (spec, _, ops) = circle_setup(64, 1);
    let u = GridField::from_fn(spec, |x, y| x.sin() + y.cos());
    let bc = BoundaryOperator::robin(2.0, -0.5).unwrap();
    let r = ops.interp_bc(bc, u.values()).unwrap();
    let s = ops.interp_s_star(u.values()).unwrap();
    let t = ops.interp_t_star(1, u.values()).unwrap();
    for i in 0..r.len() {
        assert!((r[i] - (2.0 * s[i] - 0.5 * t[i])).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn adjointness_each_order(seed in any::<u64>()) {
        let (spec, b, ops) = circle_setup(64, 3);
        let grid = Grid::new(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vec(&mut rng, spec.len());
        for j in 0..=3 {
            let f = random_vec(&mut rng, b.len());
            let tf = ops.spread_t(j, &f).unwrap();
            let lhs = grid.inner(&u, &tf);
            let rhs = b.inner(&ops.interp_t_star(j, &u).unwrap(), &f);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale(&grid, &u, &tf), "j={} lhs={:e} rhs={:e}", j, lhs, rhs);
        }
    }

    #[test]
    fn stacked_adjointness(seed in any::<u64>(), k in 1usize..=3) {
        let (spec, b, ops) = circle_setup(64, k);
        let grid = Grid::new(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vec(&mut rng, spec.len());
        let f = random_vec(&mut rng, (k + 1) * b.len());
        let tf = ops.spread_tk(&f).unwrap();
        let lhs = grid.inner(&u, &tf);
        let t = ops.interp_tk_star(&u).unwrap();
        let m = b.len();
        let rhs: f64 = (0..=k).map(|j| b.inner(&t[j * m..(j + 1) * m], &f[j * m..(j + 1) * m])).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale(&grid, &u, &tf));
    }

    #[test]
    fn spreading_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let spec = GridSpec::new(2, 32).unwrap();
        let b = discretize_curve(&Circle { center: [3.0, 3.3], radius: 1.1 }, false, 24).unwrap();
        let ops = Operators::new(&b, &spec, tilde_delta(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_vec(&mut rng, 3 * 24);
        let g = random_vec(&mut rng, 3 * 24);
        let comb: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let lhs = ops.spread_tk(&comb).unwrap();
        let (sf, sg) = (ops.spread_tk(&f).unwrap(), ops.spread_tk(&g).unwrap());
        let scale = lhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * sf[i] + sg[i])).abs() <= 1e-12 * scale);
        }
    }
}
