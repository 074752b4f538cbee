//! Elliptic solves and time integration on top of a factored system.

use log::debug;

use crate::error::{IbseError, Result};
use crate::grid::{max_abs, Grid};
use crate::schur::{EllipticOperator, EllipticSolution, IbseSystem, SchurFactorization};

/// Leading BDF4 coefficient `12/25`.
pub const BDF4_GAMMA: f64 = 12.0 / 25.0;

/// Fields above this magnitude abort an integration.
pub const BLOW_UP_LIMIT: f64 = 1e6;

/// A system together with its factorization.
#[derive(Clone, Debug)]
pub struct EllipticSolver {
    system: IbseSystem,
    fact: SchurFactorization,
}

impl EllipticSolver {
    /// Assembles and factors the Schur complement.
    pub fn new(system: IbseSystem, threads: usize) -> Result<Self> {
        let fact = system.assemble(threads)?;
        Ok(Self { system, fact })
    }

    /// Pairs a system with an existing factorization, refusing a mismatch.
    pub fn with_factorization(system: IbseSystem, fact: SchurFactorization) -> Result<Self> {
        fact.check(&system.meta())?;
        Ok(Self { system, fact })
    }

    pub fn system(&self) -> &IbseSystem {
        &self.system
    }

    pub fn factorization(&self) -> &SchurFactorization {
        &self.fact
    }

    pub fn grid(&self) -> &Grid {
        self.system.grid()
    }

    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<EllipticSolution> {
        self.system.solve(&self.fact, f, g)
    }

    /// Helmholtz coefficient `c`, or an error for Poisson systems.
    fn helmholtz_c(&self) -> Result<f64> {
        match self.system.elliptic_operator() {
            EllipticOperator::Helmholtz { c } => Ok(c),
            EllipticOperator::Poisson(_) => Err(IbseError::InvalidParameter {
                name: "operator",
                reason: "time stepping needs a Helmholtz system".into(),
            }),
        }
    }

    fn check_step(&self, dt: f64, nu: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(IbseError::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        let c = self.helmholtz_c()?;
        let want = BDF4_GAMMA * nu * dt;
        if (c - want).abs() > 1e-12 * want {
            return Err(IbseError::InvalidParameter {
                name: "dt",
                reason: format!("system built for c = {c}, step needs {want}"),
            });
        }
        Ok(())
    }
}

/// Solution history, newest first: `u^n, u^{n-1}, u^{n-2}, u^{n-3}`.
#[derive(Clone, Debug)]
pub struct History {
    levels: [Vec<f64>; 4],
}

impl History {
    pub fn new(levels: [Vec<f64>; 4]) -> Result<Self> {
        let len = levels[0].len();
        for l in &levels {
            if l.len() != len {
                return Err(IbseError::LengthMismatch {
                    what: "history level",
                    expected: len,
                    got: l.len(),
                });
            }
            crate::grid::check_finite("history level", l)?;
        }
        Ok(Self { levels })
    }

    /// All four levels equal to `u`.
    pub fn constant(u: Vec<f64>) -> Self {
        Self {
            levels: [u.clone(), u.clone(), u.clone(), u],
        }
    }

    pub fn current(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn levels(&self) -> &[Vec<f64>; 4] {
        &self.levels
    }

    fn push(&mut self, u: Vec<f64>) {
        self.levels.rotate_right(1);
        self.levels[0] = u;
    }

    /// `4u^n - 3u^{n-1} + (4/3)u^{n-2} - (1/4)u^{n-3}`.
    fn bdf_combination(&self, i: usize) -> f64 {
        let l = &self.levels;
        4.0 * l[0][i] - 3.0 * l[1][i] + 4.0 / 3.0 * l[2][i] - 0.25 * l[3][i]
    }
}

fn guard(step: usize, time: f64, u: &[f64]) -> Result<()> {
    let max = u.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) });
    if !(max <= BLOW_UP_LIMIT) {
        return Err(IbseError::BlowUp { step, time, max });
    }
    Ok(())
}

/// Integrates `u_t = Δu + f` with BDF4 from `t0` over `steps` steps of
/// `dt`. The solver must be built for `c = (12/25)Δt`. `forcing(t)` samples
/// `f` on the grid and `boundary(t)` gives boundary data at the nodes;
/// `observe` sees every new level.
pub fn integrate_heat(
    solver: &EllipticSolver,
    dt: f64,
    steps: usize,
    t0: f64,
    mut history: History,
    forcing: impl Fn(f64) -> Vec<f64>,
    boundary: impl Fn(f64) -> Vec<f64>,
    mut observe: impl FnMut(usize, f64, &[f64]),
) -> Result<Vec<f64>> {
    solver.check_step(dt, 1.0)?;
    if history.current().len() != solver.grid().len() {
        return Err(IbseError::LengthMismatch {
            what: "history level",
            expected: solver.grid().len(),
            got: history.current().len(),
        });
    }
    for step in 1..=steps {
        let t = t0 + step as f64 * dt;
        let f_next = forcing(t);
        let rhs: Vec<f64> = (0..f_next.len())
            .map(|i| BDF4_GAMMA * (dt * f_next[i] + history.bdf_combination(i)))
            .collect();
        let sol = solver.solve(&rhs, &boundary(t))?;
        guard(step, t, &sol.u)?;
        observe(step, t, &sol.u);
        history.push(sol.u);
    }
    debug!("heat integration finished {steps} steps at t = {}", t0 + steps as f64 * dt);
    Ok(history.levels[0].clone())
}

/// One field of an IMEX system: either diffused with the shared elliptic
/// solve (with fixed boundary data) or advanced pointwise.
#[derive(Clone, Debug)]
pub enum Component {
    Diffusive { boundary: Vec<f64> },
    Pointwise,
}

/// Integrates `u_t = νΔu + E(u)` (per component) with IMEX-BDF4. The
/// solver must be built for `c = (12/25)νΔt`. Startup levels all equal the
/// initial data.
pub fn integrate_imex(
    solver: &EllipticSolver,
    dt: f64,
    nu: f64,
    steps: usize,
    components: &[Component],
    initial: Vec<Vec<f64>>,
    explicit: impl Fn(&Grid, &[Vec<f64>]) -> Vec<Vec<f64>>,
    mut observe: impl FnMut(usize, f64, &[Vec<f64>]),
) -> Result<Vec<Vec<f64>>> {
    solver.check_step(dt, nu)?;
    if components.len() != initial.len() {
        return Err(IbseError::LengthMismatch {
            what: "components",
            expected: components.len(),
            got: initial.len(),
        });
    }
    let grid = solver.grid();
    let len = grid.len();
    for u in &initial {
        if u.len() != len {
            return Err(IbseError::LengthMismatch {
                what: "initial field",
                expected: len,
                got: u.len(),
            });
        }
    }
    let e0 = explicit(grid, &initial);
    let mut explicit_hist: Vec<History> = e0.into_iter().map(History::constant).collect();
    let mut hist: Vec<History> = initial.into_iter().map(History::constant).collect();
    for step in 1..=steps {
        let t = step as f64 * dt;
        let mut next = Vec::with_capacity(hist.len());
        for (c, comp) in components.iter().enumerate() {
            let (h, e) = (&hist[c], explicit_hist[c].levels());
            let f: Vec<f64> = (0..len)
                .map(|i| {
                    let ex = 4.0 * e[0][i] - 6.0 * e[1][i] + 4.0 * e[2][i] - e[3][i];
                    BDF4_GAMMA * (h.bdf_combination(i) + dt * ex)
                })
                .collect();
            let u = match comp {
                Component::Diffusive { boundary } => solver.solve(&f, boundary)?.u,
                Component::Pointwise => f,
            };
            guard(step, t, &u)?;
            next.push(u);
        }
        observe(step, t, &next);
        let e = explicit(grid, &next);
        for ((h, eh), (u, ei)) in hist
            .iter_mut()
            .zip(explicit_hist.iter_mut())
            .zip(next.into_iter().zip(e))
        {
            h.push(u);
            eh.push(ei);
        }
    }
    Ok(hist.into_iter().map(|h| h.levels[0].clone()).collect())
}

/// `-(u·∇)u` for a velocity field with one component per dimension.
pub fn burgers_explicit(grid: &Grid, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = grid.dim();
    u.iter()
        .map(|comp| {
            let grad = grid.gradient(comp);
            (0..grid.len())
                .map(|i| -(0..dim).map(|a| u[a][i] * grad[a][i]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// FitzHugh-Nagumo reaction parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FhnParams {
    pub a: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub nu: f64,
}

/// `(v(a-v)(v-1) - w, ε(v - γw))` for the fields `[v, w]`.
pub fn fhn_explicit(p: FhnParams, fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (v, w) = (&fields[0], &fields[1]);
    let dv = v
        .iter()
        .zip(w)
        .map(|(&v, &w)| v * (p.a - v) * (v - 1.0) - w)
        .collect();
    let dw = v
        .iter()
        .zip(w)
        .map(|(&v, &w)| p.epsilon * (v - p.gamma * w))
        .collect();
    vec![dv, dw]
}

/// Maximum of `|u|` over `mask == 1`.
pub fn masked_max(u: &[f64], mask: &[f64]) -> f64 {
    let v: Vec<f64> = u.iter().zip(mask).filter(|(_, &m)| m == 1.0).map(|(u, _)| *u).collect();
    max_abs(&v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_rotates_newest_first() {
        let mut h = History::new([vec![3.0], vec![2.0], vec![1.0], vec![0.0]]).unwrap();
        h.push(vec![4.0]);
        assert_eq!(h.levels()[0], vec![4.0]);
        assert_eq!(h.levels()[3], vec![1.0]);
        // constants are preserved by the BDF combination
        let c = History::constant(vec![2.0]);
        assert!((c.bdf_combination(0) - 25.0 / 12.0 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn guard_catches_large_and_nan() {
        assert!(guard(1, 0.1, &[1.0, -2.0]).is_ok());
        assert!(matches!(guard(3, 0.3, &[2e6]), Err(IbseError::BlowUp { step: 3, .. })));
        assert!(guard(1, 0.1, &[f64::NAN]).is_err());
    }

    #[test]
    fn fhn_reaction_vanishes_at_rest_points() {
        let p = FhnParams {
            a: 0.1,
            gamma: 2.0,
            epsilon: 0.005,
            nu: 0.001,
        };
        let e = fhn_explicit(p, &[vec![0.1, 1.0, 0.0], vec![0.0; 3]]);
        assert!(e[0].iter().all(|v| v.abs() < 1e-15));
        assert!((e[1][1] - 0.005).abs() < 1e-15);
    }
}
