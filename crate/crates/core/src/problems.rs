//! Registry of test problems with geometry, data, analytic solutions, and a
//! runner that solves them end to end.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::info;

use crate::boundary::{Circle, Domain, PolarCurve};
use crate::error::{IbseError, Result};
use crate::grid::GridSpec;
use crate::operators::BoundaryOperator;
use crate::schur::{EllipticOperator, IbseSystem, SchurFactorization, SystemConfig};
use crate::solvers::{
    burgers_explicit, fhn_explicit, integrate_heat, integrate_imex, Component, EllipticSolver,
    FhnParams, History, BDF4_GAMMA,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemId {
    Poisson1d,
    PoissonCircle,
    NeumannCircle,
    HeatObstacle,
    HeatBlob,
    Burgers,
    Fhn,
}

/// How a problem is advanced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemClass {
    Elliptic,
    Heat,
    Imex,
}

pub const BURGERS_NU: f64 = 0.01;

pub const FHN: FhnParams = FhnParams {
    a: 0.1,
    gamma: 2.0,
    epsilon: 0.005,
    nu: 0.001,
};

impl ProblemId {
    pub const ALL: [ProblemId; 7] = [
        ProblemId::Poisson1d,
        ProblemId::PoissonCircle,
        ProblemId::NeumannCircle,
        ProblemId::HeatObstacle,
        ProblemId::HeatBlob,
        ProblemId::Burgers,
        ProblemId::Fhn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Poisson1d => "poisson-1d",
            ProblemId::PoissonCircle => "poisson-circle",
            ProblemId::NeumannCircle => "neumann-circle",
            ProblemId::HeatObstacle => "heat-obstacle",
            ProblemId::HeatBlob => "heat-blob",
            ProblemId::Burgers => "burgers",
            ProblemId::Fhn => "fhn",
        }
    }

    pub fn class(self) -> ProblemClass {
        match self {
            ProblemId::Poisson1d | ProblemId::PoissonCircle | ProblemId::NeumannCircle => {
                ProblemClass::Elliptic
            }
            ProblemId::HeatObstacle | ProblemId::HeatBlob => ProblemClass::Heat,
            ProblemId::Burgers | ProblemId::Fhn => ProblemClass::Imex,
        }
    }

    pub fn dim(self) -> usize {
        if self == ProblemId::Poisson1d {
            1
        } else {
            2
        }
    }

    pub fn domain(self) -> Domain {
        let center = [PI, PI];
        match self {
            ProblemId::Poisson1d => Domain::IntervalComplement { a: 3.0, b: 4.0 },
            ProblemId::PoissonCircle => Domain::curve(Circle { center, radius: 2.0 }, true),
            ProblemId::NeumannCircle => Domain::curve(Circle { center, radius: 1.0 }, true),
            ProblemId::HeatObstacle => Domain::curve(Circle { center, radius: 0.25 }, false),
            ProblemId::HeatBlob => Domain::curve(PolarCurve::star_blob(), true),
            ProblemId::Burgers | ProblemId::Fhn => {
                Domain::curve(PolarCurve::cardioid_blob(), false)
            }
        }
    }

    pub fn boundary_operator(self) -> BoundaryOperator {
        match self {
            ProblemId::NeumannCircle | ProblemId::Fhn => BoundaryOperator::NEUMANN,
            _ => BoundaryOperator::DIRICHLET,
        }
    }

    pub fn t_final(self) -> Option<f64> {
        match self {
            ProblemId::HeatObstacle => Some(0.1),
            ProblemId::HeatBlob => Some(0.01),
            ProblemId::Burgers => Some(2.0),
            ProblemId::Fhn => Some(200.0),
            _ => None,
        }
    }

    /// Diffusion coefficient of the implicit part.
    pub fn nu(self) -> f64 {
        match self {
            ProblemId::Burgers => BURGERS_NU,
            ProblemId::Fhn => FHN.nu,
            _ => 1.0,
        }
    }

    pub fn has_analytic(self) -> bool {
        self.class() != ProblemClass::Imex
    }

    /// Convergence order the method is expected to reach with extension
    /// order `k` (0 for the direct-forcing reference).
    pub fn expected_order(self, k: usize) -> f64 {
        match (k, self.boundary_operator().has_value_term()) {
            (0, _) => 1.0,
            (k, true) => k as f64 + 1.0,
            (k, false) => k as f64,
        }
    }

    /// Number of steps to reach `t_final` with spacing `dx`.
    pub fn default_steps(self, t_final: f64, dx: f64) -> usize {
        let per_dx = match self {
            ProblemId::Burgers => 20.0,
            _ => 2.0,
        };
        ((per_dx * t_final / dx).ceil() as usize).max(1)
    }

    /// Analytic solution, if one is known.
    pub fn analytic(self, x: f64, y: f64, t: f64) -> Option<f64> {
        match self {
            ProblemId::Poisson1d => {
                let (a, b) = poisson_1d_coefficients();
                // Ω is [4, 3 + 2π] once [0, 3] is shifted by a period
                let x = if x < 3.5 { x + 2.0 * PI } else { x };
                Some(-x.sin() + a * x + b)
            }
            ProblemId::PoissonCircle => Some(4.0 - (x - PI).powi(2) - (y - PI).powi(2)),
            ProblemId::NeumannCircle => Some(x.sin().exp() + y.cos()),
            ProblemId::HeatObstacle => Some((x.sin().exp() + y.cos()) * t.cos()),
            ProblemId::HeatBlob => Some((PI * blob_phi(x, y, t)).sin()),
            ProblemId::Burgers | ProblemId::Fhn => None,
        }
    }

    /// Forcing `f` (right side of `Δu = f`, or of `u_t - Δu = f`).
    pub fn forcing(self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            ProblemId::Poisson1d => x.sin(),
            ProblemId::PoissonCircle => -4.0,
            ProblemId::NeumannCircle => exp_sin_laplacian(x) - y.cos(),
            ProblemId::HeatObstacle => {
                (y.cos() - exp_sin_laplacian(x)) * t.cos() - (x.sin().exp() + y.cos()) * t.sin()
            }
            ProblemId::HeatBlob => {
                let phi = blob_phi(x, y, t);
                let (gx, gy) = blob_phi_gradient(x, y);
                PI * (2.0 - BLOB_PHI_LAPLACIAN) * (PI * phi).cos()
                    + PI * PI * (gx * gx + gy * gy) * (PI * phi).sin()
            }
            ProblemId::Burgers | ProblemId::Fhn => 0.0,
        }
    }

    /// Boundary data at node `p` with outward normal `nrm`.
    pub fn boundary_value(self, p: [f64; 2], nrm: [f64; 2], t: f64) -> f64 {
        match self {
            ProblemId::NeumannCircle => {
                let (x, y) = (p[0], p[1]);
                x.sin().exp() * x.cos() * nrm[0] - y.sin() * nrm[1]
            }
            ProblemId::Burgers | ProblemId::Fhn => 0.0,
            _ => self.analytic(p[0], p[1], t).unwrap_or(0.0),
        }
    }

    /// Initial fields of the nonlinear problems.
    pub fn initial_fields(self, spec: &GridSpec) -> Vec<Vec<f64>> {
        let sample = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            (0..spec.len())
                .map(|i| {
                    let [x, y] = spec.point(i);
                    f(x, y)
                })
                .collect()
        };
        match self {
            ProblemId::Burgers => {
                let psi = sample(&|x, y| {
                    2.0 * (-40.0 * (x - 2.5).powi(2)).exp() * (-40.0 * (y - 4.3).powi(2)).exp()
                });
                vec![psi.clone(), psi]
            }
            ProblemId::Fhn => vec![
                sample(&|x, y| {
                    2.0 * (-100.0 * (x - 2.5).powi(2)).exp() * (-10.0 * (y - 4.3).powi(2)).exp()
                }),
                vec![0.0; spec.len()],
            ],
            _ => Vec::new(),
        }
    }

    /// Residual of the PDE and boundary condition for the analytic
    /// solution at `(x, y, t)`, by sixth-order central differences with
    /// step `h`. `None` when no analytic solution exists.
    pub fn analytic_residual(self, x: f64, y: f64, t: f64, nrm: [f64; 2], h: f64) -> Option<(f64, f64)> {
        self.analytic(x, y, t)?;
        let u = |x: f64, y: f64, t: f64| self.analytic(x, y, t).unwrap();
        let lap = d2(|s| u(s, y, t), x, h)
            + if self.dim() == 2 {
                d2(|s| u(x, s, t), y, h)
            } else {
                0.0
            };
        let pde = match self.class() {
            ProblemClass::Elliptic => lap - self.forcing(x, y, t),
            _ => d1(|s| u(x, y, s), t, h) - lap - self.forcing(x, y, t),
        };
        let bc = if self.boundary_operator().has_value_term() {
            u(x, y, t) - self.boundary_value([x, y], nrm, t)
        } else {
            let gx = d1(|s| u(s, y, t), x, h);
            let gy = d1(|s| u(x, s, t), y, h);
            gx * nrm[0] + gy * nrm[1] - self.boundary_value([x, y], nrm, t)
        };
        Some((pde, bc))
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = IbseError;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| IbseError::InvalidParameter {
                name: "problem",
                reason: format!(
                    "unknown problem '{s}', expected one of {}",
                    ProblemId::ALL.map(|p| p.as_str()).join(", ")
                ),
            })
    }
}

const BLOB_PHI_LAPLACIAN: f64 = 2.0 * (9.0 + 4.0) / 16.0;

fn blob_phi(x: f64, y: f64, t: f64) -> f64 {
    9.0 * ((x - PI) / 4.0 + 1.0).powi(2) + 4.0 * ((y - PI) / 4.0 + 1.0).powi(2) + 2.0 * t
}

fn blob_phi_gradient(x: f64, y: f64) -> (f64, f64) {
    (
        4.5 * ((x - PI) / 4.0 + 1.0),
        2.0 * ((y - PI) / 4.0 + 1.0),
    )
}

/// `(e^{sin x})'' = e^{sin x}(cos²x - sin x)`.
fn exp_sin_laplacian(x: f64) -> f64 {
    x.sin().exp() * (x.cos().powi(2) - x.sin())
}

/// `(a, b)` in `u = -sin x + a x + b` on `[4, 3 + 2π]`.
pub fn poisson_1d_coefficients() -> (f64, f64) {
    let a = (3f64.sin() - 4f64.sin()) / (2.0 * PI - 1.0);
    (a, 4f64.sin() - 4.0 * a)
}

fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (45.0 * (f(x + h) - f(x - h)) - 9.0 * (f(x + 2.0 * h) - f(x - 2.0 * h))
        + (f(x + 3.0 * h) - f(x - 3.0 * h)))
        / (60.0 * h)
}

fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (270.0 * (f(x + h) + f(x - h)) - 27.0 * (f(x + 2.0 * h) + f(x - 2.0 * h))
        + 2.0 * (f(x + 3.0 * h) + f(x - 3.0 * h))
        - 490.0 * f(x))
        / (180.0 * h * h)
}

/// Maximum of `|u - u_a(·, t)|` over grid points of `Ω`. For Neumann
/// problems both fields are first shifted to zero mean over those points.
pub fn linf_error(id: ProblemId, u: &[f64], spec: &GridSpec, chi_omega: &[f64], t: f64) -> Result<f64> {
    if !id.has_analytic() {
        return Err(IbseError::NoAnalyticSolution(id.as_str().into()));
    }
    for (what, len) in [("solution", u.len()), ("mask", chi_omega.len())] {
        if len != spec.len() {
            return Err(IbseError::LengthMismatch {
                what,
                expected: spec.len(),
                got: len,
            });
        }
    }
    let pts: Vec<(f64, f64)> = (0..spec.len())
        .filter(|&i| chi_omega[i] == 1.0)
        .map(|i| {
            let [x, y] = spec.point(i);
            (u[i], id.analytic(x, y, t).unwrap())
        })
        .collect();
    let (mu, ma) = if id.boundary_operator().has_value_term() || pts.is_empty() {
        (0.0, 0.0)
    } else {
        let m = pts.len() as f64;
        (
            pts.iter().map(|p| p.0).sum::<f64>() / m,
            pts.iter().map(|p| p.1).sum::<f64>() / m,
        )
    };
    Ok(pts
        .iter()
        .fold(0.0, |e, (v, a)| e.max(((v - mu) - (a - ma)).abs())))
}

/// Per-run options.
#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    /// Extension order; 0 runs the direct-forcing reference.
    pub k: usize,
    pub n: usize,
    /// Time step override; rounded down so the steps divide `t_final`.
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub theta: Option<f64>,
    pub threads: usize,
}

impl RunConfig {
    pub fn new(k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            dt: None,
            t_final: None,
            theta: None,
            threads: 1,
        }
    }
}

/// Result of one run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub problem: ProblemId,
    pub k: usize,
    pub spec: GridSpec,
    pub n_bdy: usize,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub steps: usize,
    /// Final (or, for the blob problem, max over time) error when an
    /// analytic solution exists.
    pub linf_error: Option<f64>,
    /// Final fields (one per component).
    pub fields: Vec<Vec<f64>>,
    pub chi_omega: Vec<f64>,
    /// System setup, assembly, and factorization time.
    pub prep_seconds: f64,
    /// Mean time per step (per solve for elliptic problems).
    pub step_seconds: f64,
    /// Whether the factorization was reused rather than built.
    pub factorization_reused: bool,
}

/// Supplies a factorization for a system, reporting whether it was reused.
pub type FactorizationSource<'a> = dyn FnMut(&IbseSystem) -> Result<(SchurFactorization, bool)> + 'a;

/// Builds the factorization directly.
pub fn assemble_fresh(threads: usize) -> impl FnMut(&IbseSystem) -> Result<(SchurFactorization, bool)> {
    move |sys: &IbseSystem| Ok((sys.assemble(threads)?, false))
}

/// The system a run of `id` will factor, with the chosen time step.
pub fn build_system(id: ProblemId, cfg: &RunConfig) -> Result<(IbseSystem, Option<f64>, usize)> {
    let spec = GridSpec::new(id.dim(), cfg.n)?;
    let (dt, steps) = match id.t_final() {
        None => (None, 0),
        Some(tf) => {
            let tf = cfg.t_final.unwrap_or(tf);
            if !(tf > 0.0) {
                return Err(IbseError::InvalidParameter {
                    name: "t_final",
                    reason: format!("must be positive, got {tf}"),
                });
            }
            let steps = match cfg.dt {
                Some(dt) if dt > 0.0 => (tf / dt - 1e-9).ceil().max(1.0) as usize,
                Some(dt) => {
                    return Err(IbseError::InvalidParameter {
                        name: "dt",
                        reason: format!("must be positive, got {dt}"),
                    })
                }
                None => id.default_steps(tf, spec.dx()),
            };
            (Some(tf / steps as f64), steps)
        }
    };
    let op = match (id.class(), dt) {
        (ProblemClass::Elliptic, _) => EllipticOperator::Poisson(None),
        (_, Some(dt)) => EllipticOperator::Helmholtz {
            c: BDF4_GAMMA * id.nu() * dt,
        },
        (_, None) => unreachable!("time-dependent problems have a step"),
    };
    let sys = IbseSystem::build(
        &id.domain(),
        cfg.n,
        SystemConfig {
            k: cfg.k,
            theta: cfg.theta,
            bc: id.boundary_operator(),
            op,
        },
    )?;
    Ok((sys, dt, steps))
}

/// Solves `id` on one grid with a fresh factorization.
pub fn run(id: ProblemId, cfg: &RunConfig) -> Result<RunOutcome> {
    run_with(id, cfg, &mut assemble_fresh(cfg.threads))
}

/// Solves `id` on one grid, taking the factorization from `source`.
pub fn run_with(id: ProblemId, cfg: &RunConfig, source: &mut FactorizationSource<'_>) -> Result<RunOutcome> {
    let start = Instant::now();
    let (sys, dt, steps) = build_system(id, cfg)?;
    let (fact, reused) = source(&sys)?;
    let solver = EllipticSolver::with_factorization(sys, fact)?;
    let prep_seconds = start.elapsed().as_secs_f64();
    let sys = solver.system();
    let spec = *sys.grid().spec();
    let chi = sys.chi_omega().to_vec();
    let n_bdy = sys.boundary().len();
    let sample = |t: f64, f: &dyn Fn(f64, f64, f64) -> f64| -> Vec<f64> {
        (0..spec.len())
            .map(|i| {
                let [x, y] = spec.point(i);
                f(x, y, t)
            })
            .collect()
    };
    let bdata = |t: f64| -> Vec<f64> {
        let b = sys.boundary();
        b.nodes()
            .iter()
            .zip(b.normals())
            .map(|(p, nrm)| id.boundary_value(*p, *nrm, t))
            .collect()
    };
    let t_final = dt.map(|dt| dt * steps as f64);
    let analytic = |x: f64, y: f64, t: f64| id.analytic(x, y, t).unwrap();
    let forcing = |x: f64, y: f64, t: f64| id.forcing(x, y, t);
    let run_start = Instant::now();
    let (fields, linf) = match id.class() {
        ProblemClass::Elliptic => {
            let sol = solver.solve(&sample(0.0, &forcing), &bdata(0.0))?;
            let e = linf_error(id, &sol.u, &spec, &chi, 0.0)?;
            (vec![sol.u], Some(e))
        }
        ProblemClass::Heat => {
            let dt = dt.unwrap();
            let history = History::new([
                sample(0.0, &analytic),
                sample(-dt, &analytic),
                sample(-2.0 * dt, &analytic),
                sample(-3.0 * dt, &analytic),
            ])?;
            let track_max = id == ProblemId::HeatBlob;
            let mut worst = 0.0f64;
            let mut err_at = |t: f64, u: &[f64]| {
                if let Ok(e) = linf_error(id, u, &spec, &chi, t) {
                    worst = worst.max(e);
                }
            };
            let u = integrate_heat(
                &solver,
                dt,
                steps,
                0.0,
                history,
                |t| sample(t, &forcing),
                bdata,
                |_, t, u| {
                    if track_max {
                        err_at(t, u)
                    }
                },
            )?;
            let e = if track_max {
                worst
            } else {
                linf_error(id, &u, &spec, &chi, t_final.unwrap())?
            };
            (vec![u], Some(e))
        }
        ProblemClass::Imex => {
            let dt = dt.unwrap();
            let zeros = vec![0.0; n_bdy];
            let (components, fields) = match id {
                ProblemId::Burgers => {
                    let c = Component::Diffusive { boundary: zeros };
                    let f = integrate_imex(
                        &solver,
                        dt,
                        id.nu(),
                        steps,
                        &[c.clone(), c],
                        id.initial_fields(&spec),
                        burgers_explicit,
                        |_, _, _| {},
                    )?;
                    (2, f)
                }
                _ => {
                    let f = integrate_imex(
                        &solver,
                        dt,
                        id.nu(),
                        steps,
                        &[Component::Diffusive { boundary: zeros }, Component::Pointwise],
                        id.initial_fields(&spec),
                        |_, fields| fhn_explicit(FHN, fields),
                        |_, _, _| {},
                    )?;
                    (2, f)
                }
            };
            debug_assert_eq!(components, fields.len());
            (fields, None)
        }
    };
    let elapsed = run_start.elapsed().as_secs_f64();
    info!(
        "{id} k={} n={}: error {:?}, prep {prep_seconds:.3}s, {steps} steps in {elapsed:.3}s",
        cfg.k, cfg.n, linf
    );
    Ok(RunOutcome {
        problem: id,
        k: cfg.k,
        spec,
        n_bdy,
        dt,
        t_final,
        steps,
        linf_error: linf,
        fields,
        chi_omega: chi,
        prep_seconds,
        step_seconds: elapsed / steps.max(1) as f64,
        factorization_reused: reused,
    })
}
