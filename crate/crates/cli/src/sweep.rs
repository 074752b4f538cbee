//! Refinement and timing studies.

use std::time::Instant;

use anyhow::{bail, Result};
use ibse_core::grid::Grid;
use ibse_core::problems::{assemble_fresh, run_with, ProblemId, RunConfig, RunOutcome};
use ibse_core::schur::IbseSystem;
use ibse_core::study::{fit_slope, self_convergence, Level, SelfConvergenceRow};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::FactorCache;
use crate::report::ReportRow;

/// Settings shared by every grid of a sweep.
#[derive(Clone, Copy, Debug, Default)]
pub struct SweepOptions {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub theta: Option<f64>,
    pub threads: usize,
}

impl SweepOptions {
    pub fn config(&self, k: usize, n: usize) -> RunConfig {
        RunConfig {
            k,
            n,
            dt: self.dt,
            t_final: self.t_final,
            theta: self.theta,
            threads: self.threads.max(1),
        }
    }
}

/// One problem solved on one grid, taking the factorization from `cache`
/// when given.
pub fn solve_one(id: ProblemId, cfg: &RunConfig, cache: Option<&FactorCache>) -> Result<RunOutcome> {
    let out = match cache {
        Some(c) => {
            let threads = cfg.threads;
            let mut source = |sys: &IbseSystem| c.fetch(id, sys, threads);
            run_with(id, cfg, &mut source)?
        }
        None => run_with(id, cfg, &mut assemble_fresh(cfg.threads))?,
    };
    if out.factorization_reused {
        info!("{id} k={} n={}: factorization loaded, assembly skipped", cfg.k, cfg.n);
    }
    Ok(out)
}

/// Outcome of a refinement study.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub problem: ProblemId,
    pub k: usize,
    pub rows: Vec<ReportRow>,
    /// Final fields per completed grid.
    pub levels: Vec<Level>,
    /// Successive differences, for problems without an analytic solution.
    pub self_convergence: Vec<SelfConvergenceRow>,
    pub slope: Option<f64>,
    pub expected_order: f64,
    /// Set when a grid failed; rows then cover the grids before it.
    pub failure: Option<String>,
}

impl Sweep {
    /// Fitted slope at least the expected order minus one half.
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.slope.is_some_and(|s| s >= self.expected_order - 0.5)
    }

    /// Errors (or successive differences) by grid.
    pub fn errors(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.linf_error.map(|e| (r.n, e)))
            .collect()
    }
}

fn check_sweep(ns: &[usize]) -> Result<()> {
    if ns.len() < 3 {
        bail!("a convergence study needs at least 3 resolutions, got {}", ns.len());
    }
    for w in ns.windows(2) {
        if w[1] != 2 * w[0] {
            bail!("resolutions must double successively, got {} then {}", w[0], w[1]);
        }
    }
    if let Some(n) = ns.iter().find(|n| !n.is_power_of_two()) {
        bail!("n = {n} is not a power of two");
    }
    Ok(())
}

/// Solves `id` on each grid of `ns` and fits the convergence order. Errors
/// come from the analytic solution when one exists and from successive
/// differences otherwise. A failing grid ends the sweep with a partial
/// table.
pub fn convergence(
    id: ProblemId,
    k: usize,
    ns: &[usize],
    opts: &SweepOptions,
    cache: Option<&FactorCache>,
) -> Result<Sweep> {
    check_sweep(ns)?;
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    let mut failure = None;
    for &n in ns {
        match solve_one(id, &opts.config(k, n), cache) {
            Ok(out) => {
                info!("{id} k={k} n={n}: error {:?}", out.linf_error);
                rows.push(ReportRow::from_outcome(&out));
                levels.push(Level {
                    spec: out.spec,
                    fields: out.fields,
                });
            }
            Err(e) => {
                warn!("{id} k={k} n={n} failed: {e:#}");
                failure = Some(format!("n = {n}: {e:#}"));
                break;
            }
        }
    }
    let mut sc = Vec::new();
    if !id.has_analytic() && levels.len() >= 2 {
        sc = self_convergence(&levels)?;
        for (row, d) in rows.iter_mut().zip(&sc) {
            row.linf_error = Some(d.difference);
        }
    }
    let pts: Vec<(usize, f64)> = rows
        .iter()
        .filter_map(|r| r.linf_error.map(|e| (r.n, e)))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let (n, e): (Vec<usize>, Vec<f64>) = pts.into_iter().unzip();
        fit_slope(&n, &e)
    });
    for r in &mut rows {
        r.slope = slope;
    }
    Ok(Sweep {
        problem: id,
        k,
        rows,
        levels,
        self_convergence: sc,
        slope,
        expected_order: id.expected_order(k),
        failure,
    })
}

/// Median time of 20 forward transforms of a random field on the grid.
pub fn fft_seconds(dim: usize, n: usize, seed: u64) -> Result<f64> {
    let grid = Grid::with_size(dim, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // warm up planner caches and memory
    std::hint::black_box(grid.forward(&u));
    let mut times: Vec<f64> = (0..20)
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(grid.forward(&u));
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    Ok(0.5 * (times[9] + times[10]))
}

/// Wall-clock costs of one run, with the FFT baseline of its grid.
#[derive(Clone, Debug)]
pub struct TimingRow {
    pub n: usize,
    pub k: usize,
    pub n_bdy: usize,
    pub steps: usize,
    pub fft_seconds: f64,
    pub prep_seconds: f64,
    pub step_seconds: f64,
    pub report: ReportRow,
}

impl TimingRow {
    pub fn prep_fft_units(&self) -> f64 {
        self.prep_seconds / self.fft_seconds
    }

    pub fn step_fft_units(&self) -> f64 {
        self.step_seconds / self.fft_seconds
    }
}

/// Times setup and stepping on each grid with freshly assembled
/// factorizations.
pub fn timing(id: ProblemId, k: usize, ns: &[usize], opts: &SweepOptions, seed: u64) -> Result<Vec<TimingRow>> {
    // the kernel table is built once per process; keep it out of the first row
    std::hint::black_box(ibse_core::kernel::tilde_delta());
    let mut out = Vec::new();
    for &n in ns {
        let fft = fft_seconds(id.dim(), n, seed)?;
        let o = solve_one(id, &opts.config(k, n), None)?;
        let mut report = ReportRow::from_outcome(&o);
        report.prep_fft_units = Some(o.prep_seconds / fft);
        report.step_fft_units = Some(o.step_seconds / fft);
        out.push(TimingRow {
            n,
            k,
            n_bdy: o.n_bdy,
            steps: o.steps,
            fft_seconds: fft,
            prep_seconds: o.prep_seconds,
            step_seconds: o.step_seconds,
            report,
        });
    }
    Ok(out)
}

/// Growth of setup time with the number of grid points `N = n^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrepGrowth {
    /// `p` in `prep ≈ C N^p`, fitted by least squares.
    pub exponent: f64,
    /// `2^p`, the factor per doubling of `N`.
    pub per_point_doubling: f64,
    /// Measured ratios between successive grids (each doubles `n`).
    pub per_n_doubling: Vec<f64>,
}

pub fn prep_growth(rows: &[TimingRow], dim: usize) -> PrepGrowth {
    let big_n: Vec<usize> = rows.iter().map(|r| r.n.pow(dim as u32)).collect();
    let inv: Vec<f64> = rows.iter().map(|r| 1.0 / r.prep_seconds).collect();
    // fit_slope fits a decay, so fit the reciprocal
    let exponent = fit_slope(&big_n, &inv);
    PrepGrowth {
        exponent,
        per_point_doubling: exponent.exp2(),
        per_n_doubling: rows
            .windows(2)
            .map(|w| w[1].prep_seconds / w[0].prep_seconds)
            .collect(),
    }
}
