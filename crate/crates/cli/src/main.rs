use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ibse_cli::audit::{delta_audit, table_lines};
use ibse_cli::sweep::{prep_growth, timing};
use ibse_cli::{convergence, solve_one, write_csv, FactorCache, ReportRow, SweepOptions};
use ibse_core::grid::GridSpec;
use ibse_core::kernel::tilde_delta;
use ibse_core::problems::ProblemId;

#[derive(Parser)]
#[command(name = "ibse", version, about = "Immersed boundary smooth extension solver harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem on one grid.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        /// Also write the final fields as `x,y,u0,u1,...` rows.
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// Solve on a sequence of doubling grids and fit the order.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        n_sweep: Vec<usize>,
    },
    /// Setup and per-step cost in units of one FFT.
    Timing {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        n_sweep: Vec<usize>,
    },
    /// Check the regularized delta kernel.
    DeltaAudit {
        /// Print the coefficient table as exact fractions.
        #[arg(long)]
        table: bool,
    },
    /// Inspect or empty the factorization cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
        #[arg(long, env = "IBSE_CACHE_DIR", default_value = ".ibse-cache")]
        cache_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum CacheAction {
    List,
    Clear,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    problem: ProblemId,
    /// Extension order; 0 gives the direct-forcing reference.
    #[arg(long)]
    k: usize,
    /// Time step override.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Extension operator constant; defaults to the balanced choice.
    #[arg(long)]
    theta: Option<f64>,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "IBSE_CACHE_DIR", default_value = ".ibse-cache")]
    cache_dir: PathBuf,
    /// Always assemble, neither reading nor writing the cache.
    #[arg(long)]
    no_cache: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed for the random FFT baseline input.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn options(&self) -> SweepOptions {
        SweepOptions {
            dt: self.dt,
            t_final: self.t_final,
            theta: self.theta,
            threads: self.threads,
        }
    }

    fn cache(&self) -> Result<Option<FactorCache>> {
        if self.no_cache {
            Ok(None)
        } else {
            FactorCache::new(&self.cache_dir).map(Some)
        }
    }

    fn write_rows(&self, rows: &[ReportRow]) -> Result<()> {
        match &self.out {
            Some(p) => {
                let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                write_csv(BufWriter::new(f), rows)
            }
            None => write_csv(io::stdout().lock(), rows),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        bail!("n must be a power of two of at least 8, got {n}");
    }
    Ok(())
}

fn write_fields(path: &Path, spec: &GridSpec, fields: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let names: Vec<String> = (0..fields.len()).map(|c| format!("u{c}")).collect();
    writeln!(w, "x,y,{}", names.join(","))?;
    for i in 0..spec.len() {
        let [x, y] = spec.point(i);
        let vals: Vec<String> = fields.iter().map(|f| f[i].to_string()).collect();
        writeln!(w, "{x},{y},{}", vals.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { common, n, field_out } => {
            check_n(n)?;
            let cache = common.cache()?;
            let out = solve_one(common.problem, &common.options().config(common.k, n), cache.as_ref())?;
            if out.factorization_reused {
                eprintln!("prep skipped: factorization loaded from cache");
            }
            if let Some(p) = field_out {
                write_fields(&p, &out.spec, &out.fields)?;
            }
            common.write_rows(&[ReportRow::from_outcome(&out)])?;
        }
        Command::Convergence { common, n_sweep } => {
            for &n in &n_sweep {
                check_n(n)?;
            }
            let cache = common.cache()?;
            let sweep = convergence(common.problem, common.k, &n_sweep, &common.options(), cache.as_ref())?;
            common.write_rows(&sweep.rows)?;
            if let Some(f) = &sweep.failure {
                eprintln!("sweep stopped early: {f}");
                return Ok(ExitCode::FAILURE);
            }
            let need = sweep.expected_order - 0.5;
            let verdict = if sweep.passed() { "PASS" } else { "FAIL" };
            match sweep.slope {
                Some(s) => eprintln!("slope {s:.3} (expected order {}, need >= {need}): {verdict}", sweep.expected_order),
                None => eprintln!("no slope: fewer than two errors"),
            }
            if !sweep.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Timing { common, n_sweep } => {
            for &n in &n_sweep {
                check_n(n)?;
            }
            let rows = timing(common.problem, common.k, &n_sweep, &common.options(), common.seed)?;
            for r in &rows {
                eprintln!(
                    "n={} fft {:.3e} s, prep {:.3} s ({:.0} FFTs), step {:.3e} s ({:.1} FFTs), {} steps",
                    r.n,
                    r.fft_seconds,
                    r.prep_seconds,
                    r.prep_fft_units(),
                    r.step_seconds,
                    r.step_fft_units(),
                    r.steps
                );
            }
            if rows.len() >= 2 {
                let g = prep_growth(&rows, common.problem.dim());
                eprintln!(
                    "prep ~ N^{:.3}: factor {:.2} per doubling of N; per doubling of n {:?}",
                    g.exponent, g.per_point_doubling, g.per_n_doubling
                );
            }
            let report: Vec<ReportRow> = rows.into_iter().map(|r| r.report).collect();
            common.write_rows(&report)?;
        }
        Command::DeltaAudit { table } => {
            if table {
                for line in table_lines()? {
                    println!("{line}");
                }
            }
            let report = delta_audit(tilde_delta())?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Cache { action, cache_dir } => {
            let cache = FactorCache::new(&cache_dir)?;
            match action {
                CacheAction::List => {
                    for e in cache.entries()? {
                        match e.meta {
                            Some(m) => println!(
                                "{} {} bytes k={} n={} n_bdy={} kind={:?} size={}",
                                e.path.display(),
                                e.bytes,
                                m.k,
                                m.n,
                                m.n_bdy,
                                m.kind,
                                m.m
                            ),
                            None => println!("{} {} bytes (unreadable)", e.path.display(), e.bytes),
                        }
                    }
                }
                CacheAction::Clear => {
                    let removed = cache.clear()?;
                    println!("removed {removed} factorization(s) from {}", cache.dir().display());
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
