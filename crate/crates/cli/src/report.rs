//! CSV rows shared by every subcommand.

use std::io::Write;

use anyhow::Result;
use ibse_core::problems::RunOutcome;
use serde::Serialize;

/// Column order of every CSV the harness writes.
pub const HEADER: &str =
    "problem,k,n,n_bdy,dt,t_final,linf_error,slope,prep_fft_units,step_fft_units,steps";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub problem: String,
    pub k: usize,
    pub n: usize,
    pub n_bdy: usize,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    /// Error against the analytic solution or, for problems without one,
    /// the difference to the next finer grid.
    pub linf_error: Option<f64>,
    pub slope: Option<f64>,
    pub prep_fft_units: Option<f64>,
    pub step_fft_units: Option<f64>,
    pub steps: usize,
}

impl ReportRow {
    pub fn from_outcome(o: &RunOutcome) -> Self {
        Self {
            problem: o.problem.to_string(),
            k: o.k,
            n: o.spec.n(),
            n_bdy: o.n_bdy,
            dt: o.dt,
            t_final: o.t_final,
            linf_error: o.linf_error,
            slope: None,
            prep_fft_units: None,
            step_fft_units: None,
            steps: o.steps,
        }
    }
}

pub fn write_csv(out: impl Write, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
