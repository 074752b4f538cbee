//! Convergence-order estimates.

use crate::error::{IbseError, Result};
use crate::grid::GridSpec;

/// Least-squares order `p` in `err ≈ C n^{-p}`.
pub fn fit_slope(ns: &[usize], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errs)
        .map(|(&n, &e)| ((n as f64).log2(), e.log2()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

/// One resolution of a refinement study; several fields (such as vector
/// components) may be compared together.
#[derive(Clone, Debug)]
pub struct Level {
    pub spec: GridSpec,
    pub fields: Vec<Vec<f64>>,
}

/// Difference between two successive resolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfConvergenceRow {
    pub n_coarse: usize,
    pub n_fine: usize,
    /// `max |u_n - u_2n|` over the nodes of the coarsest grid.
    pub difference: f64,
    /// Ratio to the next row's difference, if any.
    pub ratio: Option<f64>,
    pub log2_ratio: Option<f64>,
}

/// Successive L∞ differences sampled on the coarsest grid, with ratios.
pub fn self_convergence(levels: &[Level]) -> Result<Vec<SelfConvergenceRow>> {
    if levels.len() < 2 {
        return Err(IbseError::NotNested(
            "need at least two resolutions".into(),
        ));
    }
    let base = levels[0].spec;
    for (i, lv) in levels.iter().enumerate() {
        if lv.spec.dim() != base.dim() || lv.spec.n() != base.n() << i {
            return Err(IbseError::NotNested(format!(
                "level {i} has n = {} (d = {}), expected {} (d = {})",
                lv.spec.n(),
                lv.spec.dim(),
                base.n() << i,
                base.dim()
            )));
        }
        if lv.fields.len() != levels[0].fields.len() {
            return Err(IbseError::LengthMismatch {
                what: "fields per level",
                expected: levels[0].fields.len(),
                got: lv.fields.len(),
            });
        }
        for f in &lv.fields {
            if f.len() != lv.spec.len() {
                return Err(IbseError::LengthMismatch {
                    what: "field",
                    expected: lv.spec.len(),
                    got: f.len(),
                });
            }
        }
    }
    let n0 = base.n();
    let sample = |lv: &Level, f: usize, i: usize| -> f64 {
        let stride = lv.spec.n() / n0;
        let idx = if base.dim() == 1 {
            i * stride
        } else {
            let (ix, iy) = (i % n0, i / n0);
            iy * stride * lv.spec.n() + ix * stride
        };
        lv.fields[f][idx]
    };
    let mut diffs = Vec::with_capacity(levels.len() - 1);
    for w in levels.windows(2) {
        let mut d = 0.0f64;
        for f in 0..w[0].fields.len() {
            for i in 0..base.len() {
                d = d.max((sample(&w[0], f, i) - sample(&w[1], f, i)).abs());
            }
        }
        diffs.push(d);
    }
    Ok(diffs
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let ratio = diffs.get(i + 1).map(|&next| d / next);
            SelfConvergenceRow {
                n_coarse: levels[i].spec.n(),
                n_fine: levels[i + 1].spec.n(),
                difference: d,
                ratio,
                log2_ratio: ratio.map(f64::log2),
            }
        })
        .collect())
}
