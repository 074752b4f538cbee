//! Regularized delta kernel audit.

use anyhow::Result;
use ibse_core::kernel::exact::{format_fraction, parse_fraction, to_f64};
use ibse_core::kernel::{moment_error, unit_offsets, ExactKernel, PiecewisePolyKernel};

#[derive(Clone, Debug)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(AuditCheck {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

/// Samples per unit interval when comparing the runtime kernel with the
/// exact table.
const SAMPLES: i64 = 16;

/// Checks the published table against the exact 4-fold self-convolution of
/// the four-point kernel, its knot continuity, and the runtime `kernel`
/// (values and discrete moments) against the table.
pub fn delta_audit(kernel: &PiecewisePolyKernel) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    let table = ExactKernel::tilde_delta_table()?;
    let built = ExactKernel::base_ib4().self_convolve(3);
    let same = built.shape() == table.shape();
    report.push(
        "table equals 4-fold self-convolution",
        same,
        format!("{} pieces x {} coefficients compared exactly", table.support(), table.shape().degree() + 1),
    );

    let class = table.shape().continuity_class();
    report.push(
        "knots match through third derivative",
        class.is_some_and(|c| c >= 3),
        match class {
            Some(c) => format!("continuous through derivative {c}"),
            None => "discontinuous".to_string(),
        },
    );

    let mut worst = 0.0f64;
    for num in 0..(table.support() as i64 * SAMPLES) {
        let r = parse_fraction(&format!("{num}/{SAMPLES}"))?;
        let exact = to_f64(&table.shape().eval(&r));
        let x = num as f64 / SAMPLES as f64;
        worst = worst.max((kernel.value(x, 0) - exact).abs());
        worst = worst.max((kernel.value(-x, 0) - exact).abs());
    }
    report.push(
        "runtime kernel matches table",
        worst <= 1e-14,
        format!("max deviation {worst:.2e}"),
    );

    let offsets = unit_offsets(17);
    for m in 0..=3 {
        let e = moment_error(kernel, m, &offsets);
        report.push(format!("moment m={m}"), e <= 1e-12, format!("max error {e:.2e} at 17 offsets"));
    }
    let e4 = moment_error(kernel, 4, &offsets);
    report.push(
        "moment m=4 nonzero",
        e4 > 1e-8,
        format!("max deviation {e4:.3e}"),
    );
    Ok(report)
}

/// The table as exact fractions, one line per coefficient.
pub fn table_lines() -> Result<Vec<String>> {
    let table = ExactKernel::tilde_delta_table()?;
    let mut lines = Vec::new();
    for (piece, poly) in table.half_pieces().iter().enumerate() {
        for (power, c) in poly.iter().enumerate() {
            lines.push(format!("[{piece},{}) r^{power} {}", piece + 1, format_fraction(c)));
        }
    }
    Ok(lines)
}
