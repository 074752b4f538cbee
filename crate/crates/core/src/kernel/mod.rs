//! Regularized delta functions.
//!
//! The four-point base kernel is C⁰ with fourth-order interpolation accuracy.
//! Convolving it with itself three more times gives a C³ kernel of the same
//! accuracy supported on 16 grid points. Both are constructed exactly in
//! rational arithmetic and then frozen to `f64` for evaluation.

pub mod exact;
pub mod table;

use std::sync::OnceLock;

use num_rational::BigRational;

use crate::error::{IbseError, Result};
use exact::{parse_fraction, poly_derivative, poly_shift, to_f64, ExactPiecewise, Poly};

/// Even piecewise polynomial kernel in exact arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactKernel {
    shape: ExactPiecewise,
    regularity: usize,
    order: usize,
}

impl ExactKernel {
    /// `1 - r/2 - r² + r³/2` on `[0,1]`, `1 - 11r/6 + r² - r³/6` on `[1,2]`.
    pub fn base_ib4() -> Self {
        let f = |s: &str| parse_fraction(s).expect("static fraction");
        let half = vec![
            vec![f("1"), f("-1/2"), f("-1"), f("1/2")],
            vec![f("1"), f("-11/6"), f("1"), f("-1/6")],
        ];
        Self {
            shape: ExactPiecewise::from_even(&half),
            regularity: 0,
            order: 4,
        }
    }

    /// The published C³ kernel, parsed from [`table::TILDE_DELTA`].
    pub fn tilde_delta_table() -> Result<Self> {
        let mut half: Vec<Poly> = vec![Vec::with_capacity(16); 8];
        for row in table::TILDE_DELTA.iter() {
            for (col, s) in row.iter().enumerate() {
                half[col].push(parse_fraction(s)?);
            }
        }
        Ok(Self {
            shape: ExactPiecewise::from_even(&half),
            regularity: 3,
            order: 4,
        })
    }

    /// Convolves the kernel with itself `times` more times. Support widths
    /// add, and each factor raises the regularity class by one.
    pub fn self_convolve(&self, times: usize) -> Self {
        Self {
            shape: self.shape.self_convolve(times),
            regularity: self.regularity + times,
            order: self.order,
        }
    }

    pub fn shape(&self) -> &ExactPiecewise {
        &self.shape
    }

    pub fn support(&self) -> usize {
        self.shape.hi() as usize
    }

    pub fn regularity(&self) -> usize {
        self.regularity
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Pieces for `r >= 0` in ascending powers of `r`.
    pub fn half_pieces(&self) -> Vec<Poly> {
        self.shape
            .nonnegative_half()
            .expect("kernels are constructed symmetric")
    }

    pub fn to_float(&self) -> PiecewisePolyKernel {
        let half = self.half_pieces();
        let mut local = Vec::with_capacity(self.regularity + 1);
        let mut current = half.clone();
        for _ in 0..=self.regularity {
            let layer = current
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let shift = BigRational::from_integer((i as i64).into());
                    poly_shift(p, &shift).iter().map(to_f64).collect()
                })
                .collect();
            local.push(layer);
            current = current.iter().map(|p| poly_derivative(p)).collect();
        }
        PiecewisePolyKernel {
            support: half.len(),
            regularity: self.regularity,
            order: self.order,
            local,
        }
    }
}

/// Runtime form of an even kernel with integer breakpoints.
///
/// Each piece and each derivative up to the regularity class is stored in the
/// local variable `t = |r| - floor(|r|)` and evaluated with Horner's rule.
#[derive(Clone, Debug)]
pub struct PiecewisePolyKernel {
    support: usize,
    regularity: usize,
    order: usize,
    local: Vec<Vec<Vec<f64>>>,
}

impl PiecewisePolyKernel {
    /// Half-width `R` of the support, in grid units.
    pub fn support(&self) -> usize {
        self.support
    }

    pub fn regularity(&self) -> usize {
        self.regularity
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `j`-th derivative at `r`.
    pub fn evaluate(&self, r: f64, j: usize) -> Result<f64> {
        if j > self.regularity {
            return Err(IbseError::RegularityExceeded {
                order: j,
                regularity: self.regularity,
            });
        }
        Ok(self.value(r, j))
    }

    /// Unchecked variant of [`evaluate`](Self::evaluate); `j` must not exceed
    /// the regularity class.
    #[inline]
    pub fn value(&self, r: f64, j: usize) -> f64 {
        let a = r.abs();
        if !(a < self.support as f64) {
            return 0.0;
        }
        let piece = a.floor() as usize;
        let t = a - piece as f64;
        let coeffs = &self.local[j][piece];
        let v = coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c);
        if r < 0.0 && j % 2 == 1 {
            -v
        } else {
            v
        }
    }

    /// Overwrites one coefficient; only meant for mutation tests of audits.
    #[doc(hidden)]
    pub fn perturb_coefficient(&mut self, piece: usize, power: usize, delta: f64) {
        self.local[0][piece][power] += delta;
    }
}

/// The base four-point kernel.
pub fn base_kernel_ib4() -> PiecewisePolyKernel {
    ExactKernel::base_ib4().to_float()
}

/// The C³ kernel from the published table.
pub fn tilde_delta() -> &'static PiecewisePolyKernel {
    static KERNEL: OnceLock<PiecewisePolyKernel> = OnceLock::new();
    KERNEL.get_or_init(|| {
        ExactKernel::tilde_delta_table()
            .expect("static table parses")
            .to_float()
    })
}

/// `max_r |sum_i (r - i)^m K(r - i) - [m = 0]|` over the given offsets.
pub fn moment_error(kernel: &PiecewisePolyKernel, m: u32, offsets: &[f64]) -> f64 {
    let big_r = kernel.support() as i64;
    offsets
        .iter()
        .map(|&r| {
            let base = r.floor() as i64;
            let mut sum = 0.0;
            for i in (base - big_r)..=(base + big_r + 1) {
                let x = r - i as f64;
                sum += x.powi(m as i32) * kernel.value(x, 0);
            }
            let target = if m == 0 { 1.0 } else { 0.0 };
            (sum - target).abs()
        })
        .fold(0.0, f64::max)
}

/// Evenly spaced offsets `i / count` in `[0, 1)`.
pub fn unit_offsets(count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / count as f64).collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `j`-th normal derivative of the tensor-product kernel at `offsets`.
///
/// Expands `n_{i1}…n_{ij} ∂^j/∂x_{i1}…∂x_{ij}` as a multinomial sum over
/// per-axis derivative orders.
pub fn tensor_normal_derivative_weights(
    kernel: &PiecewisePolyKernel,
    normal: &[f64],
    j: usize,
    offsets: &[f64],
) -> Result<f64> {
    if normal.len() != offsets.len() {
        return Err(IbseError::LengthMismatch {
            what: "offsets",
            expected: normal.len(),
            got: offsets.len(),
        });
    }
    let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(IbseError::NonUnitNormal { norm });
    }
    if j > kernel.regularity() {
        return Err(IbseError::RegularityExceeded {
            order: j,
            regularity: kernel.regularity(),
        });
    }
    let mut table = vec![vec![0.0; j + 1]; offsets.len()];
    for (axis, &o) in offsets.iter().enumerate() {
        for (a, slot) in table[axis].iter_mut().enumerate() {
            *slot = kernel.value(o, a);
        }
    }
    Ok(normal_derivative_from_table(&table, normal, j))
}

/// Multinomial expansion given per-axis derivative values `table[axis][a]`.
pub(crate) fn normal_derivative_from_table(table: &[Vec<f64>], normal: &[f64], j: usize) -> f64 {
    fn recurse(
        table: &[Vec<f64>],
        normal: &[f64],
        axis: usize,
        remaining: usize,
        coeff: f64,
        acc: &mut f64,
    ) {
        if axis + 1 == normal.len() {
            let a = remaining;
            *acc += coeff / factorial(a) * normal[axis].powi(a as i32) * table[axis][a];
            return;
        }
        for a in 0..=remaining {
            let c = coeff / factorial(a) * normal[axis].powi(a as i32) * table[axis][a];
            recurse(table, normal, axis + 1, remaining - a, c, acc);
        }
    }
    let mut acc = 0.0;
    recurse(table, normal, 0, j, factorial(j), &mut acc);
    acc
}

/// Grid-scaled kernel `K^{(j)}(x / dx) / dx^{1 + j}` along one axis.
#[derive(Clone, Copy, Debug)]
pub struct KernelStencilSpec<'a> {
    pub kernel: &'a PiecewisePolyKernel,
    pub dx: f64,
}

impl KernelStencilSpec<'_> {
    pub fn eval(&self, x: f64, j: usize) -> f64 {
        self.kernel.value(x / self.dx, j) / self.dx.powi(1 + j as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_kernel_values() {
        let k = base_kernel_ib4();
        assert_eq!(k.support(), 2);
        assert_eq!(k.regularity(), 0);
        assert_eq!(k.evaluate(0.0, 0).unwrap(), 1.0);
        assert!(k.evaluate(1.0, 0).unwrap().abs() < 1e-15);
        assert!(k.evaluate(1.0 - 1e-12, 0).unwrap().abs() < 1e-11);
        assert_eq!(k.evaluate(2.0, 0).unwrap(), 0.0);
        assert_eq!(k.evaluate(3.5, 0).unwrap(), 0.0);
        assert!(k.evaluate(0.5, 1).is_err());
        // exact knot continuity of the rational form
        assert_eq!(ExactKernel::base_ib4().shape().continuity_class(), Some(0));
    }

    #[test]
    fn tilde_delta_basic_values() {
        let k = tilde_delta();
        assert_eq!(k.support(), 8);
        assert_eq!(k.regularity(), 3);
        let expected = 12949745023.0 / 20432412000.0;
        assert!((k.evaluate(0.0, 0).unwrap() - expected).abs() < 1e-15);
        assert_eq!(k.evaluate(8.0, 0).unwrap(), 0.0);
        assert_eq!(k.evaluate(9.0, 0).unwrap(), 0.0);
        for r in [0.1, 1.7, 3.3, 7.9] {
            for j in 0..=3 {
                let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
                assert_eq!(k.value(-r, j), sign * k.value(r, j));
            }
        }
        assert!(k.evaluate(1.0, 4).is_err());
    }

    #[test]
    fn third_derivative_matches_across_knot() {
        let k = tilde_delta();
        let left = k.local[3][0].iter().sum::<f64>();
        let right = k.local[3][1][0];
        assert!((left - right).abs() < 1e-10);
    }

    #[test]
    fn partition_of_unity_for_tilde_delta() {
        let k = tilde_delta();
        for r in [0.0, 0.3, 0.5] {
            let s: f64 = (-10..=10).map(|i| k.value(r - i as f64, 0)).sum();
            assert!((s - 1.0).abs() < 1e-13, "r={r}: {s}");
        }
    }

    #[test]
    fn moment_errors() {
        let offsets = unit_offsets(17);
        let base = base_kernel_ib4();
        for m in 0..=3 {
            assert!(moment_error(&base, m, &offsets) <= 1e-13);
            assert!(moment_error(tilde_delta(), m, &offsets) <= 1e-12);
        }
        assert!(moment_error(tilde_delta(), 4, &offsets) > 1e-6);
    }

    #[test]
    fn tensor_weights_reduce_to_products() {
        let k = tilde_delta();
        let o = [0.3, -1.2];
        let j0 = tensor_normal_derivative_weights(k, &[0.6, 0.8], 0, &o).unwrap();
        assert!((j0 - k.value(0.3, 0) * k.value(-1.2, 0)).abs() < 1e-15);
        let j1 = tensor_normal_derivative_weights(k, &[1.0, 0.0], 1, &o).unwrap();
        assert!((j1 - k.value(0.3, 1) * k.value(-1.2, 0)).abs() < 1e-15);
        let (nx, ny) = (0.6, 0.8);
        let j2 = tensor_normal_derivative_weights(k, &[nx, ny], 2, &o).unwrap();
        let expect = nx * nx * k.value(0.3, 2) * k.value(-1.2, 0)
            + 2.0 * nx * ny * k.value(0.3, 1) * k.value(-1.2, 1)
            + ny * ny * k.value(0.3, 0) * k.value(-1.2, 2);
        assert!((j2 - expect).abs() < 1e-14);
        assert!(tensor_normal_derivative_weights(k, &[1.0, 1.0], 1, &o).is_err());
    }

    #[test]
    fn second_normal_derivative_matches_finite_differences() {
        let k = tilde_delta();
        let n = [0.6, -0.8];
        let o = [0.37, 1.41];
        let f = |s: f64| k.value(o[0] + s * n[0], 0) * k.value(o[1] + s * n[1], 0);
        let h = 1e-3;
        let fd = (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h))
            / (12.0 * h * h);
        let exact = tensor_normal_derivative_weights(k, &n, 2, &o).unwrap();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "{fd} vs {exact}");
    }
}
