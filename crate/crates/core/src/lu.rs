//! Dense LU factorization with partial pivoting, row-major storage.

use crate::error::{IbseError, Result};

/// `P A = L U` with unit-diagonal `L` stored below the diagonal of `lu`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    /// Row swapped with row `i` at step `i`.
    pivots: Vec<u32>,
}

impl DenseLu {
    /// Factors a row-major `n × n` matrix. A pivot below
    /// `1e-14 · max|a_ij|` is reported as singular.
    pub fn factor(n: usize, matrix: &[f64]) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(IbseError::LengthMismatch {
                what: "matrix",
                expected: n * n,
                got: matrix.len(),
            });
        }
        crate::grid::check_finite("matrix", matrix)?;
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-14 * scale;
        let mut a = matrix.to_vec();
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if !(pv > tol) {
                let (lo, hi) = pivot_range(&a, n, k);
                return Err(IbseError::Singular {
                    row: k,
                    pivot: pv,
                    kappa: if lo > 0.0 { hi / lo } else { f64::INFINITY },
                });
            }
            pivots.push(p as u32);
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let (top, rest) = a.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n..];
            let d = pivot_row[k];
            for row in rest.chunks_exact_mut(n) {
                let l = row[k] / d;
                row[k] = l;
                if l != 0.0 {
                    for (x, &y) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *x -= l * y;
                    }
                }
            }
        }
        Ok(Self { n, lu: a, pivots })
    }

    /// Rebuilds a factorization from stored parts.
    pub fn from_parts(n: usize, lu: Vec<f64>, pivots: Vec<u32>) -> Result<Self> {
        if lu.len() != n * n || pivots.len() != n {
            return Err(IbseError::LengthMismatch {
                what: "LU factors",
                expected: n * n + n,
                got: lu.len() + pivots.len(),
            });
        }
        if let Some(&bad) = pivots.iter().find(|&&p| p as usize >= n) {
            return Err(IbseError::InvalidParameter {
                name: "pivots",
                reason: format!("pivot index {bad} out of range for n = {n}"),
            });
        }
        Ok(Self { n, lu, pivots })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lu(&self) -> &[f64] {
        &self.lu
    }

    pub fn pivots(&self) -> &[u32] {
        &self.pivots
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(IbseError::LengthMismatch {
                what: "right-hand side",
                expected: n,
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        for (k, &p) in self.pivots.iter().enumerate() {
            x.swap(k, p as usize);
        }
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    /// Ratio of largest to smallest `|u_ii|`, a cheap lower bound on the
    /// condition number.
    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = pivot_range(&self.lu, self.n, self.n);
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }

    /// Reconstructs `A = P⁻¹ L U`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    let l = if k == i { 1.0 } else { self.lu[i * n + k] };
                    s += l * self.lu[k * n + j];
                }
                a[i * n + j] = s;
            }
        }
        for (k, &p) in self.pivots.iter().enumerate().rev() {
            let p = p as usize;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
        }
        a
    }
}

/// Power-of-two row and column scales `R`, `C` such that `R A C` has rows
/// and columns of maximum magnitude near one. Scaling by powers of two is
/// exact, so it only changes which pivots are chosen.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibration {
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
}

impl Equilibration {
    pub fn compute(n: usize, a: &[f64]) -> Self {
        let pow2 = |m: f64| if m > 0.0 { (-m.log2().round()).exp2() } else { 1.0 };
        let rows: Vec<f64> = a
            .chunks_exact(n)
            .map(|r| pow2(r.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
            .collect();
        let mut colmax = vec![0.0f64; n];
        for (r, row) in a.chunks_exact(n).enumerate() {
            for (c, v) in row.iter().enumerate() {
                colmax[c] = colmax[c].max((v * rows[r]).abs());
            }
        }
        let cols = colmax.into_iter().map(pow2).collect();
        Self { rows, cols }
    }

    /// `R A C`.
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        let n = self.rows.len();
        let mut out = a.to_vec();
        for (r, row) in out.chunks_exact_mut(n).enumerate() {
            for (v, c) in row.iter_mut().zip(&self.cols) {
                *v *= self.rows[r] * c;
            }
        }
        out
    }
}

fn pivot_range(a: &[f64], n: usize, upto: usize) -> (f64, f64) {
    (0..upto).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let d = a[i * n + i].abs();
        (lo.min(d), hi.max(d))
    })
}

/// `y = A x` for a row-major matrix.
pub fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    a.chunks_exact(n)
        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}
