//! Exact piecewise polynomials with unit-spaced integer breakpoints.
//!
//! Coefficients are arbitrary-precision rationals, so convolution and knot
//! checks are exact. Each piece is stored in ascending powers of the global
//! variable `x` and is valid on `[lo + p, lo + p + 1)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{IbseError, Result};

pub type Poly = Vec<BigRational>;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn trim(mut p: Poly) -> Poly {
    while p.len() > 1 && p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    if p.is_empty() {
        p.push(BigRational::zero());
    }
    p
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub fn poly_eval(p: &[BigRational], x: &BigRational) -> BigRational {
    p.iter()
        .rev()
        .fold(BigRational::zero(), |acc, c| acc * x + c)
}

pub fn poly_derivative(p: &[BigRational]) -> Poly {
    if p.len() <= 1 {
        return vec![BigRational::zero()];
    }
    trim(
        p.iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * rat(i as i64))
            .collect(),
    )
}

/// Coefficients of `p(x + shift)` in powers of `x`.
pub fn poly_shift(p: &[BigRational], shift: &BigRational) -> Poly {
    let mut out = vec![BigRational::zero(); p.len()];
    for (q, c) in p.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        // (x + s)^q = sum_j C(q, j) x^j s^(q - j)
        let mut s_pow = BigRational::one();
        for j in (0..=q).rev() {
            out[j] += c * BigRational::from_integer(binomial(q, j)) * &s_pow;
            s_pow *= shift;
        }
    }
    trim(out)
}

fn poly_add_into(acc: &mut Poly, p: &[BigRational], sign: i64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), BigRational::zero());
    }
    for (a, c) in acc.iter_mut().zip(p) {
        if sign >= 0 {
            *a += c;
        } else {
            *a -= c;
        }
    }
}

/// Bivariate polynomial `sum c[i][j] x^i y^j`.
struct Bivariate(Vec<Vec<BigRational>>);

impl Bivariate {
    /// `p(y) * q(x - y)`.
    fn product_shifted(p: &[BigRational], q: &[BigRational]) -> Self {
        let deg_x = q.len();
        let deg_y = p.len() + q.len();
        let mut c = vec![vec![BigRational::zero(); deg_y]; deg_x];
        for (k, qk) in q.iter().enumerate() {
            if qk.is_zero() {
                continue;
            }
            for j in 0..=k {
                let mut coeff = qk * BigRational::from_integer(binomial(k, j));
                if j % 2 == 1 {
                    coeff = -coeff;
                }
                for (i, pi) in p.iter().enumerate() {
                    if pi.is_zero() {
                        continue;
                    }
                    c[k - j][i + j] += &coeff * pi;
                }
            }
        }
        Bivariate(c)
    }

    /// Antiderivative in `y` (zero constant).
    fn integrate_y(&self) -> Self {
        Bivariate(
            self.0
                .iter()
                .map(|row| {
                    let mut out = vec![BigRational::zero(); row.len() + 1];
                    for (j, c) in row.iter().enumerate() {
                        out[j + 1] = c / rat(j as i64 + 1);
                    }
                    out
                })
                .collect(),
        )
    }

    /// Substitute `y = value`.
    fn at_y(&self, value: &BigRational) -> Poly {
        trim(self.0.iter().map(|row| poly_eval(row, value)).collect())
    }

    /// Substitute `y = x - shift`.
    fn at_x_minus(&self, shift: &BigRational) -> Poly {
        let mut out: Poly = vec![BigRational::zero()];
        let neg = -shift.clone();
        for (i, row) in self.0.iter().enumerate() {
            // row(x - s) * x^i
            let shifted = poly_shift(row, &neg);
            let mut term = vec![BigRational::zero(); i];
            term.extend(shifted);
            poly_add_into(&mut out, &term, 1);
        }
        trim(out)
    }
}

/// A compactly supported piecewise polynomial on unit integer intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPiecewise {
    lo: i64,
    pieces: Vec<Poly>,
}

impl ExactPiecewise {
    pub fn new(lo: i64, pieces: Vec<Poly>) -> Self {
        Self {
            lo,
            pieces: pieces.into_iter().map(trim).collect(),
        }
    }

    /// Builds an even function from its pieces on `[0,1), [1,2), ...`.
    pub fn from_even(half: &[Poly]) -> Self {
        let r = half.len() as i64;
        let mut pieces = Vec::with_capacity(2 * half.len());
        for p in half.iter().rev() {
            // p(-x)
            let mirrored: Poly = p
                .iter()
                .enumerate()
                .map(|(q, c)| if q % 2 == 1 { -c.clone() } else { c.clone() })
                .collect();
            pieces.push(mirrored);
        }
        pieces.extend(half.iter().cloned());
        Self::new(-r, pieces)
    }

    /// Unit box on `[-1/2, 1/2)` is not representable with integer knots, so
    /// the unit box here is the indicator of `[0, 1)`.
    pub fn unit_box() -> Self {
        Self::new(0, vec![vec![BigRational::one()]])
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.pieces.len() as i64
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }

    /// Piece valid on `[start, start + 1)`, or `None` outside the support.
    pub fn piece(&self, start: i64) -> Option<&Poly> {
        if start < self.lo || start >= self.hi() {
            return None;
        }
        self.pieces.get((start - self.lo) as usize)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let start = x.floor().to_integer();
        match start.to_i64().and_then(|s| self.piece(s)) {
            Some(p) => poly_eval(p, x),
            None => BigRational::zero(),
        }
    }

    /// Exact convolution `(self * other)(x) = ∫ self(y) other(x - y) dy`.
    pub fn convolve(&self, other: &ExactPiecewise) -> ExactPiecewise {
        let lo = self.lo + other.lo;
        let len = self.pieces.len() + other.pieces.len();
        let mut pieces: Vec<Poly> = vec![vec![BigRational::zero()]; len];
        for (ia, p) in self.pieces.iter().enumerate() {
            let a = self.lo + ia as i64;
            for (ib, q) in other.pieces.iter().enumerate() {
                let b = other.lo + ib as i64;
                let anti = Bivariate::product_shifted(p, q).integrate_y();
                // x in [a+b, a+b+1): y from a to x-b
                let mut first = anti.at_x_minus(&rat(b));
                poly_add_into(&mut first, &anti.at_y(&rat(a)), -1);
                // x in [a+b+1, a+b+2): y from x-b-1 to a+1
                let mut second = anti.at_y(&rat(a + 1));
                poly_add_into(&mut second, &anti.at_x_minus(&rat(b + 1)), -1);
                let slot = (a + b - lo) as usize;
                poly_add_into(&mut pieces[slot], &first, 1);
                poly_add_into(&mut pieces[slot + 1], &second, 1);
            }
        }
        ExactPiecewise::new(lo, pieces)
    }

    /// `times`-fold convolution of `self` with itself appended to `self`.
    pub fn self_convolve(&self, times: usize) -> ExactPiecewise {
        let mut acc = self.clone();
        for _ in 0..times {
            acc = acc.convolve(self);
        }
        acc
    }

    /// Pieces on `[0,1), [1,2), ..., [hi-1, hi)`, for an even function.
    pub fn nonnegative_half(&self) -> Result<Vec<Poly>> {
        if self.lo != -self.hi() {
            return Err(IbseError::Polynomial(format!(
                "support [{}, {}] is not symmetric",
                self.lo,
                self.hi()
            )));
        }
        Ok(self.pieces[(-self.lo) as usize..].to_vec())
    }

    /// Checks exact evenness `f(-x) = f(x)`.
    pub fn is_even(&self) -> bool {
        if self.lo != -self.hi() {
            return false;
        }
        let half = match self.nonnegative_half() {
            Ok(h) => h,
            Err(_) => return false,
        };
        ExactPiecewise::from_even(&half) == *self
    }

    /// Largest `m` such that derivatives `0..=m` agree at every knot,
    /// including the two ends of the support where the function meets zero.
    /// Returns `None` if the function itself is discontinuous.
    pub fn continuity_class(&self) -> Option<usize> {
        let zero = vec![BigRational::zero()];
        let mut m: Option<usize> = None;
        let max_order = self.degree() + 1;
        'orders: for order in 0..=max_order {
            for knot in self.lo..=self.hi() {
                let left = self.piece(knot - 1).unwrap_or(&zero);
                let right = self.piece(knot).unwrap_or(&zero);
                let mut l = left.clone();
                let mut r = right.clone();
                for _ in 0..order {
                    l = poly_derivative(&l);
                    r = poly_derivative(&r);
                }
                let x = rat(knot);
                if poly_eval(&l, &x) != poly_eval(&r, &x) {
                    break 'orders;
                }
            }
            m = Some(order);
        }
        m
    }

    /// Exact discrete moment `sum_i (r - i)^m f(r - i)` at a rational offset.
    pub fn lattice_moment(&self, m: u32, r: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for i in (self.lo - 1)..=(self.hi() + 1) {
            let x = r - rat(i);
            let v = self.eval(&x);
            if !v.is_zero() {
                acc += num_traits::pow(x, m as usize) * v;
            }
        }
        acc
    }
}

/// Parses a fraction string such as `"-171811/22861440"` or `"0"`.
pub fn parse_fraction(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || IbseError::Polynomial(format!("malformed fraction `{s}`"));
    match s.split_once('/') {
        Some((num, den)) => {
            let n: BigInt = num.trim().parse().map_err(|_| bad())?;
            let d: BigInt = den.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn format_fraction(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else if r.is_negative() {
        format!("-{}/{}", r.numer().abs(), r.denom())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
