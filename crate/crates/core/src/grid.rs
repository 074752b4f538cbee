//! Periodic Cartesian grids on the torus and their Fourier multipliers.
//!
//! Fields are stored row-major with the x index fastest: `values[iy * n + ix]`
//! holds the sample at `(ix * dx, iy * dx)`. Spectra are kept in an internal
//! layout that is transposed in 2D (x wavenumber slowest), which saves two
//! transposes per round trip. Callers only touch spectra through the methods
//! below, so the layout never leaks.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{IbseError, Result};

/// Grid geometry: dimension, points per axis, spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    dx: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(IbseError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(IbseError::InvalidGrid(format!(
                "points per axis must be even and at least 4, got {n}"
            )));
        }
        Ok(Self {
            dim,
            n,
            dx: 2.0 * PI / n as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    /// Coordinates of node `index`; the second entry is zero in 1D.
    pub fn point(&self, index: usize) -> [f64; 2] {
        if self.dim == 1 {
            [index as f64 * self.dx, 0.0]
        } else {
            [
                (index % self.n) as f64 * self.dx,
                (index / self.n) as f64 * self.dx,
            ]
        }
    }

    /// Flat index of the node with per-axis indices (wrapped periodically).
    #[inline]
    pub fn index(&self, ix: i64, iy: i64) -> usize {
        let n = self.n as i64;
        let ix = ix.rem_euclid(n) as usize;
        if self.dim == 1 {
            ix
        } else {
            iy.rem_euclid(n) as usize * self.n + ix
        }
    }
}

/// Real samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(IbseError::LengthMismatch {
                what: "grid field",
                expected: spec.len(),
                got: values.len(),
            });
        }
        check_finite("grid field", &values)?;
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..spec.len())
            .map(|i| {
                let [x, y] = spec.point(i);
                f(x, y)
            })
            .collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn check_finite(what: &'static str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(IbseError::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// FFT engine and symbol tables for one grid. Immutable and shareable.
#[derive(Clone)]
pub struct Grid {
    spec: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Signed integer wavenumber for each FFT bin.
    wavenumbers: Vec<f64>,
    /// `|k|²` in spectral layout.
    ksq: Vec<f64>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wavenumbers: Vec<f64> = (0..n)
            .map(|i| {
                if i < n / 2 {
                    i as f64
                } else {
                    i as f64 - n as f64
                }
            })
            .collect();
        let ksq = if spec.dim() == 1 {
            wavenumbers.iter().map(|k| k * k).collect()
        } else {
            let mut v = Vec::with_capacity(n * n);
            for a in &wavenumbers {
                for b in &wavenumbers {
                    v.push(a * a + b * b);
                }
            }
            v
        };
        Self {
            spec,
            forward,
            inverse,
            wavenumbers,
            ksq,
        }
    }

    pub fn with_size(dim: usize, n: usize) -> Result<Self> {
        Ok(Self::new(GridSpec::new(dim, n)?))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `|k|²` per spectral bin.
    pub fn ksq(&self) -> &[f64] {
        &self.ksq
    }

    /// Unnormalized forward transform of a real field.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    /// Forward transform of complex data in place.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        if self.dim() == 2 {
            transpose_square(buf, self.n());
            self.forward.process(buf);
        }
    }

    /// Inverse transform including the `1/n^d` factor; returns complex data.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        if self.dim() == 2 {
            transpose_square(buf, self.n());
            self.inverse.process(buf);
        }
        let scale = 1.0 / self.len() as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse_in_place(&mut spectrum);
        spectrum.into_iter().map(|c| c.re).collect()
    }

    /// Multiplies by a real, even symbol given as a function of `|k|²`.
    pub fn apply_radial(&self, values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut s = self.forward(values);
        self.scale_radial(&mut s, symbol);
        self.inverse_real(s)
    }

    /// In-place multiplication of a spectrum by a function of `|k|²`.
    pub fn scale_radial(&self, spectrum: &mut [Complex64], symbol: impl Fn(f64) -> f64) {
        for (c, &k2) in spectrum.iter_mut().zip(&self.ksq) {
            *c *= symbol(k2);
        }
    }

    /// Per-bin wavenumber along `axis` (0 = x, 1 = y) in spectral layout.
    fn axis_wavenumber(&self, bin: usize, axis: usize) -> f64 {
        let n = self.n();
        if self.dim() == 1 {
            self.wavenumbers[bin]
        } else if axis == 0 {
            self.wavenumbers[bin / n]
        } else {
            self.wavenumbers[bin % n]
        }
    }

    /// Spectral derivative of order `order` along `axis`. The Nyquist bin is
    /// dropped for odd orders so that real fields stay real.
    pub fn derivative(&self, values: &[f64], axis: usize, order: u32) -> Vec<f64> {
        let mut s = self.forward(values);
        self.differentiate_spectrum(&mut s, axis, order);
        self.inverse_real(s)
    }

    pub fn differentiate_spectrum(&self, spectrum: &mut [Complex64], axis: usize, order: u32) {
        let nyquist = -(self.n() as f64) / 2.0;
        let unit = Complex64::new(0.0, 1.0).powu(order);
        for (bin, c) in spectrum.iter_mut().enumerate() {
            let k = self.axis_wavenumber(bin, axis);
            if order % 2 == 1 && k == nyquist {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= unit * k.powi(order as i32);
            }
        }
    }

    /// Spectral gradient, one field per axis.
    pub fn gradient(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let s = self.forward(values);
        (0..self.dim())
            .map(|axis| {
                let mut t = s.clone();
                self.differentiate_spectrum(&mut t, axis, 1);
                self.inverse_real(t)
            })
            .collect()
    }

    /// Symbol `-|k|²`.
    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        self.apply_radial(values, |k2| -k2)
    }

    /// Solves `(I - cΔ) v = f`.
    pub fn helmholtz_inverse(&self, values: &[f64], c: f64) -> Result<Vec<f64>> {
        check_positive("c", c)?;
        Ok(self.apply_radial(values, |k2| 1.0 / (1.0 + c * k2)))
    }

    /// Pseudo-inverse of `Δ`: zero mode scaled by `mu`, others by `-1/|k|²`.
    pub fn pseudo_inverse(&self, values: &[f64], mu: f64) -> Vec<f64> {
        self.apply_radial(values, |k2| pseudo_inverse_symbol(k2, mu))
    }

    /// Inverse of `H^k = Δ^{k+1} + (-1)^{k+1} Θ`.
    pub fn hk_inverse(&self, values: &[f64], k: usize, theta: f64) -> Result<Vec<f64>> {
        check_positive("theta", theta)?;
        if !(1..=3).contains(&k) {
            return Err(IbseError::InvalidParameter {
                name: "k",
                reason: format!("extension order must be 1..=3, got {k}"),
            });
        }
        Ok(self.apply_radial(values, |k2| 1.0 / hk_symbol(k2, k, theta)))
    }

    /// `Σ values · dx^d`.
    pub fn integral(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Integral divided by `(2π)^d`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / self.len() as f64
    }

    /// `⟨u, v⟩ = Σ u v dx^d`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * self.spec.cell_volume()
    }
}

/// Symbol of `H^k`: `(-1)^{k+1} (|k|^{2(k+1)} + Θ)`.
pub fn hk_symbol(k2: f64, k: usize, theta: f64) -> f64 {
    let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
    sign * (k2.powi(k as i32 + 1) + theta)
}

pub fn pseudo_inverse_symbol(k2: f64, mu: f64) -> f64 {
    if k2 == 0.0 {
        mu
    } else {
        -1.0 / k2
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(IbseError::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Checked wrappers over [`GridField`].
impl Grid {
    fn check(&self, field: &GridField) -> Result<()> {
        if field.spec() != self.spec() {
            return Err(IbseError::InvalidGrid(format!(
                "field lives on {:?}, operator on {:?}",
                field.spec(),
                self.spec()
            )));
        }
        check_finite("grid field", field.values())
    }

    pub fn fft_roundtrip(&self, field: &GridField) -> Result<GridField> {
        self.check(field)?;
        let s = self.forward(field.values());
        GridField::new(self.spec, self.inverse_real(s))
    }

    pub fn apply_laplacian(&self, field: &GridField) -> Result<GridField> {
        self.check(field)?;
        GridField::new(self.spec, self.laplacian(field.values()))
    }

    pub fn apply_helmholtz_inverse(&self, field: &GridField, c: f64) -> Result<GridField> {
        self.check(field)?;
        GridField::new(self.spec, self.helmholtz_inverse(field.values(), c)?)
    }

    pub fn apply_pseudo_inverse(&self, field: &GridField, mu: f64) -> Result<GridField> {
        self.check(field)?;
        if !(mu >= 0.0) {
            return Err(IbseError::InvalidParameter {
                name: "mu",
                reason: format!("must be nonnegative, got {mu}"),
            });
        }
        GridField::new(self.spec, self.pseudo_inverse(field.values(), mu))
    }

    pub fn apply_hk_inverse(&self, field: &GridField, k: usize, theta: f64) -> Result<GridField> {
        self.check(field)?;
        GridField::new(self.spec, self.hk_inverse(field.values(), k, theta)?)
    }

    pub fn field_gradient(&self, field: &GridField) -> Result<Vec<GridField>> {
        self.check(field)?;
        self.gradient(field.values())
            .into_iter()
            .map(|g| GridField::new(self.spec, g))
            .collect()
    }
}
