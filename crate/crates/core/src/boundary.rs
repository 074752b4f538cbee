//! Boundary curves, quadrature, normals, and grid classification.

use std::f64::consts::PI;
use std::sync::Arc;

use log::debug;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{IbseError, Result};
use crate::grid::{GridField, GridSpec};

const LENGTH_SAMPLES: usize = 1024;
const ON_CURVE_TOL: f64 = 1e-12;

/// A closed curve `s ↦ X(s)` with `s ∈ [0, 2π)`.
pub trait ParametricCurve: Send + Sync {
    fn position(&self, s: f64) -> [f64; 2];
    fn tangent(&self, s: f64) -> [f64; 2];
}

#[derive(Clone, Copy, Debug)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl ParametricCurve for Circle {
    fn position(&self, s: f64) -> [f64; 2] {
        [
            self.center[0] + self.radius * s.cos(),
            self.center[1] + self.radius * s.sin(),
        ]
    }

    fn tangent(&self, s: f64) -> [f64; 2] {
        [-self.radius * s.sin(), self.radius * s.cos()]
    }
}

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `X(θ) = c + ρ(θ) (cos θ, sin θ)`.
#[derive(Clone)]
pub struct PolarCurve {
    center: [f64; 2],
    rho: RadialFn,
    rho_prime: RadialFn,
}

impl PolarCurve {
    pub fn new(
        center: [f64; 2],
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rho_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            center,
            rho: Arc::new(rho),
            rho_prime: Arc::new(rho_prime),
        }
    }

    /// `ρ = 1 + cos(θ + π/4)/4` about `(3π/2, 3π/2)`.
    pub fn cardioid_blob() -> Self {
        Self::new(
            [1.5 * PI, 1.5 * PI],
            |t| 1.0 + (t + PI / 4.0).cos() / 4.0,
            |t| -(t + PI / 4.0).sin() / 4.0,
        )
    }

    /// `ρ = (10 sin²2θ + 3 cos³2θ + 40)/20` about `(π, π)`.
    pub fn star_blob() -> Self {
        Self::new(
            [PI, PI],
            |t| {
                let (s, c) = (2.0 * t).sin_cos();
                (10.0 * s * s + 3.0 * c * c * c + 40.0) / 20.0
            },
            |t| {
                let (s, c) = (2.0 * t).sin_cos();
                // d/dθ of 10 sin²2θ + 3 cos³2θ
                (40.0 * s * c - 18.0 * c * c * s) / 20.0
            },
        )
    }
}

impl ParametricCurve for PolarCurve {
    fn position(&self, s: f64) -> [f64; 2] {
        let r = (self.rho)(s);
        [self.center[0] + r * s.cos(), self.center[1] + r * s.sin()]
    }

    fn tangent(&self, s: f64) -> [f64; 2] {
        let r = (self.rho)(s);
        let dr = (self.rho_prime)(s);
        let (sn, cs) = s.sin_cos();
        [dr * cs - r * sn, dr * sn + r * cs]
    }
}

/// Curve given only by equispaced samples; positions and tangents come
/// from its trigonometric interpolant.
#[derive(Clone, Debug)]
pub struct SampledCurve {
    /// Fourier coefficients per coordinate, wavenumbers `-M/2..M/2-1`
    /// with the Nyquist term dropped.
    modes: Vec<(f64, Complex64, Complex64)>,
}

impl SampledCurve {
    pub fn new(samples: &[[f64; 2]]) -> Result<Self> {
        let m = samples.len();
        if m < 8 {
            return Err(IbseError::DegenerateBoundary(format!(
                "need at least 8 samples, got {m}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(m);
        let mut xs: Vec<Complex64> = samples.iter().map(|p| Complex64::new(p[0], 0.0)).collect();
        let mut ys: Vec<Complex64> = samples.iter().map(|p| Complex64::new(p[1], 0.0)).collect();
        fft.process(&mut xs);
        fft.process(&mut ys);
        let scale = 1.0 / m as f64;
        let modes = (0..m)
            .filter(|&i| !(m % 2 == 0 && i == m / 2))
            .map(|i| {
                let k = if i <= m / 2 { i as f64 } else { i as f64 - m as f64 };
                (k, xs[i] * scale, ys[i] * scale)
            })
            .collect();
        Ok(Self { modes })
    }

    fn eval(&self, s: f64, derivative: bool) -> [f64; 2] {
        let mut out = [0.0, 0.0];
        for &(k, cx, cy) in &self.modes {
            let mut e = Complex64::from_polar(1.0, k * s);
            if derivative {
                e *= Complex64::new(0.0, k);
            }
            out[0] += (cx * e).re;
            out[1] += (cy * e).re;
        }
        out
    }
}

impl ParametricCurve for SampledCurve {
    fn position(&self, s: f64) -> [f64; 2] {
        self.eval(s, false)
    }

    fn tangent(&self, s: f64) -> [f64; 2] {
        self.eval(s, true)
    }
}

/// Geometry of the physical domain `Ω` inside the periodic box.
#[derive(Clone)]
pub enum Domain {
    /// `T \ [a, b]` in one dimension.
    IntervalComplement { a: f64, b: f64 },
    /// Region bounded by a closed curve; `omega_inside` selects whether `Ω`
    /// is the enclosed region or its complement.
    Curve {
        curve: Arc<dyn ParametricCurve>,
        omega_inside: bool,
    },
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::IntervalComplement { a, b } => write!(f, "T \\ [{a}, {b}]"),
            Domain::Curve { omega_inside, .. } => {
                write!(f, "Curve {{ omega_inside: {omega_inside} }}")
            }
        }
    }
}

impl Domain {
    pub fn curve(curve: impl ParametricCurve + 'static, omega_inside: bool) -> Self {
        Domain::Curve {
            curve: Arc::new(curve),
            omega_inside,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::IntervalComplement { .. } => 1,
            Domain::Curve { .. } => 2,
        }
    }
}

/// Quadrature nodes, unit normals out of `Ω`, and weights on `Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDiscretization {
    dim: usize,
    nodes: Vec<[f64; 2]>,
    normals: Vec<[f64; 2]>,
    weights: Vec<f64>,
    param_spacing: f64,
}

impl BoundaryDiscretization {
    pub fn new(
        dim: usize,
        nodes: Vec<[f64; 2]>,
        normals: Vec<[f64; 2]>,
        weights: Vec<f64>,
        param_spacing: f64,
    ) -> Result<Self> {
        let m = nodes.len();
        for (what, len) in [("normals", normals.len()), ("weights", weights.len())] {
            if len != m {
                return Err(IbseError::LengthMismatch {
                    what,
                    expected: m,
                    got: len,
                });
            }
        }
        for n in &normals {
            let norm = n[0].hypot(n[1]);
            if (norm - 1.0).abs() > 1e-12 {
                return Err(IbseError::NonUnitNormal { norm });
            }
        }
        Ok(Self {
            dim,
            nodes,
            normals,
            weights,
            param_spacing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn param_spacing(&self) -> f64 {
        self.param_spacing
    }

    /// `⟨F, G⟩_Γ = Σ F_i G_i w_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    /// `Σ w_i`, the quadrature length of `Γ`.
    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `χ_Ω` and `χ_E` with `χ_Ω + χ_E = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMasks {
    pub omega: GridField,
    pub exterior: GridField,
}

fn speed(curve: &dyn ParametricCurve, s: f64) -> f64 {
    let t = curve.tangent(s);
    t[0].hypot(t[1])
}

/// Arc length by the trapezoid rule on 1024 parameter samples.
pub fn curve_length(curve: &dyn ParametricCurve) -> f64 {
    let h = 2.0 * PI / LENGTH_SAMPLES as f64;
    (0..LENGTH_SAMPLES)
        .map(|i| speed(curve, i as f64 * h))
        .sum::<f64>()
        * h
}

/// Signed area by the shoelace formula; positive for counterclockwise.
fn signed_area(curve: &dyn ParametricCurve) -> f64 {
    let m = LENGTH_SAMPLES;
    let pts: Vec<[f64; 2]> = (0..m)
        .map(|i| curve.position(2.0 * PI * i as f64 / m as f64))
        .collect();
    (0..m)
        .map(|i| {
            let p = pts[i];
            let q = pts[(i + 1) % m];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Node count rule `max(8, round(length / (2 dx)))`.
pub fn boundary_node_count(length: f64, dx: f64) -> usize {
    ((length / (2.0 * dx)).round() as usize).max(8)
}

/// Builds quadrature nodes with spacing near `2 dx`.
pub fn discretize(domain: &Domain, grid: &GridSpec) -> Result<BoundaryDiscretization> {
    check_dims(domain, grid)?;
    match domain {
        Domain::IntervalComplement { a, b } => {
            if !(a < b) || b - a >= 2.0 * PI {
                return Err(IbseError::DegenerateBoundary(format!(
                    "interval [{a}, {b}] is empty or covers the torus"
                )));
            }
            BoundaryDiscretization::new(
                1,
                vec![[*a, 0.0], [*b, 0.0]],
                vec![[1.0, 0.0], [-1.0, 0.0]],
                vec![1.0, 1.0],
                1.0,
            )
        }
        Domain::Curve { curve, omega_inside } => {
            let curve = curve.as_ref();
            let n_bdy = boundary_node_count(curve_length(curve), grid.dx());
            discretize_curve(curve, *omega_inside, n_bdy)
        }
    }
}

/// Discretizes a curve with an explicit node count.
pub fn discretize_curve(
    curve: &dyn ParametricCurve,
    omega_inside: bool,
    n_bdy: usize,
) -> Result<BoundaryDiscretization> {
    let area = signed_area(curve);
    if area.abs() < 1e-14 {
        return Err(IbseError::DegenerateBoundary(
            "curve encloses no area; orientation is undecidable".into(),
        ));
    }
    // Rotating the tangent clockwise points out of the enclosed region for a
    // counterclockwise curve.
    let flip = (area > 0.0) != omega_inside;
    let h = 2.0 * PI / n_bdy as f64;
    let mut nodes = Vec::with_capacity(n_bdy);
    let mut normals = Vec::with_capacity(n_bdy);
    let mut weights = Vec::with_capacity(n_bdy);
    for i in 0..n_bdy {
        let s = i as f64 * h;
        let t = curve.tangent(s);
        let sp = t[0].hypot(t[1]);
        if !(sp > 1e-14) {
            return Err(IbseError::DegenerateBoundary(format!(
                "zero tangent at node {i} (s = {s})"
            )));
        }
        let mut n = [t[1] / sp, -t[0] / sp];
        if flip {
            n = [-n[0], -n[1]];
        }
        nodes.push(curve.position(s));
        normals.push(n);
        weights.push(sp * h);
    }
    BoundaryDiscretization::new(2, nodes, normals, weights, h)
}

fn check_dims(domain: &Domain, grid: &GridSpec) -> Result<()> {
    if domain.dim() != grid.dim() {
        return Err(IbseError::InvalidGrid(format!(
            "domain is {}-dimensional but grid is {}-dimensional",
            domain.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// Horizontal ray crossings of a curve, refined on the true curve.
struct CrossingFinder<'a> {
    curve: &'a dyn ParametricCurve,
    params: Vec<f64>,
    points: Vec<[f64; 2]>,
}

impl<'a> CrossingFinder<'a> {
    fn new(curve: &'a dyn ParametricCurve, samples: usize) -> Self {
        let params: Vec<f64> = (0..=samples)
            .map(|i| 2.0 * PI * i as f64 / samples as f64)
            .collect();
        let points = params.iter().map(|&s| curve.position(s)).collect();
        Self {
            curve,
            params,
            points,
        }
    }

    /// Sorted x coordinates where the curve crosses the line `y = y0`.
    fn crossings(&self, y0: f64) -> Vec<f64> {
        let mut xs = Vec::new();
        for i in 0..self.points.len() - 1 {
            let (p, q) = (self.points[i], self.points[i + 1]);
            if (p[1] <= y0) == (q[1] <= y0) {
                continue;
            }
            let (mut lo, mut hi) = (self.params[i], self.params[i + 1]);
            let below_at_lo = p[1] <= y0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (self.curve.position(mid)[1] <= y0) == below_at_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            xs.push(self.curve.position(0.5 * (lo + hi))[0]);
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        xs
    }

    /// Inside the enclosed region, or on the curve (`None`).
    fn classify(crossings: &[f64], x: f64) -> Option<bool> {
        if crossings.iter().any(|c| (c - x).abs() < ON_CURVE_TOL) {
            return None;
        }
        Some(crossings.iter().filter(|&&c| c < x).count() % 2 == 1)
    }
}

/// Whether a point lies in `Ω`. Points on `Γ` count as in `Ω`.
pub fn point_in_omega(domain: &Domain, p: [f64; 2]) -> bool {
    match domain {
        Domain::IntervalComplement { a, b } => {
            let x = p[0].rem_euclid(2.0 * PI);
            !(x > *a && x < *b)
        }
        Domain::Curve { curve, omega_inside } => {
            let finder = CrossingFinder::new(curve.as_ref(), 4096);
            match CrossingFinder::classify(&finder.crossings(p[1]), p[0]) {
                Some(inside) => inside == *omega_inside,
                None => true,
            }
        }
    }
}

/// Ray-casting classification of every grid node.
pub fn classify_grid_points(domain: &Domain, grid: &GridSpec) -> Result<DomainMasks> {
    check_dims(domain, grid)?;
    let mut omega = vec![0.0; grid.len()];
    match domain {
        Domain::IntervalComplement { .. } => {
            for (i, o) in omega.iter_mut().enumerate() {
                *o = f64::from(u8::from(point_in_omega(domain, grid.point(i))));
            }
        }
        Domain::Curve { curve, omega_inside } => {
            let n = grid.n();
            let finder = CrossingFinder::new(curve.as_ref(), (8 * n).max(4096));
            for iy in 0..n {
                let y = iy as f64 * grid.dx();
                let xs = finder.crossings(y);
                for ix in 0..n {
                    let x = ix as f64 * grid.dx();
                    let in_omega = match CrossingFinder::classify(&xs, x) {
                        Some(inside) => inside == *omega_inside,
                        None => {
                            debug!("grid node ({x}, {y}) lies on the boundary; assigned to omega");
                            true
                        }
                    };
                    omega[iy * n + ix] = f64::from(u8::from(in_omega));
                }
            }
        }
    }
    let exterior = omega.iter().map(|v| 1.0 - v).collect();
    Ok(DomainMasks {
        omega: GridField::new(*grid, omega)?,
        exterior: GridField::new(*grid, exterior)?,
    })
}
