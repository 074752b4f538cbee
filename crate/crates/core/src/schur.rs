//! The coupled boundary system, its Schur complement, and persistence.
//!
//! The unknowns on the grid are `u` and its extension `ξ`; on the boundary
//! they are the multipliers `F = (F_0, …, F_k)` and `G`. Eliminating the grid
//! unknowns leaves a dense system for `x = (F, G)`, plus one scalar `λ` for
//! the periodic Poisson operator whose constant mode is otherwise free:
//!
//! ```text
//! ξ   = -(H^k)⁻¹ T_k F
//! r   = χ_Ω f + χ_E L ξ - B† G
//! u   = L⁻¹ r            (Poisson: A_μ r - λ/β)
//! rows: T_k*(ξ - u) = 0,  B u = g,  ⨏_C r = 0 (Poisson only)
//! ```
//!
//! `B` is the boundary-condition operator `a S* + b T*_(1)` and `B†` its
//! spreading adjoint. With no extension (`k = 0`) the system reduces to the
//! direct-forcing immersed boundary method, whose forcing is used on all of
//! the box instead of being restricted to `Ω`.

use std::fs::File;
use std::hash::Hasher;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

use fnv::FnvHasher;
use log::{debug, info, warn};
use num_complex::Complex64;

use crate::boundary::{classify_grid_points, discretize, BoundaryDiscretization, Domain};
use crate::error::{IbseError, Result};
use crate::grid::{hk_symbol, pseudo_inverse_symbol, Grid, GridSpec};
use crate::kernel::{tilde_delta, PiecewisePolyKernel};
use crate::lu::{matvec, DenseLu, Equilibration};
use crate::operators::{BoundaryOperator, Operators};

/// Scale in the `Θ*` rule.
pub const THETA_ALPHA: f64 = 0.001;

/// `max(1, α ε (n/2)^{2(k+1)})` with `ε = 2⁻⁵²`.
pub fn theta_star(k: usize, n: usize) -> f64 {
    let eps = f64::EPSILON;
    let half = n as f64 / 2.0;
    (THETA_ALPHA * eps * half.powi(2 * (k as i32 + 1))).max(1.0)
}

/// `H^k = Δ^{k+1} + (-1)^{k+1} Θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionOperator {
    k: usize,
    theta: f64,
}

impl ExtensionOperator {
    pub fn new(k: usize, theta: f64) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(IbseError::InvalidParameter {
                name: "k",
                reason: format!("extension order must be 1..=3, got {k}"),
            });
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(IbseError::InvalidParameter {
                name: "theta",
                reason: format!("must be positive and finite, got {theta}"),
            });
        }
        Ok(Self { k, theta })
    }

    /// Uses `Θ*` for the grid size.
    pub fn with_theta_star(k: usize, n: usize) -> Result<Self> {
        Self::new(k, theta_star(k, n))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `L = Θ^{-1/(2(k+1))}`.
    pub fn intrinsic_length(&self) -> f64 {
        self.theta.powf(-1.0 / (2.0 * (self.k as f64 + 1.0)))
    }

    /// `κ = 1 + (n/2)^{2(k+1)} / Θ`.
    pub fn condition_estimate(&self, n: usize) -> f64 {
        1.0 + (n as f64 / 2.0).powi(2 * (self.k as i32 + 1)) / self.theta
    }

    pub fn symbol(&self, k2: f64) -> f64 {
        hk_symbol(k2, self.k, self.theta)
    }
}

/// Zero-mode gain `μ` of the pseudo-inverse and augmentation scale `β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuBetaParams {
    pub mu: f64,
    pub beta: f64,
}

impl MuBetaParams {
    /// `μ = 0`, `β = n_bdy`.
    pub fn default_for(n_bdy: usize) -> Self {
        Self {
            mu: 0.0,
            beta: n_bdy as f64,
        }
    }
}

/// The elliptic operator `L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EllipticOperator {
    /// Periodic Laplacian, inverted through `A_μ` with the `λ` augmentation.
    /// `None` selects the defaults for the boundary size.
    Poisson(Option<MuBetaParams>),
    /// `I - cΔ` with `c > 0`.
    Helmholtz { c: f64 },
}

/// Which Schur system a factorization belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchurKind {
    InvertibleL = 0,
    AugmentedPoisson = 1,
}

/// Header of a stored factorization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FactorizationMeta {
    pub k: u32,
    pub n: u32,
    pub n_bdy: u32,
    pub kind: SchurKind,
    pub mu: f64,
    pub beta: f64,
    /// Helmholtz coefficient, NaN for Poisson.
    pub c: f64,
    pub digest: u64,
    pub m: u64,
}

impl FactorizationMeta {
    fn same_as(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        self.k == other.k
            && self.n == other.n
            && self.n_bdy == other.n_bdy
            && self.kind == other.kind
            && eq(self.mu, other.mu)
            && eq(self.beta, other.beta)
            && eq(self.c, other.c)
            && self.digest == other.digest
            && self.m == other.m
    }
}

/// Solution of one elliptic solve with all intermediate unknowns.
#[derive(Clone, Debug)]
pub struct EllipticSolution {
    pub u: Vec<f64>,
    pub xi: Vec<f64>,
    /// Stacked `F_0..F_k` (empty without extension).
    pub f_mult: Vec<f64>,
    pub g_mult: Vec<f64>,
    /// Constant-mode multiplier (Poisson only, else zero).
    pub lambda: f64,
    /// `‖SC x - rhs‖_∞ / ‖rhs‖_∞` of the boundary solve.
    pub schur_residual: f64,
}

/// Residual of each block row of the full coupled system.
#[derive(Clone, Copy, Debug)]
pub struct BlockResiduals {
    /// `L u - χ_E L ξ + B† G - χ_Ω f`, relative to the largest of its
    /// terms (at least 1).
    pub elliptic: f64,
    /// `H^k ξ + T_k F` as a backward error, relative to
    /// `‖H^k‖ max|ξ| + max|T_k F|`.
    pub extension: f64,
    /// `T_k*(ξ - u)`, relative to `max|T_k* u|`.
    pub matching: f64,
    /// `B u - g`, relative to the larger of `max|g|` and `max (|B| |u|)`.
    pub boundary: f64,
    /// `⨏_C r` with `r = χ_Ω f + χ_E L ξ - B† G`, relative to
    /// `max(1, |⨏ χ_Ω f|)` (Poisson only).
    pub mean: Option<f64>,
}

/// Everything needed to apply and invert the coupled system on one grid.
#[derive(Clone, Debug)]
pub struct IbseSystem {
    grid: Grid,
    bdy: BoundaryDiscretization,
    ops: Operators,
    chi_omega: Vec<f64>,
    chi_e: Vec<f64>,
    extension: Option<ExtensionOperator>,
    bc: BoundaryOperator,
    op: EllipticOperator,
    mu_beta: Option<MuBetaParams>,
}

/// Options for [`IbseSystem::build`].
#[derive(Clone, Copy, Debug)]
pub struct SystemConfig {
    /// Extension order `1..=3`, or 0 for the direct-forcing method.
    pub k: usize,
    /// `Θ` override; `Θ*` when `None`.
    pub theta: Option<f64>,
    pub bc: BoundaryOperator,
    pub op: EllipticOperator,
}

impl IbseSystem {
    /// Discretizes `domain` on an `n`-point grid with the C³ kernel.
    pub fn build(domain: &Domain, n: usize, config: SystemConfig) -> Result<Self> {
        let spec = GridSpec::new(domain.dim(), n)?;
        let bdy = discretize(domain, &spec)?;
        let masks = classify_grid_points(domain, &spec)?;
        Self::from_parts(
            Grid::new(spec),
            bdy,
            masks.omega.into_values(),
            config,
            tilde_delta(),
        )
    }

    pub fn from_parts(
        grid: Grid,
        bdy: BoundaryDiscretization,
        chi_omega: Vec<f64>,
        config: SystemConfig,
        kernel: &PiecewisePolyKernel,
    ) -> Result<Self> {
        if config.k > kernel.regularity() {
            return Err(IbseError::RegularityExceeded {
                order: config.k,
                regularity: kernel.regularity(),
            });
        }
        if config.k == 0 && config.bc.b != 0.0 {
            // a C⁰ solution has no well-defined normal derivative on Γ
            return Err(IbseError::InvalidParameter {
                name: "k",
                reason: "direct forcing (k = 0) supports Dirichlet conditions only".into(),
            });
        }
        if chi_omega.len() != grid.len() {
            return Err(IbseError::LengthMismatch {
                what: "mask",
                expected: grid.len(),
                got: chi_omega.len(),
            });
        }
        let extension = match (config.k, config.theta) {
            (0, _) => None,
            (k, Some(theta)) => Some(ExtensionOperator::new(k, theta)?),
            (k, None) => Some(ExtensionOperator::with_theta_star(k, grid.n())?),
        };
        let mu_beta = match config.op {
            EllipticOperator::Poisson(p) => {
                let p = p.unwrap_or_else(|| MuBetaParams::default_for(bdy.len()));
                if !(p.beta > 0.0) || !(p.mu >= 0.0) {
                    return Err(IbseError::InvalidParameter {
                        name: "mu/beta",
                        reason: format!("need mu >= 0 and beta > 0, got {p:?}"),
                    });
                }
                Some(p)
            }
            EllipticOperator::Helmholtz { c } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(IbseError::InvalidParameter {
                        name: "c",
                        reason: format!("Helmholtz coefficient must be positive, got {c}"),
                    });
                }
                None
            }
        };
        let ops = Operators::new(&bdy, grid.spec(), kernel, config.k)?;
        let chi_e = chi_omega.iter().map(|v| 1.0 - v).collect();
        Ok(Self {
            grid,
            bdy,
            ops,
            chi_omega,
            chi_e,
            extension,
            bc: config.bc,
            op: config.op,
            mu_beta,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> &BoundaryDiscretization {
        &self.bdy
    }

    pub fn operators(&self) -> &Operators {
        &self.ops
    }

    pub fn chi_omega(&self) -> &[f64] {
        &self.chi_omega
    }

    pub fn chi_e(&self) -> &[f64] {
        &self.chi_e
    }

    pub fn extension(&self) -> Option<&ExtensionOperator> {
        self.extension.as_ref()
    }

    pub fn boundary_operator(&self) -> BoundaryOperator {
        self.bc
    }

    pub fn elliptic_operator(&self) -> EllipticOperator {
        self.op
    }

    pub fn mu_beta(&self) -> Option<MuBetaParams> {
        self.mu_beta
    }

    pub fn kind(&self) -> SchurKind {
        if self.mu_beta.is_some() {
            SchurKind::AugmentedPoisson
        } else {
            SchurKind::InvertibleL
        }
    }

    /// Number of extension blocks, `k + 1`, or 0 without extension.
    fn ext_blocks(&self) -> usize {
        self.extension.map_or(0, |e| e.k() + 1)
    }

    /// Dimension of the Schur system.
    pub fn size(&self) -> usize {
        let nb = self.bdy.len();
        (self.ext_blocks() + 1) * nb + usize::from(self.mu_beta.is_some())
    }

    /// Symbol of `L`.
    fn l_symbol(&self, k2: f64) -> f64 {
        match self.op {
            EllipticOperator::Poisson(_) => -k2,
            EllipticOperator::Helmholtz { c } => 1.0 + c * k2,
        }
    }

    /// Symbol of `L⁻¹` (`A_μ` for Poisson).
    fn l_inverse_symbol(&self, k2: f64) -> f64 {
        match (self.op, self.mu_beta) {
            (EllipticOperator::Helmholtz { c }, _) => 1.0 / (1.0 + c * k2),
            (_, Some(p)) => pseudo_inverse_symbol(k2, p.mu),
            (_, None) => unreachable!("Poisson always carries mu/beta"),
        }
    }

    /// `L⁻¹ r`, without the `λ` term.
    pub fn l_inverse(&self, r: &[f64]) -> Vec<f64> {
        self.grid.apply_radial(r, |k2| self.l_inverse_symbol(k2))
    }

    /// `L v`.
    pub fn l_apply(&self, v: &[f64]) -> Vec<f64> {
        self.grid.apply_radial(v, |k2| self.l_symbol(k2))
    }

    /// `ξ = -(H^k)⁻¹ s` and `L ξ` from the spread field `s = T_k F`, sharing
    /// one inverse transform.
    fn extension_from_spread(&self, ext: &ExtensionOperator, spread: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut s = self.grid.forward(spread);
        for (c, &k2) in s.iter_mut().zip(self.grid.ksq()) {
            let xi = -*c / ext.symbol(k2);
            *c = xi + Complex64::new(0.0, 1.0) * xi * self.l_symbol(k2);
        }
        self.grid.inverse_in_place(&mut s);
        s.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Maps spread multipliers to `(ξ, r, u)`, with `base` added to `r`
    /// (zero for the homogeneous part used in assembly).
    fn lift_with(
        &self,
        base: Option<&[f64]>,
        spread_f: Option<&[f64]>,
        spread_g: &[f64],
        lambda: f64,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let len = self.grid.len();
        let (xi, l_xi) = match (self.extension.as_ref(), spread_f) {
            (Some(ext), Some(s)) => self.extension_from_spread(ext, s),
            _ => (vec![0.0; len], vec![0.0; len]),
        };
        let mut r: Vec<f64> = (0..len)
            .map(|i| self.chi_e[i] * l_xi[i] - spread_g[i])
            .collect();
        if let Some(b) = base {
            r.iter_mut().zip(b).for_each(|(v, f)| *v += f);
        }
        let mut u = self.l_inverse(&r);
        if let Some(p) = self.mu_beta {
            let shift = lambda / p.beta;
            u.iter_mut().for_each(|v| *v -= shift);
        }
        (xi, r, u)
    }

    fn lift(&self, spread_f: Option<&[f64]>, spread_g: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        self.lift_with(None, spread_f, spread_g, lambda)
    }

    /// Rows of the Schur system for a lifted state.
    fn rows(&self, xi: &[f64], r: &[f64], u: &[f64]) -> Vec<f64> {
        let nb = self.bdy.len();
        let mut out = vec![0.0; self.size()];
        let blocks = self.ext_blocks();
        if blocks > 0 {
            let diff: Vec<f64> = xi.iter().zip(u).map(|(a, b)| a - b).collect();
            for j in 0..blocks {
                self.ops.interp_into(j, &diff, &mut out[j * nb..(j + 1) * nb]);
            }
        }
        let bc_rows = &mut out[blocks * nb..(blocks + 1) * nb];
        self.ops.interp_bc_into(self.bc, u, bc_rows);
        bc_rows.iter_mut().for_each(|v| *v = -*v);
        if self.mu_beta.is_some() {
            out[(blocks + 1) * nb] = -self.grid.mean(r);
        }
        out
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], f64) {
        let nb = self.bdy.len();
        let blocks = self.ext_blocks();
        let f = &x[..blocks * nb];
        let g = &x[blocks * nb..(blocks + 1) * nb];
        let lambda = if self.mu_beta.is_some() {
            x[(blocks + 1) * nb]
        } else {
            0.0
        };
        (f, g, lambda)
    }

    fn spreads(&self, f: &[f64], g: &[f64]) -> (Option<Vec<f64>>, Vec<f64>) {
        let nb = self.bdy.len();
        let len = self.grid.len();
        let sf = (self.ext_blocks() > 0).then(|| {
            let mut s = vec![0.0; len];
            for j in 0..self.ext_blocks() {
                self.ops.spread_into(j, &f[j * nb..(j + 1) * nb], &mut s);
            }
            s
        });
        let mut sg = vec![0.0; len];
        self.ops.spread_bc_into(self.bc, g, &mut sg);
        (sf, sg)
    }

    /// Matrix-free product `SC x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.size() {
            return Err(IbseError::LengthMismatch {
                what: "Schur vector",
                expected: self.size(),
                got: x.len(),
            });
        }
        let (f, g, lambda) = self.split(x);
        let (sf, sg) = self.spreads(f, g);
        let (xi, r, u) = self.lift(sf.as_deref(), &sg, lambda);
        Ok(self.rows(&xi, &r, &u))
    }

    /// Column `col` of the Schur complement.
    pub fn column(&self, col: usize) -> Vec<f64> {
        let nb = self.bdy.len();
        let len = self.grid.len();
        let blocks = self.ext_blocks();
        if col == blocks * nb + nb {
            // λ column: a constant shift of u, seen by the value rows only
            // up to the kernel's moment error.
            let (xi, r, u) = self.lift(None, &vec![0.0; len], 1.0);
            return self.rows(&xi, &r, &u);
        }
        if col < blocks * nb {
            let (j, node) = (col / nb, col % nb);
            let mut s = vec![0.0; len];
            self.ops.spread_unit_into(j, node, 1.0, &mut s);
            let (xi, r, u) = self.lift(Some(&s), &vec![0.0; len], 0.0);
            self.rows(&xi, &r, &u)
        } else {
            let node = col - blocks * nb;
            let mut s = vec![0.0; len];
            self.ops.spread_bc_unit_into(self.bc, node, &mut s);
            let (xi, r, u) = self.lift(None, &s, 0.0);
            self.rows(&xi, &r, &u)
        }
    }

    /// 64-bit FNV-1a digest of the geometry and operator parameters.
    pub fn digest(&self) -> u64 {
        let mut h = FnvHasher::default();
        let mut put = |v: f64| h.write(&v.to_le_bytes());
        put(self.grid.dim() as f64);
        put(self.grid.n() as f64);
        for x in self.bdy.nodes() {
            put(x[0]);
            put(x[1]);
        }
        for nrm in self.bdy.normals() {
            put(nrm[0]);
            put(nrm[1]);
        }
        for w in self.bdy.weights() {
            put(*w);
        }
        put(self.extension.map_or(0.0, |e| e.theta()));
        put(self.bc.a);
        put(self.bc.b);
        for (i, v) in self.chi_omega.iter().enumerate() {
            if *v != 0.0 {
                put(i as f64);
            }
        }
        h.finish()
    }

    pub fn meta(&self) -> FactorizationMeta {
        let (mu, beta) = self.mu_beta.map_or((f64::NAN, f64::NAN), |p| (p.mu, p.beta));
        let c = match self.op {
            EllipticOperator::Helmholtz { c } => c,
            EllipticOperator::Poisson(_) => f64::NAN,
        };
        FactorizationMeta {
            k: self.extension.map_or(0, |e| e.k()) as u32,
            n: self.grid.n() as u32,
            n_bdy: self.bdy.len() as u32,
            kind: self.kind(),
            mu,
            beta,
            c,
            digest: self.digest(),
            m: self.size() as u64,
        }
    }

    /// Forms the Schur complement column by column and factors it. Columns
    /// are split across `threads` workers; the result does not depend on
    /// the thread count.
    pub fn assemble(&self, threads: usize) -> Result<SchurFactorization> {
        let m = self.size();
        let start = Instant::now();
        let threads = threads.max(1).min(m.max(1));
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); m];
        if threads == 1 {
            for (c, slot) in columns.iter_mut().enumerate() {
                *slot = self.column(c);
            }
        } else {
            let chunk = m.div_ceil(threads);
            std::thread::scope(|scope| {
                for (t, slots) in columns.chunks_mut(chunk).enumerate() {
                    scope.spawn(move || {
                        for (i, slot) in slots.iter_mut().enumerate() {
                            *slot = self.column(t * chunk + i);
                        }
                    });
                }
            });
        }
        let mut matrix = vec![0.0; m * m];
        for (c, col) in columns.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                matrix[r * m + c] = *v;
            }
        }
        drop(columns);
        debug!("assembled {m}x{m} Schur complement in {:?}", start.elapsed());
        let scaling = Equilibration::compute(m, &matrix);
        let lu = DenseLu::factor(m, &scaling.apply(&matrix))?;
        info!(
            "factored {m}x{m} Schur complement (pivot ratio {:.3e}) in {:?}",
            lu.pivot_ratio(),
            start.elapsed()
        );
        Ok(SchurFactorization {
            meta: self.meta(),
            matrix,
            scaling,
            lu,
        })
    }

    /// The forcing that enters the first block row: `χ_Ω f`, or `f` itself
    /// for the direct-forcing method.
    pub fn masked_forcing(&self, f: &[f64]) -> Vec<f64> {
        if self.extension.is_some() {
            f.iter().zip(&self.chi_omega).map(|(a, b)| a * b).collect()
        } else {
            f.to_vec()
        }
    }

    fn check_inputs(&self, f: &[f64], g: &[f64]) -> Result<()> {
        if f.len() != self.grid.len() {
            return Err(IbseError::LengthMismatch {
                what: "forcing",
                expected: self.grid.len(),
                got: f.len(),
            });
        }
        if g.len() != self.bdy.len() {
            return Err(IbseError::LengthMismatch {
                what: "boundary data",
                expected: self.bdy.len(),
                got: g.len(),
            });
        }
        crate::grid::check_finite("forcing", f)?;
        crate::grid::check_finite("boundary data", g)
    }

    /// Right-hand side `[T_k* L⁻¹ f_Ω; B L⁻¹ f_Ω - g; ⨏ f_Ω]`.
    fn rhs_from(&self, f_omega: &[f64], g: &[f64]) -> Vec<f64> {
        let nb = self.bdy.len();
        let blocks = self.ext_blocks();
        let u_f = self.l_inverse(f_omega);
        let mut rhs = vec![0.0; self.size()];
        for j in 0..blocks {
            self.ops.interp_into(j, &u_f, &mut rhs[j * nb..(j + 1) * nb]);
        }
        let bc_rows = &mut rhs[blocks * nb..(blocks + 1) * nb];
        self.ops.interp_bc_into(self.bc, &u_f, bc_rows);
        for (v, gi) in bc_rows.iter_mut().zip(g) {
            *v -= gi;
        }
        if self.mu_beta.is_some() {
            rhs[(blocks + 1) * nb] = self.grid.mean(f_omega);
        }
        rhs
    }

    pub fn rhs(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(f, g)?;
        Ok(self.rhs_from(&self.masked_forcing(f), g))
    }

    /// Solves the coupled system for forcing `f` (sampled on the whole box)
    /// and boundary data `g`.
    pub fn solve(&self, fact: &SchurFactorization, f: &[f64], g: &[f64]) -> Result<EllipticSolution> {
        self.check_inputs(f, g)?;
        fact.check(&self.meta())?;
        let f_omega = self.masked_forcing(f);
        let rhs = self.rhs_from(&f_omega, g);
        let solved = fact.solve(&rhs)?;
        let (fm, gm, lambda) = self.split(&solved.x);
        let (sf, sg) = self.spreads(fm, gm);
        let (xi, _, u) = self.lift_with(Some(&f_omega), sf.as_deref(), &sg, lambda);
        Ok(EllipticSolution {
            u,
            xi,
            f_mult: fm.to_vec(),
            g_mult: gm.to_vec(),
            lambda,
            schur_residual: solved.residual,
        })
    }

    /// Plugs a solution back into every block row of the coupled system.
    pub fn block_residuals(&self, sol: &EllipticSolution, f: &[f64], g: &[f64]) -> Result<BlockResiduals> {
        self.check_inputs(f, g)?;
        let max = crate::grid::max_abs;
        let f_omega = self.masked_forcing(f);
        let (sf, sg) = self.spreads(&sol.f_mult, &sol.g_mult);
        let lu = self.l_apply(&sol.u);
        let lxi = self.l_apply(&sol.xi);
        let elliptic: Vec<f64> = (0..lu.len())
            .map(|i| lu[i] - self.chi_e[i] * lxi[i] + sg[i] - f_omega[i])
            .collect();
        let chi_lxi: Vec<f64> = self.chi_e.iter().zip(&lxi).map(|(c, v)| c * v).collect();
        let scale = max(&f_omega).max(max(&chi_lxi)).max(max(&sg)).max(1.0);
        let elliptic = max(&elliptic) / scale;
        let mean = self.mu_beta.map(|_| {
            let r: Vec<f64> = (0..lu.len())
                .map(|i| f_omega[i] + self.chi_e[i] * lxi[i] - sg[i])
                .collect();
            self.grid.mean(&r).abs() / self.grid.mean(&f_omega).abs().max(1.0)
        });
        let (extension, matching) = match (self.extension.as_ref(), sf) {
            (Some(ext), Some(sf)) => {
                let hxi = self.grid.apply_radial(&sol.xi, |k2| ext.symbol(k2));
                let e: Vec<f64> = hxi.iter().zip(&sf).map(|(a, b)| a + b).collect();
                let h_norm = self
                    .grid
                    .ksq()
                    .iter()
                    .fold(0.0f64, |m, &k2| m.max(ext.symbol(k2).abs()));
                let diff: Vec<f64> = sol.xi.iter().zip(&sol.u).map(|(a, b)| a - b).collect();
                let tu = self.ops.interp_tk_star(&sol.u)?;
                let td = self.ops.interp_tk_star(&diff)?;
                let scale = h_norm * max(&sol.xi) + max(&sf);
                (max(&e) / scale.max(1e-300), max(&td) / max(&tu).max(1.0))
            }
            _ => (0.0, 0.0),
        };
        let bu = self.ops.interp_bc(self.bc, &sol.u)?;
        let bnd: Vec<f64> = bu.iter().zip(g).map(|(a, b)| a - b).collect();
        let bnd_scale = max(&self.ops.interp_bc_magnitude(self.bc, &sol.u)?).max(max(g));
        Ok(BlockResiduals {
            elliptic,
            extension,
            matching,
            boundary: if bnd_scale > 0.0 { max(&bnd) / bnd_scale } else { max(&bnd) },
            mean,
        })
    }
}

/// Result of a boundary solve.
#[derive(Clone, Debug)]
pub struct SchurSolve {
    pub x: Vec<f64>,
    /// `‖SC x - rhs‖_∞ / ‖rhs‖_∞`.
    pub residual: f64,
}

/// Residual tolerance reported (not enforced) after each boundary solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-9;

const REFINEMENT_STEPS: usize = 2;

/// Dense Schur complement with its LU factors and identifying metadata.
/// The factors are those of the equilibrated matrix `R SC C`; the scales
/// are recomputed from the stored matrix.
#[derive(Clone, Debug)]
pub struct SchurFactorization {
    meta: FactorizationMeta,
    matrix: Vec<f64>,
    scaling: Equilibration,
    lu: DenseLu,
}

/// Bitwise equality; unused parameters are NaN and compare equal.
impl PartialEq for SchurFactorization {
    fn eq(&self, other: &Self) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.meta.same_as(&other.meta)
            && bits(&self.matrix) == bits(&other.matrix)
            && bits(self.lu.lu()) == bits(other.lu.lu())
            && self.lu.pivots() == other.lu.pivots()
    }
}

const MAGIC: &[u8; 4] = b"IBSE";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 5 + 8 * 3 + 8 + 8;

impl SchurFactorization {
    pub fn meta(&self) -> &FactorizationMeta {
        &self.meta
    }

    pub fn size(&self) -> usize {
        self.meta.m as usize
    }

    /// Row-major matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Factors of the equilibrated matrix.
    pub fn lu(&self) -> &DenseLu {
        &self.lu
    }

    pub fn scaling(&self) -> &Equilibration {
        &self.scaling
    }

    /// Refuses a factorization built for different geometry or parameters.
    pub fn check(&self, expected: &FactorizationMeta) -> Result<()> {
        if self.meta.same_as(expected) {
            Ok(())
        } else {
            Err(IbseError::FactorizationMismatch(format!(
                "stored {:?}, expected {:?}",
                self.meta, expected
            )))
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<SchurSolve> {
        if rhs.len() != self.size() {
            return Err(IbseError::LengthMismatch {
                what: "Schur right-hand side",
                expected: self.size(),
                got: rhs.len(),
            });
        }
        let scale = crate::grid::max_abs(rhs);
        let mut x = self.scaled_solve(rhs)?;
        let (mut r, mut residual) = self.residual(&x, rhs, scale);
        // iterative refinement when the first solve falls short
        for _ in 0..REFINEMENT_STEPS {
            if residual <= SOLVE_RESIDUAL_TOL {
                break;
            }
            let dx = self.scaled_solve(&r)?;
            let refined: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let (r2, res2) = self.residual(&refined, rhs, scale);
            if res2 >= residual {
                break;
            }
            (x, r, residual) = (refined, r2, res2);
        }
        if residual > SOLVE_RESIDUAL_TOL {
            warn!(
                "Schur solve residual {residual:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e} (pivot ratio {:.3e})",
                self.lu.pivot_ratio()
            );
        }
        Ok(SchurSolve { x, residual })
    }

    fn scaled_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let scaled: Vec<f64> = rhs.iter().zip(&self.scaling.rows).map(|(b, r)| b * r).collect();
        let mut x = self.lu.solve(&scaled)?;
        x.iter_mut().zip(&self.scaling.cols).for_each(|(v, c)| *v *= c);
        Ok(x)
    }

    /// `rhs - SC x` and its relative max norm.
    fn residual(&self, x: &[f64], rhs: &[f64], scale: f64) -> (Vec<f64>, f64) {
        let ax = matvec(self.size(), &self.matrix, x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let diff = crate::grid::max_abs(&r);
        (r, if scale > 0.0 { diff / scale } else { diff })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let m = &self.meta;
        w.write_all(MAGIC)?;
        for v in [FORMAT_VERSION, m.k, m.n, m.n_bdy, m.kind as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [m.mu, m.beta, m.c] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&m.digest.to_le_bytes())?;
        w.write_all(&m.m.to_le_bytes())?;
        for v in self.matrix.iter().chain(self.lu.lu()) {
            w.write_all(&v.to_le_bytes())?;
        }
        for p in self.lu.pivots() {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a stored factorization, validating its structure.
    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |reason: String| IbseError::CorruptFile {
            path: path.to_path_buf(),
            reason,
        };
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() < HEADER_LEN {
            return Err(corrupt(format!("file has only {} bytes", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let mut pos = 4;
        let u32_at = |pos: &mut usize| {
            let v = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap());
            *pos += 4;
            v
        };
        let version = u32_at(&mut pos);
        if version != FORMAT_VERSION {
            return Err(corrupt(format!(
                "format version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let k = u32_at(&mut pos);
        let n = u32_at(&mut pos);
        let n_bdy = u32_at(&mut pos);
        let kind = match u32_at(&mut pos) {
            0 => SchurKind::InvertibleL,
            1 => SchurKind::AugmentedPoisson,
            t => return Err(corrupt(format!("unknown kind tag {t}"))),
        };
        let f64_at = |pos: &mut usize| {
            let v = f64::from_le_bytes(bytes[*pos..*pos + 8].try_into().unwrap());
            *pos += 8;
            v
        };
        let mu = f64_at(&mut pos);
        let beta = f64_at(&mut pos);
        let c = f64_at(&mut pos);
        let digest = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
        pos += 8;
        let m = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
        pos += 8;
        let mu_ = m as usize;
        let expected = m
            .checked_mul(m)
            .and_then(|mm| mm.checked_mul(16))
            .and_then(|b| b.checked_add(4 * m))
            .and_then(|b| b.checked_add(HEADER_LEN as u64));
        if expected != Some(bytes.len() as u64) {
            return Err(corrupt(format!(
                "length {} does not match m = {m} (expected {:?})",
                bytes.len(),
                expected
            )));
        }
        let read_f64s = |pos: &mut usize, count: usize| -> Vec<f64> {
            let out = bytes[*pos..*pos + 8 * count]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            *pos += 8 * count;
            out
        };
        let matrix = read_f64s(&mut pos, mu_ * mu_);
        let lu = read_f64s(&mut pos, mu_ * mu_);
        let pivots: Vec<u32> = bytes[pos..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let lu = DenseLu::from_parts(mu_, lu, pivots).map_err(|e| corrupt(e.to_string()))?;
        let scaling = Equilibration::compute(mu_, &matrix);
        Ok(Self {
            scaling,
            meta: FactorizationMeta {
                k,
                n,
                n_bdy,
                kind,
                mu,
                beta,
                c,
                digest,
                m,
            },
            matrix,
            lu,
        })
    }

    /// Loads and checks against `expected` in one step.
    pub fn load_matching(path: &Path, expected: &FactorizationMeta) -> Result<Self> {
        let f = Self::load(path)?;
        f.check(expected)?;
        Ok(f)
    }
}
