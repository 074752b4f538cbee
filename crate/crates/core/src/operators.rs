//! Spreading and interpolation between boundary nodes and the grid.
//!
//! For node `i` and derivative order `j`, the stencil stores the grid-scaled
//! normal derivative `∂ⁿʲ δ̃(x - X_i)` on a window of 16 points per axis.
//! Spreading multiplies by `(-1)^j F_i w_i`; interpolation sums against the
//! same weights times `dx^d` with the same sign, which makes the pair exact
//! discrete adjoints under `⟨·,·⟩_C` and `⟨·,·⟩_Γ`.

use crate::boundary::BoundaryDiscretization;
use crate::error::{IbseError, Result};
use crate::grid::{GridField, GridSpec};
use crate::kernel::PiecewisePolyKernel;

/// Points per axis in a stencil window.
pub const WINDOW: usize = 16;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Precomputed windows and weights for every node and order `0..=max_order`.
#[derive(Clone, Debug)]
pub struct SpreadStencilSet {
    spec: GridSpec,
    max_order: usize,
    n_bdy: usize,
    /// Wrapped x and y grid indices per node, `WINDOW` each.
    xs: Vec<[u32; WINDOW]>,
    ys: Vec<[u32; WINDOW]>,
    /// `weights[j][node * W + local]`, `W = WINDOW^d`.
    weights: Vec<Vec<f64>>,
}

impl SpreadStencilSet {
    pub fn new(
        bdy: &BoundaryDiscretization,
        spec: &GridSpec,
        kernel: &PiecewisePolyKernel,
        max_order: usize,
    ) -> Result<Self> {
        if max_order > kernel.regularity() {
            return Err(IbseError::RegularityExceeded {
                order: max_order,
                regularity: kernel.regularity(),
            });
        }
        if bdy.dim() != spec.dim() {
            return Err(IbseError::InvalidGrid(format!(
                "boundary is {}-dimensional but grid is {}-dimensional",
                bdy.dim(),
                spec.dim()
            )));
        }
        let dim = spec.dim();
        let dx = spec.dx();
        let n = spec.n() as i64;
        let w = WINDOW.pow(dim as u32);
        let m = bdy.len();
        let mut xs = Vec::with_capacity(m);
        let mut ys = Vec::with_capacity(m);
        let mut weights = vec![vec![0.0; m * w]; max_order + 1];
        // per-axis kernel derivatives: axis[a][order][local]
        let mut axis = [[[0.0; WINDOW]; 4]; 2];
        for (node, (x, nrm)) in bdy.nodes().iter().zip(bdy.normals()).enumerate() {
            let mut idx = [[0u32; WINDOW]; 2];
            for a in 0..dim {
                let p = x[a] / dx;
                let first = p.floor() as i64 - (WINDOW as i64 / 2 - 1);
                for l in 0..WINDOW {
                    let gi = first + l as i64;
                    idx[a][l] = gi.rem_euclid(n) as u32;
                    let r = gi as f64 - p;
                    for (order, layer) in axis[a].iter_mut().enumerate().take(max_order + 1) {
                        layer[l] = kernel.value(r, order) / dx.powi(order as i32 + 1);
                    }
                }
            }
            xs.push(idx[0]);
            ys.push(idx[1]);
            for (j, layer) in weights.iter_mut().enumerate() {
                let out = &mut layer[node * w..(node + 1) * w];
                if dim == 1 {
                    let c = nrm[0].powi(j as i32);
                    for l in 0..WINDOW {
                        out[l] = c * axis[0][j][l];
                    }
                } else {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    for ax in 0..=j {
                        let c = binomial(j, ax)
                            * nrm[0].powi(ax as i32)
                            * nrm[1].powi((j - ax) as i32);
                        if c == 0.0 {
                            continue;
                        }
                        let (fx, fy) = (&axis[0][ax], &axis[1][j - ax]);
                        for ly in 0..WINDOW {
                            let cy = c * fy[ly];
                            let row = &mut out[ly * WINDOW..(ly + 1) * WINDOW];
                            for lx in 0..WINDOW {
                                row[lx] += cy * fx[lx];
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            spec: *spec,
            max_order,
            n_bdy: m,
            xs,
            ys,
            weights,
        })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn n_bdy(&self) -> usize {
        self.n_bdy
    }

    fn window_len(&self) -> usize {
        WINDOW.pow(self.spec.dim() as u32)
    }

    /// Weights of node `node`, order `j`, in window order (x fastest).
    pub fn node_weights(&self, j: usize, node: usize) -> &[f64] {
        let w = self.window_len();
        &self.weights[j][node * w..(node + 1) * w]
    }

    /// Flat grid indices of the window of `node`, in window order.
    pub fn node_indices(&self, node: usize) -> Vec<usize> {
        let n = self.spec.n();
        if self.spec.dim() == 1 {
            self.xs[node].iter().map(|&i| i as usize).collect()
        } else {
            let mut v = Vec::with_capacity(WINDOW * WINDOW);
            for &iy in &self.ys[node] {
                for &ix in &self.xs[node] {
                    v.push(iy as usize * n + ix as usize);
                }
            }
            v
        }
    }

    /// `out += scale * weights(j, node)` on the grid.
    #[inline]
    pub fn add_scaled(&self, j: usize, node: usize, scale: f64, out: &mut [f64]) {
        let w = self.node_weights(j, node);
        let xs = &self.xs[node];
        if self.spec.dim() == 1 {
            for l in 0..WINDOW {
                out[xs[l] as usize] += scale * w[l];
            }
        } else {
            let n = self.spec.n();
            for (ly, &iy) in self.ys[node].iter().enumerate() {
                let base = iy as usize * n;
                let wr = &w[ly * WINDOW..(ly + 1) * WINDOW];
                for l in 0..WINDOW {
                    out[base + xs[l] as usize] += scale * wr[l];
                }
            }
        }
    }

    /// `Σ_x u(x) weights(j, node)(x)`, without the cell volume.
    #[inline]
    pub fn dot(&self, j: usize, node: usize, u: &[f64]) -> f64 {
        let w = self.node_weights(j, node);
        let xs = &self.xs[node];
        let mut acc = 0.0;
        if self.spec.dim() == 1 {
            for l in 0..WINDOW {
                acc += u[xs[l] as usize] * w[l];
            }
        } else {
            let n = self.spec.n();
            for (ly, &iy) in self.ys[node].iter().enumerate() {
                let base = iy as usize * n;
                let wr = &w[ly * WINDOW..(ly + 1) * WINDOW];
                for l in 0..WINDOW {
                    acc += u[base + xs[l] as usize] * wr[l];
                }
            }
        }
        acc
    }

    /// `Σ |w| |u|` over the stencil of `node`.
    pub fn dot_abs(&self, j: usize, node: usize, u: &[f64]) -> f64 {
        let w = self.node_weights(j, node);
        let xs = &self.xs[node];
        let mut acc = 0.0;
        if self.spec.dim() == 1 {
            for l in 0..WINDOW {
                acc += (u[xs[l] as usize] * w[l]).abs();
            }
        } else {
            let n = self.spec.n();
            for (ly, &iy) in self.ys[node].iter().enumerate() {
                let base = iy as usize * n;
                let wr = &w[ly * WINDOW..(ly + 1) * WINDOW];
                for l in 0..WINDOW {
                    acc += (u[base + xs[l] as usize] * wr[l]).abs();
                }
            }
        }
        acc
    }
}

/// Boundary-condition rows `a S* + b T*_(1)`: Dirichlet is `(1, 0)`,
/// Neumann `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryOperator {
    pub a: f64,
    pub b: f64,
}

impl BoundaryOperator {
    pub const DIRICHLET: Self = Self { a: 1.0, b: 0.0 };
    pub const NEUMANN: Self = Self { a: 0.0, b: 1.0 };

    pub fn robin(a: f64, b: f64) -> Result<Self> {
        if a == 0.0 && b == 0.0 {
            return Err(IbseError::InvalidParameter {
                name: "robin",
                reason: "coefficients a and b are both zero".into(),
            });
        }
        Ok(Self { a, b })
    }

    /// Whether the operator samples values (as opposed to only derivatives).
    pub fn has_value_term(&self) -> bool {
        self.a != 0.0
    }
}

/// `S`, `S*`, `T_(j)`, `T*_(j)`, `T_k`, `T_k*` for one boundary and grid.
#[derive(Clone, Debug)]
pub struct Operators {
    stencils: SpreadStencilSet,
    quad: Vec<f64>,
    cell: f64,
    k: usize,
}

impl Operators {
    /// Builds stencils for orders `0..=max(k, 1)`; order 1 is always present
    /// for Neumann and Robin rows.
    pub fn new(
        bdy: &BoundaryDiscretization,
        spec: &GridSpec,
        kernel: &PiecewisePolyKernel,
        k: usize,
    ) -> Result<Self> {
        if k > kernel.regularity() {
            return Err(IbseError::RegularityExceeded {
                order: k,
                regularity: kernel.regularity(),
            });
        }
        let stencils = SpreadStencilSet::new(bdy, spec, kernel, k.max(1))?;
        Ok(Self {
            stencils,
            quad: bdy.weights().to_vec(),
            cell: spec.cell_volume(),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_bdy(&self) -> usize {
        self.quad.len()
    }

    pub fn grid_len(&self) -> usize {
        self.stencils.spec.len()
    }

    pub fn spec(&self) -> &GridSpec {
        &self.stencils.spec
    }

    pub fn stencils(&self) -> &SpreadStencilSet {
        &self.stencils
    }

    pub fn quadrature(&self) -> &[f64] {
        &self.quad
    }

    fn check_order(&self, j: usize) -> Result<()> {
        if j > self.stencils.max_order {
            return Err(IbseError::InvalidParameter {
                name: "j",
                reason: format!(
                    "derivative order {j} exceeds stencil order {}",
                    self.stencils.max_order
                ),
            });
        }
        Ok(())
    }

    fn check_len(&self, what: &'static str, v: &[f64], expected: usize) -> Result<()> {
        if v.len() != expected {
            return Err(IbseError::LengthMismatch {
                what,
                expected,
                got: v.len(),
            });
        }
        Ok(())
    }

    fn sign(j: usize) -> f64 {
        if j % 2 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    /// `out += T_(j) F`.
    pub fn spread_into(&self, j: usize, f: &[f64], out: &mut [f64]) {
        let s = Self::sign(j);
        for (node, (&fi, &q)) in f.iter().zip(&self.quad).enumerate() {
            if fi != 0.0 {
                self.stencils.add_scaled(j, node, s * fi * q, out);
            }
        }
    }

    /// `out += T_(j) e_node · scale`, the spread of a single entry.
    #[inline]
    pub fn spread_unit_into(&self, j: usize, node: usize, scale: f64, out: &mut [f64]) {
        let s = Self::sign(j) * scale * self.quad[node];
        self.stencils.add_scaled(j, node, s, out);
    }

    /// `T*_(j) u`, approximating `∂ʲu/∂nʲ` at the nodes.
    pub fn interp_into(&self, j: usize, u: &[f64], out: &mut [f64]) {
        let s = Self::sign(j) * self.cell;
        for (node, o) in out.iter_mut().enumerate() {
            *o = s * self.stencils.dot(j, node, u);
        }
    }

    pub fn spread_t(&self, j: usize, f: &[f64]) -> Result<Vec<f64>> {
        self.check_order(j)?;
        self.check_len("boundary vector", f, self.n_bdy())?;
        let mut out = vec![0.0; self.grid_len()];
        self.spread_into(j, f, &mut out);
        Ok(out)
    }

    pub fn interp_t_star(&self, j: usize, u: &[f64]) -> Result<Vec<f64>> {
        self.check_order(j)?;
        self.check_len("grid field", u, self.grid_len())?;
        let mut out = vec![0.0; self.n_bdy()];
        self.interp_into(j, u, &mut out);
        Ok(out)
    }

    pub fn spread_s(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.spread_t(0, f)
    }

    pub fn interp_s_star(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.interp_t_star(0, u)
    }

    /// `T_k F = Σ_{j=0}^{k} T_(j) F_j` for stacked `F`.
    pub fn spread_tk(&self, stacked: &[f64]) -> Result<Vec<f64>> {
        let m = self.n_bdy();
        self.check_len("stacked boundary vector", stacked, (self.k + 1) * m)?;
        let mut out = vec![0.0; self.grid_len()];
        for j in 0..=self.k {
            self.spread_into(j, &stacked[j * m..(j + 1) * m], &mut out);
        }
        Ok(out)
    }

    /// `T_k* u`, stacked `j = 0..k`.
    pub fn interp_tk_star(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len("grid field", u, self.grid_len())?;
        let m = self.n_bdy();
        let mut out = vec![0.0; (self.k + 1) * m];
        for j in 0..=self.k {
            self.interp_into(j, u, &mut out[j * m..(j + 1) * m]);
        }
        Ok(out)
    }

    /// `out += (a S + b T_(1)) G`.
    pub fn spread_bc_into(&self, bc: BoundaryOperator, g: &[f64], out: &mut [f64]) {
        if bc.a != 0.0 {
            let scaled: Vec<f64> = g.iter().map(|v| bc.a * v).collect();
            self.spread_into(0, &scaled, out);
        }
        if bc.b != 0.0 {
            let scaled: Vec<f64> = g.iter().map(|v| bc.b * v).collect();
            self.spread_into(1, &scaled, out);
        }
    }

    #[inline]
    pub fn spread_bc_unit_into(&self, bc: BoundaryOperator, node: usize, out: &mut [f64]) {
        if bc.a != 0.0 {
            self.spread_unit_into(0, node, bc.a, out);
        }
        if bc.b != 0.0 {
            self.spread_unit_into(1, node, bc.b, out);
        }
    }

    /// `(a S* + b T*_(1)) u`.
    pub fn interp_bc_into(&self, bc: BoundaryOperator, u: &[f64], out: &mut [f64]) {
        let s = self.cell;
        for (node, o) in out.iter_mut().enumerate() {
            let mut v = 0.0;
            if bc.a != 0.0 {
                v += bc.a * s * self.stencils.dot(0, node, u);
            }
            if bc.b != 0.0 {
                v -= bc.b * s * self.stencils.dot(1, node, u);
            }
            *o = v;
        }
    }

    /// `(|a| S* + |b| |T*_(1)|) |u|`, the scale of the terms summed by
    /// [`Operators::interp_bc`].
    pub fn interp_bc_magnitude(&self, bc: BoundaryOperator, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len("grid field", u, self.grid_len())?;
        let s = self.cell;
        Ok((0..self.n_bdy())
            .map(|node| {
                bc.a.abs() * s * self.stencils.dot_abs(0, node, u)
                    + bc.b.abs() * s * self.stencils.dot_abs(1, node, u)
            })
            .collect())
    }

    pub fn interp_bc(&self, bc: BoundaryOperator, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len("grid field", u, self.grid_len())?;
        let mut out = vec![0.0; self.n_bdy()];
        self.interp_bc_into(bc, u, &mut out);
        Ok(out)
    }

    /// [`GridField`] wrapper for `S F`.
    pub fn spread_field(&self, f: &[f64]) -> Result<GridField> {
        GridField::new(*self.spec(), self.spread_s(f)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{discretize_curve, Circle};
    use crate::kernel::{tensor_normal_derivative_weights, tilde_delta};
    use std::f64::consts::PI;

    #[test]
    fn stencil_weights_match_tensor_formula() {
        let spec = GridSpec::new(2, 64).unwrap();
        let c = Circle {
            center: [PI + 0.013, PI - 0.021],
            radius: 1.3,
        };
        let b = discretize_curve(&c, true, 20).unwrap();
        let st = SpreadStencilSet::new(&b, &spec, tilde_delta(), 3).unwrap();
        let dx = spec.dx();
        for node in [0, 7, 13] {
            let x = b.nodes()[node];
            let nrm = b.normals()[node];
            let idx = st.node_indices(node);
            for j in 0..=3 {
                let w = st.node_weights(j, node);
                for (l, &gi) in idx.iter().enumerate().step_by(37) {
                    let p = spec.point(gi);
                    let wrap = |d: f64| (d + PI).rem_euclid(2.0 * PI) - PI;
                    let o = [wrap(p[0] - x[0]) / dx, wrap(p[1] - x[1]) / dx];
                    let want = tensor_normal_derivative_weights(tilde_delta(), &nrm, j, &o)
                        .unwrap()
                        / dx.powi(2 + j as i32);
                    assert!((w[l] - want).abs() <= 1e-12 * want.abs().max(1.0 / dx.powi(2 + j as i32)));
                }
            }
        }
    }

    #[test]
    fn order_bound() {
        let spec = GridSpec::new(2, 32).unwrap();
        let c = Circle {
            center: [PI, PI],
            radius: 1.0,
        };
        let b = discretize_curve(&c, true, 16).unwrap();
        assert!(Operators::new(&b, &spec, tilde_delta(), 4).is_err());
        let ops = Operators::new(&b, &spec, tilde_delta(), 2).unwrap();
        assert!(ops.spread_t(3, &[0.0; 16]).is_err());
        assert!(ops.spread_s(&[0.0; 15]).is_err());
        assert!(BoundaryOperator::robin(0.0, 0.0).is_err());
    }
}
