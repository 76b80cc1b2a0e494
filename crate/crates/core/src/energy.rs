//! Discrete reduced energy
//!
//! `E(u) = ∫ {|Du|² + ρ⁻²(4u₁² + u₃²) + √2 μ (1 - 3P(u))} ρ dρ dz + ν ∫ |u - u_s|² dz`
//!
//! on the meridian lattice. The Dirichlet term is assembled edge by edge
//! (`Σ k_e |u_a - u_b|²`, a second-order difference on each lattice edge weighted by
//! the exact moment of the strip it spans), the remaining volume terms by nodal
//! quadrature with the dual-cell weights, and the surface term with `dz` weights.
//! The gradient below is the exact derivative of this discrete functional.

use std::f64::consts::SQRT_2;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchoring::AnchoringProfile;
use crate::error::{Error, Result};
use crate::grid::MeridianGrid;
use crate::tensor::{eval_p, grad_p, UVector};
use crate::util::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Normalized anchoring strength `ν = WR`.
    pub nu: f64,
    /// Bulk coupling `μ = aR²`.
    pub mu: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { nu: 1.0, mu: 1.0 }
    }
}

impl ModelParams {
    /// `ν = 0` (the natural-boundary limit) is accepted; negative values are not.
    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::config("model.nu", "must be finite and non-negative"));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::config("model.mu", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Per-node unit vectors aligned with the grid's node order.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitField {
    pub values: Vec<UVector>,
}

impl UnitField {
    pub fn constant(grid: &MeridianGrid, u: UVector) -> Self {
        Self { values: vec![u; grid.len()] }
    }

    pub fn from_fn<F: FnMut(usize) -> UVector>(grid: &MeridianGrid, f: F) -> Self {
        Self { values: (0..grid.len()).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.values.iter().map(|u| (u.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn normalize(&mut self) {
        for u in &mut self.values {
            *u /= u.norm();
        }
    }

    pub fn check_len(&self, grid: &MeridianGrid) -> Result<()> {
        if self.values.len() != grid.len() {
            return Err(Error::SizeMismatch { what: "field", got: self.values.len(), expected: grid.len() });
        }
        Ok(())
    }

    /// Write `index,r,theta_hat,u1,u2,u3` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, grid: &MeridianGrid, mut out: W) -> Result<()> {
        self.check_len(grid)?;
        writeln!(out, "index,r,theta_hat,u1,u2,u3")?;
        for (idx, (u, n)) in self.values.iter().zip(grid.nodes()).enumerate() {
            writeln!(
                out,
                "{idx},{},{},{},{},{}",
                fmt_f64(n.r),
                fmt_f64(n.theta),
                fmt_f64(u[0]),
                fmt_f64(u[1]),
                fmt_f64(u[2])
            )?;
        }
        Ok(())
    }

    /// Read the format written by [`UnitField::write_csv`]. `first_line` offsets the
    /// reported line numbers when the CSV is embedded after a header.
    pub fn read_csv<R: BufRead>(input: R, expected_len: usize, first_line: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(expected_len);
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            let line_no = first_line + k;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with("index") {
                continue;
            }
            let cols: Vec<&str> = trimmed.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::parse(line_no, format!("expected 6 columns, found {}", cols.len())));
            }
            let idx: usize = cols[0].parse().map_err(|_| Error::parse(line_no, format!("bad index `{}`", cols[0])))?;
            if idx != values.len() {
                return Err(Error::parse(line_no, format!("index {idx} out of order")));
            }
            let mut u = [0.0; 3];
            for (v, c) in u.iter_mut().zip(&cols[3..]) {
                *v = c.parse().map_err(|_| Error::parse(line_no, format!("not a number: `{c}`")))?;
            }
            values.push(UVector::from(u));
        }
        if values.len() != expected_len {
            return Err(Error::parse(
                first_line + values.len(),
                format!("field has {} rows, expected {expected_len} (truncated?)", values.len()),
            ));
        }
        Ok(Self { values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    pub axis_weight: f64,
    pub bulk: f64,
    pub surface: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn add(mut self, o: &EnergyBreakdown) -> Self {
        self.elastic += o.elastic;
        self.axis_weight += o.axis_weight;
        self.bulk += o.bulk;
        self.surface += o.surface;
        self
    }

    fn with_total(mut self) -> Self {
        self.total = self.elastic + self.axis_weight + self.bulk + self.surface;
        self
    }
}

/// Axis-weight multipliers `(4, 0, 1)`.
const AXIS: [f64; 3] = [4.0, 0.0, 1.0];

/// The discrete energy for one grid, anchoring profile and parameter set.
#[derive(Debug, Clone)]
pub struct EnergyModel<'g> {
    grid: &'g MeridianGrid,
    anchoring: Vec<UVector>,
    params: ModelParams,
    /// `cell_weight / ρ²` per node.
    axis_coef: Vec<f64>,
}

impl<'g> EnergyModel<'g> {
    pub fn new(grid: &'g MeridianGrid, profile: &AnchoringProfile, params: ModelParams) -> Result<Self> {
        Self::with_boundary_values(grid, profile.boundary_values(grid)?, params)
    }

    pub fn with_boundary_values(grid: &'g MeridianGrid, anchoring: Vec<UVector>, params: ModelParams) -> Result<Self> {
        params.validate()?;
        if anchoring.len() != grid.n_p() {
            return Err(Error::SizeMismatch { what: "anchoring", got: anchoring.len(), expected: grid.n_p() });
        }
        let axis_coef = grid.nodes().iter().zip(grid.cell_weights()).map(|(n, w)| w / (n.rho * n.rho)).collect();
        Ok(Self { grid, anchoring, params, axis_coef })
    }

    pub fn grid(&self) -> &'g MeridianGrid {
        self.grid
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn anchoring(&self) -> &[UVector] {
        &self.anchoring
    }

    /// Same grid and anchoring, different `ν`/`μ`.
    pub fn with_params(&self, params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, ..self.clone() })
    }

    fn layer_energy(&self, u: &[UVector], i: usize) -> EnergyBreakdown {
        let g = self.grid;
        let n_p = g.n_p();
        let n_r = g.n_r();
        let w = g.cell_weights();
        let bulk_scale = SQRT_2 * self.params.mu;
        let mut e = EnergyBreakdown::default();
        for j in 0..n_p {
            let idx = g.index(i, j);
            let v = &u[idx];
            e.axis_weight += self.axis_coef[idx] * (4.0 * v[0] * v[0] + v[2] * v[2]);
            e.bulk += bulk_scale * w[idx] * (1.0 - 3.0 * eval_p(v));
            if j + 1 < n_p {
                e.elastic += g.polar_edge(i, j) * (u[idx + 1] - v).norm_squared();
            }
            if i + 1 < n_r {
                e.elastic += g.radial_edge(i, j) * (u[idx + n_p] - v).norm_squared();
            }
            if i == 0 {
                e.surface += self.params.nu * g.surface_weights()[j] * (v - self.anchoring[j]).norm_squared();
            }
        }
        e
    }

    pub fn energy(&self, field: &UnitField) -> Result<EnergyBreakdown> {
        field.check_len(self.grid)?;
        let u = &field.values;
        // Per-layer partial sums combined in a fixed order keep the result
        // independent of the thread count.
        let partials: Vec<EnergyBreakdown> =
            (0..self.grid.n_r()).into_par_iter().map(|i| self.layer_energy(u, i)).collect();
        Ok(partials.iter().fold(EnergyBreakdown::default(), |acc, p| acc.add(p)).with_total())
    }

    /// `∂E/∂u` at one node, before projection.
    fn node_gradient(&self, u: &[UVector], i: usize, j: usize) -> UVector {
        let g = self.grid;
        let n_p = g.n_p();
        let n_r = g.n_r();
        let idx = g.index(i, j);
        let v = u[idx];
        let mut grad = UVector::zeros();
        if j > 0 {
            grad += 2.0 * g.polar_edge(i, j - 1) * (v - u[idx - 1]);
        }
        if j + 1 < n_p {
            grad += 2.0 * g.polar_edge(i, j) * (v - u[idx + 1]);
        }
        if i > 0 {
            grad += 2.0 * g.radial_edge(i - 1, j) * (v - u[idx - n_p]);
        }
        if i + 1 < n_r {
            grad += 2.0 * g.radial_edge(i, j) * (v - u[idx + n_p]);
        }
        let a = 2.0 * self.axis_coef[idx];
        grad += UVector::new(a * AXIS[0] * v[0], 0.0, a * AXIS[2] * v[2]);
        grad -= 3.0 * SQRT_2 * self.params.mu * g.cell_weights()[idx] * grad_p(&v);
        if i == 0 {
            grad += 2.0 * self.params.nu * g.surface_weights()[j] * (v - self.anchoring[j]);
        }
        grad
    }

    /// Unprojected `∂E/∂u`, zero on the Dirichlet layer.
    pub fn raw_gradient(&self, field: &UnitField) -> Result<Vec<UVector>> {
        field.check_len(self.grid)?;
        let g = self.grid;
        let n_p = g.n_p();
        let n_r = g.n_r();
        let u = &field.values;
        let mut out = vec![UVector::zeros(); g.len()];
        out.par_chunks_mut(n_p).enumerate().for_each(|(i, layer)| {
            if i + 1 == n_r {
                return;
            }
            for (j, slot) in layer.iter_mut().enumerate() {
                *slot = self.node_gradient(u, i, j);
            }
        });
        Ok(out)
    }

    /// Tangential gradient `(I - uuᵀ) ∂E/∂u`, zero on the Dirichlet layer.
    pub fn gradient(&self, field: &UnitField) -> Result<Vec<UVector>> {
        let mut g = self.raw_gradient(field)?;
        for (gi, ui) in g.iter_mut().zip(&field.values) {
            *gi -= gi.dot(ui) * ui;
        }
        Ok(g)
    }

    /// Diagonal of the Hessian of the quadratic terms, per node and component.
    /// Used as a Jacobi preconditioner by the minimizer; Dirichlet nodes get 1.
    pub fn diagonal(&self) -> Vec<UVector> {
        let g = self.grid;
        let n_p = g.n_p();
        let n_r = g.n_r();
        (0..g.len())
            .map(|idx| {
                let (i, j) = g.lattice(idx);
                if i + 1 == n_r {
                    return UVector::repeat(1.0);
                }
                let mut edges = 0.0;
                if j > 0 {
                    edges += g.polar_edge(i, j - 1);
                }
                if j + 1 < n_p {
                    edges += g.polar_edge(i, j);
                }
                if i > 0 {
                    edges += g.radial_edge(i - 1, j);
                }
                edges += g.radial_edge(i, j);
                if i == 0 {
                    edges += self.params.nu * g.surface_weights()[j];
                }
                let a = self.axis_coef[idx];
                UVector::new(2.0 * (edges + a * AXIS[0]), 2.0 * edges, 2.0 * (edges + a * AXIS[2]))
            })
            .collect()
    }

    /// Pointwise norm of the strong-form Euler–Lagrange residual at the nodes strictly
    /// between the colloid and the far-field layer, as `(node index, residual)`.
    ///
    /// The operator side is the discrete variation divided by `2·cell_weight`; the
    /// multiplier `|Du|² + ρ⁻²(4u₁² + u₃²) - (9√2/2)μP(u)` is evaluated from centered
    /// differences.
    pub fn el_residual(&self, field: &UnitField) -> Result<Vec<(usize, f64)>> {
        let raw = self.raw_gradient(field)?;
        let g = self.grid;
        let u = &field.values;
        let mu = self.params.mu;
        let mut out = Vec::with_capacity(g.len());
        for i in 1..g.n_r() - 1 {
            for j in 0..g.n_p() {
                let idx = g.index(i, j);
                let v = u[idx];
                let node = g.node(idx);
                let lhs = raw[idx] / (2.0 * g.cell_weights()[idx]);
                let du2 = self.gradient_sq(u, i, j);
                let coef =
                    du2 + (4.0 * v[0] * v[0] + v[2] * v[2]) / (node.rho * node.rho) - 4.5 * SQRT_2 * mu * eval_p(&v);
                out.push((idx, (lhs - coef * v).norm()));
            }
        }
        Ok(out)
    }

    /// `|∂_r u|² + r⁻²|∂_θ̂ u|²` at a node, second-order differences.
    fn gradient_sq(&self, u: &[UVector], i: usize, j: usize) -> f64 {
        let g = self.grid;
        let r = g.radii();
        let n_p = g.n_p();
        let at = |i: usize, j: usize| u[g.index(i, j)];
        let du_r = if i == 0 {
            d_first(r[0], r[1], r[2], at(0, j), at(1, j), at(2, j))
        } else if i + 1 == g.n_r() {
            let n = g.n_r() - 1;
            d_first(r[n], r[n - 1], r[n - 2], at(n, j), at(n - 1, j), at(n - 2, j))
        } else {
            d_centered(r[i - 1], r[i], r[i + 1], at(i - 1, j), at(i, j), at(i + 1, j))
        };
        let h = g.polar_step();
        let du_t = if j == 0 {
            (-3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)) / (2.0 * h)
        } else if j + 1 == n_p {
            (3.0 * at(i, n_p - 1) - 4.0 * at(i, n_p - 2) + at(i, n_p - 3)) / (2.0 * h)
        } else {
            (at(i, j + 1) - at(i, j - 1)) / (2.0 * h)
        };
        du_r.norm_squared() + du_t.norm_squared() / (r[i] * r[i])
    }

    /// `|-∂_r u - ν[u_s - (u_s·u)u]|` at each colloid-boundary node (polar-row order).
    pub fn robin_residual(&self, field: &UnitField) -> Result<Vec<f64>> {
        field.check_len(self.grid)?;
        let g = self.grid;
        let r = g.radii();
        let u = &field.values;
        let nu = self.params.nu;
        Ok((0..g.n_p())
            .map(|j| {
                let at = |i: usize| u[g.index(i, j)];
                let du_r = d_first(r[0], r[1], r[2], at(0), at(1), at(2));
                let us = self.anchoring[j];
                let v = at(0);
                (-du_r - nu * (us - us.dot(&v) * v)).norm()
            })
            .collect())
    }
}

/// Second-order one-sided derivative at `x0` from samples at `x0, x1, x2`
/// (either side, any spacing).
fn d_first(x0: f64, x1: f64, x2: f64, f0: UVector, f1: UVector, f2: UVector) -> UVector {
    let (a, b) = (x1 - x0, x2 - x0);
    // Lagrange derivative weights at x0.
    let w0 = -(a + b) / (a * b);
    let w1 = b / (a * (b - a));
    let w2 = -a / (b * (b - a));
    f0 * w0 + f1 * w1 + f2 * w2
}

/// Second-order centered derivative at `x1` on a non-uniform stencil.
fn d_centered(x0: f64, x1: f64, x2: f64, f0: UVector, f1: UVector, f2: UVector) -> UVector {
    let (hm, hp) = (x1 - x0, x2 - x1);
    (f2 * (hm * hm) - f0 * (hp * hp) + f1 * (hp * hp - hm * hm)) / (hm * hp * (hm + hp))
}

/// `(|u₁|, u₂, u₃)` at every node.
pub fn symmetrize_u1(field: &UnitField) -> UnitField {
    UnitField { values: field.values.iter().map(|u| UVector::new(u[0].abs(), u[1], u[2])).collect() }
}

/// Discrete `∫[|Du|² + ρ⁻²(4u₁² + u₃²)]ρ` attributed to nodes: each edge term is split
/// evenly between its endpoints and the axis term stays on its node. Sums to
/// `elastic + axis_weight`.
pub fn nodal_dirichlet(grid: &MeridianGrid, field: &UnitField) -> Result<Vec<f64>> {
    field.check_len(grid)?;
    let (n_r, n_p) = (grid.n_r(), grid.n_p());
    let u = &field.values;
    let mut out: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(grid.cell_weights())
        .zip(u)
        .map(|((n, w), v)| w / (n.rho * n.rho) * (AXIS[0] * v[0] * v[0] + AXIS[2] * v[2] * v[2]))
        .collect();
    for i in 0..n_r {
        for j in 0..n_p {
            let idx = grid.index(i, j);
            if j + 1 < n_p {
                let e = 0.5 * grid.polar_edge(i, j) * (u[idx + 1] - u[idx]).norm_squared();
                out[idx] += e;
                out[idx + 1] += e;
            }
            if i + 1 < n_r {
                let e = 0.5 * grid.radial_edge(i, j) * (u[idx + n_p] - u[idx]).norm_squared();
                out[idx] += e;
                out[idx + n_p] += e;
            }
        }
    }
    Ok(out)
}

/// Convenience wrapper over [`EnergyModel::energy`].
pub fn eval_energy(
    field: &UnitField,
    grid: &MeridianGrid,
    profile: &AnchoringProfile,
    params: ModelParams,
) -> Result<EnergyBreakdown> {
    EnergyModel::new(grid, profile, params)?.energy(field)
}

/// Convenience wrapper over [`EnergyModel::gradient`].
pub fn eval_gradient(
    field: &UnitField,
    grid: &MeridianGrid,
    profile: &AnchoringProfile,
    params: ModelParams,
) -> Result<Vec<UVector>> {
    EnergyModel::new(grid, profile, params)?.gradient(field)
}
