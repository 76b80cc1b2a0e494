//! Boundary-fitted discretization of the meridian half-plane outside the unit disk.
//!
//! Nodes live on the curvilinear lattice `(r, θ̂)` with `ρ = r sin θ̂`, `z = r cos θ̂`.
//! Radial nodes include both `r = 1` and `r = R_out`; polar nodes are cell-centered,
//! `θ̂_j = (j + ½)·π/n_polar`, so no node sits on the symmetry axis.
//!
//! Every node owns a dual control volume `[r_{i-½}, r_{i+½}] × [θ̂_j - Δ/2, θ̂_j + Δ/2]`
//! (clipped to `[1, R_out]` radially). Its weight is the exact moment
//! `∫ ρ dρ dz = ∫∫ r² sin θ̂ dr dθ̂` over that volume, so the weights tile the
//! truncated domain exactly.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Radial cell count; the lattice has `n_radial + 1` radial node layers.
    pub n_radial: usize,
    /// Polar cell count (one node row per cell).
    pub n_polar: usize,
    /// Truncation radius in colloid radii.
    pub outer_radius: f64,
    /// Ratio between consecutive radial steps.
    pub grading: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_radial: 64, n_polar: 128, outer_radius: 20.0, grading: 1.05 }
    }
}

impl GridConfig {
    pub fn new(n_radial: usize, n_polar: usize, outer_radius: f64, grading: f64) -> Self {
        Self { n_radial, n_polar, outer_radius, grading }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_radial < 2 {
            return Err(Error::config("grid.n_radial", "must be at least 2"));
        }
        if self.n_polar < 4 {
            return Err(Error::config("grid.n_polar", "must be at least 4"));
        }
        if !(self.outer_radius.is_finite() && self.outer_radius > 1.0) {
            return Err(Error::config("grid.outer_radius", "must be finite and greater than 1"));
        }
        if !(self.grading.is_finite() && self.grading >= 1.0) {
            return Err(Error::config("grid.grading", "must be finite and at least 1"));
        }
        Ok(())
    }

    /// The nested refinement: both cell counts doubled, grading replaced by its
    /// square root so every coarse node is also a fine node.
    pub fn refined(&self) -> Self {
        Self {
            n_radial: 2 * self.n_radial,
            n_polar: 2 * self.n_polar,
            outer_radius: self.outer_radius,
            grading: self.grading.sqrt(),
        }
    }

    /// First radial step `r_1 - r_0`.
    pub fn first_radial_step(&self) -> f64 {
        radial_nodes(self)[1] - 1.0
    }

    /// A config with a different outer radius whose radial cell count is chosen so the
    /// first radial step (and hence the local resolution per unit length) is as close as
    /// possible to this one's.
    pub fn with_outer_radius_matching_spacing(&self, outer_radius: f64) -> Self {
        let h0 = self.first_radial_step();
        let n_radial = if self.grading == 1.0 {
            ((outer_radius - 1.0) / h0).round() as usize
        } else {
            let g = self.grading;
            ((1.0 + (outer_radius - 1.0) * (g - 1.0) / h0).ln() / g.ln()).round() as usize
        };
        Self { n_radial: n_radial.max(2), outer_radius, ..*self }
    }

    /// SHA-256 over a canonical rendering of the config; used to tie checkpoints to grids.
    pub fn digest(&self) -> String {
        let canonical = format!(
            "n_radial={};n_polar={};outer_radius={:.16e};grading={:.16e}",
            self.n_radial, self.n_polar, self.outer_radius, self.grading
        );
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeTag {
    ColloidBoundary,
    FarField,
    NearAxisNorth,
    NearAxisSouth,
    Interior,
}

impl NodeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeTag::ColloidBoundary => "colloid_boundary",
            NodeTag::FarField => "far_field",
            NodeTag::NearAxisNorth => "near_axis_north",
            NodeTag::NearAxisSouth => "near_axis_south",
            NodeTag::Interior => "interior",
        }
    }
}

impl fmt::Display for NodeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub r: f64,
    pub theta: f64,
    pub rho: f64,
    pub z: f64,
}

/// Immutable lattice plus the quadrature and stencil coefficients the energy needs.
#[derive(Debug, Clone)]
pub struct MeridianGrid {
    cfg: GridConfig,
    radii: Vec<f64>,
    thetas: Vec<f64>,
    nodes: Vec<Node>,
    cell_weights: Vec<f64>,
    surface_weights: Vec<f64>,
    tags: Vec<NodeTag>,
    /// Coefficient of `|u(i+1,j) - u(i,j)|²`, indexed by `i * n_polar + j`, `i < n_radial`.
    radial_edge: Vec<f64>,
    /// Coefficient of `|u(i,j+1) - u(i,j)|²`, indexed by `i * (n_polar - 1) + j`.
    polar_edge: Vec<f64>,
}

fn radial_nodes(cfg: &GridConfig) -> Vec<f64> {
    let n = cfg.n_radial;
    let span = cfg.outer_radius - 1.0;
    let mut r: Vec<f64> = if cfg.grading == 1.0 {
        (0..=n).map(|i| 1.0 + span * i as f64 / n as f64).collect()
    } else {
        let g = cfg.grading;
        let denom = g.powi(n as i32) - 1.0;
        (0..=n).map(|i| 1.0 + span * (g.powi(i as i32) - 1.0) / denom).collect()
    };
    r[0] = 1.0;
    r[n] = cfg.outer_radius;
    r
}

/// Build the lattice, its quadrature weights and boundary tags.
pub fn build_grid(cfg: GridConfig) -> Result<MeridianGrid> {
    cfg.validate()?;
    let n_r = cfg.n_radial;
    let n_p = cfg.n_polar;
    let dtheta = PI / n_p as f64;
    let radii = radial_nodes(&cfg);
    let thetas: Vec<f64> = (0..n_p).map(|j| (j as f64 + 0.5) * dtheta).collect();

    // Dual radial interval of each node.
    let lo = |i: usize| if i == 0 { radii[0] } else { 0.5 * (radii[i - 1] + radii[i]) };
    let hi = |i: usize| if i == n_r { radii[n_r] } else { 0.5 * (radii[i] + radii[i + 1]) };
    let cube_moment = |a: f64, b: f64| (b * b * b - a * a * a) / 3.0;
    // ∫ sin θ̂ over the polar cell of row j.
    let polar_band: Vec<f64> = thetas.iter().map(|&t| (t - 0.5 * dtheta).cos() - (t + 0.5 * dtheta).cos()).collect();

    let mut nodes = Vec::with_capacity((n_r + 1) * n_p);
    let mut cell_weights = Vec::with_capacity((n_r + 1) * n_p);
    let mut tags = Vec::with_capacity((n_r + 1) * n_p);
    for (i, &r) in radii.iter().enumerate() {
        let radial_moment = cube_moment(lo(i), hi(i));
        for (j, &t) in thetas.iter().enumerate() {
            nodes.push(Node { r, theta: t, rho: r * t.sin(), z: r * t.cos() });
            cell_weights.push(radial_moment * polar_band[j]);
            tags.push(classify(i, j, n_r, n_p));
        }
    }

    let mut radial_edge = Vec::with_capacity(n_r * n_p);
    for i in 0..n_r {
        let h = radii[i + 1] - radii[i];
        let moment = cube_moment(radii[i], radii[i + 1]);
        for band in &polar_band {
            radial_edge.push(moment * band / (h * h));
        }
    }
    let mut polar_edge = Vec::with_capacity((n_r + 1) * (n_p - 1));
    for i in 0..=n_r {
        let len = hi(i) - lo(i);
        for j in 0..n_p - 1 {
            let band = thetas[j].cos() - thetas[j + 1].cos();
            polar_edge.push(len * band / (dtheta * dtheta));
        }
    }

    Ok(MeridianGrid {
        cfg,
        radii,
        thetas,
        nodes,
        cell_weights,
        surface_weights: polar_band,
        tags,
        radial_edge,
        polar_edge,
    })
}

fn classify(i: usize, j: usize, n_r: usize, n_p: usize) -> NodeTag {
    if i == 0 {
        NodeTag::ColloidBoundary
    } else if i == n_r {
        NodeTag::FarField
    } else if j == 0 {
        NodeTag::NearAxisNorth
    } else if j == n_p - 1 {
        NodeTag::NearAxisSouth
    } else {
        NodeTag::Interior
    }
}

impl MeridianGrid {
    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    /// Number of radial node layers (`n_radial + 1`).
    pub fn n_r(&self) -> usize {
        self.radii.len()
    }

    /// Number of polar node rows.
    pub fn n_p(&self) -> usize {
        self.thetas.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.thetas.len() + j
    }

    /// Inverse of [`MeridianGrid::index`].
    #[inline]
    pub fn lattice(&self, idx: usize) -> (usize, usize) {
        (idx / self.thetas.len(), idx % self.thetas.len())
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn polar_step(&self) -> f64 {
        PI / self.thetas.len() as f64
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    /// Dual-cell moments of `ρ dρ dz`, one per node.
    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weights
    }

    /// `dz` weights of the colloid-boundary nodes, indexed by polar row.
    pub fn surface_weights(&self) -> &[f64] {
        &self.surface_weights
    }

    pub fn tags(&self) -> &[NodeTag] {
        &self.tags
    }

    pub fn tag(&self, idx: usize) -> NodeTag {
        self.tags[idx]
    }

    #[inline]
    pub(crate) fn radial_edge(&self, i: usize, j: usize) -> f64 {
        self.radial_edge[i * self.thetas.len() + j]
    }

    #[inline]
    pub(crate) fn polar_edge(&self, i: usize, j: usize) -> f64 {
        self.polar_edge[i * (self.thetas.len() - 1) + j]
    }

    /// Node indices of the colloid boundary, ordered by polar row (north to south).
    pub fn boundary_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_p()).map(move |j| self.index(0, j))
    }

    /// Node indices of one polar row, ordered from the colloid outward.
    pub fn row_indices(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_r()).map(move |i| self.index(i, j))
    }

    pub fn is_dirichlet(&self, idx: usize) -> bool {
        self.tags[idx] == NodeTag::FarField
    }

    /// Closed-form value of `∫ ρ dρ dz` over the truncated domain.
    pub fn exact_area_moment(&self) -> f64 {
        let r = self.cfg.outer_radius;
        (2.0 / 3.0) * (r * r * r - 1.0)
    }

    /// Midpoint quadrature of `f(ρ, z)` against `ρ dρ dz`.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.cell_weights).map(|(n, w)| w * f(n.rho, n.z)).sum()
    }

    /// Quadrature of `f(z)` against `dz` along the colloid arc.
    pub fn integrate_surface<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.thetas.iter().zip(&self.surface_weights).map(|(t, w)| w * f(t.cos())).sum()
    }

    /// Write `index,r,theta_hat,rho,z,tag`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,r,theta_hat,rho,z,tag")?;
        for (idx, (n, tag)) in self.nodes.iter().zip(&self.tags).enumerate() {
            writeln!(out, "{idx},{:.16e},{:.16e},{:.16e},{:.16e},{tag}", n.r, n.theta, n.rho, n.z)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_lattice() {
        let g = build_grid(GridConfig::new(2, 4, 2.0, 1.0)).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.radii(), &[1.0, 1.5, 2.0]);
        for (j, t) in g.thetas().iter().enumerate() {
            assert_relative_eq!(*t, (2 * j + 1) as f64 * PI / 8.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn geometric_grading() {
        let g = build_grid(GridConfig::new(2, 4, 3.0, 2.0)).unwrap();
        let r = g.radii();
        assert_relative_eq!(r[1], 1.0 + 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!((r[2] - r[1]) / (r[1] - r[0]), 2.0, epsilon = 1e-13);
        // Steps add up to the span.
        assert_relative_eq!((r[1] - r[0]) + (r[2] - r[1]), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(build_grid(GridConfig::new(2, 4, 1.0, 1.0)).is_err());
        assert!(build_grid(GridConfig::new(1, 4, 2.0, 1.0)).is_err());
        assert!(build_grid(GridConfig::new(2, 3, 2.0, 1.0)).is_err());
        assert!(build_grid(GridConfig::new(2, 4, 2.0, 0.9)).is_err());
        assert!(build_grid(GridConfig::new(2, 4, f64::NAN, 1.0)).is_err());
    }

    #[test]
    fn weights_reproduce_exact_moments() {
        for cfg in [GridConfig::new(2, 4, 2.0, 1.0), GridConfig::new(7, 13, 5.5, 1.3), GridConfig::default()] {
            let g = build_grid(cfg).unwrap();
            let total: f64 = g.cell_weights().iter().sum();
            assert_relative_eq!(total, g.exact_area_moment(), max_relative = 1e-10);
            let surf: f64 = g.surface_weights().iter().sum();
            assert_relative_eq!(surf, 2.0, max_relative = 1e-10);
            assert!(g.integrate_surface(|z| z).abs() < 1e-10);
        }
    }

    #[test]
    fn tags_on_small_lattice() {
        let g = build_grid(GridConfig::new(2, 4, 2.0, 1.0)).unwrap();
        let count = |t| g.tags().iter().filter(|&&x| x == t).count();
        assert_eq!(count(NodeTag::ColloidBoundary), 4);
        assert_eq!(count(NodeTag::FarField), 4);
        assert_eq!(g.tag(g.index(1, 0)), NodeTag::NearAxisNorth);
        assert_eq!(g.tag(g.index(1, 3)), NodeTag::NearAxisSouth);
        assert_eq!(g.tag(g.index(1, 1)), NodeTag::Interior);
        assert!(g.node(g.index(1, 0)).z > 0.0);
    }

    #[test]
    fn nodes_stay_off_axis() {
        let g = build_grid(GridConfig::new(8, 64, 4.0, 1.1)).unwrap();
        for n in g.nodes() {
            assert!(n.rho > 0.0 && n.r >= 1.0);
        }
        let first = g.node(g.index(3, 0));
        assert_relative_eq!(first.rho, first.r * (PI / 128.0).sin(), epsilon = 1e-15);
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        // Exact ∫ ρ² z² ρ dρ dz = ∫ r^6 sin³θ cos²θ dr dθ = (R^7 - 1)/7 · 4/15.
        let r_out: f64 = 3.0;
        let exact = (r_out.powi(7) - 1.0) / 7.0 * 4.0 / 15.0;
        let mut cfg = GridConfig::new(8, 16, r_out, 1.2);
        let mut errors = Vec::new();
        for _ in 0..4 {
            let g = build_grid(cfg).unwrap();
            errors.push((g.integrate(|rho, z| rho * rho * z * z) - exact).abs());
            cfg = cfg.refined();
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "observed order {order} from {errors:?}");
        }
    }

    #[test]
    fn matching_spacing_keeps_first_step() {
        let cfg = GridConfig::default();
        let big = cfg.with_outer_radius_matching_spacing(40.0);
        let rel = (big.first_radial_step() - cfg.first_radial_step()).abs() / cfg.first_radial_step();
        assert!(rel < 0.05, "{rel}");
        assert!(big.n_radial > cfg.n_radial);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = build_grid(GridConfig::new(2, 4, 2.0, 1.0)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,r,theta_hat,rho,z,tag");
        assert_eq!(lines.len(), 13);
        assert!(lines[1].ends_with("colloid_boundary"));
    }
}
