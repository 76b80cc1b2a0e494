//! Post-processing of converged fields: pole values, axis singularity census,
//! director behaviour at the poles, near-axis expansions, energy densities and
//! far-field decay.
//!
//! The north near-axis row is `j = 0`, the south one `j = n_polar - 1`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::{nodal_dirichlet, UnitField};
use crate::error::{Error, Result};
use crate::grid::MeridianGrid;
use crate::minimizer::{far_field_value, sample_bilinear};
use crate::tensor::{biaxiality_b, classify_phase, director, Phase, UVector, DEFAULT_GAP_TOL};
use crate::util::{least_squares_slope, median};

/// Predicted value at both poles.
pub fn predicted_pole_value() -> UVector {
    UVector::new(0.0, -1.0, 0.0)
}

pub const POLE_TOL: f64 = 1e-2;
pub const DEGENERATE_TOL: f64 = 1e-3;
/// Guard on `|u₂|` used by the census to ignore transition-layer interiors.
const CENSUS_GUARD: f64 = 0.5;
/// Longest run of guarded-out nodes tolerated before a layer counts as unresolved.
const MAX_PLATEAU: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    North,
    South,
}

impl Side {
    pub fn axis_row(self, grid: &MeridianGrid) -> usize {
        match self {
            Side::North => 0,
            Side::South => grid.n_p() - 1,
        }
    }

    /// Polar rows of one hemisphere ordered from the equator toward the pole.
    fn rows_toward_pole(self, grid: &MeridianGrid) -> Vec<usize> {
        let n_p = grid.n_p();
        match self {
            Side::North => (0..n_p.div_ceil(2)).rev().collect(),
            Side::South => (n_p / 2..n_p).collect(),
        }
    }

    /// The `k`-th row counted from the axis on this side.
    fn row_from_axis(self, grid: &MeridianGrid, k: usize) -> usize {
        match self {
            Side::North => k,
            Side::South => grid.n_p() - 1 - k,
        }
    }

    /// Center `(ρ, z)` of the pole.
    pub fn pole(self) -> (f64, f64) {
        match self {
            Side::North => (0.0, 1.0),
            Side::South => (0.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub fn of(count: usize) -> Self {
        if count % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisJump {
    /// Linearly interpolated zero of `u₂` between the bracketing guarded nodes.
    pub r: f64,
    pub u2_before: f64,
    pub u2_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisCensus {
    pub side: Side,
    pub jumps: Vec<AxisJump>,
    pub parity: Parity,
    /// Set when more than three consecutive nodes have `|u₂| ≤ 0.5`.
    pub unresolved_layer: bool,
}

/// Sign changes of `u₂` along one near-axis row.
pub fn census_row(field: &UnitField, grid: &MeridianGrid, side: Side) -> Result<AxisCensus> {
    field.check_len(grid)?;
    let j = side.axis_row(grid);
    let mut jumps = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    let mut plateau = 0;
    let mut unresolved = false;
    for i in 0..grid.n_r() {
        let r = grid.radii()[i];
        let u2 = field.values[grid.index(i, j)][1];
        if u2.abs() <= CENSUS_GUARD {
            plateau += 1;
            unresolved |= plateau > MAX_PLATEAU;
            continue;
        }
        plateau = 0;
        if let Some((r0, v0)) = last {
            if v0.signum() != u2.signum() {
                let r_jump = r0 + (r - r0) * v0 / (v0 - u2);
                jumps.push(AxisJump { r: r_jump, u2_before: v0, u2_after: u2 });
            }
        }
        last = Some((r, u2));
    }
    Ok(AxisCensus { side, parity: Parity::of(jumps.len()), jumps, unresolved_layer: unresolved })
}

/// Census of both near-axis rows, `(north, south)`.
pub fn axis_census(field: &UnitField, grid: &MeridianGrid) -> Result<(AxisCensus, AxisCensus)> {
    Ok((census_row(field, grid, Side::North)?, census_row(field, grid, Side::South)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub rho: f64,
    pub z: f64,
    /// `|d - e_ρ|` with the sign convention of [`director`].
    pub distance: f64,
    pub b: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleReport {
    pub side: Side,
    /// Field at the colloid-boundary node nearest the pole.
    pub pole_value: [f64; 3],
    /// `|pole_value - (0,-1,0)|`.
    pub deviation: f64,
    pub matches_prediction: bool,
    /// Colloid-boundary row from the equator toward the pole.
    pub director_trace: Vec<TracePoint>,
    /// Whether `|d - e_ρ|` strictly decreases over the last four trace points.
    pub trace_decreasing_near_pole: bool,
}

pub fn pole_analysis(field: &UnitField, grid: &MeridianGrid, side: Side, tol: f64) -> Result<PoleReport> {
    field.check_len(grid)?;
    let pole = field.values[grid.index(0, side.axis_row(grid))];
    let deviation = (pole - predicted_pole_value()).norm();
    let director_trace: Vec<TracePoint> = side
        .rows_toward_pole(grid)
        .into_iter()
        .map(|j| {
            let idx = grid.index(0, j);
            let u = field.values[idx];
            let d = director(&u, tol);
            let n = grid.node(idx);
            TracePoint {
                rho: n.rho,
                z: n.z,
                distance: d.distance_to_e_rho(),
                b: biaxiality_b(&u),
                degenerate: d.degenerate,
            }
        })
        .collect();
    let tail = &director_trace[director_trace.len().saturating_sub(4)..];
    let decreasing = tail.len() == 4 && tail.windows(2).all(|w| w[1].distance < w[0].distance);
    Ok(PoleReport {
        side,
        pole_value: pole.into(),
        deviation,
        matches_prediction: deviation < POLE_TOL,
        director_trace,
        trace_decreasing_near_pole: decreasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Fitted,
    /// Every component is constant to rounding.
    Flat,
    Skipped,
}

/// Log-log fits across the four columns nearest the axis at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisFit {
    pub r: f64,
    pub z: f64,
    /// Slopes of `|u₁|`, `|u₂ - s|`, `|u₃|` against `ρ`; `None` when the component is flat.
    pub slope_u1: Option<f64>,
    pub slope_u2: Option<f64>,
    pub slope_u3: Option<f64>,
    /// Least-squares `c` in `1 - s·u₂ ≈ c ρ²`.
    pub c_u2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub side: Side,
    pub status: FitStatus,
    /// Axis value `s = sign(u₂)` on the regular segment.
    pub axis_sign: f64,
    pub fits: Vec<AxisFit>,
    pub median_slope_u2: Option<f64>,
    pub notice: Option<String>,
}

const FLAT: f64 = 1e-14;
const FIT_COLUMNS: usize = 4;

fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|p| p.1 < FLAT) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    Some(least_squares_slope(&logs))
}

/// Fit the leading powers of `u` in `ρ` on the regular axis segment between the
/// colloid and the first jump.
pub fn near_axis_expansion_check(field: &UnitField, grid: &MeridianGrid, side: Side) -> Result<ExpansionReport> {
    field.check_len(grid)?;
    let axis = side.axis_row(grid);
    let s = field.values[grid.index(0, axis)][1].signum();
    let segment: Vec<usize> = (0..grid.n_r() - 1)
        .take_while(|&i| {
            let u2 = field.values[grid.index(i, axis)][1];
            u2.signum() == s && u2.abs() > CENSUS_GUARD
        })
        .collect();
    let skipped = |notice: String| ExpansionReport {
        side,
        status: FitStatus::Skipped,
        axis_sign: s,
        fits: Vec::new(),
        median_slope_u2: None,
        notice: Some(notice),
    };
    if segment.len() < 3 {
        return Ok(skipped(format!("regular segment has {} nodes; need at least 3", segment.len())));
    }
    if grid.n_p() < 2 * FIT_COLUMNS {
        return Ok(skipped(format!("need at least {} polar rows", 2 * FIT_COLUMNS)));
    }
    let mut fits = Vec::with_capacity(segment.len());
    for &i in &segment {
        let cols: Vec<(f64, UVector)> = (0..FIT_COLUMNS)
            .map(|k| {
                let idx = grid.index(i, side.row_from_axis(grid, k));
                (grid.node(idx).rho, field.values[idx])
            })
            .collect();
        let comp = |f: &dyn Fn(&UVector) -> f64| cols.iter().map(|(rho, u)| (*rho, f(u))).collect::<Vec<_>>();
        let u1 = comp(&|u| u[0].abs());
        let u2 = comp(&|u| 1.0 - s * u[1]);
        let u3 = comp(&|u| u[2].abs());
        let num: f64 = u2.iter().map(|(rho, y)| y * rho * rho).sum();
        let den: f64 = u2.iter().map(|(rho, _)| rho.powi(4)).sum();
        let axis_node = grid.node(grid.index(i, axis));
        fits.push(AxisFit {
            r: axis_node.r,
            z: axis_node.z,
            slope_u1: loglog_slope(&u1),
            slope_u2: loglog_slope(&u2),
            slope_u3: loglog_slope(&u3),
            c_u2: num / den,
        });
    }
    let u2_slopes: Vec<f64> = fits.iter().filter_map(|f| f.slope_u2).collect();
    let all_flat = fits.iter().all(|f| f.slope_u1.is_none() && f.slope_u2.is_none() && f.slope_u3.is_none());
    Ok(ExpansionReport {
        side,
        status: if all_flat { FitStatus::Flat } else { FitStatus::Fitted },
        axis_sign: s,
        median_slope_u2: (!u2_slopes.is_empty()).then(|| median(&u2_slopes)),
        fits,
        notice: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// `Θ(r) = r⁻¹ ∫_{B_r ∩ Ω} [|Du|² + ρ⁻²(4u₁² + u₃²)] ρ dρ dz` about an axis point.
    HalfBall,
    /// `Ξ(r) = ∫_{D_r} [|Du|² + ρ⁻²(4u₁² + u₃²)] dρ dz` about an off-axis point.
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub radius: f64,
    pub value: f64,
    /// Number of dual cells whose node lies inside the ball or disk.
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProbe {
    pub kind: ProbeKind,
    pub center: (f64, f64),
    pub samples: Vec<DensitySample>,
    pub notices: Vec<String>,
}

/// Scaled energy densities about `center = (ρ, z)`; the `2π` azimuthal factor is
/// omitted. A cell contributes when its node lies inside the ball or disk.
/// Radii reaching the far-field layer (or the axis, for `Ξ`) are dropped with a notice.
pub fn density_probe(
    field: &UnitField,
    grid: &MeridianGrid,
    center: (f64, f64),
    radii: &[f64],
) -> Result<DensityProbe> {
    let nodal = nodal_dirichlet(grid, field)?;
    let (rc, zc) = center;
    if !(rc >= 0.0 && rc.is_finite() && zc.is_finite()) {
        return Err(Error::config("center", "must be a finite point with ρ ≥ 0"));
    }
    let kind = if rc == 0.0 { ProbeKind::HalfBall } else { ProbeKind::Planar };
    let mut limit = grid.config().outer_radius - rc.hypot(zc);
    if kind == ProbeKind::Planar {
        limit = limit.min(rc);
    }
    let mut samples = Vec::with_capacity(radii.len());
    let mut notices = Vec::new();
    for &radius in radii {
        if !(radius > 0.0) || radius >= limit {
            notices.push(format!("radius {radius} exceeds the admissible {limit:.6}; dropped"));
            continue;
        }
        let mut sum = 0.0;
        let mut cells = 0;
        for (n, e) in grid.nodes().iter().zip(&nodal) {
            if (n.rho - rc).hypot(n.z - zc) < radius {
                sum += match kind {
                    ProbeKind::HalfBall => *e,
                    ProbeKind::Planar => e / n.rho,
                };
                cells += 1;
            }
        }
        let value = match kind {
            ProbeKind::HalfBall => sum / radius,
            ProbeKind::Planar => sum,
        };
        samples.push(DensitySample { radius, value, cells });
    }
    Ok(DensityProbe { kind, center, samples, notices })
}

/// Smallest radius at which a ball about a pole still contains a few cells:
/// twice the larger of the first radial step and the polar step.
pub fn grid_floor(grid: &MeridianGrid) -> f64 {
    2.0 * grid.config().first_radial_step().max(PI / grid.n_p() as f64)
}

/// `count` geometrically spaced radii from `start` down to `floor`.
pub fn radii_down_to(start: f64, floor: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![start];
    }
    let q = (floor / start).powf(1.0 / (count - 1) as f64);
    (0..count).map(|k| if k + 1 == count { floor } else { start * q.powi(k as i32) }).collect()
}

/// `max |u - (0,1,0)|` over nodes with `r ≥ R_out/2`, excluding the pinned layer.
pub fn far_field_check(field: &UnitField, grid: &MeridianGrid) -> Result<f64> {
    field.check_len(grid)?;
    let half = 0.5 * grid.config().outer_radius;
    Ok(grid
        .nodes()
        .iter()
        .zip(&field.values)
        .enumerate()
        .filter(|(idx, (n, _))| n.r >= half && !grid.is_dirichlet(*idx))
        .map(|(_, (_, u))| (u - far_field_value()).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BFieldStats {
    pub min: f64,
    pub min_off_axis: f64,
    /// Nodes with `b < -1/2 + 10⁻³` on the two near-axis rows.
    pub near_floor_on_axis: usize,
    /// Nodes with `b < -1/2 + 10⁻³` elsewhere.
    pub near_floor_off_axis: usize,
}

pub const B_FLOOR: f64 = -0.5;
pub const B_FLOOR_BAND: f64 = 1e-3;

fn is_axis_row(grid: &MeridianGrid, j: usize) -> bool {
    j == 0 || j + 1 == grid.n_p()
}

pub fn b_field_stats(field: &UnitField, grid: &MeridianGrid) -> Result<BFieldStats> {
    field.check_len(grid)?;
    let mut s =
        BFieldStats { min: f64::INFINITY, min_off_axis: f64::INFINITY, near_floor_on_axis: 0, near_floor_off_axis: 0 };
    for (idx, u) in field.values.iter().enumerate() {
        let b = biaxiality_b(u);
        let on_axis = is_axis_row(grid, grid.lattice(idx).1);
        s.min = s.min.min(b);
        let near = b < B_FLOOR + B_FLOOR_BAND;
        if on_axis {
            s.near_floor_on_axis += near as usize;
        } else {
            s.min_off_axis = s.min_off_axis.min(b);
            s.near_floor_off_axis += near as usize;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerateLocus {
    pub degenerate_nodes: usize,
    /// Degenerate nodes with `ρ` more than three times the near-axis `ρ` at their radius.
    pub far_from_axis: usize,
    pub fraction_far_from_axis: f64,
}

pub fn degenerate_locus(field: &UnitField, grid: &MeridianGrid, tol: f64) -> Result<DegenerateLocus> {
    field.check_len(grid)?;
    let first_row = grid.thetas()[0].sin();
    let mut total = 0;
    let mut far = 0;
    for (idx, u) in field.values.iter().enumerate() {
        if classify_phase(u, tol) == Phase::DegenerateUniaxial {
            total += 1;
            let n = grid.node(idx);
            far += (n.rho > 3.0 * n.r * first_row) as usize;
        }
    }
    let fraction = if total == 0 { 0.0 } else { far as f64 / total as f64 };
    Ok(DegenerateLocus { degenerate_nodes: total, far_from_axis: far, fraction_far_from_axis: fraction })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub pole_value_north: [f64; 3],
    pub pole_value_south: [f64; 3],
    pub axis_jumps_north: Vec<AxisJump>,
    pub axis_jumps_south: Vec<AxisJump>,
    pub jump_count_parity_north: Parity,
    pub jump_count_parity_south: Parity,
    pub unresolved_layer_north: bool,
    pub unresolved_layer_south: bool,
    pub pole_north: PoleReport,
    pub pole_south: PoleReport,
    pub expansion_north: ExpansionReport,
    pub expansion_south: ExpansionReport,
    pub far_field_deviation: f64,
    pub b_field: BFieldStats,
    pub b_field_min_off_axis: f64,
    pub degenerate_locus: DegenerateLocus,
    /// Observations that disagree with the predicted defect structure.
    pub flags: Vec<String>,
}

pub fn analyze(field: &UnitField, grid: &MeridianGrid) -> Result<DefectReport> {
    let (north, south) = axis_census(field, grid)?;
    let pole_north = pole_analysis(field, grid, Side::North, DEFAULT_GAP_TOL)?;
    let pole_south = pole_analysis(field, grid, Side::South, DEFAULT_GAP_TOL)?;
    let b_field = b_field_stats(field, grid)?;
    let mut flags = Vec::new();
    for p in [&pole_north, &pole_south] {
        if !p.matches_prediction {
            flags.push(format!("{:?} pole value differs from (0,-1,0) by {:.3e}", p.side, p.deviation).to_lowercase());
        }
    }
    for c in [&north, &south] {
        if c.parity == Parity::Even {
            flags.push(format!("{:?} axis has an even number of jumps ({})", c.side, c.jumps.len()).to_lowercase());
        }
        if c.unresolved_layer {
            flags.push(format!("{:?} axis: unresolved layer, refine grid", c.side).to_lowercase());
        }
    }
    if b_field.min < B_FLOOR - 1e-10 {
        flags.push(format!("b drops below -1/2: {:.3e}", b_field.min));
    }
    Ok(DefectReport {
        pole_value_north: pole_north.pole_value,
        pole_value_south: pole_south.pole_value,
        axis_jumps_north: north.jumps,
        axis_jumps_south: south.jumps,
        jump_count_parity_north: north.parity,
        jump_count_parity_south: south.parity,
        unresolved_layer_north: north.unresolved_layer,
        unresolved_layer_south: south.unresolved_layer,
        pole_north,
        pole_south,
        expansion_north: near_axis_expansion_check(field, grid, Side::North)?,
        expansion_south: near_axis_expansion_check(field, grid, Side::South)?,
        far_field_deviation: far_field_check(field, grid)?,
        b_field_min_off_axis: b_field.min_off_axis,
        b_field,
        degenerate_locus: degenerate_locus(field, grid, DEGENERATE_TOL)?,
        flags,
    })
}

/// Director sampled on a uniform `(ρ, z)` raster over `[0, extent] × [-extent, extent]`,
/// restricted to `1 ≤ r ≤ R_out`. Columns: `rho,z,d_rho,d_phi,d_z,degenerate,b`.
pub fn write_director_raster<W: Write>(
    field: &UnitField,
    grid: &MeridianGrid,
    extent: f64,
    points: usize,
    mut out: W,
) -> Result<()> {
    field.check_len(grid)?;
    if points < 2 || !(extent > 0.0) {
        return Err(Error::config("raster", "need at least 2 points and a positive extent"));
    }
    writeln!(out, "rho,z,d_rho,d_phi,d_z,degenerate,b")?;
    let r_out = grid.config().outer_radius;
    for a in 0..points {
        let rho = extent * a as f64 / (points - 1) as f64;
        for k in 0..(2 * points - 1) {
            let z = -extent + extent * k as f64 / (points - 1) as f64;
            let r = rho.hypot(z);
            if !(1.0..=r_out).contains(&r) {
                continue;
            }
            let u = sample_bilinear(field, grid, r, rho.atan2(z)).normalize();
            let d = director(&u, DEFAULT_GAP_TOL);
            writeln!(
                out,
                "{rho:.6},{z:.6},{:.9},{:.9},{:.9},{},{:.9}",
                d.d_rho,
                d.d_phi,
                d.d_z,
                d.degenerate as u8,
                biaxiality_b(&u)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridConfig};
    use approx::assert_relative_eq;

    fn grid() -> MeridianGrid {
        build_grid(GridConfig::new(40, 64, 6.0, 1.0)).unwrap()
    }

    fn axis_step(g: &MeridianGrid, r_switch: &[f64]) -> UnitField {
        UnitField::from_fn(g, |idx| {
            let n = g.node(idx);
            let flips = r_switch.iter().filter(|&&s| n.r > s).count();
            UVector::new(0.0, if flips % 2 == 0 { -1.0 } else { 1.0 }, 0.0)
        })
    }

    #[test]
    fn single_jump_is_odd() {
        let g = grid();
        let f = axis_step(&g, &[2.0]);
        let (n, s) = axis_census(&f, &g).unwrap();
        for c in [n, s] {
            assert_eq!(c.parity, Parity::Odd);
            assert_eq!(c.jumps.len(), 1);
            assert!((c.jumps[0].r - 2.0).abs() < 6.0 / 40.0);
            assert!(!c.unresolved_layer);
        }
    }

    #[test]
    fn two_jumps_are_even() {
        let g = grid();
        let f = axis_step(&g, &[2.0, 4.0]);
        let (n, _) = axis_census(&f, &g).unwrap();
        assert_eq!(n.parity, Parity::Even);
        assert_eq!(n.jumps.len(), 2);
        assert!(n.jumps.iter().all(|j| j.r > 1.0 && j.r < 6.0));
    }

    #[test]
    fn wide_plateau_is_flagged() {
        let g = grid();
        let f = UnitField::from_fn(&g, |idx| {
            let r = g.node(idx).r;
            let u2: f64 = if r < 2.0 {
                -1.0
            } else if r < 3.5 {
                0.0
            } else {
                1.0
            };
            UVector::new((1.0 - u2 * u2).sqrt(), u2, 0.0)
        });
        let (n, _) = axis_census(&f, &g).unwrap();
        assert!(n.unresolved_layer);
        assert_eq!(n.parity, Parity::Odd);
    }

    #[test]
    fn pole_analysis_on_constant_fields() {
        let g = grid();
        let down = UnitField::constant(&g, predicted_pole_value());
        for side in [Side::North, Side::South] {
            let p = pole_analysis(&down, &g, side, DEFAULT_GAP_TOL).unwrap();
            assert!(p.matches_prediction);
            assert!(p.director_trace.iter().all(|t| t.distance < 1e-12));
            assert_eq!(p.director_trace.len(), 32);
            assert!(p.director_trace.windows(2).all(|w| w[1].rho < w[0].rho));
        }
        let up = UnitField::constant(&g, far_field_value());
        let report = analyze(&up, &g).unwrap();
        assert!(!report.pole_north.matches_prediction);
        assert_relative_eq!(report.pole_north.deviation, 2.0);
        assert!(report.flags.iter().any(|f| f.contains("north pole")));
        assert_eq!(report.jump_count_parity_north, Parity::Even);
    }

    #[test]
    fn expansion_slopes_of_synthetic_field() {
        let g = build_grid(GridConfig::new(20, 128, 3.0, 1.0)).unwrap();
        let f = UnitField::from_fn(&g, |idx| {
            let n = g.node(idx);
            let rho = n.rho * 0.1;
            let s = if n.z >= 0.0 { 1.0 } else { -1.0 };
            UVector::new(rho * rho, -(1.0 - rho.powi(4) - rho * rho).sqrt(), s * rho)
        });
        for side in [Side::North, Side::South] {
            let rep = near_axis_expansion_check(&f, &g, side).unwrap();
            assert_eq!(rep.status, FitStatus::Fitted);
            assert_eq!(rep.axis_sign, -1.0);
            for fit in &rep.fits {
                assert!((fit.slope_u1.unwrap() - 2.0).abs() < 1e-6);
                assert!((fit.slope_u2.unwrap() - 2.0).abs() < 1e-3);
                assert!((fit.slope_u3.unwrap() - 1.0).abs() < 1e-9);
                assert!(fit.c_u2 > 0.0);
            }
        }
    }

    #[test]
    fn expansion_flat_and_skipped() {
        let g = grid();
        let rep = near_axis_expansion_check(&UnitField::constant(&g, predicted_pole_value()), &g, Side::North).unwrap();
        assert_eq!(rep.status, FitStatus::Flat);
        let short = axis_step(&g, &[1.1]);
        let rep = near_axis_expansion_check(&short, &g, Side::North).unwrap();
        assert_eq!(rep.status, FitStatus::Skipped);
        assert!(rep.notice.is_some());
    }

    #[test]
    fn densities_vanish_for_constant_field() {
        let g = grid();
        let f = UnitField::constant(&g, predicted_pole_value());
        let theta = density_probe(&f, &g, (0.0, 1.0), &[0.2, 0.5, 1.0]).unwrap();
        assert_eq!(theta.kind, ProbeKind::HalfBall);
        assert!(theta.samples.iter().all(|s| s.value == 0.0 && s.cells > 0));
        let xi = density_probe(&f, &g, (1.5, 1.5), &[0.2, 0.5, 3.0]).unwrap();
        assert_eq!(xi.kind, ProbeKind::Planar);
        assert_eq!(xi.samples.len(), 2);
        assert_eq!(xi.notices.len(), 1);
    }

    #[test]
    fn half_ball_density_scales_quadratically_for_smooth_fields() {
        // u = (0, cos ρ, sin ρ) is smooth as a 3D map and has a nearly constant density
        // near the pole, so Θ(r) ≈ c·V(r)/r with V the volume of the ball outside the
        // colloid: V(r)/π = (2/3)r³ + r⁴/4.
        let g = build_grid(GridConfig::new(200, 400, 2.0, 1.0)).unwrap();
        let f = UnitField::from_fn(&g, |idx| {
            let rho = g.node(idx).rho;
            UVector::new(0.0, rho.cos(), rho.sin())
        });
        let probe = density_probe(&f, &g, (0.0, 1.0), &[0.2, 0.1]).unwrap();
        let ratio = probe.samples[1].value / probe.samples[0].value;
        let v = |r: f64| (2.0 / 3.0 * r.powi(3) + r.powi(4) / 4.0) / r;
        assert!((ratio - v(0.1) / v(0.2)).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn far_field_deviation() {
        let g = build_grid(GridConfig::new(40, 16, 20.0, 1.0)).unwrap();
        assert_eq!(far_field_check(&UnitField::constant(&g, far_field_value()), &g).unwrap(), 0.0);
        let f = crate::minimizer::initial_field(
            &g,
            &crate::minimizer::InitMode::MeridianRotation,
            &crate::minimizer::SolveConfig::default(),
        )
        .unwrap();
        // The largest deviation sits at the smallest radius with r ≥ 10.
        let r = *g.radii().iter().find(|&&r| r >= 10.0).unwrap();
        let eta = PI * (20.0 - r) / 19.0;
        assert_relative_eq!(far_field_check(&f, &g).unwrap(), 2.0 * (eta / 2.0).sin(), epsilon = 1e-12);
    }

    #[test]
    fn b_stats_and_degenerate_locus() {
        let g = grid();
        let f = axis_step(&g, &[2.0]);
        let s = b_field_stats(&f, &g).unwrap();
        assert_relative_eq!(s.min, -0.5);
        assert!(s.near_floor_off_axis > 0);
        let loc = degenerate_locus(&f, &g, DEGENERATE_TOL).unwrap();
        assert!(loc.degenerate_nodes > 0);
        assert!(loc.fraction_far_from_axis > 0.5);
        let up = UnitField::constant(&g, far_field_value());
        assert_eq!(degenerate_locus(&up, &g, DEGENERATE_TOL).unwrap().degenerate_nodes, 0);
    }

    #[test]
    fn raster_skips_colloid_interior() {
        let g = grid();
        let f = UnitField::constant(&g, predicted_pole_value());
        let mut buf = Vec::new();
        write_director_raster(&f, &g, 2.0, 11, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert!(!rows.is_empty());
        for row in rows {
            let c: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
            assert!(c[0].hypot(c[1]) >= 1.0);
            assert_relative_eq!(c[2], 1.0, epsilon = 1e-9);
        }
    }
}
