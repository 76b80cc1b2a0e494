//! Constrained descent for the discrete energy.
//!
//! Each step moves along the tangential gradient scaled by the Jacobi diagonal of the
//! quadratic terms and renormalizes every node back onto the unit sphere:
//! `u ← normalize(u - τ P_T D⁻¹ g)`. The far-field layer is pinned to `(0,1,0)`.
//! Steps are accepted only if the total energy does not increase.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBreakdown, EnergyModel, ModelParams, UnitField};
use crate::error::{Error, Result};
use crate::grid::MeridianGrid;
use crate::tensor::UVector;

/// Far-field value `(0,1,0)`, i.e. `L⁻¹` of `(0,0,1,0,0)`.
pub fn far_field_value() -> UVector {
    UVector::new(0.0, 1.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Constant step `initial_step`, halved until the energy decreases.
    Fixed,
    /// Barzilai–Borwein step from the last accepted secant pair, with backtracking.
    AdaptiveSecant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_iters: usize,
    /// Stop once the largest nodal tangential gradient falls below this.
    pub grad_tol: f64,
    pub step_rule: StepRule,
    pub initial_step: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Additional perturbed starts tried by [`solve_with_restarts`].
    pub restarts: usize,
    pub perturbation_scale: f64,
    pub seed: u64,
    pub continuation_nus: Option<Vec<f64>>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            grad_tol: 1e-6,
            step_rule: StepRule::AdaptiveSecant,
            initial_step: 1e-3,
            shrink: 0.5,
            max_backtracks: 30,
            restarts: 0,
            perturbation_scale: 0.0,
            seed: 0,
            continuation_nus: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::config("solver.max_iters", "must be at least 1"));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::config("solver.grad_tol", "must be positive"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::config("solver.initial_step", "must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::config("solver.shrink", "must lie in (0, 1)"));
        }
        if !(self.perturbation_scale >= 0.0 && self.perturbation_scale.is_finite()) {
            return Err(Error::config("solver.perturbation_scale", "must be non-negative"));
        }
        if let Some(nus) = &self.continuation_nus {
            if nus.is_empty() {
                return Err(Error::config("solver.continuation_nus", "must not be empty"));
            }
            if nus.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("solver.continuation_nus", "must be strictly ascending"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// No energy-decreasing step could be found within the backtracking budget.
    Stagnated,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: UnitField,
    pub breakdown: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Largest nodal tangential gradient at the returned field.
    pub grad_norm: f64,
    /// Total energy at the start and after every accepted step.
    pub energy_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// `(sin η, cos η, 0)` with `η = π(R_out - r)/(R_out - 1)`.
    MeridianRotation,
    /// Meridian rotation plus seeded tangential noise of size `perturbation_scale`.
    Perturbed,
    /// A previously saved field.
    FromCheckpoint(UnitField),
}

fn meridian_rotation(grid: &MeridianGrid) -> UnitField {
    let r_out = grid.config().outer_radius;
    UnitField::from_fn(grid, |idx| {
        if grid.is_dirichlet(idx) {
            return far_field_value();
        }
        let eta = PI * (r_out - grid.node(idx).r) / (r_out - 1.0);
        let (s, c) = eta.sin_cos();
        UVector::new(s, c, 0.0)
    })
}

/// Add seeded tangential Gaussian noise of size `scale` and renormalize;
/// the Dirichlet layer is left pinned.
pub fn perturb(field: &UnitField, grid: &MeridianGrid, scale: f64, seed: u64) -> UnitField {
    if scale == 0.0 {
        return field.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = field
        .values
        .iter()
        .enumerate()
        .map(|(idx, u)| {
            let t = UVector::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            if grid.is_dirichlet(idx) {
                return far_field_value();
            }
            (u + scale * (t - t.dot(u) * u)).normalize()
        })
        .collect();
    UnitField { values }
}

pub fn initial_field(grid: &MeridianGrid, mode: &InitMode, cfg: &SolveConfig) -> Result<UnitField> {
    match mode {
        InitMode::MeridianRotation => Ok(meridian_rotation(grid)),
        InitMode::Perturbed => Ok(perturb(&meridian_rotation(grid), grid, cfg.perturbation_scale, cfg.seed)),
        InitMode::FromCheckpoint(field) => {
            field.check_len(grid)?;
            let mut f = field.clone();
            pin_far_field(&mut f, grid);
            Ok(f)
        }
    }
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    /// Parses the two generated modes; checkpoints are loaded by the caller.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meridian_rotation" => Ok(InitMode::MeridianRotation),
            "perturbed" => Ok(InitMode::Perturbed),
            other => Err(Error::config("solver.init", format!("unknown mode `{other}`"))),
        }
    }
}

fn pin_far_field(field: &mut UnitField, grid: &MeridianGrid) {
    for (idx, v) in field.values.iter_mut().enumerate() {
        if grid.is_dirichlet(idx) {
            *v = far_field_value();
        }
    }
}

fn max_node_norm(g: &[UVector]) -> f64 {
    g.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Minimize from `u0`.
pub fn solve(u0: &UnitField, model: &EnergyModel<'_>, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let grid = model.grid();
    u0.check_len(grid)?;
    let mut u = u0.clone();
    u.normalize();
    pin_far_field(&mut u, grid);

    let diag = model.diagonal();
    let mut energy = model.energy(&u)?;
    if !energy.total.is_finite() {
        return Err(Error::NonFiniteEnergy { iteration: 0 });
    }
    let mut history = vec![energy.total];
    let mut grad = model.gradient(&u)?;
    let mut tau = cfg.initial_step;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;

    loop {
        let gnorm = max_node_norm(&grad);
        if gnorm <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }

        // Preconditioned tangential direction.
        let dir: Vec<UVector> = grad
            .iter()
            .zip(&diag)
            .zip(&u.values)
            .map(|((g, d), v)| {
                let p = g.component_div(d);
                p - p.dot(v) * v
            })
            .collect();

        let mut step = if cfg.step_rule == StepRule::Fixed { cfg.initial_step } else { tau };
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut trial = u.clone();
            for (idx, (v, d)) in trial.values.iter_mut().zip(&dir).enumerate() {
                if !grid.is_dirichlet(idx) {
                    *v = (*v - step * d).normalize();
                }
            }
            let e = model.energy(&trial)?;
            if !e.total.is_finite() {
                return Err(Error::NonFiniteEnergy { iteration: iterations + 1 });
            }
            if e.total <= energy.total {
                accepted = Some((trial, e));
                break;
            }
            step *= cfg.shrink;
        }
        let Some((next, next_energy)) = accepted else {
            stop = StopReason::Stagnated;
            break;
        };
        iterations += 1;
        let next_grad = model.gradient(&next)?;

        if cfg.step_rule == StepRule::AdaptiveSecant {
            let mut sds = 0.0;
            let mut sy = 0.0;
            for (((a, b), (ga, gb)), d) in next.values.iter().zip(&u.values).zip(next_grad.iter().zip(&grad)).zip(&diag)
            {
                let s = a - b;
                sds += s.component_mul(&s).dot(d);
                sy += s.dot(&(ga - gb));
            }
            tau = if sy > 0.0 && sds > 0.0 { sds / sy } else { 2.0 * step };
        }

        u = next;
        energy = next_energy;
        grad = next_grad;
        history.push(energy.total);
    }

    let grad_norm = max_node_norm(&grad);
    Ok(SolveResult {
        field: u,
        breakdown: energy,
        iterations,
        converged: stop == StopReason::GradientTolerance,
        stop_reason: stop,
        grad_norm,
        energy_history: history,
    })
}

/// The unperturbed solve followed by `cfg.restarts` solves from seeded perturbations of
/// `u0` (seeds `cfg.seed + k`). All results are returned; none is preferred here.
pub fn solve_with_restarts(u0: &UnitField, model: &EnergyModel<'_>, cfg: &SolveConfig) -> Result<Vec<SolveResult>> {
    let mut out = vec![solve(u0, model, cfg)?];
    for k in 1..=cfg.restarts {
        let start = perturb(u0, model.grid(), cfg.perturbation_scale, cfg.seed.wrapping_add(k as u64));
        out.push(solve(&start, model, cfg)?);
    }
    Ok(out)
}

/// Index of the lowest-energy result.
pub fn best_result(results: &[SolveResult]) -> Option<usize> {
    (0..results.len()).min_by(|&a, &b| results[a].breakdown.total.total_cmp(&results[b].breakdown.total))
}

/// Sweep `ν` over `cfg.continuation_nus`, warm-starting each solve from the previous one.
pub fn continuation(u0: &UnitField, model: &EnergyModel<'_>, cfg: &SolveConfig) -> Result<Vec<SolveResult>> {
    cfg.validate()?;
    let nus = cfg
        .continuation_nus
        .as_ref()
        .ok_or_else(|| Error::config("solver.continuation_nus", "must be set for a continuation run"))?;
    let mut results: Vec<SolveResult> = Vec::with_capacity(nus.len());
    for &nu in nus {
        let params = ModelParams { nu, ..model.params() };
        let stage = model.with_params(params).map_err(|e| Error::Continuation { nu, source: Box::new(e) })?;
        let start = results.last().map_or(u0, |r| &r.field);
        let res = solve(start, &stage, cfg).map_err(|e| Error::Continuation { nu, source: Box::new(e) })?;
        results.push(res);
    }
    Ok(results)
}

/// Bilinear interpolation of a field onto another lattice in `(r, θ̂)`, followed by
/// renormalization. Rows beyond the coarse polar range take the nearest row.
pub fn prolong(field: &UnitField, from: &MeridianGrid, to: &MeridianGrid) -> Result<UnitField> {
    field.check_len(from)?;
    let mut out = UnitField::from_fn(to, |idx| {
        let n = to.node(idx);
        sample_bilinear(field, from, n.r, n.theta)
    });
    out.normalize();
    pin_far_field(&mut out, to);
    Ok(out)
}

/// Bilinear sample of `field` at `(r, θ̂)` on `grid`, clamped to the lattice.
pub fn sample_bilinear(field: &UnitField, grid: &MeridianGrid, r: f64, theta: f64) -> UVector {
    let (i0, fr) = bracket(grid.radii(), r);
    let (j0, ft) = bracket(grid.thetas(), theta);
    let at = |i: usize, j: usize| field.values[grid.index(i, j)];
    let lo = at(i0, j0) * (1.0 - ft) + at(i0, j0 + 1) * ft;
    let hi = at(i0 + 1, j0) * (1.0 - ft) + at(i0 + 1, j0 + 1) * ft;
    lo * (1.0 - fr) + hi * fr
}

/// Lower bracket index and fraction of `x` in the sorted nodes `xs`, clamped.
fn bracket(xs: &[f64], x: f64) -> (usize, f64) {
    let n = xs.len();
    if x <= xs[0] {
        return (0, 0.0);
    }
    if x >= xs[n - 1] {
        return (n - 2, 1.0);
    }
    let k = xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
    (k, (x - xs[k]) / (xs[k + 1] - xs[k]))
}
