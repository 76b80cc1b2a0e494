//! Tangent-map ODE on the polar angle
//!
//! `-(sin θ v′)′ + (1/sin θ)(4v₁, 0, v₃) = {|v′|² sin θ + (4v₁² + v₃²)/sin θ} v`, `|v| = 1`,
//!
//! with first integral `C_e = |v′|² sin²θ - (4v₁² + v₃²)`. Regular solutions start from
//! the axis with `v₁ ~ aθ²`, `v₃ ~ bθ`; the natural boundary condition at `θ = π/2`
//! requires `v₁ = v₃ = 0` there.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector6;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::UVector;

type State = Vector6<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub theta: f64,
    pub v: [f64; 3],
    pub v_prime: [f64; 3],
}

impl OdeState {
    fn new(theta: f64, y: &State) -> Self {
        Self { theta, v: [y[0], y[1], y[2]], v_prime: [y[3], y[4], y[5]] }
    }
}

pub fn conserved(theta: f64, v: &UVector, vp: &UVector) -> f64 {
    let s = theta.sin();
    vp.norm_squared() * s * s - (4.0 * v[0] * v[0] + v[2] * v[2])
}

fn split(y: &State) -> (UVector, UVector) {
    (UVector::new(y[0], y[1], y[2]), UVector::new(y[3], y[4], y[5]))
}

fn rhs(theta: f64, y: &State) -> State {
    let (v, vp) = split(y);
    let (s, c) = theta.sin_cos();
    let axis = UVector::new(4.0 * v[0], 0.0, v[2]);
    let lambda = vp.norm_squared() * s + (4.0 * v[0] * v[0] + v[2] * v[2]) / s;
    let acc = (axis / s - lambda * v - c * vp) / s;
    State::new(vp[0], vp[1], vp[2], acc[0], acc[1], acc[2])
}

/// Put `y` back on the constraint: `|v| = 1`, `v·v′ = 0`.
fn project(y: &mut State) {
    let (v, vp) = split(y);
    let v = v.normalize();
    let vp = vp - vp.dot(&v) * v;
    *y = State::new(v[0], v[1], v[2], vp[0], vp[1], vp[2]);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<OdeState>,
    /// `C_e` at each recorded state.
    pub conserved: Vec<f64>,
    /// `max |C_e(θ) - C_e(θ₀)|`.
    pub conserved_drift: f64,
    /// Set when the step size collapsed; `states` then ends at the last valid state.
    pub step_underflow: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &OdeState {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One step; returns the fifth-order solution and the scaled error norm.
fn dopri_step(theta: f64, y: &State, h: f64, tol: f64) -> (State, f64) {
    let mut k = [State::zeros(); 7];
    for s in 0..7 {
        let mut yi = *y;
        for (l, kl) in k.iter().enumerate().take(s) {
            yi += h * A[s][l] * kl;
        }
        k[s] = rhs(theta + C[s] * h, &yi);
    }
    let mut y5 = *y;
    let mut err = State::zeros();
    for s in 0..7 {
        y5 += h * B5[s] * k[s];
        err += h * (B5[s] - B4[s]) * k[s];
    }
    let norm = (0..6)
        .map(|i| {
            let sc = tol + tol * y[i].abs().max(y5[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum::<f64>()
        / 6.0;
    (y5, norm.sqrt())
}

const MIN_STEP: f64 = 1e-14;

/// Adaptive Dormand–Prince integration from `theta0` to `theta1` with relative and
/// absolute tolerance `tol`, renormalizing after every accepted step.
pub fn integrate(v0: UVector, v0_prime: UVector, theta0: f64, theta1: f64, tol: f64) -> Result<Trajectory> {
    if !(theta0 > 0.0 && theta1 > theta0 && theta1 < std::f64::consts::PI) {
        return Err(Error::config("theta", "need 0 < theta0 < theta1 < π"));
    }
    if !(tol > 0.0) {
        return Err(Error::config("tol", "must be positive"));
    }
    if (v0.norm() - 1.0).abs() > 1e-10 || v0.dot(&v0_prime).abs() > 1e-10 {
        return Err(Error::config("v0", "need |v0| = 1 and v0·v0′ = 0"));
    }
    let mut y = State::new(v0[0], v0[1], v0[2], v0_prime[0], v0_prime[1], v0_prime[2]);
    let mut theta = theta0;
    let ce0 = conserved(theta, &v0, &v0_prime);
    let mut states = vec![OdeState::new(theta, &y)];
    let mut ce = vec![ce0];
    let mut drift: f64 = 0.0;
    let mut h = (1e-3 * theta0).min(theta1 - theta0);
    let mut underflow = None;

    while theta < theta1 {
        let h_try = h.min(theta1 - theta);
        let (y_new, err) = dopri_step(theta, &y, h_try, tol);
        let finite = y_new.iter().all(|x| x.is_finite()) && err.is_finite();
        if finite && err <= 1.0 {
            theta = if h_try == theta1 - theta { theta1 } else { theta + h_try };
            y = y_new;
            project(&mut y);
            let (v, vp) = split(&y);
            let c = conserved(theta, &v, &vp);
            drift = drift.max((c - ce0).abs());
            states.push(OdeState::new(theta, &y));
            ce.push(c);
        }
        let factor = if finite { (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0) } else { 0.2 };
        h = h_try * if finite && err <= 1.0 { factor } else { factor.min(1.0) };
        if h < MIN_STEP * theta.max(1.0) {
            underflow = Some(theta);
            break;
        }
    }
    Ok(Trajectory { states, conserved: ce, conserved_drift: drift, step_underflow: underflow })
}

/// Regular start at `θ₀` on the branch `v₂ ≈ branch`:
/// `v₁ = a(θ² + θ⁴/6)`, `v₃ = b(θ + θ³/12)`, `v₂ = branch·√(1 - v₁² - v₃²)`.
pub fn regular_start(a: f64, b: f64, branch: f64, theta0: f64) -> (UVector, UVector) {
    let t = theta0;
    let v1 = a * (t * t + t.powi(4) / 6.0);
    let v3 = b * (t + t.powi(3) / 12.0);
    let d1 = a * (2.0 * t + 2.0 * t.powi(3) / 3.0);
    let d3 = b * (1.0 + t * t / 4.0);
    let v2 = branch.signum() * (1.0 - v1 * v1 - v3 * v3).sqrt();
    let d2 = -(v1 * d1 + v3 * d3) / v2;
    (UVector::new(v1, v2, v3), UVector::new(d1, d2, d3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    pub theta0: f64,
    pub tol: f64,
    /// Mismatch below which a shot counts as satisfying the boundary condition.
    pub accept: f64,
    pub magnitudes: usize,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    pub angles: usize,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            theta0: 1e-2,
            tol: 1e-10,
            accept: 1e-6,
            magnitudes: 8,
            min_magnitude: 1e-3,
            max_magnitude: 1.0,
            angles: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub a: f64,
    pub b: f64,
    pub branch: f64,
    /// `|v₁| + |v₃| + ||v′|² - C_e|` at `θ = π/2`.
    pub mismatch: f64,
    pub conserved_initial: f64,
    pub conserved_drift: f64,
    pub end: OdeState,
    pub step_underflow: Option<f64>,
}

impl Shot {
    pub fn is_zero(&self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub config: ShootConfig,
    pub shots: Vec<Shot>,
    pub max_zero_mismatch: f64,
    pub min_nonzero_mismatch: f64,
    pub max_conserved_drift: f64,
    /// True when exactly the zero shots meet `accept`.
    pub only_constants_accepted: bool,
}

pub fn shoot(a: f64, b: f64, branch: f64, cfg: &ShootConfig) -> Result<Shot> {
    let (v0, vp0) = regular_start(a, b, branch, cfg.theta0);
    let traj = integrate(v0, vp0, cfg.theta0, FRAC_PI_2, cfg.tol)?;
    let end = *traj.last();
    let v = UVector::from(end.v);
    let vp = UVector::from(end.v_prime);
    let ce0 = traj.conserved[0];
    let mismatch = v[0].abs() + v[2].abs() + (vp.norm_squared() - ce0).abs();
    Ok(Shot {
        a,
        b,
        branch,
        mismatch: if traj.step_underflow.is_some() { f64::INFINITY } else { mismatch },
        conserved_initial: ce0,
        conserved_drift: traj.conserved_drift,
        end,
        step_underflow: traj.step_underflow,
    })
}

/// The `(a, b)` perturbations of the sweep: log-spaced magnitudes times evenly spaced
/// directions in the plane.
pub fn perturbation_grid(cfg: &ShootConfig) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(cfg.magnitudes * cfg.angles);
    let (lo, hi) = (cfg.min_magnitude.ln(), cfg.max_magnitude.ln());
    for m in 0..cfg.magnitudes {
        let t = if cfg.magnitudes > 1 { m as f64 / (cfg.magnitudes - 1) as f64 } else { 0.0 };
        let mag = (lo + t * (hi - lo)).exp();
        for k in 0..cfg.angles {
            let (s, c) = (std::f64::consts::TAU * k as f64 / cfg.angles as f64).sin_cos();
            out.push((mag * c, mag * s));
        }
    }
    out
}

/// Zero shots on both constant branches plus the perturbation sweep on the
/// `v₂ = -1` branch.
pub fn shoot_classify(cfg: &ShootConfig) -> Result<ClassificationReport> {
    let mut jobs = vec![(0.0, 0.0, -1.0), (0.0, 0.0, 1.0)];
    jobs.extend(perturbation_grid(cfg).into_iter().map(|(a, b)| (a, b, -1.0)));
    let shots = jobs.par_iter().map(|&(a, b, br)| shoot(a, b, br, cfg)).collect::<Result<Vec<_>>>()?;
    let max_zero = shots.iter().filter(|s| s.is_zero()).map(|s| s.mismatch).fold(0.0, f64::max);
    let min_nonzero = shots.iter().filter(|s| !s.is_zero()).map(|s| s.mismatch).fold(f64::INFINITY, f64::min);
    let drift = shots.iter().map(|s| s.conserved_drift).fold(0.0, f64::max);
    let only = shots.iter().all(|s| (s.mismatch < cfg.accept) == s.is_zero());
    Ok(ClassificationReport {
        config: *cfg,
        shots,
        max_zero_mismatch: max_zero,
        min_nonzero_mismatch: min_nonzero,
        max_conserved_drift: drift,
        only_constants_accepted: only,
    })
}
