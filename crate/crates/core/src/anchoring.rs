//! Favored anchoring on the colloid surface.
//!
//! The default family is
//! `u_s(θ̂) = (sin α cos δ, cos α, sin α sin δ)`, `α = π - A sin²θ̂`, `δ = B sin 2θ̂`,
//! which is unit, equals `(0,-1,0)` at both poles, has `u_s1 ≥ 0` for `A ≤ π`, and has
//! three non-constant components. Profiles are stored as samples so external ones can be
//! loaded from CSV and checked with [`validate_profile`].

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MeridianGrid;
use crate::tensor::UVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchoringParams {
    /// Polar rotation amplitude `A ∈ (0, π]`.
    pub amp_polar: f64,
    /// Meridian tilt amplitude `B ∈ (0, π/4]`.
    pub amp_tilt: f64,
}

impl Default for AnchoringParams {
    fn default() -> Self {
        Self { amp_polar: FRAC_PI_2, amp_tilt: FRAC_PI_4 }
    }
}

impl AnchoringParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp_polar > 0.0 && self.amp_polar <= PI) {
            return Err(Error::config("anchoring.amp_polar", "must lie in (0, pi]"));
        }
        if !(self.amp_tilt > 0.0 && self.amp_tilt <= FRAC_PI_4) {
            return Err(Error::config("anchoring.amp_tilt", "must lie in (0, pi/4]"));
        }
        Ok(())
    }

    pub fn eval(&self, theta: f64) -> UVector {
        let s = theta.sin();
        let alpha = PI - self.amp_polar * s * s;
        let delta = self.amp_tilt * (2.0 * theta).sin();
        let (sa, ca) = alpha.sin_cos();
        UVector::new(sa * delta.cos(), ca, sa * delta.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchoringSample {
    pub theta: f64,
    pub us: UVector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnchoringProfile {
    pub samples: Vec<AnchoringSample>,
}

/// Tolerance used to match profile samples to boundary nodes by colatitude.
const THETA_MATCH_TOL: f64 = 1e-9;

/// Sample the default family at both poles and at every colloid-boundary node.
pub fn default_profile(params: &AnchoringParams, grid: &MeridianGrid) -> Result<AnchoringProfile> {
    params.validate()?;
    let mut samples = Vec::with_capacity(grid.n_p() + 2);
    samples.push(AnchoringSample { theta: 0.0, us: params.eval(0.0) });
    for &theta in grid.thetas() {
        samples.push(AnchoringSample { theta, us: params.eval(theta) });
    }
    samples.push(AnchoringSample { theta: PI, us: params.eval(PI) });
    Ok(AnchoringProfile { samples })
}

impl AnchoringProfile {
    /// Values at the colloid-boundary nodes, in polar-row order.
    pub fn boundary_values(&self, grid: &MeridianGrid) -> Result<Vec<UVector>> {
        grid.thetas()
            .iter()
            .map(|&t| {
                self.samples
                    .iter()
                    .find(|s| (s.theta - t).abs() <= THETA_MATCH_TOL)
                    .map(|s| s.us)
                    .ok_or_else(|| Error::Inconsistent(format!("anchoring profile has no sample at theta_hat = {t}")))
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "theta_hat,us1,us2,us3")?;
        for s in &self.samples {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", s.theta, s.us[0], s.us[1], s.us[2])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut samples = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            let line_no = k + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || (k == 0 && trimmed.starts_with("theta_hat")) {
                continue;
            }
            let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(Error::parse(line_no, format!("expected 4 columns, found {}", cols.len())));
            }
            let mut vals = [0.0; 4];
            for (v, c) in vals.iter_mut().zip(&cols) {
                *v = c.parse().map_err(|_| Error::parse(line_no, format!("not a number: `{c}`")))?;
            }
            samples.push(AnchoringSample { theta: vals[0], us: UVector::new(vals[1], vals[2], vals[3]) });
        }
        if samples.is_empty() {
            return Err(Error::parse(0, "profile has no samples"));
        }
        Ok(Self { samples })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub passed: bool,
    /// Worst-case violation (or, for non-constancy, the smallest component range).
    pub worst: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_UNIT_NORM: &str = "unit_norm";
pub const CHECK_POLE_VALUE: &str = "pole_value";
pub const CHECK_FIRST_NONNEGATIVE: &str = "first_component_nonnegative";
pub const CHECK_NON_CONSTANT: &str = "components_non_constant";

pub fn validate_profile(profile: &AnchoringProfile) -> ValidationReport {
    let samples = &profile.samples;

    let norm_err = samples.iter().map(|s| (s.us.norm() - 1.0).abs()).fold(0.0, f64::max);
    let unit = ConstraintCheck { name: CHECK_UNIT_NORM.into(), passed: norm_err <= 1e-10, worst: norm_err, note: None };

    let pole_target = UVector::new(0.0, -1.0, 0.0);
    let poles: Vec<_> = samples
        .iter()
        .filter(|s| s.theta.abs() <= THETA_MATCH_TOL || (s.theta - PI).abs() <= THETA_MATCH_TOL)
        .collect();
    let has_north = poles.iter().any(|s| s.theta.abs() <= THETA_MATCH_TOL);
    let has_south = poles.iter().any(|s| (s.theta - PI).abs() <= THETA_MATCH_TOL);
    let pole_err = poles.iter().map(|s| (s.us - pole_target).norm()).fold(0.0, f64::max);
    let pole = ConstraintCheck {
        name: CHECK_POLE_VALUE.into(),
        passed: has_north && has_south && pole_err <= 1e-10,
        worst: pole_err,
        note: (!(has_north && has_south)).then(|| "profile lacks samples at theta_hat = 0 and pi".into()),
    };

    let min_first = samples.iter().map(|s| s.us[0]).fold(f64::INFINITY, f64::min);
    let nonneg = ConstraintCheck {
        name: CHECK_FIRST_NONNEGATIVE.into(),
        passed: min_first >= -1e-12,
        worst: (-min_first).max(0.0),
        note: None,
    };

    let ranges: Vec<f64> = (0..3)
        .map(|k| {
            let (lo, hi) = samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.us[k]), hi.max(s.us[k])));
            hi - lo
        })
        .collect();
    let flat: Vec<String> =
        ranges.iter().enumerate().filter(|(_, &r)| !(r > 1e-6)).map(|(k, _)| format!("u{}", k + 1)).collect();
    let non_constant = ConstraintCheck {
        name: CHECK_NON_CONSTANT.into(),
        passed: flat.is_empty(),
        worst: ranges.iter().copied().fold(f64::INFINITY, f64::min),
        note: (!flat.is_empty()).then(|| format!("constant components: {}", flat.join(", "))),
    };

    ValidationReport { checks: vec![unit, pole, nonneg, non_constant] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridConfig};
    use approx::assert_relative_eq;

    fn grid() -> MeridianGrid {
        build_grid(GridConfig::new(4, 32, 3.0, 1.0)).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let p = AnchoringParams::default();
        assert_relative_eq!(p.eval(0.0), UVector::new(0.0, -1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(p.eval(FRAC_PI_2), UVector::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let h = 0.5 * 2.0_f64.sqrt();
        assert_relative_eq!(p.eval(FRAC_PI_4), UVector::new(0.5, -h, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn params_out_of_range() {
        assert!(AnchoringParams { amp_polar: 0.0, amp_tilt: 0.1 }.validate().is_err());
        assert!(AnchoringParams { amp_polar: 3.2, amp_tilt: 0.1 }.validate().is_err());
        assert!(AnchoringParams { amp_polar: 1.0, amp_tilt: 0.8 }.validate().is_err());
        assert!(default_profile(&AnchoringParams { amp_polar: 1.0, amp_tilt: -0.1 }, &grid()).is_err());
    }

    #[test]
    fn default_profile_passes_everything() {
        let g = grid();
        for (a, b) in [(FRAC_PI_2, FRAC_PI_4), (PI, 0.1), (0.3, FRAC_PI_4)] {
            let prof = default_profile(&AnchoringParams { amp_polar: a, amp_tilt: b }, &g).unwrap();
            let report = validate_profile(&prof);
            assert!(report.all_passed(), "{report:?}");
            assert_eq!(prof.boundary_values(&g).unwrap().len(), g.n_p());
        }
    }

    #[test]
    fn detects_constant_component() {
        let g = grid();
        let mut prof = default_profile(&AnchoringParams::default(), &g).unwrap();
        for s in &mut prof.samples {
            let n = s.us[0].hypot(s.us[1]);
            s.us = UVector::new(s.us[0] / n, s.us[1] / n, 0.0);
        }
        let report = validate_profile(&prof);
        let c = report.check(CHECK_NON_CONSTANT).unwrap();
        assert!(!c.passed);
        assert!(c.note.as_deref().unwrap().contains("u3"));
        assert!(report.check(CHECK_UNIT_NORM).unwrap().passed);
    }

    #[test]
    fn detects_wrong_pole_value() {
        let g = grid();
        let mut prof = default_profile(&AnchoringParams::default(), &g).unwrap();
        prof.samples[0].us = UVector::new(0.0, 1.0, 0.0);
        let c = validate_profile(&prof).check(CHECK_POLE_VALUE).unwrap().clone();
        assert!(!c.passed);
        assert_relative_eq!(c.worst, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn detects_negative_first_component() {
        let g = grid();
        let mut prof = default_profile(&AnchoringParams::default(), &g).unwrap();
        let mid = prof.samples.len() / 2;
        prof.samples[mid].us[0] = -prof.samples[mid].us[0];
        assert!(!validate_profile(&prof).check(CHECK_FIRST_NONNEGATIVE).unwrap().passed);
    }

    #[test]
    fn mirror_symmetry() {
        let g = grid();
        let vals = default_profile(&AnchoringParams::default(), &g).unwrap().boundary_values(&g).unwrap();
        let n = vals.len();
        for j in 0..n {
            let (a, b) = (vals[j], vals[n - 1 - j]);
            assert_relative_eq!(a[0], b[0], epsilon = 1e-14);
            assert_relative_eq!(a[1], b[1], epsilon = 1e-14);
            assert_relative_eq!(a[2], -b[2], epsilon = 1e-14);
        }
    }

    #[test]
    fn near_pole_decay_orders() {
        // Log-log slopes of u_s1 and u_s3 against sin θ̂ over the four nodes nearest the pole.
        // The leading orders are 2 and 3; higher-order terms pull the fit slightly below.
        let g = build_grid(GridConfig::new(2, 512, 2.0, 1.0)).unwrap();
        let vals = default_profile(&AnchoringParams::default(), &g).unwrap().boundary_values(&g).unwrap();
        let slope = |k: usize| {
            let pts: Vec<(f64, f64)> = (0..4).map(|j| (g.thetas()[j].sin().ln(), vals[j][k].abs().ln())).collect();
            crate::util::least_squares_slope(&pts)
        };
        let (s1, s3) = (slope(0), slope(2));
        assert!(s1 >= 2.0 - 1e-2, "u_s1 slope {s1}");
        assert!(s3 >= 3.0 - 1e-2, "u_s3 slope {s3}");
    }

    #[test]
    fn csv_round_trip() {
        let g = grid();
        let prof = default_profile(&AnchoringParams::default(), &g).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let back = AnchoringProfile::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, prof);
    }

    #[test]
    fn csv_rejects_garbage() {
        let err = AnchoringProfile::read_csv("theta_hat,us1,us2,us3\n0.1,abc,0,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
