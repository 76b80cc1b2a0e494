//! Run configuration: flat `key = value` lines with dotted section prefixes.
//!
//! ```text
//! # comment
//! grid.n_radial = 64
//! model.nu = 1.0
//! solver.continuation_nus = 0.5, 1, 2
//! ```
//!
//! Unknown keys, duplicates and malformed values are rejected with the line number.
//! Relative paths are resolved against the directory of the config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anchoring::AnchoringParams;
use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::minimizer::{SolveConfig, StepRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchoringSource {
    Params(AnchoringParams),
    Profile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSource {
    MeridianRotation,
    Perturbed,
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisFlags {
    pub defects: bool,
    pub densities: bool,
    pub tangent_ode: bool,
    pub far_field: bool,
}

impl Default for AnalysisFlags {
    fn default() -> Self {
        Self { defects: true, densities: false, tangent_ode: false, far_field: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub model: ModelParams,
    pub anchoring: AnchoringSource,
    pub solver: SolveConfig,
    pub init: InitSource,
    pub output_dir: PathBuf,
    pub analyses: AnalysisFlags,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            model: ModelParams::default(),
            anchoring: AnchoringSource::Params(AnchoringParams::default()),
            solver: SolveConfig::default(),
            init: InitSource::MeridianRotation,
            output_dir: PathBuf::from("out"),
            analyses: AnalysisFlags::default(),
            threads: 0,
        }
    }
}

fn value<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::parse(line, format!("`{key}`: cannot parse `{raw}`")))
}

fn flag(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::parse(line, format!("`{key}`: expected true/false, got `{raw}`"))),
    }
}

pub fn parse_step_rule(raw: &str) -> Option<StepRule> {
    match raw {
        "fixed" => Some(StepRule::Fixed),
        "adaptive-secant" | "adaptive_secant" => Some(StepRule::AdaptiveSecant),
        _ => None,
    }
}

pub fn parse_list(raw: &str) -> Option<Vec<f64>> {
    raw.split(',').map(|s| s.trim().parse().ok()).collect()
}

impl RunConfig {
    /// Parse config text; `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut anchoring = AnchoringParams::default();
        let mut profile: Option<PathBuf> = None;
        let mut seen = HashSet::new();
        let path = |raw: &str| {
            let p = PathBuf::from(raw);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (k, raw_line) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, raw) = content
                .split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got `{content}`")))?;
            if !seen.insert(key.to_string()) {
                return Err(Error::parse(line, format!("duplicate key `{key}`")));
            }
            match key {
                "grid.n_radial" => cfg.grid.n_radial = value(line, key, raw)?,
                "grid.n_polar" => cfg.grid.n_polar = value(line, key, raw)?,
                "grid.outer_radius" => cfg.grid.outer_radius = value(line, key, raw)?,
                "grid.grading" => cfg.grid.grading = value(line, key, raw)?,
                "model.nu" => cfg.model.nu = value(line, key, raw)?,
                "model.mu" => cfg.model.mu = value(line, key, raw)?,
                "anchoring.amp_polar" => anchoring.amp_polar = value(line, key, raw)?,
                "anchoring.amp_tilt" => anchoring.amp_tilt = value(line, key, raw)?,
                "anchoring.profile" => profile = Some(path(raw)),
                "solver.max_iters" => cfg.solver.max_iters = value(line, key, raw)?,
                "solver.grad_tol" => cfg.solver.grad_tol = value(line, key, raw)?,
                "solver.step_rule" => {
                    cfg.solver.step_rule = parse_step_rule(raw).ok_or_else(|| {
                        Error::parse(line, format!("`{key}`: expected fixed or adaptive-secant, got `{raw}`"))
                    })?
                }
                "solver.initial_step" => cfg.solver.initial_step = value(line, key, raw)?,
                "solver.restarts" => cfg.solver.restarts = value(line, key, raw)?,
                "solver.perturbation_scale" => cfg.solver.perturbation_scale = value(line, key, raw)?,
                "solver.seed" => cfg.solver.seed = value(line, key, raw)?,
                "solver.continuation_nus" => {
                    cfg.solver.continuation_nus = Some(
                        parse_list(raw)
                            .ok_or_else(|| Error::parse(line, format!("`{key}`: expected a comma-separated list")))?,
                    )
                }
                "solver.init" => {
                    cfg.init = match raw {
                        "meridian_rotation" => InitSource::MeridianRotation,
                        "perturbed" => InitSource::Perturbed,
                        _ => match raw.strip_prefix("checkpoint:") {
                            Some(p) => InitSource::Checkpoint(path(p.trim())),
                            None => return Err(Error::parse(
                                line,
                                format!(
                                    "`{key}`: unknown mode `{raw}` (meridian_rotation, perturbed, checkpoint:<path>)"
                                ),
                            )),
                        },
                    }
                }
                "output.dir" => cfg.output_dir = path(raw),
                "analyses.defects" => cfg.analyses.defects = flag(line, key, raw)?,
                "analyses.densities" => cfg.analyses.densities = flag(line, key, raw)?,
                "analyses.tangent_ode" => cfg.analyses.tangent_ode = flag(line, key, raw)?,
                "analyses.far_field" => cfg.analyses.far_field = flag(line, key, raw)?,
                "threads" => cfg.threads = value(line, key, raw)?,
                _ => return Err(Error::parse(line, format!("unknown key `{key}`"))),
            }
        }
        cfg.anchoring = match profile {
            Some(p) => AnchoringSource::Profile(p),
            None => AnchoringSource::Params(anchoring),
        };
        if !seen.contains("output.dir") {
            cfg.output_dir = base.join("out");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.model.validate()?;
        if let AnchoringSource::Params(p) = &self.anchoring {
            p.validate()?;
        }
        self.solver.validate()
    }
}
