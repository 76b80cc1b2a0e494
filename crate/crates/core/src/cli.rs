//! Command-line front end. Exit codes: 0 success/converged, 1 usage or input error,
//! 2 finished without convergence (artifacts are still written).

use std::ffi::OsString;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::anchoring::{default_profile, validate_profile, AnchoringParams, AnchoringProfile};
use crate::checkpoint::{self, CheckpointHeader};
use crate::config::{parse_list, parse_step_rule, AnchoringSource, InitSource, RunConfig};
use crate::defects::{self, grid_floor, radii_down_to, DensityProbe, Side};
use crate::energy::{EnergyBreakdown, EnergyModel, ModelParams, UnitField};
use crate::error::{Error, Result};
use crate::grid::{build_grid, GridConfig, MeridianGrid};
use crate::minimizer::{
    best_result, continuation, initial_field, solve_with_restarts, InitMode, SolveResult, StopReason,
};
use crate::tangent_ode::{shoot_classify, ShootConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

pub const FIELD_FILE: &str = "field.csv";
pub const ENERGY_FILE: &str = "energy.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.chk";
pub const REPORT_FILE: &str = "defects.json";
pub const RASTER_FILE: &str = "director_raster.csv";
pub const DENSITIES_FILE: &str = "densities.json";
pub const TANGENT_FILE: &str = "tangent_ode.json";

#[derive(Debug, Parser)]
#[command(name = "boojum", version, about = "Axisymmetric nematic colloid solver and defect analysis")]
pub struct Cli {
    /// Worker threads (0 = automatic); overrides the config `threads` key.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the energy described by a config file.
    Solve(SolveArgs),
    /// Defect report and director raster for a checkpoint.
    Analyze(AnalyzeArgs),
    /// Check an anchoring profile against the admissibility constraints.
    ValidateAnchoring(AnchoringArgs),
    /// Shooting sweep for the tangent-map ODE.
    TangentOde(TangentArgs),
    /// Scaled energy densities about the poles or an off-axis point.
    Densities(DensityArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// fixed | adaptive-secant
    #[arg(long)]
    pub step_rule: Option<String>,
    #[arg(long)]
    pub initial_step: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub perturbation_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated ascending list.
    #[arg(long)]
    pub continuation_nus: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub checkpoint: PathBuf,
    /// Config whose grid the checkpoint must match.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (defaults to the checkpoint's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    pub raster_extent: f64,
    #[arg(long, default_value_t = 61)]
    pub raster_points: usize,
}

#[derive(Debug, Args)]
pub struct AnchoringArgs {
    /// CSV profile (theta_hat,us1,us2,us3); omit to check the default family.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub amp_polar: Option<f64>,
    #[arg(long)]
    pub amp_tilt: Option<f64>,
    #[arg(long, default_value_t = 128)]
    pub n_polar: usize,
    /// Also write the default profile to this CSV.
    #[arg(long)]
    pub export: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TangentArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub theta0: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub accept: f64,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    pub checkpoint: PathBuf,
    /// Off-axis center `rho,z` for the planar density; poles otherwise.
    #[arg(long)]
    pub center: Option<String>,
    /// Comma-separated radii; defaults to eight from 0.5 down to the grid floor.
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            EXIT_USAGE
        }
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    Ok(pool.install(f))
}

fn dispatch(cli: Cli) -> Result<i32> {
    let threads = cli.threads;
    match cli.command {
        Command::Solve(args) => {
            let mut cfg = RunConfig::load(&args.config)?;
            apply_overrides(&mut cfg, &args)?;
            let n = threads.unwrap_or(cfg.threads);
            with_threads(n, || cmd_solve(&cfg))?
        }
        Command::Analyze(args) => with_threads(threads.unwrap_or(0), || cmd_analyze(&args))?,
        Command::ValidateAnchoring(args) => Ok(cmd_validate_anchoring(&args)),
        Command::TangentOde(args) => with_threads(threads.unwrap_or(0), || cmd_tangent_ode(&args))?,
        Command::Densities(args) => with_threads(threads.unwrap_or(0), || cmd_densities(&args))?,
    }
}

fn apply_overrides(cfg: &mut RunConfig, a: &SolveArgs) -> Result<()> {
    let s = &mut cfg.solver;
    if let Some(v) = a.max_iters {
        s.max_iters = v;
    }
    if let Some(v) = a.grad_tol {
        s.grad_tol = v;
    }
    if let Some(v) = &a.step_rule {
        s.step_rule = parse_step_rule(v).ok_or_else(|| Error::config("--step-rule", format!("unknown rule `{v}`")))?;
    }
    if let Some(v) = a.initial_step {
        s.initial_step = v;
    }
    if let Some(v) = a.restarts {
        s.restarts = v;
    }
    if let Some(v) = a.perturbation_scale {
        s.perturbation_scale = v;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = &a.continuation_nus {
        s.continuation_nus =
            Some(parse_list(v).ok_or_else(|| Error::config("--continuation-nus", "expected a comma-separated list"))?);
    }
    if let Some(v) = &a.out {
        cfg.output_dir = v.clone();
    }
    cfg.validate()
}

pub fn load_profile(source: &AnchoringSource, grid: &MeridianGrid) -> Result<AnchoringProfile> {
    match source {
        AnchoringSource::Params(p) => default_profile(p, grid),
        AnchoringSource::Profile(path) => AnchoringProfile::read_csv(BufReader::new(fs::File::open(path)?)),
    }
}

#[derive(Debug, Serialize)]
struct RunSummary {
    label: String,
    nu: f64,
    total: f64,
    iterations: usize,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct EnergyReport {
    breakdown: EnergyBreakdown,
    model: ModelParams,
    iterations: usize,
    converged: bool,
    stop_reason: StopReason,
    grad_norm: f64,
    far_field_deviation: Option<f64>,
    /// Every solve that was run; the selected one is reported above.
    runs: Vec<RunSummary>,
    energy_history: Vec<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    checkpoint::write_atomic(path, text.as_bytes())
}

/// Solve per config and write artifacts; returns the exit code.
pub fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let grid = build_grid(cfg.grid)?;
    let profile = load_profile(&cfg.anchoring, &grid)?;
    let model = EnergyModel::new(&grid, &profile, cfg.model)?;
    let mode = match &cfg.init {
        InitSource::MeridianRotation => InitMode::MeridianRotation,
        InitSource::Perturbed => InitMode::Perturbed,
        InitSource::Checkpoint(path) => {
            let ck = checkpoint::load(path)?;
            ck.verify(Some(&cfg.grid))?;
            InitMode::FromCheckpoint(ck.field)
        }
    };
    let u0 = initial_field(&grid, &mode, &cfg.solver)?;

    let (results, labels, nus): (Vec<SolveResult>, Vec<String>, Vec<f64>) = match &cfg.solver.continuation_nus {
        Some(list) => {
            let res = continuation(&u0, &model, &cfg.solver)?;
            let labels = list.iter().map(|nu| format!("continuation nu={nu}")).collect();
            (res, labels, list.clone())
        }
        None => {
            let res = solve_with_restarts(&u0, &model, &cfg.solver)?;
            let labels =
                (0..res.len()).map(|k| if k == 0 { "initial".to_string() } else { format!("restart {k}") }).collect();
            let n = res.len();
            (res, labels, vec![cfg.model.nu; n])
        }
    };
    let pick = if cfg.solver.continuation_nus.is_some() {
        results.len() - 1
    } else {
        best_result(&results).expect("at least one solve")
    };
    let chosen = &results[pick];
    let model_used = ModelParams { nu: nus[pick], ..cfg.model };

    fs::create_dir_all(&cfg.output_dir)?;
    let mut csv = Vec::new();
    chosen.field.write_csv(&grid, &mut csv)?;
    checkpoint::write_atomic(&cfg.output_dir.join(FIELD_FILE), &csv)?;

    let far = if cfg.analyses.far_field { Some(defects::far_field_check(&chosen.field, &grid)?) } else { None };
    let report = EnergyReport {
        breakdown: chosen.breakdown,
        model: model_used,
        iterations: chosen.iterations,
        converged: chosen.converged,
        stop_reason: chosen.stop_reason,
        grad_norm: chosen.grad_norm,
        far_field_deviation: far,
        runs: results
            .iter()
            .zip(&labels)
            .zip(&nus)
            .map(|((r, l), &nu)| RunSummary {
                label: l.clone(),
                nu,
                total: r.breakdown.total,
                iterations: r.iterations,
                converged: r.converged,
            })
            .collect(),
        energy_history: chosen.energy_history.clone(),
    };
    write_json(&cfg.output_dir.join(ENERGY_FILE), &report)?;

    let header = CheckpointHeader {
        format: checkpoint::FORMAT.into(),
        grid: cfg.grid,
        grid_digest: cfg.grid.digest(),
        model: model_used,
        anchoring: cfg.anchoring.clone(),
        iterations: chosen.iterations,
        converged: chosen.converged,
        energy: chosen.breakdown,
        nodes: grid.len(),
    };
    checkpoint::save(&cfg.output_dir.join(CHECKPOINT_FILE), &header, &chosen.field, &grid)?;

    if cfg.analyses.defects {
        write_analysis(&chosen.field, &grid, &cfg.output_dir, 3.0, 61)?;
    }
    if cfg.analyses.densities {
        write_json(&cfg.output_dir.join(DENSITIES_FILE), &pole_densities(&chosen.field, &grid, None)?)?;
    }
    if cfg.analyses.tangent_ode {
        write_json(&cfg.output_dir.join(TANGENT_FILE), &shoot_classify(&ShootConfig::default())?)?;
    }

    println!(
        "{} after {} iterations: E = {:.12e} (|g|max = {:.3e}); artifacts in {}",
        if chosen.converged { "converged" } else { "not converged" },
        chosen.iterations,
        chosen.breakdown.total,
        chosen.grad_norm,
        cfg.output_dir.display()
    );
    Ok(if chosen.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn write_analysis(field: &UnitField, grid: &MeridianGrid, dir: &Path, extent: f64, points: usize) -> Result<()> {
    let report = defects::analyze(field, grid)?;
    write_json(&dir.join(REPORT_FILE), &report)?;
    let mut raster = Vec::new();
    defects::write_director_raster(field, grid, extent, points, &mut raster)?;
    checkpoint::write_atomic(&dir.join(RASTER_FILE), &raster)
}

fn load_checked(path: &Path, config: Option<&Path>) -> Result<(checkpoint::Checkpoint, MeridianGrid)> {
    let ck = checkpoint::load(path)?;
    let expected: Option<GridConfig> = match config {
        Some(p) => Some(RunConfig::load(p)?.grid),
        None => None,
    };
    ck.verify(expected.as_ref())?;
    let grid = build_grid(ck.header.grid)?;
    ck.field.check_len(&grid)?;
    Ok((ck, grid))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32> {
    let (ck, grid) = load_checked(&args.checkpoint, args.config.as_deref())?;
    let dir = match &args.out {
        Some(d) => d.clone(),
        None => args.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    fs::create_dir_all(&dir)?;
    write_analysis(&ck.field, &grid, &dir, args.raster_extent, args.raster_points)?;
    println!("wrote {} and {} to {}", REPORT_FILE, RASTER_FILE, dir.display());
    Ok(EXIT_OK)
}

pub fn cmd_validate_anchoring(args: &AnchoringArgs) -> i32 {
    let profile = match &args.profile {
        Some(path) => {
            fs::File::open(path).map_err(Error::from).and_then(|f| AnchoringProfile::read_csv(BufReader::new(f)))
        }
        None => {
            let d = AnchoringParams::default();
            let params = AnchoringParams {
                amp_polar: args.amp_polar.unwrap_or(d.amp_polar),
                amp_tilt: args.amp_tilt.unwrap_or(d.amp_tilt),
            };
            let grid = GridConfig { n_polar: args.n_polar, ..GridConfig::default() };
            build_grid(grid).and_then(|g| default_profile(&params, &g))
        }
    };
    let profile = match profile {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(path) = &args.export {
        let mut buf = Vec::new();
        if let Err(e) = profile.write_csv(&mut buf).and_then(|_| checkpoint::write_atomic(path, &buf)) {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    }
    let report = validate_profile(&profile);
    if args.json {
        match serde_json::to_string_pretty(&report) {
            Ok(s) => println!("{s}"),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    } else {
        for c in &report.checks {
            let note = c.note.as_deref().unwrap_or("");
            println!("{} {} (worst {:.3e}) {note}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.worst);
        }
    }
    if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_USAGE
    }
}

pub fn cmd_tangent_ode(args: &TangentArgs) -> Result<i32> {
    let cfg = ShootConfig { tol: args.tol, theta0: args.theta0, accept: args.accept, ..ShootConfig::default() };
    let report = shoot_classify(&cfg)?;
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            println!(
                "{} shots; zero-shot mismatch {:.3e}, smallest nonzero {:.3e}, max drift {:.3e}",
                report.shots.len(),
                report.max_zero_mismatch,
                report.min_nonzero_mismatch,
                report.max_conserved_drift
            );
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(if report.only_constants_accepted { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Serialize)]
struct DensityOutput {
    grid_floor: f64,
    probes: Vec<DensityProbe>,
}

fn pole_densities(field: &UnitField, grid: &MeridianGrid, radii: Option<&[f64]>) -> Result<DensityOutput> {
    let floor = grid_floor(grid);
    let default = radii_down_to(0.5, floor, 8);
    let radii = radii.unwrap_or(&default);
    let probes = [Side::North, Side::South]
        .iter()
        .map(|s| defects::density_probe(field, grid, s.pole(), radii))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityOutput { grid_floor: floor, probes })
}

pub fn cmd_densities(args: &DensityArgs) -> Result<i32> {
    let (ck, grid) = load_checked(&args.checkpoint, None)?;
    let radii = match &args.radii {
        Some(s) => Some(parse_list(s).ok_or_else(|| Error::config("--radii", "expected a comma-separated list"))?),
        None => None,
    };
    let out = match &args.center {
        None => pole_densities(&ck.field, &grid, radii.as_deref())?,
        Some(c) => {
            let xy =
                parse_list(c).filter(|v| v.len() == 2).ok_or_else(|| Error::config("--center", "expected `rho,z`"))?;
            let floor = grid_floor(&grid);
            let radii = radii.unwrap_or_else(|| radii_down_to(0.5 * xy[0], floor, 8));
            DensityOutput {
                grid_floor: floor,
                probes: vec![defects::density_probe(&ck.field, &grid, (xy[0], xy[1]), &radii)?],
            }
        }
    };
    match &args.out {
        Some(path) => write_json(path, &out)?,
        None => println!("{}", serde_json::to_string_pretty(&out)?),
    }
    Ok(EXIT_OK)
}
