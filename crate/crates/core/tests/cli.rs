use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const COARSE: &str = "grid.n_radial = 16\ngrid.n_polar = 32\ngrid.outer_radius = 8\n";

fn boojum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boojum")).args(args).output().expect("spawn boojum")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn solved(extra: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", &format!("{COARSE}{extra}"));
    let o = boojum(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    (dir, out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn coarse_solve_writes_artifacts() {
    let (_dir, out) = solved("");
    for f in ["field.csv", "energy.json", "checkpoint.chk", "defects.json", "director_raster.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let energy = json(&out.join("energy.json"));
    assert_eq!(energy["converged"], true);
    assert!(energy["breakdown"]["total"].as_f64().unwrap().is_finite());
    let header = fs::read_to_string(out.join("field.csv")).unwrap();
    assert!(header.lines().next().unwrap().starts_with("index"));
}

#[test]
fn invalid_nu_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", &format!("{COARSE}model.nu = -1\n"));
    let o = boojum(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("model.nu"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", &format!("{COARSE}grid.nonsense = 3\n"));
    let o = boojum(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn same_seed_is_byte_identical() {
    let extra = "solver.init = perturbed\nsolver.perturbation_scale = 0.2\nsolver.seed = 7\n";
    let (_a, out_a) = solved(extra);
    let (_b, out_b) = solved(extra);
    assert_eq!(fs::read(out_a.join("field.csv")).unwrap(), fs::read(out_b.join("field.csv")).unwrap());
    assert_eq!(fs::read(out_a.join("energy.json")).unwrap(), fs::read(out_b.join("energy.json")).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", COARSE);
    let mut fields = Vec::new();
    for t in ["1", "3"] {
        let out = dir.path().join(format!("t{t}"));
        let o = boojum(&["solve", cfg.to_str().unwrap(), "--threads", t, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fields.push(fs::read(out.join("field.csv")).unwrap());
    }
    assert_eq!(fields[0], fields[1]);
}

#[test]
fn iteration_cap_exits_two_with_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", COARSE);
    let o = boojum(&["solve", cfg.to_str().unwrap(), "--max-iters", "5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(out.join("field.csv").is_file() && out.join("checkpoint.chk").is_file());
    let energy = json(&out.join("energy.json"));
    assert_eq!(energy["converged"], false);
    assert_eq!(energy["stop_reason"], "max_iterations");
}

#[test]
fn continuation_reports_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", COARSE);
    let o = boojum(&["solve", cfg.to_str().unwrap(), "--continuation-nus", "0.5,1,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let energy = json(&dir.path().join("out/energy.json"));
    let runs = energy["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert_eq!(energy["model"]["nu"], 2.0);

    let o = boojum(&["solve", cfg.to_str().unwrap(), "--continuation-nus", "2,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn warm_start_from_checkpoint() {
    let (dir, out) = solved("");
    let chk = out.join("checkpoint.chk");
    let cfg = write_config(dir.path(), "warm.cfg", &format!("{COARSE}solver.init = checkpoint:{}\n", chk.display()));
    let warm = dir.path().join("warm");
    let o = boojum(&["solve", cfg.to_str().unwrap(), "--out", warm.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = json(&out.join("energy.json"));
    let second = json(&warm.join("energy.json"));
    assert!(second["iterations"].as_u64().unwrap() < first["iterations"].as_u64().unwrap());
}

#[test]
fn analyze_is_deterministic_and_reports_parity() {
    let (dir, out) = solved("analyses.defects = false\n");
    assert!(!out.join("defects.json").exists());
    let chk = out.join("checkpoint.chk");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = boojum(&["analyze", chk.to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let report = json(&a.join("defects.json"));
    for key in ["jump_count_parity_north", "jump_count_parity_south"] {
        let p = report[key].as_str().unwrap();
        assert!(p == "odd" || p == "even", "{key} = {p}");
    }
    assert_eq!(fs::read(a.join("defects.json")).unwrap(), fs::read(b.join("defects.json")).unwrap());
    assert_eq!(fs::read(a.join("director_raster.csv")).unwrap(), fs::read(b.join("director_raster.csv")).unwrap());
}

#[test]
fn analyze_rejects_truncated_and_mismatched_checkpoints() {
    let (dir, out) = solved("analyses.defects = false\n");
    let chk = out.join("checkpoint.chk");
    let text = fs::read_to_string(&chk).unwrap();
    let cut = dir.path().join("cut.chk");
    fs::write(&cut, &text[..text.len() / 2]).unwrap();
    let o = boojum(&["analyze", cut.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let other = write_config(dir.path(), "other.cfg", "grid.n_radial = 20\ngrid.n_polar = 32\ngrid.outer_radius = 8\n");
    let o = boojum(&["analyze", chk.to_str().unwrap(), "--config", other.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid/config mismatch"), "{}", stderr(&o));

    let missing = dir.path().join("nope.chk");
    assert_eq!(boojum(&["analyze", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn densities_from_checkpoint() {
    let (dir, out) = solved("analyses.defects = false\n");
    let chk = out.join("checkpoint.chk");
    let path = dir.path().join("densities.json");
    let o = boojum(&["densities", chk.to_str().unwrap(), "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let d = json(&path);
    assert_eq!(d["probes"].as_array().unwrap().len(), 2);
    assert_eq!(d["probes"][0]["kind"], "half_ball");

    let o = boojum(&["densities", chk.to_str().unwrap(), "--center", "2,0", "--radii", "0.5,0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let d: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(d["probes"][0]["kind"], "planar");
    assert_eq!(d["probes"][0]["samples"].as_array().unwrap().len(), 2);
}

#[test]
fn validate_anchoring_default_and_bad_profiles() {
    let o = boojum(&["validate-anchoring"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).lines().all(|l| l.starts_with("PASS")));

    let dir = tempfile::tempdir().unwrap();
    let exported = dir.path().join("profile.csv");
    let o = boojum(&["validate-anchoring", "--export", exported.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = boojum(&["validate-anchoring", "--profile", exported.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "theta_hat,us1,us2,us3\n0,0,-1,0\n1.5,-0.6,0,0.8\n3.14159,0,-1,0\n").unwrap();
    let o = boojum(&["validate-anchoring", "--profile", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));

    let missing = dir.path().join("missing.csv");
    assert_eq!(boojum(&["validate-anchoring", "--profile", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn tangent_ode_certifies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tangent.json");
    let o = boojum(&["tangent-ode", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&path);
    assert_eq!(r["only_constants_accepted"], true);
    assert_eq!(r["shots"].as_array().unwrap().len(), 66);
}

#[test]
fn usage_errors() {
    assert_eq!(boojum(&[]).status.code(), Some(1));
    assert_eq!(boojum(&["solve"]).status.code(), Some(1));
    assert_eq!(boojum(&["--help"]).status.code(), Some(0));
    assert_eq!(boojum(&["solve", "/definitely/not/here.cfg"]).status.code(), Some(1));
}
