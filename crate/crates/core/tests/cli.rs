//! End-to-end tests of the command-line tool.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_vacuum-ns");

const SAINT_VENANT: &str = r#"[params]
N = 2
gamma = 2.0
theta = 1.0
sigma = 0.5
m = 2
rho_star_lo = 1.0
rho_star_hi = 4.0
a0 = 1.0

[profile]
density = "power-law"
velocity = { kind = "bump", amplitude = 0.25, center = 0.45, width = 0.35 }

[grid]
cells = 32

[time]
horizon_fraction = 0.1

[output]
snapshots = 8
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn vacuum_ns(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_into(tmp: &TempDir, config: &str, sub: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let cfg = write_config(tmp.path(), &format!("{sub}.toml"), config);
    let out = tmp.path().join(sub);
    let res = vacuum_ns(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    (cfg, out)
}

#[test]
fn run_writes_artifacts() {
    let tmp = TempDir::new().unwrap();
    let (_, out) = run_into(&tmp, SAINT_VENANT, "sv");
    for f in ["trajectory.csv", "functionals.csv", "boundary.csv", "manifest.json", "plot.gp"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "tau,x,rho,u,r");
    // 9 snapshots of 33 nodes
    assert_eq!(traj.lines().count(), 1 + 9 * 33);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["halted_reason"]["kind"], "horizon");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (_, a) = run_into(&tmp, SAINT_VENANT, "a");
    let (_, b) = run_into(&tmp, SAINT_VENANT, "b");
    for f in ["trajectory.csv", "functionals.csv", "boundary.csv", "plot.gp"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn tiny_grid_is_rejected_with_its_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &SAINT_VENANT.replace("cells = 32", "cells = 8"));
    let res = vacuum_ns(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    let err = stderr(&res);
    assert!(err.contains("line 16"), "{err}");
    assert!(err.contains("cells = 8"), "{err}");
}

#[test]
fn malformed_value_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &SAINT_VENANT.replace("gamma = 2.0", "gamma = \"two\""));
    let res = vacuum_ns(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("line 3"), "{}", stderr(&res));
}

#[test]
fn monitor_trip_is_recorded_in_manifest() {
    let tmp = TempDir::new().unwrap();
    let text = SAINT_VENANT.replace("[output]", "[monitors]\nm0 = 0.05\n\n[output]");
    let (_, out) = run_into(&tmp, &text, "trip");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["halted_reason"]["kind"], "monitor-trip");
    assert!(manifest["halted_reason"]["tau"].as_f64().unwrap() >= 0.0);
}

#[test]
fn converge_rejects_too_few_or_repeated_grids() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SAINT_VENANT);
    let out = tmp.path().join("conv");
    for grids in ["64", "32,64", "32,32,64", "8,16,32"] {
        let res = vacuum_ns(&[
            "converge",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grids",
            grids,
        ]);
        assert_eq!(code(&res), 2, "grids {grids}: {}", stderr(&res));
    }
}

#[test]
fn converge_reports_orders() {
    let tmp = TempDir::new().unwrap();
    let text = SAINT_VENANT.replace("horizon_fraction = 0.1", "horizon_fraction = 0.5");
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let out = tmp.path().join("conv");
    let res = vacuum_ns(&[
        "converge",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--grids",
        "32,64,128",
        "--jobs",
        "2",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("converge.json")).unwrap()).unwrap();
    let order = report["refinement"]["refinement_orders"]["energy_identity.strain"].as_f64().unwrap();
    assert!(order >= 1.5, "energy order {order}");
    for g in [32, 64, 128] {
        assert!(out.join(format!("grid_{g}")).join("trajectory.csv").is_file());
    }
}

#[test]
fn verify_passes_on_fresh_artifacts() {
    let tmp = TempDir::new().unwrap();
    let (cfg, out) = run_into(&tmp, SAINT_VENANT, "sv");
    let res = vacuum_ns(&["verify", "--config", cfg.to_str().unwrap(), out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    assert!(out.join("verification.json").is_file());
}

#[test]
fn verify_detects_scaled_density() {
    let tmp = TempDir::new().unwrap();
    let text = SAINT_VENANT.replace("cells = 32", "cells = 128").replace("snapshots = 8", "snapshots = 32");
    let (cfg, out) = run_into(&tmp, &text, "sv");
    let path = out.join("trajectory.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let mut scaled = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let mut cols: Vec<String> = line.split(',').map(str::to_string).collect();
        let rho: f64 = cols[2].parse().unwrap();
        cols[2] = format!("{:.16e}", 1.1 * rho);
        scaled.push_str(&cols.join(","));
        scaled.push('\n');
    }
    fs::write(&path, scaled).unwrap();
    let res = vacuum_ns(&["verify", "--config", cfg.to_str().unwrap(), out.to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    let stdout = String::from_utf8_lossy(&res.stdout);
    let weak = stdout.lines().find(|l| l.contains("weak_form.momentum")).unwrap();
    assert!(weak.starts_with("fail"), "{weak}");
}

#[test]
fn verify_of_empty_directory_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SAINT_VENANT);
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let res = vacuum_ns(&["verify", "--config", cfg.to_str().unwrap(), empty.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("manifest.json"), "{}", stderr(&res));
}

fn sweep(tmp: &TempDir, section: &str) -> Vec<Vec<String>> {
    let text = format!("{}\n{section}", SAINT_VENANT.replace("N = 2", "N = 3").replace("rho_star_hi = 4.0", "rho_star_hi = 8.0"));
    let cfg = write_config(tmp.path(), "sweep.toml", &text);
    let out = tmp.path().join("sweep");
    let res = vacuum_ns(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "index,value,N,gamma,theta,sigma,beta,m,admissible,violations,T1a,T1b,outcome"
    );
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn theta_sweep_marks_low_viscosity_exponents_inadmissible() {
    let tmp = TempDir::new().unwrap();
    let rows = sweep(&tmp, "[sweep]\nparameter = \"theta\"\nvalues = [0.4, 0.6, 0.8, 1.0, 1.2]\n");
    assert_eq!(rows.len(), 5);
    for row in &rows {
        let theta: f64 = row[1].parse().unwrap();
        let inadmissible = row[8] == "false";
        assert_eq!(theta <= 2.0 / 3.0, row[9].contains("A1.theta_lower"), "{row:?}");
        if theta <= 2.0 / 3.0 {
            assert!(inadmissible, "{row:?}");
        }
    }
}

#[test]
fn single_point_sweep() {
    let tmp = TempDir::new().unwrap();
    let rows = sweep(&tmp, "[sweep]\nparameter = \"theta\"\nvalues = [1.0]\nexecute = true\n");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][8], "true");
    assert_eq!(rows[0][12], "horizon");
    assert!(tmp.path().join("sweep").join("sweep_0").join("manifest.json").is_file());
}

#[test]
fn beta_column_is_monotone_in_sigma() {
    let tmp = TempDir::new().unwrap();
    let rows = sweep(&tmp, "[sweep]\nparameter = \"sigma\"\nvalues = [0.1, 0.3, 0.5, 0.7, 0.9]\n");
    let betas: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(betas.windows(2).all(|w| w[1] > w[0]), "{betas:?}");
    for (row, b) in rows.iter().zip(&betas) {
        let s: f64 = row[5].parse().unwrap();
        assert_eq!(*b, s / (1.0 + s));
    }
}
