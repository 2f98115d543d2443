//! Command-line front end: TOML configuration, single runs, refinement
//! studies, verification of stored runs and parameter sweeps.
//!
//! Exit codes: 0 success, 1 a check failed (or the solver broke down),
//! 2 configuration or artifact error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coords::MassGrid;
use crate::error::{Error, Result};
use crate::functionals::{functional_report, RegionSpec};
use crate::model::{make_initial_data, validate_params, InitialData, Params, ProfileSpec};
use crate::report::{Status, VerificationReport};
use crate::solver::{
    default_monitors, horizon_estimates, run, BoundLog, HaltReason, HorizonEstimate,
    LagrangianState, OutputControl, RunOptions, TimeStepControl, Trajectory,
};
use crate::verify::{refinement_study, run_suite, GridRun, RefinementTargets, SuiteConfig};

pub const MIN_CELLS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Final time. Exactly one of `horizon` and `horizon_fraction` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Final time as a fraction of `T1a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_fraction: Option<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Fixed step instead of the adaptive one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtau: Option<f64>,
}

fn default_safety() -> f64 {
    0.4
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Stress monitor; derived from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
    /// Velocity monitor; derived from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    /// Divides the particle radius lower bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_slack: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    /// Snapshots after the initial one, evenly spaced in time.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Snapshot every `stride` steps instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Write a gnuplot script next to the data.
    #[serde(default = "default_true")]
    pub plot: bool,
}

fn default_snapshots() -> usize {
    32
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            snapshots: default_snapshots(),
            stride: None,
            plot: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    #[serde(alias = "N")]
    Dim,
    Gamma,
    Theta,
    Sigma,
    M,
    RhoStarLo,
    RhoStarHi,
    A0,
}

impl SweepParameter {
    fn apply(self, p: &mut Params, v: f64) {
        match self {
            SweepParameter::Dim => p.dim = v as u32,
            SweepParameter::Gamma => p.gamma = v,
            SweepParameter::Theta => p.theta = v,
            SweepParameter::Sigma => p.sigma = v,
            SweepParameter::M => p.m = v as u32,
            SweepParameter::RhoStarLo => p.rho_star_lo = v,
            SweepParameter::RhoStarHi => p.rho_star_hi = v,
            SweepParameter::A0 => p.a0 = v,
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepParameter::Dim | SweepParameter::M)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Run the admissible points as well as tabulating them.
    #[serde(default)]
    pub execute: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Params,
    pub profile: ProfileSpec,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default)]
    pub region: RegionSpec,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub verify: SuiteConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// Line of `key` inside `[section]` (or of the section header when `key`
/// is empty), for anchoring diagnostics.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().trim_matches('[').trim_matches(']').to_string();
            if current == section && header.is_none() {
                header = Some(n + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    header
}

fn config_error(text: &str, section: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line: locate(text, section, key),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml(&text)
    }

    fn validate(&self, text: &str) -> Result<()> {
        if self.grid.cells < MIN_CELLS {
            return Err(config_error(
                text,
                "grid",
                "cells",
                format!("cells = {} is below the minimum of {MIN_CELLS}", self.grid.cells),
            ));
        }
        let t = &self.time;
        match (t.horizon, t.horizon_fraction) {
            (Some(h), None) if h > 0.0 && h.is_finite() => {}
            (None, Some(f)) if f > 0.0 && f.is_finite() => {}
            (Some(_), Some(_)) => {
                return Err(config_error(
                    text,
                    "time",
                    "horizon_fraction",
                    "set only one of horizon and horizon_fraction",
                ))
            }
            (None, None) => {
                return Err(config_error(text, "time", "", "horizon or horizon_fraction is required"))
            }
            _ => {
                let key = if t.horizon.is_some() { "horizon" } else { "horizon_fraction" };
                return Err(config_error(text, "time", key, "horizon must be positive"));
            }
        }
        if !(t.safety > 0.0 && t.safety <= 1.0) {
            return Err(config_error(text, "time", "safety", "safety must lie in (0, 1]"));
        }
        if let Some(dt) = t.dtau {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(config_error(text, "time", "dtau", "dtau must be positive"));
            }
        }
        let mon = &self.monitors;
        for (key, v) in [("m0", mon.m0), ("m1", mon.m1), ("radius_slack", mon.radius_slack)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(config_error(text, "monitors", key, format!("{key} must be positive")));
                }
            }
        }
        self.region
            .validate()
            .map_err(|e| config_error(text, "region", "", e.to_string()))?;
        if self.output.snapshots == 0 {
            return Err(config_error(text, "output", "snapshots", "snapshots must be positive"));
        }
        if self.output.stride == Some(0) {
            return Err(config_error(text, "output", "stride", "stride must be positive"));
        }
        self.verify
            .family
            .validate()
            .map_err(|e| config_error(text, "verify", "", e.to_string()))?;
        if let Some(l) = self.verify.regularity.lambda0 {
            let (lo, hi) = self.params.lambda0_interval();
            if !(l > lo && l < hi) {
                return Err(config_error(
                    text,
                    "verify.regularity",
                    "lambda0",
                    format!("lambda0 = {l} outside ({lo}, {hi})"),
                ));
            }
        }
        let report = validate_params(&self.params)
            .map_err(|e| config_error(text, "params", "", e.to_string()))?;
        if let Some(v) = report
            .violations
            .iter()
            .find(|v| matches!(v.constraint.as_str(), "dim" | "sigma.positive" | "a0.positive" | "rho_star.positive" | "rho_star.ordered"))
        {
            return Err(config_error(
                text,
                "params",
                "",
                format!("constraint {} violated ({} vs {})", v.constraint, v.lhs, v.rhs),
            ));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(config_error(text, "sweep", "values", "sweep values are empty"));
            }
            if let Some(v) = s.values.iter().find(|v| !v.is_finite()) {
                return Err(config_error(text, "sweep", "values", format!("non-finite sweep value {v}")));
            }
            if s.parameter.integral() {
                if let Some(v) = s.values.iter().find(|v| v.fract() != 0.0 || **v < 0.0) {
                    return Err(config_error(
                        text,
                        "sweep",
                        "values",
                        format!("{v} is not a valid integer value"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Everything a single run produces.
pub struct RunOutcome {
    pub data: InitialData,
    pub trajectory: Trajectory,
    pub horizon: f64,
}

/// Build the data and integrate. Solver breakdowns carry the partial
/// trajectory in the error.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let p = &cfg.params;
    let data = make_initial_data(p, &cfg.profile, cfg.grid.cells)?;
    let (dm0, dm1) = default_monitors(&data, p);
    let m0 = cfg.monitors.m0.unwrap_or(dm0);
    let m1 = cfg.monitors.m1.unwrap_or(dm1);
    let est = horizon_estimates(&data, p, m0, m1, cfg.region.x0);
    let horizon = cfg
        .time
        .horizon
        .unwrap_or_else(|| cfg.time.horizon_fraction.unwrap_or(1.0) * est.t1a);
    let mut opts = RunOptions::new(horizon, est);
    opts.output = match cfg.output.stride {
        Some(n) => OutputControl::EverySteps(n),
        None => OutputControl::Interval(horizon / cfg.output.snapshots as f64),
    };
    opts.timestep = match cfg.time.dtau {
        Some(dt) => TimeStepControl::Fixed(dt),
        None => TimeStepControl::Adaptive {
            safety: cfg.time.safety,
        },
    };
    opts.monitor_cut = cfg.region.x0;
    if let Some(s) = cfg.monitors.radius_slack {
        opts.radius_slack = s;
    }
    let trajectory = run(&data, p, &opts)?;
    Ok(RunOutcome {
        data,
        trajectory,
        horizon,
    })
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub cells: usize,
    pub horizon: f64,
    pub halted_reason: HaltReason,
    pub steps: usize,
    pub min_dtau: f64,
    pub max_dtau: f64,
    pub e0: f64,
    pub monitors: HorizonEstimate,
    pub bounds: BoundLog,
    pub snapshots: usize,
    pub files: Vec<String>,
    /// Seconds since the Unix epoch; the only non-deterministic field.
    pub created: u64,
}

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const FUNCTIONALS_CSV: &str = "functionals.csv";
pub const BOUNDARY_CSV: &str = "boundary.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const PLOT_SCRIPT: &str = "plot.gp";

/// Rows per node: `rho` on row `i` is the density of the cell to the right
/// of node `i`; the boundary row carries the vacuum value 0.
fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("tau,x,rho,u,r\n");
    for s in &traj.snapshots {
        let tau = fmt_f(s.tau);
        for i in 0..=s.cells() {
            let rho = if i < s.cells() { s.rho[i] } else { 0.0 };
            let _ = writeln!(
                out,
                "{tau},{},{},{},{}",
                fmt_f(s.grid.nodes[i]),
                fmt_f(rho),
                fmt_f(s.u[i]),
                fmt_f(s.r[i])
            );
        }
    }
    out
}

fn functionals_csv(traj: &Trajectory, cfg: &RunConfig) -> Result<String> {
    let p = &cfg.params;
    let mut header = vec![
        "tau",
        "kinetic",
        "internal",
        "energy",
        "dissipation_hoop",
        "dissipation_strain",
        "dissipation_divergence",
        "dissipation_shear",
        "dissipation_scheme",
        "mass_lagrangian",
        "mass_shell",
        "mass_eulerian",
        "bd_entropy",
        "bd_budget",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    header.extend((1..=2 * p.m).map(|k| format!("moment_{k}")));
    header.extend(
        [
            "radius_margin",
            "boundary_lower_margin",
            "boundary_upper_margin",
            "density_ratio_min",
            "density_ratio_max",
            "eulerian_coefficient_min",
            "eulerian_coefficient_max",
        ]
        .map(String::from),
    );
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..traj.snapshots.len() {
        let f = functional_report(traj, k, &cfg.region, p)?;
        let margins = f.margins;
        let mut row = vec![
            f.tau,
            f.energy.kinetic,
            f.energy.internal,
            f.energy.total,
            f.dissipation_strain[0],
            f.dissipation_strain[1],
            f.dissipation_deviatoric[0],
            f.dissipation_deviatoric[1],
            traj.dissipation_scheme[k],
            f.mass.lagrangian,
            f.mass.shell,
            f.mass.eulerian,
            f.bd_entropy.value,
            f.bd_entropy.budget,
        ];
        row.extend(f.moments.values());
        row.extend([
            margins.radius_margin_min,
            margins.boundary_lower_margin,
            margins.boundary_upper_margin,
            margins.density_ratio_min,
            margins.density_ratio_max,
            margins.eulerian_coefficient_min,
            margins.eulerian_coefficient_max,
        ]);
        out.push_str(&row.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    Ok(out)
}

fn boundary_csv(traj: &Trajectory) -> String {
    let mut out = String::from("tau,a,u_boundary\n");
    for s in &traj.snapshots {
        let _ = writeln!(out, "{},{},{}", fmt_f(s.tau), fmt_f(s.a), fmt_f(s.u[s.cells()]));
    }
    out
}

fn plot_script(m: u32) -> String {
    let first_moment = 15;
    let last_moment = first_moment + 2 * m as usize - 1;
    format!(
        "set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 1000,700

set output 'energy.png'
set xlabel 'tau'
plot 'functionals.csv' using 1:4 with lines title 'energy', \\
     '' using 1:($4 + $5 + $6) with lines title 'energy + dissipation'

set output 'boundary.png'
plot 'boundary.csv' using 1:2 with lines title 'a', '' using 1:3 with lines title 'u at boundary'

set output 'moments.png'
set logscale y
plot for [c={first_moment}:{last_moment}] 'functionals.csv' using 1:c with lines
unset logscale y

set output 'density.png'
set xlabel 'x'
plot 'trajectory.csv' using 2:(column(1) == 0 ? $3 : 1/0) with lines title 'rho at tau = 0', \\
     '' using 2:3 with dots title 'rho, all snapshots'
"
    )
}

/// Write every artifact of a run into `dir`.
pub fn write_artifacts(dir: &Path, cfg: &RunConfig, out: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Artifact {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let traj = &out.trajectory;
    write_file(&dir.join(TRAJECTORY_CSV), &trajectory_csv(traj))?;
    write_file(&dir.join(FUNCTIONALS_CSV), &functionals_csv(traj, cfg)?)?;
    write_file(&dir.join(BOUNDARY_CSV), &boundary_csv(traj))?;
    let mut files = vec![
        TRAJECTORY_CSV.to_string(),
        FUNCTIONALS_CSV.to_string(),
        BOUNDARY_CSV.to_string(),
    ];
    if cfg.output.plot {
        write_file(&dir.join(PLOT_SCRIPT), &plot_script(cfg.params.m))?;
        files.push(PLOT_SCRIPT.to_string());
    }
    let manifest = Manifest {
        config: cfg.clone(),
        cells: cfg.grid.cells,
        horizon: out.horizon,
        halted_reason: traj.halted_reason.clone(),
        steps: traj.steps,
        min_dtau: traj.min_dtau,
        max_dtau: traj.max_dtau,
        e0: traj.e0,
        monitors: traj.monitors,
        bounds: traj.bounds.clone(),
        snapshots: traj.snapshots.len(),
        files,
        created: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    write_file(&dir.join(MANIFEST_JSON), &serde_json::to_string_pretty(&manifest)?)
}

fn read_artifact(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn parse_table(path: &Path, text: &str, expected: Option<&[&str]>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let corrupt = |message: String| Error::Artifact {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| corrupt("empty file".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if let Some(cols) = expected {
        if header != cols {
            return Err(corrupt(format!("unexpected header {header:?}")));
        }
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| corrupt(format!("line {}: {e}", n + 2)))?;
        if row.len() != header.len() {
            return Err(corrupt(format!(
                "line {}: {} fields, expected {}",
                n + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Rebuild a trajectory from the artifacts written by [`write_artifacts`].
pub fn load_trajectory(dir: &Path) -> Result<(Manifest, Trajectory)> {
    let manifest_path = dir.join(MANIFEST_JSON);
    let manifest: Manifest = serde_json::from_str(&read_artifact(&manifest_path)?).map_err(|e| {
        Error::Artifact {
            path: manifest_path.clone(),
            message: e.to_string(),
        }
    })?;
    let traj_path = dir.join(TRAJECTORY_CSV);
    let (_, rows) = parse_table(
        &traj_path,
        &read_artifact(&traj_path)?,
        Some(&["tau", "x", "rho", "u", "r"]),
    )?;
    let corrupt = |path: &Path, message: String| Error::Artifact {
        path: path.to_path_buf(),
        message,
    };
    let per = manifest.cells + 1;
    if rows.is_empty() || rows.len() % per != 0 {
        return Err(corrupt(
            &traj_path,
            format!("{} rows is not a multiple of {per} nodes", rows.len()),
        ));
    }
    let nodes: Vec<f64> = rows[..per].iter().map(|r| r[1]).collect();
    let grid = Arc::new(MassGrid::from_nodes(nodes).map_err(|e| corrupt(&traj_path, e.to_string()))?);
    let mut snapshots = Vec::with_capacity(rows.len() / per);
    for block in rows.chunks(per) {
        let tau = block[0][0];
        if block.iter().any(|r| r[0] != tau) {
            return Err(corrupt(&traj_path, format!("snapshot at tau = {tau} is ragged")));
        }
        let s = LagrangianState {
            tau,
            grid: grid.clone(),
            rho: block[..per - 1].iter().map(|r| r[2]).collect(),
            u: block.iter().map(|r| r[3]).collect(),
            r: block.iter().map(|r| r[4]).collect(),
            a: block[per - 1][4],
        };
        s.validate().map_err(|e| corrupt(&traj_path, e.to_string()))?;
        snapshots.push(s);
    }

    let fun_path = dir.join(FUNCTIONALS_CSV);
    let (header, frows) = parse_table(&fun_path, &read_artifact(&fun_path)?, None)?;
    if frows.len() != snapshots.len() {
        return Err(corrupt(
            &fun_path,
            format!("{} rows for {} snapshots", frows.len(), snapshots.len()),
        ));
    }
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| corrupt(&fun_path, format!("missing column {name}")))
    };
    let (ch, cs, cd, csh, csc) = (
        col("dissipation_hoop")?,
        col("dissipation_strain")?,
        col("dissipation_divergence")?,
        col("dissipation_shear")?,
        col("dissipation_scheme")?,
    );
    let traj = Trajectory {
        dissipation_strain: frows.iter().map(|r| [r[ch], r[cs]]).collect(),
        dissipation_deviatoric: frows.iter().map(|r| [r[cd], r[csh]]).collect(),
        dissipation_scheme: frows.iter().map(|r| r[csc]).collect(),
        snapshots,
        monitor_log: Vec::new(),
        halted_reason: manifest.halted_reason.clone(),
        bounds: manifest.bounds.clone(),
        steps: manifest.steps,
        max_dtau: manifest.max_dtau,
        min_dtau: manifest.min_dtau,
        e0: manifest.e0,
        monitors: manifest.monitors,
    };
    Ok((manifest, traj))
}

/// Exit code for a report: 1 iff a check failed outright; inconclusive
/// (horizon-limited) and skipped checks do not count.
pub fn report_exit_code(report: &VerificationReport) -> i32 {
    if report.checks.iter().any(|c| c.status == Status::Fail) {
        1
    } else {
        0
    }
}

#[derive(Parser, Debug)]
#[command(name = "vacuum-ns", version, about = "Free-boundary Navier-Stokes simulator and verifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `[output] directory`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel members.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one configuration and write its artifacts.
    Run(Common),
    /// Run a refinement study over several grids.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Grid sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<usize>,
    },
    /// Verify the artifacts of a previous run.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run directory; defaults to --out or the configured directory.
        dir: Option<PathBuf>,
    },
    /// Tabulate (and optionally run) a one-parameter sweep.
    Sweep(Common),
}

fn output_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Config {
                line: None,
                message: "--jobs must be positive".into(),
            });
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config {
        line: None,
        message: e.to_string(),
    })?;
    Ok(pool.install(f))
}

/// Exit code for an error: configuration and artifact problems are 2,
/// solver breakdowns and failed checks are 1.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::Artifact { .. }
        | Error::InvalidParams(_)
        | Error::InvalidProfile(_)
        | Error::BoundaryCondition(_)
        | Error::PinchViolation { .. }
        | Error::OutOfRange { .. }
        | Error::Io(_)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

pub fn cmd_run(common: &Common) -> Result<i32> {
    let cfg = RunConfig::load(&common.config)?;
    let dir = output_dir(common, &cfg);
    match execute(&cfg) {
        Ok(out) => {
            write_artifacts(&dir, &cfg, &out)?;
            println!(
                "{} snapshots, {} steps, halted: {:?} -> {}",
                out.trajectory.snapshots.len(),
                out.trajectory.steps,
                out.trajectory.halted_reason,
                dir.display()
            );
            Ok(0)
        }
        Err(Error::StepUnderflow { tau, halvings, partial }) => {
            let out = RunOutcome {
                data: make_initial_data(&cfg.params, &cfg.profile, cfg.grid.cells)?,
                trajectory: *partial,
                horizon: tau,
            };
            write_artifacts(&dir, &cfg, &out)?;
            eprintln!("solver broke down at tau = {tau} after {halvings} halvings; partial artifacts written");
            Ok(1)
        }
        Err(e) => Err(e),
    }
}

#[derive(Serialize)]
struct GridEntry<'a> {
    cells: usize,
    directory: String,
    report: &'a VerificationReport,
}

#[derive(Serialize)]
struct ConvergeReport<'a> {
    grids: Vec<usize>,
    runs: Vec<GridEntry<'a>>,
    refinement: &'a VerificationReport,
}

pub fn cmd_converge(common: &Common, grids: &[usize]) -> Result<i32> {
    let cfg = RunConfig::load(&common.config)?;
    let mut sorted = grids.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config {
            line: None,
            message: "grid sizes must be distinct".into(),
        });
    }
    if sorted.len() < 3 {
        return Err(Error::Config {
            line: None,
            message: format!("a refinement study needs at least 3 grids, got {}", sorted.len()),
        });
    }
    if let Some(g) = sorted.iter().find(|g| **g < MIN_CELLS) {
        return Err(Error::Config {
            line: None,
            message: format!("grid {g} is below the minimum of {MIN_CELLS} cells"),
        });
    }
    let dir = output_dir(common, &cfg);
    let coarsest = sorted[0];
    // refine the output spacing together with the grid
    let configs: Vec<RunConfig> = sorted
        .iter()
        .map(|&g| {
            let mut c = cfg.clone();
            c.grid.cells = g;
            c.output.snapshots = cfg.output.snapshots * g / coarsest;
            c
        })
        .collect();
    let outcomes = with_pool(common.jobs, || {
        configs
            .par_iter()
            .map(|c| {
                let out = execute(c)?;
                let sub = dir.join(format!("grid_{}", c.grid.cells));
                write_artifacts(&sub, c, &out)?;
                let report = run_suite(&out.trajectory, &c.params, &c.verify)?;
                Ok((out, report))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let runs: Vec<GridRun> = outcomes
        .iter()
        .zip(&sorted)
        .map(|((o, _), &cells)| GridRun {
            cells,
            traj: &o.trajectory,
        })
        .collect();
    let refinement = refinement_study(
        &runs,
        &cfg.params,
        &cfg.region,
        &cfg.verify.family,
        &RefinementTargets::default(),
    )?;
    let report = ConvergeReport {
        grids: sorted.clone(),
        runs: outcomes
            .iter()
            .zip(&sorted)
            .map(|((_, r), &cells)| GridEntry {
                cells,
                directory: format!("grid_{cells}"),
                report: r,
            })
            .collect(),
        refinement: &refinement,
    };
    write_file(&dir.join("converge.json"), &serde_json::to_string_pretty(&report)?)?;
    print!("{refinement}");
    let failed = outcomes.iter().any(|(_, r)| report_exit_code(r) != 0) || report_exit_code(&refinement) != 0;
    Ok(i32::from(failed))
}

pub fn cmd_verify(common: &Common, dir: Option<&Path>) -> Result<i32> {
    let cfg = RunConfig::load(&common.config)?;
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| output_dir(common, &cfg));
    let (_, traj) = load_trajectory(&dir)?;
    let report = run_suite(&traj, &cfg.params, &cfg.verify)?;
    write_file(&dir.join("verification.json"), &serde_json::to_string_pretty(&report)?)?;
    print!("{report}");
    Ok(report_exit_code(&report))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub fn cmd_sweep(common: &Common) -> Result<i32> {
    let cfg = RunConfig::load(&common.config)?;
    let sweep = cfg.sweep.clone().ok_or_else(|| Error::Config {
        line: None,
        message: "missing [sweep] section".into(),
    })?;
    let dir = output_dir(common, &cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::Artifact {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let rows = with_pool(common.jobs, || {
        sweep
            .values
            .par_iter()
            .enumerate()
            .map(|(k, &v)| sweep_row(&cfg, &sweep, k, v, &dir))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut out = String::from(
        "index,value,N,gamma,theta,sigma,beta,m,admissible,violations,T1a,T1b,outcome\n",
    );
    for r in &rows {
        out.push_str(r);
        out.push('\n');
    }
    write_file(&dir.join("sweep.csv"), &out)?;
    print!("{out}");
    Ok(0)
}

fn sweep_row(cfg: &RunConfig, sweep: &SweepConfig, k: usize, v: f64, dir: &Path) -> Result<String> {
    let mut c = cfg.clone();
    c.sweep = None;
    sweep.parameter.apply(&mut c.params, v);
    let p = &c.params;
    let report = validate_params(p)?;
    let violations = report
        .violations
        .iter()
        .map(|v| v.constraint.clone())
        .collect::<Vec<_>>()
        .join(" ");
    let est = make_initial_data(p, &c.profile, c.grid.cells).ok().map(|d| {
        let (m0, m1) = default_monitors(&d, p);
        let (m0, m1) = (c.monitors.m0.unwrap_or(m0), c.monitors.m1.unwrap_or(m1));
        horizon_estimates(&d, p, m0, m1, c.region.x0)
    });
    let outcome = if sweep.execute && report.admissible {
        match execute(&c) {
            Ok(out) => {
                write_artifacts(&dir.join(format!("sweep_{k}")), &c, &out)?;
                match out.trajectory.halted_reason {
                    HaltReason::MonitorTrip { .. } => "monitor-trip".to_string(),
                    HaltReason::Horizon => "horizon".to_string(),
                    HaltReason::None => "none".to_string(),
                }
            }
            Err(e) => format!("error: {}", e.to_string().replace(',', ";")),
        }
    } else if sweep.execute {
        "skipped".to_string()
    } else {
        String::new()
    };
    Ok(format!(
        "{k},{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_f(v),
        p.dim,
        fmt_f(p.gamma),
        fmt_f(p.theta),
        fmt_f(p.sigma),
        fmt_f(p.beta()),
        p.m,
        report.admissible,
        violations,
        csv_opt(est.map(|e| e.t1a)),
        csv_opt(est.map(|e| e.t1b)),
        outcome
    ))
}

/// Parse arguments, dispatch and map the result to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Converge { common, grids } => cmd_converge(common, grids),
        Command::Verify { common, dir } => cmd_verify(common, dir.as_deref()),
        Command::Sweep(c) => cmd_sweep(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

/// Parameters per sweep row, exposed for tests.
pub fn sweep_points(cfg: &RunConfig) -> Vec<Params> {
    cfg.sweep
        .as_ref()
        .map(|s| {
            s.values
                .iter()
                .map(|&v| {
                    let mut p = cfg.params.clone();
                    s.parameter.apply(&mut p, v);
                    p
                })
                .collect()
        })
        .unwrap_or_default()
}
