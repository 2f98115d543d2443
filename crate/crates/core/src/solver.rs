//! Explicit time integration of the Lagrangian free-boundary problem on a
//! fixed mass grid.
//!
//! Staggered layout: density lives on cells, velocity and radius on nodes.
//! With `w_i = r_i^{N-1} u_i`, `D_j = (w_{j+1} - w_j)/Δx_j` and the cell
//! stress `S_j = ρ_j^γ - θ ρ_j^{θ+1} D_j`, the semi-discrete system is
//!
//! ```text
//! ρ_j'  = -ρ_j² D_j
//! u_i'  = -r_i^{N-1} (S_i - S_{i-1}) / h_i - (N-1) r_i^{N-2} G_i u_i
//! r_i'  = u_i
//! ```
//!
//! where `G_i = (ρ_i^θ - ρ_{i-1}^θ)/h_i` and both `S` and `ρ^θ` vanish on
//! the vacuum side of the last node. The centre node is held at `u = 0`.
//! Two properties hold exactly for this semi-discretisation: the discrete
//! energy with node-based kinetic part decays at the rate returned by
//! [`scheme_dissipation_rate`], and `v_i = u_i + r_i^{N-1} G_i` obeys
//! `v_i' = -r_i^{N-1} (ρ_i^γ - ρ_{i-1}^γ)/h_i`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coords::MassGrid;
use crate::error::{Error, Result};
use crate::functionals::{dissipation_increment, energy};
use crate::model::{InitialData, Params};
use crate::quadrature::{pw, trapezoid};

#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianState {
    pub tau: f64,
    pub grid: Arc<MassGrid>,
    /// Density per cell.
    pub rho: Vec<f64>,
    /// Velocity per node.
    pub u: Vec<f64>,
    /// Radius per node.
    pub r: Vec<f64>,
    /// Free-boundary radius, integrated alongside `r[M]`.
    pub a: f64,
}

impl LagrangianState {
    pub fn from_initial(d: &InitialData) -> Self {
        LagrangianState {
            tau: 0.0,
            grid: d.grid.clone(),
            rho: d.rho0.clone(),
            u: d.u0.clone(),
            r: d.r0.clone(),
            a: *d.r0.last().unwrap(),
        }
    }

    pub fn cells(&self) -> usize {
        self.rho.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.cells();
        if self.u.len() != m + 1 || self.r.len() != m + 1 || self.grid.cells() != m {
            return Err(Error::Mismatch(format!(
                "state has {} cells but {} velocities and {} radii",
                m,
                self.u.len(),
                self.r.len()
            )));
        }
        if let Some(j) = self.rho.iter().position(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::DegenerateState(format!(
                "density {} in cell {j}",
                self.rho[j]
            )));
        }
        if let Some(i) = self.u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                field: format!("u[{i}]"),
            });
        }
        if self.r[0] != 0.0 || self.r.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateState("radius not strictly increasing from 0".into()));
        }
        Ok(())
    }
}

/// Time derivatives of every state component.
#[derive(Clone, Debug, PartialEq)]
pub struct Rhs {
    pub drho: Vec<f64>,
    pub du: Vec<f64>,
    pub dr: Vec<f64>,
    pub da: f64,
}

/// Per-cell velocity-gradient quantities.
///
/// `div = (r^{N-1}u)_x`, `hoop = ū/(r̄ρ)` (the discrete `u/(rρ)`), and
/// `strain = div - (N-1) hoop` (the discrete `r^{N-1}u_x`), with `ū` and
/// `r̄` the node averages over the cell. For `N = 2` these satisfy
/// `2 ρ Δx · strain · hoop = u_{j+1}² - u_j²` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct CellKinematics {
    pub div: Vec<f64>,
    pub strain: Vec<f64>,
    pub hoop: Vec<f64>,
}

pub fn cell_kinematics(state: &LagrangianState, p: &Params) -> CellKinematics {
    let m = state.cells();
    let n1 = p.n() - 1.0;
    let (r, u) = (&state.r, &state.u);
    let mut div = Vec::with_capacity(m);
    let mut strain = Vec::with_capacity(m);
    let mut hoop = Vec::with_capacity(m);
    for j in 0..m {
        let d = (pw(r[j + 1], n1) * u[j + 1] - pw(r[j], n1) * u[j]) / state.grid.widths[j];
        let b = 0.5 * (u[j] + u[j + 1]) / (0.5 * (r[j] + r[j + 1]) * state.rho[j]);
        div.push(d);
        hoop.push(b);
        strain.push(d - n1 * b);
    }
    CellKinematics { div, strain, hoop }
}

pub fn semi_discrete_rhs(state: &LagrangianState, p: &Params) -> Result<Rhs> {
    let m = state.cells();
    if let Some(j) = state.rho.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateState(format!(
            "non-positive density {} in cell {j}",
            state.rho[j]
        )));
    }
    let grid = &state.grid;
    let n1 = p.n() - 1.0;
    let (rho, u, r) = (&state.rho, &state.u, &state.r);

    let mut drho = vec![0.0; m];
    let mut stress = vec![0.0; m];
    let mut visc = vec![0.0; m];
    let mut w_left = 0.0;
    for j in 0..m {
        let w_right = pw(r[j + 1], n1) * u[j + 1];
        let d = (w_right - w_left) / grid.widths[j];
        w_left = w_right;
        let rt = pw(rho[j], p.theta);
        drho[j] = -rho[j] * rho[j] * d;
        stress[j] = pw(rho[j], p.gamma) - p.theta * rt * rho[j] * d;
        visc[j] = rt;
    }

    let mut du = vec![0.0; m + 1];
    for i in 1..=m {
        let h = if i < m {
            0.5 * (grid.widths[i - 1] + grid.widths[i])
        } else {
            0.5 * grid.widths[m - 1]
        };
        let (s_right, t_right) = if i < m { (stress[i], visc[i]) } else { (0.0, 0.0) };
        let g = (t_right - visc[i - 1]) / h;
        du[i] = -pw(r[i], n1) * (s_right - stress[i - 1]) / h - n1 * pw(r[i], n1 - 1.0) * g * u[i];
    }

    Ok(Rhs {
        drho,
        dr: u.clone(),
        da: u[m],
        du,
    })
}

/// Exact decay rate of the discrete energy (node-based kinetic part) under
/// the semi-discrete system:
/// `θ Σ Δx ρ^{θ+1} D² - (N-1) Σ ρ_j^θ (q_{j+1} - q_j)` with `q = r^{N-2}u²`.
pub fn scheme_dissipation_rate(state: &LagrangianState, p: &Params) -> f64 {
    let n1 = p.n() - 1.0;
    let k = cell_kinematics(state, p);
    let q = |i: usize| pw(state.r[i], n1 - 1.0) * state.u[i] * state.u[i];
    (0..state.cells())
        .map(|j| {
            let rt = pw(state.rho[j], p.theta);
            p.theta * state.grid.widths[j] * rt * state.rho[j] * k.div[j] * k.div[j]
                - n1 * rt * (q(j + 1) - q(j))
        })
        .sum()
}

fn axpy_state(base: &LagrangianState, k: &Rhs, dt: f64) -> LagrangianState {
    let add = |y: &[f64], dy: &[f64]| y.iter().zip(dy).map(|(y, d)| y + dt * d).collect();
    let mut u: Vec<f64> = add(&base.u, &k.du);
    u[0] = 0.0;
    let mut r: Vec<f64> = add(&base.r, &k.dr);
    r[0] = 0.0;
    LagrangianState {
        tau: base.tau + dt,
        grid: base.grid.clone(),
        rho: add(&base.rho, &k.drho),
        u,
        r,
        a: base.a + dt * k.da,
    }
}

fn density_ok(s: &LagrangianState) -> bool {
    s.rho.iter().all(|&r| r > 0.0 && r.is_finite())
}

/// One Heun (SSP two-stage) step, also returning the intermediate stage.
/// Fails with `DegenerateState` if either stage produces a non-positive
/// density; the caller is expected to retry with a smaller step.
pub(crate) fn step_with_stage(
    state: &LagrangianState,
    dtau: f64,
    p: &Params,
) -> Result<(LagrangianState, LagrangianState)> {
    let k1 = semi_discrete_rhs(state, p)?;
    let stage = axpy_state(state, &k1, dtau);
    if !density_ok(&stage) {
        return Err(Error::DegenerateState("density lost positivity in stage 1".into()));
    }
    let k2 = semi_discrete_rhs(&stage, p)?;
    let second = axpy_state(&stage, &k2, dtau);
    let avg = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut next = LagrangianState {
        tau: state.tau + dtau,
        grid: state.grid.clone(),
        rho: avg(&state.rho, &second.rho),
        u: avg(&state.u, &second.u),
        r: avg(&state.r, &second.r),
        a: 0.5 * (state.a + second.a),
    };
    next.u[0] = 0.0;
    next.r[0] = 0.0;
    if !density_ok(&next) {
        return Err(Error::DegenerateState("density lost positivity in stage 2".into()));
    }
    Ok((next, stage))
}

pub fn step(state: &LagrangianState, dtau: f64, p: &Params) -> Result<LagrangianState> {
    step_with_stage(state, dtau, p).map(|(next, _)| next)
}

/// Stable step size: the smaller of the viscous limit
/// `Δx² / (θ ρ^{θ+1} r^{2(N-1)})` and the acoustic limit
/// `Δx / (ρ^{(γ-1)/2} r^{N-1})` over all cells, times `safety`. The radius
/// is taken at the outer node of each cell.
pub fn cfl_dtau(state: &LagrangianState, p: &Params, safety: f64) -> f64 {
    let n1 = p.n() - 1.0;
    let mut limit = f64::INFINITY;
    for j in 0..state.cells() {
        let dx = state.grid.widths[j];
        let rho = state.rho[j];
        let rn = pw(state.r[j + 1], n1);
        let viscous = dx * dx / (p.theta * pw(rho, p.theta + 1.0) * rn * rn);
        let acoustic = dx / (rho.powf(0.5 * (p.gamma - 1.0)) * rn);
        limit = limit.min(viscous).min(acoustic);
    }
    safety * limit
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonEstimate {
    pub t1a: f64,
    pub t1b: f64,
    /// Stress monitor bound.
    pub m0: f64,
    /// Velocity monitor bound.
    pub m1: f64,
}

/// `T1a = a0/M1` and
/// `T1b = min{T1a, ln 2 / (2 M1 E0^{1/(N(γ-1))} x0^{-γ/(N(γ-1))} + 2 M0)}`.
pub fn horizon_from_energy(e0: f64, p: &Params, m0: f64, m1: f64, x0: f64) -> HorizonEstimate {
    let k = p.n() * (p.gamma - 1.0);
    let t1a = p.a0 / m1;
    let rate = 2.0 * m1 * e0.powf(1.0 / k) * x0.powf(-p.gamma / k) + 2.0 * m0;
    HorizonEstimate {
        t1a,
        t1b: t1a.min(std::f64::consts::LN_2 / rate),
        m0,
        m1,
    }
}

pub fn horizon_estimates(
    data: &InitialData,
    p: &Params,
    m0: f64,
    m1: f64,
    x0: f64,
) -> HorizonEstimate {
    let e0 = energy(&LagrangianState::from_initial(data), p).total;
    horizon_from_energy(e0, p, m0, m1, x0)
}

/// Default monitor bounds from the data:
/// `M0 = 4 max|ρ0 r0^{N-1} u0_x| + 1`, `M1 = 4 max|u0| + E0^{1/2}`.
pub fn default_monitors(data: &InitialData, p: &Params) -> (f64, f64) {
    let s = LagrangianState::from_initial(data);
    let e0 = energy(&s, p).total;
    let k = cell_kinematics(&s, p);
    let stress = s
        .rho
        .iter()
        .zip(&k.strain)
        .map(|(r, a)| (r * a).abs())
        .fold(0.0, f64::max);
    let umax = s.u.iter().map(|u| u.abs()).fold(0.0, f64::max);
    (4.0 * stress + 1.0, 4.0 * umax + e0.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputControl {
    /// Snapshot at every multiple of this time; steps are shortened to land
    /// on the output times exactly.
    Interval(f64),
    EverySteps(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStepControl {
    Adaptive { safety: f64 },
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    pub monitors: HorizonEstimate,
    pub output: OutputControl,
    pub timestep: TimeStepControl,
    /// Monitors are evaluated on `x >= monitor_cut`.
    pub monitor_cut: f64,
    /// The radius lower bounds are divided by this factor before checking.
    pub radius_slack: f64,
}

impl RunOptions {
    pub fn new(horizon: f64, monitors: HorizonEstimate) -> Self {
        RunOptions {
            horizon,
            monitors,
            output: OutputControl::Interval(horizon.max(f64::MIN_POSITIVE) / 16.0),
            timestep: TimeStepControl::Adaptive { safety: 0.4 },
            monitor_cut: 0.25,
            radius_slack: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HaltReason {
    /// The run was aborted before reaching its horizon.
    None,
    MonitorTrip { tau: f64 },
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSample {
    pub tau: f64,
    pub stress_max: f64,
    pub velocity_max: f64,
}

/// Per-step record of the radius bounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundLog {
    pub steps_checked: usize,
    /// Node-steps with `r < c x^{γ/(N(γ-1))}`.
    pub radius_violations: usize,
    /// Steps with `a < c`.
    pub boundary_lower_violations: usize,
    /// Steps with `a > 2 a0` while `τ <= T1a`.
    pub boundary_upper_violations: usize,
    pub min_radius_margin: f64,
    pub min_boundary: f64,
    pub max_boundary: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<LagrangianState>,
    /// Accumulated strain-form dissipation pair at each snapshot.
    pub dissipation_strain: Vec<[f64; 2]>,
    /// Accumulated deviatoric-form dissipation pair at each snapshot.
    pub dissipation_deviatoric: Vec<[f64; 2]>,
    /// Accumulated exact discrete dissipation at each snapshot.
    pub dissipation_scheme: Vec<f64>,
    pub monitor_log: Vec<MonitorSample>,
    pub halted_reason: HaltReason,
    pub bounds: BoundLog,
    pub steps: usize,
    pub max_dtau: f64,
    pub min_dtau: f64,
    pub e0: f64,
    pub monitors: HorizonEstimate,
}

impl Trajectory {
    pub fn final_state(&self) -> &LagrangianState {
        self.snapshots.last().expect("trajectory always holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.tau).collect()
    }
}

/// Largest `|ρ r^{N-1} u_x|` over cells and `|u|` over nodes in `x >= cut`.
pub fn monitor_values(state: &LagrangianState, p: &Params, cut: f64) -> (f64, f64) {
    let k = cell_kinematics(state, p);
    let grid = &state.grid;
    let stress = (0..state.cells())
        .filter(|&j| grid.centers[j] >= cut)
        .map(|j| (state.rho[j] * k.strain[j]).abs())
        .fold(0.0, f64::max);
    let vel = (0..=state.cells())
        .filter(|&i| grid.nodes[i] >= cut)
        .map(|i| state.u[i].abs())
        .fold(0.0, f64::max);
    (stress, vel)
}

struct BoundChecker {
    lower: Vec<f64>,
    c0: f64,
    a_cap: f64,
    t1a: f64,
}

impl BoundChecker {
    fn new(grid: &MassGrid, p: &Params, e0: f64, slack: f64) -> Self {
        let c0 = p.min_boundary_radius(e0) / slack;
        let e = p.radius_exponent();
        BoundChecker {
            lower: grid.nodes.iter().map(|x| c0 * x.powf(e)).collect(),
            c0,
            a_cap: 2.0 * p.a0,
            t1a: 0.0,
        }
    }

    fn record(&self, s: &LagrangianState, log: &mut BoundLog) {
        log.steps_checked += 1;
        for (r, lo) in s.r.iter().zip(&self.lower) {
            let margin = r - lo;
            log.min_radius_margin = log.min_radius_margin.min(margin);
            if margin < 0.0 {
                log.radius_violations += 1;
            }
        }
        if s.a < self.c0 {
            log.boundary_lower_violations += 1;
        }
        if s.tau <= self.t1a && s.a > self.a_cap {
            log.boundary_upper_violations += 1;
        }
        log.min_boundary = log.min_boundary.min(s.a);
        log.max_boundary = log.max_boundary.max(s.a);
    }
}

const MAX_HALVINGS: u32 = 20;

/// Integrate from the initial data until `opts.horizon` or until a monitor
/// trips, whichever comes first.
pub fn run(data: &InitialData, p: &Params, opts: &RunOptions) -> Result<Trajectory> {
    if !(opts.horizon >= 0.0) || !opts.horizon.is_finite() {
        return Err(Error::OutOfRange {
            what: "horizon",
            value: opts.horizon,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    match opts.output {
        OutputControl::Interval(dt) if !(dt > 0.0) => {
            return Err(Error::InvalidParams(format!("output interval must be positive, got {dt}")))
        }
        OutputControl::EverySteps(0) => {
            return Err(Error::InvalidParams("output stride must be positive".into()))
        }
        _ => {}
    }
    let mut state = LagrangianState::from_initial(data);
    state.validate()?;
    let e0 = energy(&state, p).total;
    let mut checker = BoundChecker::new(&state.grid, p, e0, opts.radius_slack);
    checker.t1a = opts.monitors.t1a;

    let mut traj = Trajectory {
        snapshots: vec![state.clone()],
        dissipation_strain: vec![[0.0; 2]],
        dissipation_deviatoric: vec![[0.0; 2]],
        dissipation_scheme: vec![0.0],
        monitor_log: Vec::new(),
        halted_reason: HaltReason::None,
        bounds: BoundLog {
            min_radius_margin: f64::INFINITY,
            min_boundary: f64::INFINITY,
            max_boundary: f64::NEG_INFINITY,
            ..BoundLog::default()
        },
        steps: 0,
        max_dtau: 0.0,
        min_dtau: f64::INFINITY,
        e0,
        monitors: opts.monitors,
    };
    checker.record(&state, &mut traj.bounds);
    let (s0, v0) = monitor_values(&state, p, opts.monitor_cut);
    traj.monitor_log.push(MonitorSample {
        tau: 0.0,
        stress_max: s0,
        velocity_max: v0,
    });

    let mut acc_strain = [0.0; 2];
    let mut acc_dev = [0.0; 2];
    let mut acc_scheme = 0.0;
    let mut rates = rates_of(&state, p);
    let mut next_output = 1usize;

    while state.tau < opts.horizon {
        let mut target = opts.horizon;
        if let OutputControl::Interval(dt) = opts.output {
            let t_out = next_output as f64 * dt;
            if t_out < opts.horizon * (1.0 - 1e-12) {
                target = t_out;
            }
        }
        let base = match opts.timestep {
            TimeStepControl::Adaptive { safety } => cfl_dtau(&state, p, safety),
            TimeStepControl::Fixed(dt) => dt,
        };
        let remaining = target - state.tau;
        // avoid a sliver step just before an output time
        let mut dtau = if base >= remaining * (1.0 - 1e-12) {
            remaining
        } else {
            base
        };

        let mut halvings = 0;
        let (mut next, stage) = loop {
            match step_with_stage(&state, dtau, p) {
                Ok(pair) => break pair,
                Err(Error::DegenerateState(_)) if halvings < MAX_HALVINGS => {
                    dtau *= 0.5;
                    halvings += 1;
                }
                Err(Error::DegenerateState(_)) => {
                    traj.halted_reason = HaltReason::None;
                    let tau = state.tau;
                    push_snapshot(&mut traj, &state, acc_strain, acc_dev, acc_scheme);
                    return Err(Error::StepUnderflow {
                        tau,
                        halvings,
                        partial: Box::new(traj),
                    });
                }
                Err(e) => return Err(e),
            }
        };
        if dtau == remaining {
            next.tau = target;
        }

        let stage_rates = rates_of(&stage, p);
        for k in 0..2 {
            acc_strain[k] += 0.5 * dtau * (rates.strain[k] + stage_rates.strain[k]);
            acc_dev[k] += 0.5 * dtau * (rates.deviatoric[k] + stage_rates.deviatoric[k]);
        }
        acc_scheme += 0.5 * dtau * (rates.scheme + stage_rates.scheme);

        state = next;
        rates = rates_of(&state, p);
        traj.steps += 1;
        traj.max_dtau = traj.max_dtau.max(dtau);
        traj.min_dtau = traj.min_dtau.min(dtau);
        checker.record(&state, &mut traj.bounds);

        let (stress, vel) = monitor_values(&state, p, opts.monitor_cut);
        traj.monitor_log.push(MonitorSample {
            tau: state.tau,
            stress_max: stress,
            velocity_max: vel,
        });
        let tripped = stress > 2.0 * opts.monitors.m0 || vel > opts.monitors.m1;

        let snap_due = match opts.output {
            OutputControl::Interval(_) => {
                let due = state.tau >= target && target < opts.horizon;
                if due {
                    next_output += 1;
                }
                due
            }
            OutputControl::EverySteps(n) => traj.steps % n == 0 && state.tau < opts.horizon,
        };
        if tripped {
            push_snapshot(&mut traj, &state, acc_strain, acc_dev, acc_scheme);
            traj.halted_reason = HaltReason::MonitorTrip { tau: state.tau };
            return Ok(traj);
        }
        if snap_due {
            push_snapshot(&mut traj, &state, acc_strain, acc_dev, acc_scheme);
        }
    }
    if traj.steps > 0 {
        push_snapshot(&mut traj, &state, acc_strain, acc_dev, acc_scheme);
    }
    if traj.min_dtau == f64::INFINITY {
        traj.min_dtau = 0.0;
    }
    traj.halted_reason = HaltReason::Horizon;
    Ok(traj)
}

fn push_snapshot(
    traj: &mut Trajectory,
    s: &LagrangianState,
    strain: [f64; 2],
    dev: [f64; 2],
    scheme: f64,
) {
    if traj.snapshots.last().is_some_and(|last| last.tau == s.tau) {
        return;
    }
    traj.snapshots.push(s.clone());
    traj.dissipation_strain.push(strain);
    traj.dissipation_deviatoric.push(dev);
    traj.dissipation_scheme.push(scheme);
}

struct Rates {
    strain: [f64; 2],
    deviatoric: [f64; 2],
    scheme: f64,
}

fn rates_of(s: &LagrangianState, p: &Params) -> Rates {
    let d = dissipation_increment(s, p);
    Rates {
        strain: d.strain,
        deviatoric: d.deviatoric,
        scheme: scheme_dissipation_rate(s, p),
    }
}

/// Recompute the density from `ρ = ρ0 exp(-∫ ρ (r^{N-1}u)_x dτ)` with the
/// trapezoid rule over the snapshots and return the largest relative
/// deviation from the evolved density.
pub fn density_exponential_crosscheck(traj: &Trajectory, p: &Params) -> Result<f64> {
    let snaps = &traj.snapshots;
    if snaps.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 snapshots, got {}",
            snaps.len()
        )));
    }
    let taus: Vec<f64> = snaps.iter().map(|s| s.tau).collect();
    let rates: Vec<Vec<f64>> = snaps
        .iter()
        .map(|s| {
            let k = cell_kinematics(s, p);
            s.rho.iter().zip(&k.div).map(|(r, d)| r * d).collect()
        })
        .collect();
    let rho0 = &snaps[0].rho;
    let mut worst = 0.0_f64;
    for j in 0..rho0.len() {
        let mut exponent = 0.0;
        for k in 1..snaps.len() {
            exponent += trapezoid(&taus[k - 1..=k], &[rates[k - 1][j], rates[k][j]]);
            let predicted = rho0[j] * (-exponent).exp();
            let actual = snaps[k].rho[j];
            worst = worst.max(((predicted - actual) / actual).abs());
        }
    }
    Ok(worst)
}
