use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Params;
use crate::quadrature::{gl_integrate, pw, smoothstep, smoothstep_derivative, trapezoid};
use crate::report::CheckResult;
use crate::solver::{LagrangianState, Trajectory};

use super::{snapshot_spacing, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunctionKind {
    /// `1 - smoothstep(|ξ - c|/w)`: C² with compact support.
    PolynomialBump,
    /// `cos²(π(ξ - c)/(2w))` on `|ξ - c| < w`.
    Trigonometric,
}

/// One spatial profile in the scaled radius `ξ = r/a(τ)`, supported on
/// `(center - half_width, center + half_width)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: f64,
    pub half_width: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

/// Separable space-time test functions `ψ = B(r/a(τ)) (1 - smoothstep(τ/T))`
/// with `T` the final snapshot time, so every member vanishes at the centre,
/// at the free boundary and at the final time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    pub kind: TestFunctionKind,
    pub members: Vec<TestFunction>,
}

impl Default for TestFunctionFamily {
    fn default() -> Self {
        let tf = |center, half_width| TestFunction {
            center,
            half_width,
            amplitude: 1.0,
        };
        TestFunctionFamily {
            kind: TestFunctionKind::PolynomialBump,
            members: vec![
                tf(0.2, 0.15),
                tf(0.35, 0.15),
                tf(0.5, 0.2),
                tf(0.65, 0.15),
                tf(0.8, 0.12),
                tf(0.9, 0.08),
            ],
        }
    }
}

impl TestFunctionFamily {
    pub fn validate(&self) -> Result<()> {
        for (k, f) in self.members.iter().enumerate() {
            let ok = f.half_width > 0.0
                && f.center - f.half_width > 0.0
                && f.center + f.half_width < 1.0
                && f.amplitude.is_finite();
            if !ok {
                return Err(Error::InvalidParams(format!(
                    "test function {k} (center {}, half width {}) must be supported strictly inside (0, 1)",
                    f.center, f.half_width
                )));
            }
        }
        Ok(())
    }

    /// `(B, B')` at scaled radius `xi`.
    fn spatial(&self, f: &TestFunction, xi: f64) -> (f64, f64) {
        let t = (xi - f.center) / f.half_width;
        if t.abs() >= 1.0 {
            return (0.0, 0.0);
        }
        match self.kind {
            TestFunctionKind::PolynomialBump => (
                f.amplitude * (1.0 - smoothstep(t.abs())),
                -f.amplitude * smoothstep_derivative(t.abs()) * t.signum() / f.half_width,
            ),
            TestFunctionKind::Trigonometric => {
                let c = (0.5 * PI * t).cos();
                (
                    f.amplitude * c * c,
                    -f.amplitude * 0.5 * PI * (PI * t).sin() / f.half_width,
                )
            }
        }
    }
}

/// Values of `ψ` and its derivatives at one point.
struct Eval {
    psi: f64,
    psi_r: f64,
    /// Partial derivative in time at fixed `r`.
    psi_t: f64,
}

struct Frame {
    a: f64,
    da: f64,
    time: f64,
    dtime: f64,
}

impl Frame {
    fn new(s: &LagrangianState, horizon: f64) -> Self {
        let m = s.cells();
        let t = s.tau / horizon;
        Frame {
            a: s.a,
            da: s.u[m],
            time: 1.0 - smoothstep(t),
            dtime: -smoothstep_derivative(t) / horizon,
        }
    }
}

fn eval(fam: &TestFunctionFamily, f: &TestFunction, fr: &Frame, r: f64) -> Eval {
    let (b, db) = fam.spatial(f, r / fr.a);
    Eval {
        psi: b * fr.time,
        psi_r: db / fr.a * fr.time,
        psi_t: -db * r * fr.da / (fr.a * fr.a) * fr.time + b * fr.dtime,
    }
}

/// Velocity inside cell `j` consistent with the scheme: the volume flux
/// `w = r^{N-1}u` is affine in `r^N`, so the divergence `ρ (r^{N-1}u)_x`
/// is constant across the cell. In the centre cell this makes `u` linear
/// in `r`.
struct CellField {
    r0: f64,
    r1: f64,
    rho: f64,
    w0: f64,
    /// `dw / d(r^N)`.
    slope: f64,
    n: f64,
}

impl CellField {
    fn new(s: &LagrangianState, j: usize, n: f64, u: &[f64]) -> Self {
        let (r0, r1) = (s.r[j], s.r[j + 1]);
        let (v0, v1) = (pw(r0, n), pw(r1, n));
        let w0 = pw(r0, n - 1.0) * u[j];
        let w1 = pw(r1, n - 1.0) * u[j + 1];
        CellField {
            r0,
            r1,
            rho: s.rho[j],
            w0,
            slope: (w1 - w0) / (v1 - v0),
            n,
        }
    }

    /// `(u, u_r)` at `r` inside the cell.
    fn velocity(&self, r: f64) -> (f64, f64) {
        let w = self.w0 + self.slope * (pw(r, self.n) - pw(self.r0, self.n));
        let u = w / pw(r, self.n - 1.0);
        (u, self.n * self.slope + (1.0 - self.n) * u / r)
    }

    /// `div U`, constant over the cell.
    fn divergence(&self) -> f64 {
        self.n * self.slope
    }

    /// `∫ f(r) r^{N-1} dr` over the cell.
    fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n1 = self.n - 1.0;
        gl_integrate(|r| f(r) * pw(r, n1), self.r0, self.r1)
    }
}

/// A family member, or the constant test function (no time cutoff) whose
/// shell integrals are taken in closed form.
#[derive(Clone, Copy)]
enum Shape<'a> {
    Member(&'a TestFunctionFamily, &'a TestFunction),
    Constant(f64),
}

impl Shape<'_> {
    fn eval(&self, fr: &Frame, r: f64) -> Eval {
        match *self {
            Shape::Member(fam, f) => eval(fam, f, fr, r),
            Shape::Constant(c) => Eval {
                psi: c,
                psi_r: 0.0,
                psi_t: 0.0,
            },
        }
    }

    /// `∫ ρ ψ r^{N-1} dr` over a cell at the frame time.
    fn mass_moment(&self, cell: &CellField, fr: &Frame) -> f64 {
        match *self {
            Shape::Constant(c) => c * cell.rho * (pw(cell.r1, cell.n) - pw(cell.r0, cell.n)) / cell.n,
            Shape::Member(..) => cell.rho * cell.integrate(|r| self.eval(fr, r).psi),
        }
    }
}

/// Mass-equation residual `∫ρ0ψ(0) - ∫ρψ(T) + ∫∫ ρ(ψ_t + uψ_r)`, every
/// spatial integral taken over the Eulerian shells with the cell-constant
/// density.
fn mass_residual(traj: &Trajectory, p: &Params, shape: Shape, horizon: f64) -> f64 {
    let n = p.n();
    let snaps = &traj.snapshots;
    let taus: Vec<f64> = snaps.iter().map(|s| s.tau).collect();
    let mut flux = Vec::with_capacity(snaps.len());
    let (mut start, mut end) = (0.0, 0.0);
    let last = snaps.len() - 1;
    for (k, s) in snaps.iter().enumerate() {
        let fr = Frame::new(s, horizon);
        let mut total = 0.0;
        let mut value = 0.0;
        for j in 0..s.cells() {
            let cell = CellField::new(s, j, n, &s.u);
            if let Shape::Member(..) = shape {
                total += cell.rho
                    * cell.integrate(|r| {
                        let e = shape.eval(&fr, r);
                        e.psi_t + cell.velocity(r).0 * e.psi_r
                    });
            }
            if k == 0 || k == last {
                value += shape.mass_moment(&cell, &fr);
            }
        }
        flux.push(total);
        if k == 0 {
            start = value;
        }
        if k == last {
            end = value;
        }
    }
    start - end + trapezoid(&taus, &flux)
}

/// Momentum-equation residual: the data term `∫ρ0 u0 ψ(0)` plus the
/// space-time integral of `ρ u Dψ/Dτ + ρ^γ div ψ - (θ-1) ρ^θ div U div ψ
/// - ρ^θ (u_r ψ_r + (N-1) u ψ / r²)` over the Eulerian shells.
fn momentum_residual(traj: &Trajectory, p: &Params, shape: Shape, horizon: f64) -> f64 {
    let n = p.n();
    let n1 = n - 1.0;
    let snaps = &traj.snapshots;
    let integrand = |s: &LagrangianState| -> f64 {
        let fr = Frame::new(s, horizon);
        let mut total = 0.0;
        for j in 0..s.cells() {
            let cell = CellField::new(s, j, n, &s.u);
            let rho = cell.rho;
            let (pressure, visc) = (pw(rho, p.gamma), pw(rho, p.theta));
            let div_u = cell.divergence();
            total += cell.integrate(|r| {
                let e = shape.eval(&fr, r);
                let (u, ur) = cell.velocity(r);
                let div_psi = e.psi_r + n1 * e.psi / r;
                rho * u * (e.psi_t + u * e.psi_r) + pressure * div_psi
                    - (p.theta - 1.0) * visc * div_u * div_psi
                    - visc * (ur * e.psi_r + n1 * u * e.psi / (r * r))
            });
        }
        total
    };
    let taus: Vec<f64> = snaps.iter().map(|s| s.tau).collect();
    let values: Vec<f64> = snaps.iter().map(integrand).collect();
    let s0 = &snaps[0];
    let fr0 = Frame::new(s0, horizon);
    let data: f64 = (0..s0.cells())
        .map(|j| {
            let cell = CellField::new(s0, j, n, &s0.u);
            cell.rho * cell.integrate(|r| cell.velocity(r).0 * shape.eval(&fr0, r).psi)
        })
        .sum();
    data + trapezoid(&taus, &values)
}

fn shell_masses(s: &LagrangianState, n: f64) -> Vec<f64> {
    (0..s.cells())
        .map(|j| s.rho[j] * (pw(s.r[j + 1], n) - pw(s.r[j], n)) / n)
        .collect()
}

/// Residuals per family member plus the constant-test-function mass
/// residual, which equals the shell mass at the start minus at the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakFormResiduals {
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub constant: f64,
}

impl WeakFormResiduals {
    pub fn max_mass(&self) -> f64 {
        self.mass.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_momentum(&self) -> f64 {
        self.momentum.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn weak_form_residuals(
    traj: &Trajectory,
    fam: &TestFunctionFamily,
    p: &Params,
) -> Result<WeakFormResiduals> {
    fam.validate()?;
    let snaps = &traj.snapshots;
    let horizon = snaps.last().map_or(0.0, |s| s.tau);
    if snaps.len() < 2 || !(horizon > 0.0) {
        return Err(Error::InsufficientData(
            "weak-form residuals need at least two snapshots spanning positive time".into(),
        ));
    }
    let mut mass = Vec::with_capacity(fam.members.len());
    let mut momentum = Vec::with_capacity(fam.members.len());
    for f in &fam.members {
        let shape = Shape::Member(fam, f);
        mass.push(mass_residual(traj, p, shape, horizon));
        momentum.push(momentum_residual(traj, p, shape, horizon));
    }
    let constant = mass_residual(traj, p, Shape::Constant(1.0), horizon);
    Ok(WeakFormResiduals {
        mass,
        momentum,
        constant,
    })
}

/// Graded weak-form checks: mass and momentum residuals against
/// `c1 Δx² + c2 Δτ_s²` with `Δτ_s` the snapshot spacing, and the constant
/// test function against the shell-mass defect it must reproduce.
pub fn check_weak_form(
    traj: &Trajectory,
    fam: &TestFunctionFamily,
    p: &Params,
    tol: &Tolerances,
) -> Result<Vec<CheckResult>> {
    let res = weak_form_residuals(traj, fam, p)?;
    let n = p.n();
    let first = shell_masses(&traj.snapshots[0], n).iter().sum::<f64>();
    let last = shell_masses(traj.final_state(), n).iter().sum::<f64>();
    let defect = first - last;
    let bound = tol.identity(traj.snapshots[0].grid.max_width(), snapshot_spacing(traj));
    Ok(vec![
        CheckResult::graded("weak_form.mass", "weak mass equation", res.max_mass(), bound),
        CheckResult::graded("weak_form.momentum", "weak momentum equation", res.max_momentum(), bound),
        CheckResult::graded(
            "weak_form.constant",
            "constant test function reproduces mass defect",
            (res.constant - defect).abs(),
            0.0,
        )
        .with_detail(format!("mass defect {defect:.3e}")),
    ])
}
