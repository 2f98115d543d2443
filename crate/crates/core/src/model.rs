//! Physical parameters, their admissibility conditions, and construction and
//! validation of initial data on the mass grid.
//!
//! Initial data are specified in Eulerian form (density and velocity as
//! functions of radius on `[0, a0]`) and transported onto a uniform mass
//! grid. Cell densities are stored as shell averages
//! `ρ_j = N Δx_j / (r_{j+1}^N - r_j^N)`, so the node radii and cell densities
//! satisfy the discrete mass/volume relation exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coords::MassGrid;
use crate::error::{ensure_finite, Error, Result};
use crate::functionals::RegionSpec;
use crate::quadrature::{power_shell_integral, pw, smoothstep};
use crate::report::{CheckResult, Status, VerificationReport};

fn default_rho_star_lo() -> f64 {
    1.0
}

fn default_rho_star_hi() -> f64 {
    2.0
}

/// Structural constants of the flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Spatial dimension `N` (2 or 3).
    #[serde(alias = "N")]
    pub dim: u32,
    /// Adiabatic exponent, `P = ρ^γ`.
    pub gamma: f64,
    /// Viscosity exponent, `μ = ρ^θ`, `λ = (θ-1)ρ^θ`.
    pub theta: f64,
    /// Eulerian vacuum rate: `ρ ~ (a - r)^σ` at the free boundary.
    pub sigma: f64,
    /// Moment integer.
    pub m: u32,
    /// Lower pinch constant.
    #[serde(default = "default_rho_star_lo")]
    pub rho_star_lo: f64,
    /// Upper pinch constant.
    #[serde(default = "default_rho_star_hi")]
    pub rho_star_hi: f64,
    /// Initial free-boundary radius.
    pub a0: f64,
}

impl Params {
    /// Viscous shallow-water configuration: `N = 2, γ = 2, θ = 1`.
    pub fn saint_venant() -> Self {
        Params {
            dim: 2,
            gamma: 2.0,
            theta: 1.0,
            sigma: 0.5,
            m: 2,
            rho_star_lo: 1.0,
            rho_star_hi: 4.0,
            a0: 1.0,
        }
    }

    /// Lagrangian vacuum rate `β = σ / (1 + σ)`: `ρ ~ (1 - x)^β`.
    pub fn beta(&self) -> f64 {
        self.sigma / (1.0 + self.sigma)
    }

    pub fn n(&self) -> f64 {
        self.dim as f64
    }

    /// Exponent of `x` in the lower radius bound, `γ / (N(γ - 1))`.
    pub fn radius_exponent(&self) -> f64 {
        self.gamma / (self.n() * (self.gamma - 1.0))
    }

    /// `E0^{-1/(N(γ-1))}`: the guaranteed lower bound on the free-boundary
    /// radius given the initial energy.
    pub fn min_boundary_radius(&self, e0: f64) -> f64 {
        e0.powf(-1.0 / (self.n() * (self.gamma - 1.0)))
    }

    /// Admissible open interval for the boundary integrability exponent
    /// `λ0`: `(1, min{4m/(4mβ+1), 1/(β(θ+1))})`.
    pub fn lambda0_interval(&self) -> (f64, f64) {
        let beta = self.beta();
        let m4 = 4.0 * self.m as f64;
        let hi = (m4 / (m4 * beta + 1.0)).min(1.0 / (beta * (self.theta + 1.0)));
        (1.0, hi)
    }

    /// Midpoint of [`Params::lambda0_interval`].
    pub fn default_lambda0(&self) -> f64 {
        let (lo, hi) = self.lambda0_interval();
        0.5 * (lo + hi)
    }

    fn check_finite(&self) -> Result<()> {
        ensure_finite("gamma", self.gamma)?;
        ensure_finite("theta", self.theta)?;
        ensure_finite("sigma", self.sigma)?;
        ensure_finite("rho_star_lo", self.rho_star_lo)?;
        ensure_finite("rho_star_hi", self.rho_star_hi)?;
        ensure_finite("a0", self.a0)
    }
}

/// A strict inequality `lhs < rhs` that failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub violations: Vec<Violation>,
    pub derived: BTreeMap<String, f64>,
}

impl AdmissibilityReport {
    pub fn violated(&self, constraint: &str) -> bool {
        self.violations.iter().any(|v| v.constraint == constraint)
    }
}

/// Evaluate the structural constraints and the three admissibility groups:
///
/// * `A1`: `(N-1)/N < θ < γ`, `γ > 1`
/// * `A2`: `1/(2γ) < β < min{1/(2θ), 1/(1+θ)}`, `β(θ-1) < 1/3`
/// * `A3`: `m > max{1/(1+βθ-β), 1/(4-4β)}`
///
/// All comparisons are strict.
pub fn validate_params(p: &Params) -> Result<AdmissibilityReport> {
    p.check_finite()?;
    let n = p.n();
    let beta = p.beta();
    let mut violations = Vec::new();
    fn need(v: &mut Vec<Violation>, id: &str, lhs: f64, rhs: f64) {
        if !(lhs < rhs) {
            v.push(Violation {
                constraint: id.to_string(),
                lhs,
                rhs,
            });
        }
    }

    if p.dim != 2 && p.dim != 3 {
        violations.push(Violation {
            constraint: "dim".into(),
            lhs: n,
            rhs: f64::NAN,
        });
    }
    need(&mut violations, "sigma.positive", 0.0, p.sigma);
    need(&mut violations, "a0.positive", 0.0, p.a0);
    need(&mut violations, "rho_star.positive", 0.0, p.rho_star_lo);
    if p.rho_star_lo > p.rho_star_hi {
        violations.push(Violation {
            constraint: "rho_star.ordered".into(),
            lhs: p.rho_star_lo,
            rhs: p.rho_star_hi,
        });
    }

    let theta_lo = (n - 1.0) / n;
    need(&mut violations, "A1.theta_lower", theta_lo, p.theta);
    need(&mut violations, "A1.theta_upper", p.theta, p.gamma);
    need(&mut violations, "A1.gamma", 1.0, p.gamma);

    let beta_lo = 1.0 / (2.0 * p.gamma);
    let beta_hi = (1.0 / (2.0 * p.theta)).min(1.0 / (1.0 + p.theta));
    need(&mut violations, "A2.beta_lower", beta_lo, beta);
    need(&mut violations, "A2.beta_upper", beta, beta_hi);
    need(&mut violations, "A2.beta_theta", beta * (p.theta - 1.0), 1.0 / 3.0);

    let m_lo = (1.0 / (1.0 + beta * p.theta - beta)).max(1.0 / (4.0 - 4.0 * beta));
    need(&mut violations, "A3.m", m_lo, p.m as f64);

    let (_, lambda_hi) = p.lambda0_interval();
    let derived = BTreeMap::from([
        ("beta".to_string(), beta),
        ("theta_lower".to_string(), theta_lo),
        ("beta_lower".to_string(), beta_lo),
        ("beta_upper".to_string(), beta_hi),
        ("m_lower".to_string(), m_lo),
        ("lambda0_upper".to_string(), lambda_hi),
    ]);

    Ok(AdmissibilityReport {
        admissible: violations.is_empty(),
        violations,
        derived,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityProfile {
    /// `ρ0(r) = K (a0 - r)^σ` with `K` fixed by unit mass.
    PowerLaw,
    /// `ρ0 = N / a0^N`. No vacuum at the boundary; only meaningful for
    /// coordinate-transform tests.
    Uniform,
}

/// Radial velocity profiles, written in terms of `ξ = r / a0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VelocityProfile {
    Zero,
    /// `amplitude · ξ`
    Linear { amplitude: f64 },
    /// Smooth step from 0 to `amplitude` across `[center - width/2, center + width/2]`.
    Ramp {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Quintic bump of half-width `width` centred at `center`.
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Constant { value: f64 },
}

impl VelocityProfile {
    pub fn eval(&self, xi: f64) -> f64 {
        match *self {
            VelocityProfile::Zero => 0.0,
            VelocityProfile::Linear { amplitude } => amplitude * xi,
            VelocityProfile::Ramp {
                amplitude,
                center,
                width,
            } => amplitude * smoothstep((xi - center) / width + 0.5),
            VelocityProfile::Bump {
                amplitude,
                center,
                width,
            } => amplitude * (1.0 - smoothstep((xi - center).abs() / width)),
            VelocityProfile::Constant { value } => value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub density: DensityProfile,
    #[serde(default = "zero_velocity")]
    pub velocity: VelocityProfile,
    /// Added on top of `velocity`; used for perturbation experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<VelocityProfile>,
}

fn zero_velocity() -> VelocityProfile {
    VelocityProfile::Zero
}

impl ProfileSpec {
    pub fn power_law(velocity: VelocityProfile) -> Self {
        ProfileSpec {
            density: DensityProfile::PowerLaw,
            velocity,
            perturbation: None,
        }
    }

    pub fn uniform(velocity: VelocityProfile) -> Self {
        ProfileSpec {
            density: DensityProfile::Uniform,
            velocity,
            perturbation: None,
        }
    }

    fn velocity_at(&self, xi: f64) -> f64 {
        self.velocity.eval(xi) + self.perturbation.as_ref().map_or(0.0, |p| p.eval(xi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    PowerLaw,
    /// Pinch bounds are not required for this profile.
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialData {
    pub grid: Arc<MassGrid>,
    /// Density per cell.
    pub rho0: Vec<f64>,
    /// Velocity per node.
    pub u0: Vec<f64>,
    /// Radius per node.
    pub r0: Vec<f64>,
    pub profile_kind: ProfileKind,
    /// `∫ r^{N-1} ρ0 dr` over the shells of the grid.
    pub normalized_mass: f64,
    /// Amplitude `K` of a power-law profile.
    pub amplitude: Option<f64>,
}

/// Mass fraction outside radius `a0 - s` for `ρ = K (a0 - r)^σ`.
fn power_law_tail_mass(p: &Params, k: f64, s: f64) -> f64 {
    k * power_shell_integral(p.a0, p.sigma, p.dim - 1, 0.0, s)
}

/// Build initial data for `profile` on a uniform mass grid of `cells` cells.
pub fn make_initial_data(p: &Params, profile: &ProfileSpec, cells: usize) -> Result<InitialData> {
    if cells < 2 {
        return Err(Error::InvalidProfile(format!(
            "need at least 2 cells, got {cells}"
        )));
    }
    let grid = Arc::new(MassGrid::uniform(cells));
    let n = p.n();
    let m = cells;

    let (r0, kind, amplitude) = match profile.density {
        DensityProfile::PowerLaw => {
            let report = validate_params(p)?;
            if !report.admissible {
                let ids: Vec<_> = report
                    .violations
                    .iter()
                    .map(|v| v.constraint.as_str())
                    .collect();
                return Err(Error::InvalidParams(format!(
                    "power-law data requires admissible parameters; violated: {}",
                    ids.join(", ")
                )));
            }
            let total = power_shell_integral(p.a0, p.sigma, p.dim - 1, 0.0, p.a0);
            if !total.is_finite() || total <= 0.0 {
                return Err(Error::InvalidProfile(format!(
                    "mass integral of the power-law profile is {total}"
                )));
            }
            let k = 1.0 / total;
            let mut r0 = vec![0.0; m + 1];
            r0[m] = p.a0;
            for i in 1..m {
                let tail = 1.0 - grid.nodes[i];
                // invert the monotone tail mass s -> K F(s)
                let (mut lo, mut hi) = (0.0, p.a0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if power_law_tail_mass(p, k, mid) < tail {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= f64::EPSILON * p.a0 {
                        break;
                    }
                }
                r0[i] = p.a0 - 0.5 * (lo + hi);
            }
            (r0, ProfileKind::PowerLaw, Some(k))
        }
        DensityProfile::Uniform => {
            let r0 = grid
                .nodes
                .iter()
                .map(|x| p.a0 * x.powf(1.0 / n))
                .collect::<Vec<_>>();
            (r0, ProfileKind::Custom, None)
        }
    };

    let rho0: Vec<f64> = match profile.density {
        DensityProfile::Uniform => vec![n / pw(p.a0, n); m],
        DensityProfile::PowerLaw => (0..m)
            .map(|j| n * grid.widths[j] / (pw(r0[j + 1], n) - pw(r0[j], n)))
            .collect(),
    };
    for (j, rho) in rho0.iter().enumerate() {
        if !rho.is_finite() || *rho <= 0.0 {
            return Err(Error::InvalidProfile(format!(
                "cell {j} has density {rho}; grid too fine for the root solve"
            )));
        }
    }

    let u0: Vec<f64> = r0.iter().map(|r| profile.velocity_at(r / p.a0)).collect();
    if u0[0] != 0.0 {
        return Err(Error::BoundaryCondition(format!(
            "centre velocity must vanish, got u0(0) = {}",
            u0[0]
        )));
    }
    if let Some(bad) = u0.iter().position(|u| !u.is_finite()) {
        return Err(Error::NonFinite {
            field: format!("u0[{bad}]"),
        });
    }

    if kind == ProfileKind::PowerLaw {
        for j in 0..m {
            let (lower, upper) = eulerian_pinch(p, p.a0, r0[j], r0[j + 1]);
            if rho0[j] < lower || rho0[j] > upper {
                return Err(Error::PinchViolation {
                    cell: j,
                    value: rho0[j],
                    lower,
                    upper,
                });
            }
        }
    }

    let normalized_mass = shell_mass(p, &rho0, &r0);
    Ok(InitialData {
        grid,
        rho0,
        u0,
        r0,
        profile_kind: kind,
        normalized_mass,
        amplitude,
    })
}

/// `Σ_j ρ_j (r_{j+1}^N - r_j^N) / N`: exact integral of `r^{N-1}ρ` for
/// shell-constant density.
pub fn shell_mass(p: &Params, rho: &[f64], r: &[f64]) -> f64 {
    let n = p.n();
    rho.iter()
        .enumerate()
        .map(|(j, rho)| rho * (pw(r[j + 1], n) - pw(r[j], n)) / n)
        .sum()
}

/// Range of the Eulerian pinch envelope `[ρ_*(a-r)^σ, ρ^*(a-r)^σ]` over the
/// shell `[r_in, r_out]`. A shell average of a profile inside the pinch must
/// lie inside this range.
fn eulerian_pinch(p: &Params, a: f64, r_in: f64, r_out: f64) -> (f64, f64) {
    let lower = p.rho_star_lo * (a - r_out).max(0.0).powf(p.sigma);
    let upper = p.rho_star_hi * (a - r_in).max(0.0).powf(p.sigma);
    (lower, upper)
}

/// Constants `(c_lo, c_hi)` with `c_lo (1-x)^β ≤ ρ0(x) ≤ c_hi (1-x)^β` for
/// any profile satisfying the Eulerian pinch with `(ρ_*, ρ^*, σ)`.
///
/// From `1 - x = ∫_r^{a0} ρ y^{N-1} dy` one gets
/// `ρ^* a0^{N-1} s^{1+σ}/(1+σ) ≥ 1 - x ≥ ρ_* c s^{1+σ}` with `s = a0 - r` and
/// `c = ∫_0^{a0} t^σ (a0 - t)^{N-1} dt / a0^{1+σ}`.
pub fn lagrangian_pinch_constants(p: &Params) -> (f64, f64) {
    let beta = p.beta();
    let upper_mass = p.rho_star_hi * p.a0.powi(p.dim as i32 - 1) / (1.0 + p.sigma);
    let c = power_shell_integral(p.a0, p.sigma, p.dim - 1, 0.0, p.a0) / p.a0.powf(1.0 + p.sigma);
    let lo = p.rho_star_lo * upper_mass.powf(-beta);
    let hi = p.rho_star_hi * (p.rho_star_lo * c).powf(-beta);
    (lo, hi)
}

/// Check a set of initial data against the unit-mass, centre-velocity,
/// pinch and weighted-integrability requirements. Never errors; every
/// failure is reported.
pub fn validate_initial_data(d: &InitialData, p: &Params) -> VerificationReport {
    let mut report = VerificationReport::default();
    let grid = &d.grid;
    let m = d.rho0.len();

    let shape_ok = grid.nodes.len() == m + 1
        && d.u0.len() == m + 1
        && d.r0.len() == m + 1
        && grid.validate().is_ok();
    report.push(
        CheckResult::graded("grid", "mass grid", if shape_ok { 0.0 } else { 1.0 }, 0.0)
            .with_detail(if shape_ok {
                String::new()
            } else {
                "nodes must increase strictly from 0 to 1 and match the field lengths".into()
            }),
    );
    if !shape_ok {
        return report;
    }

    let mass = shell_mass(p, &d.rho0, &d.r0);
    report.push(
        CheckResult::graded("mass", "unit mass", (mass - 1.0).abs(), 1e-10)
            .with_detail(format!("mass = {mass}")),
    );

    report.push(CheckResult::graded(
        "centre_velocity",
        "centre Dirichlet condition",
        d.u0[0].abs(),
        0.0,
    ));

    if d.profile_kind == ProfileKind::PowerLaw {
        let mut worst = 0.0_f64;
        let mut worst_cell = None;
        for j in 0..m {
            let (lo, hi) = eulerian_pinch(p, p.a0, d.r0[j], d.r0[j + 1]);
            let excess = (lo - d.rho0[j]).max(d.rho0[j] - hi).max(0.0);
            if excess > worst || (excess.is_nan() && worst_cell.is_none()) {
                worst = excess;
                worst_cell = Some(j);
            }
        }
        report.push(
            CheckResult::graded("pinch_eulerian", "Eulerian vacuum pinch", worst, 0.0)
                .with_detail(worst_cell.map_or(String::new(), |j| format!("worst cell {j}"))),
        );

        let (c_lo, c_hi) = lagrangian_pinch_constants(p);
        let beta = p.beta();
        let mut worst = 0.0_f64;
        let mut detail = String::new();
        for j in 0..m {
            let lo = c_lo * (1.0 - grid.nodes[j + 1]).max(0.0).powf(beta);
            let hi = c_hi * (1.0 - grid.nodes[j]).powf(beta);
            let rho = d.rho0[j];
            let (excess, side) = if rho < lo || (j + 1 < m && rho <= 0.0) {
                ((lo - rho).max(f64::MIN_POSITIVE), "lower")
            } else if rho > hi {
                (rho - hi, "upper")
            } else {
                (0.0, "")
            };
            if excess > worst {
                worst = excess;
                detail = format!("{side}-bound failure at cell {j}");
            }
        }
        report.push(
            CheckResult::graded("pinch_lagrangian", "Lagrangian vacuum pinch", worst, 0.0)
                .with_detail(detail),
        );
    } else {
        for id in ["pinch_eulerian", "pinch_lagrangian"] {
            report.push(
                CheckResult::graded(id, "vacuum pinch", 0.0, 0.0)
                    .with_status(Status::Skipped)
                    .with_detail("custom profile"),
            );
        }
    }

    let x2 = RegionSpec::default().x2;
    let norms = weighted_data_norms(d, p, x2);
    let bad: Vec<&str> = norms
        .iter()
        .filter(|(_, v)| !v.is_finite())
        .map(|(k, _)| *k)
        .collect();
    report.push(
        CheckResult::graded(
            "weighted_norms",
            "weighted data integrability",
            if bad.is_empty() { 0.0 } else { f64::INFINITY },
            0.0,
        )
        .with_detail(if bad.is_empty() {
            String::new()
        } else {
            format!("non-finite: {}", bad.join(", "))
        }),
    );
    report
}

/// Discrete versions of the weighted norms the data must keep finite.
fn weighted_data_norms(d: &InitialData, p: &Params, x2: f64) -> Vec<(&'static str, f64)> {
    let grid = &d.grid;
    let m = d.rho0.len();
    let n1 = p.n() - 1.0;
    let u = &d.u0;
    let r = &d.r0;

    let mut u4m = 0.0;
    let mut stress_flux = 0.0;
    let mut weighted_h1 = 0.0;
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    // cell-centred ρ^{1+θ} r^{N-1} u_x and ρ^{1/2} r^{N-1} u
    let flux: Vec<f64> = (0..m)
        .map(|j| {
            let rc = 0.5 * (r[j] + r[j + 1]);
            pw(d.rho0[j], 1.0 + p.theta) * pw(rc, n1) * (u[j + 1] - u[j]) / grid.widths[j]
        })
        .collect();
    let amp: Vec<f64> = (0..m)
        .map(|j| {
            let rc = 0.5 * (r[j] + r[j + 1]);
            d.rho0[j].sqrt() * pw(rc, n1) * 0.5 * (u[j] + u[j + 1])
        })
        .collect();
    for j in 0..m {
        let dx = grid.widths[j];
        let ubar = 0.5 * (u[j] + u[j + 1]);
        kinetic += dx * ubar * ubar;
        potential += dx * pw(d.rho0[j], p.gamma - 1.0);
        if grid.centers[j] >= x2 {
            u4m += dx * ubar.powi(4 * p.m as i32);
            weighted_h1 += dx * amp[j] * amp[j];
            if j + 1 < m {
                let dxc = grid.centers[j + 1] - grid.centers[j];
                let g = (flux[j + 1] - flux[j]) / dxc;
                let a = (amp[j + 1] - amp[j]) / dxc;
                stress_flux += dxc * g * g;
                weighted_h1 += dxc * a * a;
            }
        }
    }
    vec![
        ("u0^{4m}", u4m),
        ("stress flux derivative", stress_flux),
        ("weighted momentum H1", weighted_h1),
        ("u0 L2", kinetic),
        ("rho0^{gamma-1} L1", potential),
    ]
}
