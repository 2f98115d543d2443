//! Scalar functionals of a Lagrangian state: energy, dissipation rates,
//! the BD effective velocity and entropy, velocity moments, mass and the
//! margins to the a-priori bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coords::{eulerian_mass, Reconstruction};
use crate::error::{Error, Result};
use crate::model::{shell_mass, Params};
use crate::quadrature::{gl_integrate, pw, smoothstep};
use crate::solver::{cell_kinematics, LagrangianState, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub x0: f64,
    pub x2: f64,
    pub x1: f64,
    /// Plateau end of the BD entropy cutoff.
    pub bd_cut: f64,
    /// Relative ramp width of the cutoff: it falls from 1 at `bd_cut` to 0
    /// at `(1 + ramp) bd_cut`. Zero gives a sharp cut.
    pub ramp: f64,
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec {
            x0: 0.25,
            x2: 0.5,
            x1: 0.75,
            bd_cut: 0.9,
            ramp: 0.05,
        }
    }
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.x0 && self.x0 < self.x2 && self.x2 < self.x1 && self.x1 < 1.0) {
            return Err(Error::InvalidParams(format!(
                "cut points must satisfy 0 < x0 < x2 < x1 < 1, got ({}, {}, {})",
                self.x0, self.x2, self.x1
            )));
        }
        if !(self.ramp >= 0.0) {
            return Err(Error::InvalidParams(format!("ramp must be >= 0, got {}", self.ramp)));
        }
        if !(self.bd_cut > 0.0 && self.cutoff_end() < 1.0) {
            return Err(Error::OutOfRange {
                what: "BD cutoff support end",
                value: self.cutoff_end(),
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(())
    }

    pub fn cutoff_end(&self) -> f64 {
        (1.0 + self.ramp) * self.bd_cut
    }

    pub fn cutoff(&self, x: f64) -> f64 {
        if x <= self.bd_cut {
            1.0
        } else if self.ramp == 0.0 {
            0.0
        } else {
            1.0 - smoothstep((x - self.bd_cut) / (self.ramp * self.bd_cut))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub internal: f64,
    pub total: f64,
}

/// `∫ (u²/2 + ρ^{γ-1}/(γ-1)) dx` by the cell midpoint rule, with the
/// velocity averaged from the two nodes of each cell.
pub fn energy(state: &LagrangianState, p: &Params) -> EnergyParts {
    let mut kinetic = 0.0;
    let mut internal = 0.0;
    for j in 0..state.cells() {
        let dx = state.grid.widths[j];
        let ubar = 0.5 * (state.u[j] + state.u[j + 1]);
        kinetic += 0.5 * dx * ubar * ubar;
        internal += dx * pw(state.rho[j], p.gamma - 1.0);
    }
    internal /= p.gamma - 1.0;
    EnergyParts {
        kinetic,
        internal,
        total: kinetic + internal,
    }
}

/// Instantaneous dissipation rates in the two printed decompositions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationRates {
    /// `c(N-1) ∫ ρ^{θ-1} u²/r²` and `c ∫ ρ^{θ+1} (r^{N-1}u_x)²`,
    /// `c = 1 - N(1-θ)`.
    pub strain: [f64; 2],
    /// `(θ-1+1/N) ∫ ρ^{θ+1} ((r^{N-1}u)_x)²` and
    /// `((N-1)/N) ∫ ρ^{θ+1} (r^{N-1}u_x - u/(rρ))²`.
    pub deviatoric: [f64; 2],
}

pub fn dissipation_increment(state: &LagrangianState, p: &Params) -> DissipationRates {
    let n = p.n();
    let k = cell_kinematics(state, p);
    let c = 1.0 - n * (1.0 - p.theta);
    let mut hoop = 0.0;
    let mut strain = 0.0;
    let mut div = 0.0;
    let mut dev = 0.0;
    for j in 0..state.cells() {
        let w = state.grid.widths[j] * pw(state.rho[j], p.theta + 1.0);
        let (a, b, d) = (k.strain[j], k.hoop[j], k.div[j]);
        hoop += w * b * b;
        strain += w * a * a;
        div += w * d * d;
        dev += w * (a - b) * (a - b);
    }
    DissipationRates {
        strain: [c * (n - 1.0) * hoop, c * strain],
        deviatoric: [(p.theta - 1.0 + 1.0 / n) * div, (n - 1.0) / n * dev],
    }
}

/// Nodal `r^{N-1} (ρ^θ)_x`: centred across each interior node, one-sided
/// from the two nearest cells at the centre and at the boundary node.
pub fn bd_gradient(state: &LagrangianState, p: &Params) -> Vec<f64> {
    let m = state.cells();
    let g = &state.grid;
    let n1 = p.n() - 1.0;
    let t: Vec<f64> = state.rho.iter().map(|r| pw(*r, p.theta)).collect();
    (0..=m)
        .map(|i| {
            let d = if i == 0 {
                (t[1] - t[0]) / (g.centers[1] - g.centers[0])
            } else if i == m {
                (t[m - 1] - t[m - 2]) / (g.centers[m - 1] - g.centers[m - 2])
            } else {
                (t[i] - t[i - 1]) / (g.centers[i] - g.centers[i - 1])
            };
            pw(state.r[i], n1) * d
        })
        .collect()
}

/// `v = u + r^{N-1} (ρ^θ)_x` per node.
pub fn bd_effective_velocity(state: &LagrangianState, p: &Params) -> Vec<f64> {
    bd_gradient(state, p)
        .iter()
        .zip(&state.u)
        .map(|(g, u)| u + g)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BdEntropy {
    /// `∫ φ ((ρ^θ)_x r^{N-1})² dx` with the region cutoff `φ`.
    pub value: f64,
    /// `∫_0^{x_cut} (u² + ((ρ^θ)_x r^{N-1})²) dx + ∫ ρ^{γ-1} dx` of the same
    /// state; evaluated on the initial state this is the budget the entropy
    /// is bounded by.
    pub budget: f64,
}

/// Cutoff-weighted BD entropy. The nodal gradient is interpolated linearly
/// and its square integrated exactly against the cutoff by Gauss-Legendre.
pub fn bd_entropy(state: &LagrangianState, region: &RegionSpec, p: &Params) -> Result<BdEntropy> {
    if !(region.cutoff_end() < 1.0) {
        return Err(Error::OutOfRange {
            what: "BD cutoff support end",
            value: region.cutoff_end(),
            lo: 0.0,
            hi: 1.0,
        });
    }
    let f = bd_gradient(state, p);
    let nodes = &state.grid.nodes;
    let end = region.cutoff_end();
    let cut = region.bd_cut;
    let mut value = 0.0;
    let mut sq = 0.0;
    let mut kin = 0.0;
    for i in 0..state.cells() {
        let (x0, x1) = (nodes[i], nodes[i + 1]);
        if x0 >= end {
            break;
        }
        let interp = |x: f64, v: &[f64]| v[i] + (v[i + 1] - v[i]) * (x - x0) / (x1 - x0);
        let phi_f2 = |x: f64| {
            let g = interp(x, &f);
            region.cutoff(x) * g * g
        };
        let hi = x1.min(end);
        if x0 < cut && cut < hi {
            value += gl_integrate(phi_f2, x0, cut) + gl_integrate(phi_f2, cut, hi);
        } else {
            value += gl_integrate(phi_f2, x0, hi);
        }
        let top = x1.min(cut);
        if x0 < top {
            sq += gl_integrate(|x| interp(x, &f).powi(2), x0, top);
            kin += gl_integrate(|x| interp(x, &state.u).powi(2), x0, top);
        }
    }
    let internal: f64 = state
        .rho
        .iter()
        .zip(&state.grid.widths)
        .map(|(r, dx)| dx * pw(*r, p.gamma - 1.0))
        .sum();
    Ok(BdEntropy {
        value,
        budget: kin + sq + internal,
    })
}

/// `∫_{x2}^1 u^{2k} dx`, cell midpoint rule with node-averaged velocity.
pub fn velocity_moments(
    state: &LagrangianState,
    region: &RegionSpec,
    p: &Params,
    k: u32,
) -> Result<f64> {
    if k < 1 || k > 2 * p.m {
        return Err(Error::OutOfRange {
            what: "moment index",
            value: k as f64,
            lo: 1.0,
            hi: (2 * p.m) as f64,
        });
    }
    let nodes = &state.grid.nodes;
    let mut total = 0.0;
    for j in 0..state.cells() {
        let lo = nodes[j].max(region.x2);
        if lo >= nodes[j + 1] {
            continue;
        }
        let ubar = 0.5 * (state.u[j] + state.u[j + 1]);
        total += (nodes[j + 1] - lo) * ubar.powi(2 * k as i32);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundMargins {
    /// Smallest `r - c x^{γ/(N(γ-1))}` over nodes away from the centre,
    /// with `c = E0^{-1/(N(γ-1))}`. At the centre the margin is 0.
    pub radius_margin_min: f64,
    /// `a - c`.
    pub boundary_lower_margin: f64,
    /// `2 a0 - a`.
    pub boundary_upper_margin: f64,
    pub density_ratio_min: f64,
    pub density_ratio_max: f64,
    /// Extremes of `ρ_j / (a - r̂_j)^σ` at the reconstruction points, to be
    /// compared with `ρ_*/2` and `2ρ^*`.
    pub eulerian_coefficient_min: f64,
    pub eulerian_coefficient_max: f64,
}

impl BoundMargins {
    pub fn density_ratio_ok(&self) -> bool {
        self.density_ratio_min >= 0.5 && self.density_ratio_max <= 2.0
    }

    pub fn eulerian_envelope_ok(&self, p: &Params) -> bool {
        self.eulerian_coefficient_min >= 0.5 * p.rho_star_lo
            && self.eulerian_coefficient_max <= 2.0 * p.rho_star_hi
    }
}

pub fn bound_margins(
    state: &LagrangianState,
    initial: &LagrangianState,
    p: &Params,
    e0: f64,
) -> Result<BoundMargins> {
    if state.cells() != initial.cells() {
        return Err(Error::Mismatch("state and initial state grids differ".into()));
    }
    let c = p.min_boundary_radius(e0);
    let e = p.radius_exponent();
    let radius_margin_min = state
        .grid
        .nodes
        .iter()
        .zip(&state.r)
        .skip(1)
        .map(|(x, r)| r - c * x.powf(e))
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (r, r0) in state.rho.iter().zip(&initial.rho) {
        let q = r / r0;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    let rec = Reconstruction::new(state, p)?;
    let (mut elo, mut ehi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (rho, rh) in state.rho.iter().zip(&rec.rhat) {
        let q = rho / (state.a - rh).powf(p.sigma);
        elo = elo.min(q);
        ehi = ehi.max(q);
    }
    Ok(BoundMargins {
        radius_margin_min,
        boundary_lower_margin: state.a - c,
        boundary_upper_margin: 2.0 * p.a0 - state.a,
        density_ratio_min: lo,
        density_ratio_max: hi,
        eulerian_coefficient_min: elo,
        eulerian_coefficient_max: ehi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    /// `Σ Δx`; 1 by construction on a valid grid.
    pub lagrangian: f64,
    /// `Σ ρ_j (r_{j+1}^N - r_j^N)/N`.
    pub shell: f64,
    /// Mass of the Eulerian reconstruction.
    pub eulerian: f64,
}

pub fn mass(state: &LagrangianState, p: &Params) -> Result<MassReport> {
    Ok(MassReport {
        lagrangian: state.grid.widths.iter().sum(),
        shell: shell_mass(p, &state.rho, &state.r),
        eulerian: eulerian_mass(state, p)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub tau: f64,
    pub energy: EnergyParts,
    pub dissipation_strain: [f64; 2],
    pub dissipation_deviatoric: [f64; 2],
    pub mass: MassReport,
    pub bd_entropy: BdEntropy,
    pub moments: BTreeMap<u32, f64>,
    pub margins: BoundMargins,
}

/// Functionals of snapshot `index` of a trajectory.
pub fn functional_report(
    traj: &Trajectory,
    index: usize,
    region: &RegionSpec,
    p: &Params,
) -> Result<FunctionalReport> {
    let s = traj.snapshots.get(index).ok_or_else(|| {
        Error::OutOfRange {
            what: "snapshot index",
            value: index as f64,
            lo: 0.0,
            hi: traj.snapshots.len() as f64 - 1.0,
        }
    })?;
    let moments = (1..=2 * p.m)
        .map(|k| Ok((k, velocity_moments(s, region, p, k)?)))
        .collect::<Result<_>>()?;
    Ok(FunctionalReport {
        tau: s.tau,
        energy: energy(s, p),
        dissipation_strain: traj.dissipation_strain[index],
        dissipation_deviatoric: traj.dissipation_deviatoric[index],
        mass: mass(s, p)?,
        bd_entropy: bd_entropy(s, region, p)?,
        moments,
        margins: bound_margins(s, &traj.snapshots[0], p, traj.e0)?,
    })
}
