use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Params;
use crate::quadrature::{ls_slope, pw};
use crate::solver::{LagrangianState, Trajectory};

/// Weighted distance between two solutions on the same mass grid:
/// `∫ω²` with `ω = u1 - u2`, `∫ρ1^{θ-1} R²` with `R = r1/r2 - 1`, and
/// `∫_0^{x_cut} ρ1^{θ-3} ϱ²` with `ϱ = ρ1 - ρ2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeparationFunctional {
    pub omega2: f64,
    pub r2w: f64,
    pub rho2w: f64,
    pub g: f64,
}

fn same_grid(a: &LagrangianState, b: &LagrangianState) -> bool {
    a.grid.nodes == b.grid.nodes
}

pub fn separation_functional(
    s1: &LagrangianState,
    s2: &LagrangianState,
    x_cut: f64,
    p: &Params,
) -> Result<SeparationFunctional> {
    if !same_grid(s1, s2) {
        return Err(Error::Mismatch("states live on different mass grids".into()));
    }
    let grid = &s1.grid;
    let m = grid.cells();
    let h = grid.node_weights();
    let omega2: f64 = (1..=m).map(|i| h[i] * (s1.u[i] - s2.u[i]).powi(2)).sum();
    let r2w: f64 = (1..=m)
        .map(|i| {
            let rho = if i < m {
                0.5 * (pw(s1.rho[i - 1], p.theta - 1.0) + pw(s1.rho[i], p.theta - 1.0))
            } else {
                pw(s1.rho[m - 1], p.theta - 1.0)
            };
            let r = s1.r[i] / s2.r[i] - 1.0;
            h[i] * rho * r * r
        })
        .sum();
    let rho2w: f64 = (0..m)
        .filter(|&j| grid.centers[j] <= x_cut)
        .map(|j| grid.widths[j] * pw(s1.rho[j], p.theta - 3.0) * (s1.rho[j] - s2.rho[j]).powi(2))
        .sum();
    Ok(SeparationFunctional {
        omega2,
        r2w,
        rho2w,
        g: omega2 + r2w + rho2w,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub times: Vec<f64>,
    pub series: Vec<SeparationFunctional>,
    /// Least-squares slope of `ln G` against `τ` over snapshots with `G > 0`.
    pub growth_rate: f64,
    /// Smallest `C` with `G(τ) <= G(0) e^{Cτ} + floor` at every snapshot;
    /// infinite when `G(0) = 0` but `G` later exceeds the floor.
    pub envelope_rate: f64,
    /// Round-off level of `G` for the compared trajectories.
    pub floor: f64,
}

impl UniquenessReport {
    pub fn passed(&self) -> bool {
        self.envelope_rate.is_finite()
    }

    pub fn identical(&self) -> bool {
        self.series.iter().all(|s| s.g == 0.0)
    }
}

/// Separation `G(τ)` between two runs over their common snapshots, with
/// the fitted exponential growth rate.
pub fn uniqueness_contraction(
    traj1: &Trajectory,
    traj2: &Trajectory,
    x_cut: f64,
    p: &Params,
) -> Result<UniquenessReport> {
    if !(x_cut > 0.0 && x_cut < 1.0) {
        return Err(Error::OutOfRange {
            what: "x_cut",
            value: x_cut,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let (a, b) = (&traj1.snapshots, &traj2.snapshots);
    if a.len() != b.len() {
        return Err(Error::Mismatch(format!(
            "snapshot counts differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut times = Vec::with_capacity(a.len());
    let mut series = Vec::with_capacity(a.len());
    for (s1, s2) in a.iter().zip(b) {
        if s1.tau != s2.tau {
            return Err(Error::Mismatch(format!(
                "snapshot times differ: {} vs {}",
                s1.tau, s2.tau
            )));
        }
        times.push(s1.tau);
        series.push(separation_functional(s1, s2, x_cut, p)?);
    }

    let s0 = &a[0];
    let h = s0.grid.node_weights();
    let scale: f64 = h.iter().zip(&s0.u).map(|(h, u)| h * (1.0 + u * u)).sum::<f64>()
        + s0.grid.widths.iter().zip(&s0.rho).map(|(dx, r)| dx * pw(*r, p.theta - 1.0)).sum::<f64>();
    let floor = (16.0 * f64::EPSILON).powi(2) * scale;

    let g0 = series[0].g;
    let mut envelope_rate = 0.0_f64;
    for (t, s) in times.iter().zip(&series).skip(1) {
        if s.g <= floor || *t <= 0.0 {
            continue;
        }
        if g0 <= 0.0 {
            envelope_rate = f64::INFINITY;
            break;
        }
        let c = ((s.g - floor) / g0).ln() / t;
        envelope_rate = envelope_rate.max(c);
    }
    let (ts, lg): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&series)
        .filter(|(_, s)| s.g > 0.0)
        .map(|(t, s)| (*t, s.g.ln()))
        .unzip();
    let growth_rate = if ts.len() >= 2 { ls_slope(&ts, &lg) } else { 0.0 };
    Ok(UniquenessReport {
        times,
        series,
        growth_rate,
        envelope_rate,
        floor,
    })
}
