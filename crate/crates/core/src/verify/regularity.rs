use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::RegionSpec;
use crate::model::Params;
use crate::quadrature::pw;
use crate::report::CheckResult;
use crate::solver::{semi_discrete_rhs, LagrangianState, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularityOptions {
    /// Exponent of the boundary `∫|u_x|^λ` norm; defaults to the midpoint
    /// of its admissible interval.
    pub lambda0: Option<f64>,
    /// A monitor hits its cap when it exceeds
    /// `cap_factor (1 + max(|initial value|, E0))`.
    pub cap_factor: f64,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        RegularityOptions {
            lambda0: None,
            cap_factor: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub name: String,
    pub values: Vec<f64>,
    pub cap: f64,
    pub hit: bool,
}

impl MonitorSeries {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub lambda0: f64,
    pub times: Vec<f64>,
    pub monitors: Vec<MonitorSeries>,
}

impl RegularityReport {
    pub fn get(&self, name: &str) -> Option<&MonitorSeries> {
        self.monitors.iter().find(|m| m.name == name)
    }

    pub fn checks(&self) -> Vec<CheckResult> {
        self.monitors
            .iter()
            .map(|m| {
                CheckResult::graded(
                    &format!("regularity.{}", m.name),
                    "bounded regularity monitor",
                    m.max(),
                    m.cap,
                )
            })
            .collect()
    }
}

/// Overlap of cell `j` with `[lo, 1]`.
fn overlap(s: &LagrangianState, j: usize, lo: f64) -> f64 {
    let nodes = &s.grid.nodes;
    (nodes[j + 1] - nodes[j].max(lo)).max(0.0)
}

/// Slopes of the nodal velocity per cell: `(u_{j+1} - u_j)/Δx`.
fn cell_slopes(s: &LagrangianState) -> Vec<f64> {
    (0..s.cells())
        .map(|j| (s.u[j + 1] - s.u[j]) / s.grid.widths[j])
        .collect()
}

/// Cumulative radial Sobolev-type sums `Σ_{l<=k} ∫ |f^{(l)}|² r^{N-1} dr`
/// for `k = 0..=3`, over sample points with `r <= r_cut`. The `l`-th
/// derivative is `l!` times the Newton divided difference over `l + 1`
/// consecutive points, which stays bounded on the strongly non-uniform
/// radial grid of a mass-coordinate mesh.
fn radial_sobolev(values: &[f64], points: &[f64], r_cut: f64, n1: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut diff = values.to_vec();
    let mut factorial = 1.0;
    for l in 0..4 {
        if l > 0 {
            factorial *= l as f64;
            diff = (0..diff.len() - 1)
                .map(|i| (diff[i + 1] - diff[i]) / (points[i + l] - points[i]))
                .collect();
        }
        let mut sum = 0.0;
        for (i, d) in diff.iter().enumerate() {
            let (lo, hi) = (points[i], points[i + l]);
            if hi > r_cut || i + l + 1 >= points.len() {
                break;
            }
            let mid = 0.5 * (lo + hi);
            // each sample stands for the interval up to the next point
            let width = points[i + 1] - lo;
            let v = factorial * d;
            sum += pw(mid, n1) * width * v * v;
        }
        out[l] = sum + if l > 0 { out[l - 1] } else { 0.0 };
    }
    out
}

struct Snapshot {
    h1: f64,
    h2: f64,
    h3: f64,
    density_h3: f64,
    boundary: f64,
    lambda: f64,
    quartic_ratio: f64,
}

fn measure(s: &LagrangianState, region: &RegionSpec, p: &Params, lambda0: f64) -> Result<Snapshot> {
    let grid = &s.grid;
    let m = s.cells();
    let n = p.n();
    let slopes = cell_slopes(s);
    let r_cut = s.r[grid.nodes.partition_point(|x| *x <= region.x1) - 1];
    let u_norms = radial_sobolev(&s.u, &s.r, r_cut, n - 1.0);
    // the multi-dimensional gradient also carries the hoop part u/r
    let hoop: f64 = (1..=m)
        .take_while(|&i| s.r[i] <= r_cut && i < m)
        .map(|i| pw(s.r[i], n - 1.0) * (s.r[i + 1] - s.r[i]) * (s.u[i] / s.r[i]).powi(2))
        .sum();
    let centroids: Vec<f64> = (0..m)
        .map(|j| (0.5 * (pw(s.r[j], n) + pw(s.r[j + 1], n))).powf(1.0 / n))
        .collect();
    let rho_norms = radial_sobolev(&s.rho, &centroids, r_cut, n - 1.0);
    let h1 = u_norms[1] + hoop;
    let h2 = u_norms[2] + hoop;
    let h3 = u_norms[3] + hoop;
    let density_h3 = rho_norms[3];

    let h = grid.node_weights();
    let ut = semi_discrete_rhs(s, p)?.du;
    let mut boundary = 0.0;
    let mut lambda = 0.0;
    let mut quartic = 0.0;
    for j in 0..m {
        let len = overlap(s, j, region.x2);
        if len == 0.0 {
            continue;
        }
        let rho = s.rho[j];
        let ux = slopes[j];
        let ubar = 0.5 * (s.u[j] + s.u[j + 1]);
        boundary += len * (pw(rho, p.theta + 1.0) * ux * ux + pw(rho, p.theta - 1.0) * ubar * ubar);
        lambda += len * ux.abs().powf(lambda0);
        quartic += len * pw(rho, p.theta + 3.0) * ux.powi(4);
    }
    boundary += (0..=m)
        .filter(|&i| grid.nodes[i] >= region.x2)
        .map(|i| h[i] * ut[i] * ut[i])
        .sum::<f64>();
    Ok(Snapshot {
        h1,
        h2,
        h3,
        density_h3,
        boundary,
        lambda,
        quartic_ratio: quartic / (1.0 + boundary * boundary),
    })
}

/// Discrete regularity norms per snapshot: the accumulated viscous
/// dissipation, radial difference-quotient norms of velocity and density
/// inside the particle path of `x1`, and the Lagrangian boundary norms on
/// `[x2, 1]`.
pub fn regularity_monitor(
    traj: &Trajectory,
    region: &RegionSpec,
    p: &Params,
    opts: &RegularityOptions,
) -> Result<RegularityReport> {
    region.validate()?;
    let (lo, hi) = p.lambda0_interval();
    let lambda0 = opts.lambda0.unwrap_or_else(|| p.default_lambda0());
    if !(lambda0 > lo && lambda0 < hi) {
        return Err(Error::OutOfRange {
            what: "lambda0",
            value: lambda0,
            lo,
            hi,
        });
    }
    if !(opts.cap_factor > 0.0) {
        return Err(Error::InvalidParams(format!(
            "cap factor must be positive, got {}",
            opts.cap_factor
        )));
    }
    let names = [
        "viscous_dissipation",
        "interior_h1",
        "interior_h2",
        "interior_h3",
        "interior_density_h3",
        "boundary_energy",
        "boundary_lambda0",
        "quartic_ratio",
    ];
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(traj.snapshots.len()); names.len()];
    for (k, s) in traj.snapshots.iter().enumerate() {
        let snap = measure(s, region, p, lambda0)?;
        let row = [
            traj.dissipation_deviatoric[k].iter().sum(),
            snap.h1,
            snap.h2,
            snap.h3,
            snap.density_h3,
            snap.boundary,
            snap.lambda,
            snap.quartic_ratio,
        ];
        for (v, x) in values.iter_mut().zip(row) {
            v.push(x);
        }
    }
    let monitors = names
        .iter()
        .zip(values)
        .map(|(name, values)| {
            let start = values.first().map_or(0.0, |v| v.abs());
            let cap = opts.cap_factor * (1.0 + start.max(traj.e0.abs()));
            let hit = values.iter().any(|v| !(v.abs() <= cap));
            MonitorSeries {
                name: name.to_string(),
                values,
                cap,
                hit,
            }
        })
        .collect();
    Ok(RegularityReport {
        lambda0,
        times: traj.times(),
        monitors,
    })
}
