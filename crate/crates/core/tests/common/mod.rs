//! Independent re-implementation of the semi-discrete operator and the
//! manufactured states it is compared on.

use std::sync::Arc;

use vacuum_ns::coords::MassGrid;
use vacuum_ns::{LagrangianState, Params};

pub struct Manufactured {
    pub p: Params,
    pub nodes: Vec<f64>,
    pub rho: fn(f64) -> f64,
    pub u: fn(f64) -> f64,
}

fn params(dim: u32, gamma: f64, theta: f64) -> Params {
    Params {
        dim,
        gamma,
        theta,
        ..Params::saint_venant()
    }
}

fn uniform_nodes(m: usize) -> Vec<f64> {
    (0..=m).map(|i| i as f64 / m as f64).collect()
}

fn stretched_nodes(m: usize) -> Vec<f64> {
    // clustered toward the boundary
    (0..=m)
        .map(|i| {
            let t = i as f64 / m as f64;
            1.0 - (1.0 - t) * (1.0 - t)
        })
        .collect()
}

/// State with cell densities sampled at midpoints and radii from
/// `r^N = N Σ Δx/ρ`, accumulated in a plain loop.
pub fn build(case: &Manufactured) -> LagrangianState {
    let grid = MassGrid::from_nodes(case.nodes.clone()).unwrap();
    let m = grid.cells();
    let n = case.p.dim as f64;
    let rho: Vec<f64> = (0..m)
        .map(|j| (case.rho)(0.5 * (case.nodes[j] + case.nodes[j + 1])))
        .collect();
    let mut r = vec![0.0; m + 1];
    let mut acc = 0.0;
    for j in 0..m {
        acc += (case.nodes[j + 1] - case.nodes[j]) / rho[j];
        r[j + 1] = (n * acc).powf(1.0 / n);
    }
    let mut u: Vec<f64> = case.nodes.iter().map(|&x| (case.u)(x)).collect();
    u[0] = 0.0;
    LagrangianState {
        tau: 0.0,
        grid: Arc::new(grid),
        rho,
        a: r[m],
        r,
        u,
    }
}

pub fn cases() -> Vec<Manufactured> {
    vec![
        Manufactured { p: params(2, 2.0, 1.0), nodes: uniform_nodes(8), rho: |x| 2.0 - x, u: |x| x * (1.0 - x) },
        Manufactured { p: params(2, 2.0, 1.0), nodes: uniform_nodes(12), rho: |x| 2.0 - x, u: |x| x * (1.0 - x) },
        Manufactured { p: params(2, 2.0, 1.0), nodes: stretched_nodes(10), rho: |x| 1.0 + (1.0 - x).sqrt(), u: |x| 0.3 * x },
        Manufactured { p: params(2, 1.5, 0.8), nodes: uniform_nodes(9), rho: |x| 3.0 - 2.0 * x * x, u: |x| (3.0 * x).sin() },
        Manufactured { p: params(2, 3.0, 1.2), nodes: stretched_nodes(7), rho: |x| (1.0 - x).powf(0.3) + 0.1, u: |x| -x * x },
        Manufactured { p: params(3, 2.0, 1.0), nodes: uniform_nodes(8), rho: |x| 2.0 - x, u: |x| x * (1.0 - x) },
        Manufactured { p: params(3, 1.4, 0.9), nodes: uniform_nodes(11), rho: |x| (-x).exp(), u: |x| 0.5 * x.powf(1.0 / 3.0) },
        Manufactured { p: params(3, 2.5, 1.1), nodes: stretched_nodes(9), rho: |x| 1.5 - x * x * x, u: |x| x.cos() - 1.0 },
        Manufactured { p: params(3, 2.0, 0.75), nodes: stretched_nodes(16), rho: |x| (1.0 - x).powf(0.25) + 0.05, u: |x| 0.1 * x * (2.0 - x) },
        Manufactured { p: params(2, 2.0, 1.0), nodes: uniform_nodes(16), rho: |x| 1.0 + 0.5 * (6.0 * x).cos(), u: |x| x * (1.0 - x).powi(2) },
    ]
}

pub struct OracleRhs {
    pub drho: Vec<f64>,
    pub du: Vec<f64>,
}

/// The Lagrangian system written out directly on the staggered grid:
/// `ρ_τ = -ρ² (r^{N-1}u)_x` in cells and
/// `u_τ = -r^{N-1}(ρ^γ - θ ρ^{θ+1}(r^{N-1}u)_x)_x - (N-1) r^{N-2} (ρ^θ)_x u`
/// at nodes, with centred differences over the dual cells and zero density
/// beyond the free boundary.
pub fn oracle(s: &LagrangianState, p: &Params) -> OracleRhs {
    let m = s.rho.len();
    let n = p.dim as f64;
    let x = &s.grid.nodes;
    let flux = |i: usize| s.r[i].powf(n - 1.0) * s.u[i];
    let div: Vec<f64> = (0..m).map(|j| (flux(j + 1) - flux(j)) / (x[j + 1] - x[j])).collect();
    let drho = (0..m).map(|j| -s.rho[j].powi(2) * div[j]).collect();
    let sigma = |j: usize| {
        if j == m {
            0.0
        } else {
            s.rho[j].powf(p.gamma) - p.theta * s.rho[j].powf(p.theta + 1.0) * div[j]
        }
    };
    let mu = |j: usize| if j == m { 0.0 } else { s.rho[j].powf(p.theta) };
    let mut du = vec![0.0; m + 1];
    for i in 1..=m {
        let right = if i == m { x[m] } else { 0.5 * (x[i] + x[i + 1]) };
        let left = 0.5 * (x[i - 1] + x[i]);
        let h = right - left;
        let dsigma = (sigma(i) - sigma(i - 1)) / h;
        let dmu = (mu(i) - mu(i - 1)) / h;
        du[i] = -s.r[i].powf(n - 1.0) * dsigma - (n - 1.0) * s.r[i].powf(n - 2.0) * dmu * s.u[i];
    }
    OracleRhs { drho, du }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
