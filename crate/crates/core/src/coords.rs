//! Maps between the mass coordinate `x ∈ [0, 1]` and the radius
//! `r ∈ [0, a]`, and reconstruction of Eulerian fields from a Lagrangian
//! state.

use crate::error::{Error, Result};
use crate::model::Params;
use crate::quadrature::{gl_integrate, integrate_graded, ls_slope, power_shell_integral, pw};
use crate::solver::LagrangianState;

#[derive(Clone, Debug, PartialEq)]
pub struct MassGrid {
    pub nodes: Vec<f64>,
    /// Cell midpoints.
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl MassGrid {
    pub fn uniform(cells: usize) -> Self {
        let nodes: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        Self::from_nodes_unchecked(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let grid = Self::from_nodes_unchecked(nodes);
        grid.validate()?;
        Ok(grid)
    }

    fn from_nodes_unchecked(nodes: Vec<f64>) -> Self {
        let centers = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        MassGrid {
            nodes,
            centers,
            widths,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.nodes;
        if n.len() < 2 {
            return Err(Error::InvalidProfile("mass grid needs at least one cell".into()));
        }
        if n[0] != 0.0 || n[n.len() - 1] != 1.0 {
            return Err(Error::InvalidProfile(format!(
                "mass grid must span [0, 1], got [{}, {}]",
                n[0],
                n[n.len() - 1]
            )));
        }
        if let Some(i) = n.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile(format!(
                "mass grid not strictly increasing at node {}",
                i + 1
            )));
        }
        if self.widths.len() + 1 != n.len() || self.centers.len() + 1 != n.len() {
            return Err(Error::InvalidProfile("mass grid arrays out of sync".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.widths.len()
    }

    /// Dual-cell widths `h_i`: half of each adjacent cell.
    pub fn node_weights(&self) -> Vec<f64> {
        let m = self.cells();
        (0..=m)
            .map(|i| {
                let left = if i > 0 { self.widths[i - 1] } else { 0.0 };
                let right = if i < m { self.widths[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    pub fn max_width(&self) -> f64 {
        self.widths.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EulerianField {
    pub radii: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub a: f64,
}

/// `x(r) = ∫_0^r ρ(y) y^{N-1} dy` for an Eulerian density on `[0, a]`.
pub fn mass_coordinate(
    r: f64,
    a: f64,
    rho: impl Fn(f64) -> f64,
    p: &Params,
) -> Result<f64> {
    if !(0.0..=a).contains(&r) {
        return Err(Error::OutOfRange {
            what: "radius",
            value: r,
            lo: 0.0,
            hi: a,
        });
    }
    let n1 = p.n() - 1.0;
    Ok(integrate_graded(|y| rho(y) * pw(y, n1), 0.0, r))
}

/// `r(x)` from `r^N = N ∫_0^x ρ^{-1} dy`. Interior cells contribute their
/// exact share `Δx/ρ`; inside the boundary cell the partial integral follows
/// the vacuum power law `ρ ~ (1-x)^β`.
pub fn radius_from_mass(x: f64, state: &LagrangianState, p: &Params) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            what: "mass coordinate",
            value: x,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let grid = &state.grid;
    let m = grid.cells();
    if let Some(j) = state.rho.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateState(format!(
            "non-positive density {} in cell {j}",
            state.rho[j]
        )));
    }
    let mut vol = 0.0;
    for j in 0..m {
        let (lo, hi) = (grid.nodes[j], grid.nodes[j + 1]);
        if x >= hi {
            vol += grid.widths[j] / state.rho[j];
            continue;
        }
        if x > lo {
            let dx = grid.widths[j];
            let part = if j + 1 == m {
                let e = 1.0 - p.beta();
                1.0 - ((1.0 - x) / dx).powf(e)
            } else {
                (x - lo) / dx
            };
            vol += part * dx / state.rho[j];
        }
        break;
    }
    if x == 1.0 {
        return Ok(state.a);
    }
    Ok((p.n() * vol).powf(1.0 / p.n()))
}

/// Piecewise reconstruction of the Eulerian density and velocity.
///
/// Each cell density is attached to the radius `r̂_j` at which a pure
/// `(a - r)^σ` profile takes its shell-averaged value. Between these points
/// `ρ^{1/σ}` is interpolated linearly, which is monotone and reproduces the
/// vacuum rate exactly in the boundary piece; the centre piece is constant.
/// The resulting profile is then scaled shell by shell so that every shell
/// carries exactly its own mass `ρ_j (r_{j+1}^N - r_j^N)/N`.
/// Velocity is linear between nodes.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub rhat: Vec<f64>,
    /// Per-shell scale factors; 1 for data that already follow the profile.
    pub scale: Vec<f64>,
    rho: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    a: f64,
    sigma: f64,
    n1: f64,
    /// `∫ r^{N-1} ρ dr` of the unscaled profile over each shell.
    shell_integrals: Vec<f64>,
}

impl Reconstruction {
    pub fn new(state: &LagrangianState, p: &Params) -> Result<Self> {
        check_monotone(&state.r)?;
        let n = p.n();
        let a = state.a;
        let m = state.rho.len();
        let rhat = (0..m)
            .map(|j| {
                let (r0, r1) = (state.r[j], state.r[j + 1]);
                let vol = (pw(r1, n) - pw(r0, n)) / n;
                let avg = power_shell_integral(a, p.sigma, p.dim - 1, a - r1, a - r0) / vol;
                (a - avg.powf(1.0 / p.sigma)).clamp(r0, r1)
            })
            .collect();
        let mut rec = Reconstruction {
            rhat,
            scale: vec![1.0; m],
            rho: state.rho.clone(),
            r: state.r.clone(),
            u: state.u.clone(),
            a,
            sigma: p.sigma,
            n1: n - 1.0,
            shell_integrals: Vec::new(),
        };
        rec.shell_integrals = (0..m).map(|j| rec.profile_shell_integral(j)).collect();
        for j in 0..m {
            let target = state.rho[j] * (pw(state.r[j + 1], n) - pw(state.r[j], n)) / n;
            rec.scale[j] = target / rec.shell_integrals[j];
        }
        Ok(rec)
    }

    /// Unscaled profile.
    fn profile(&self, r: f64) -> f64 {
        let m = self.rho.len();
        if r <= self.rhat[0] {
            return self.rho[0];
        }
        if r >= self.a {
            return 0.0;
        }
        let last = self.rhat[m - 1];
        if r >= last {
            return self.rho[m - 1] * ((self.a - r) / (self.a - last)).powf(self.sigma);
        }
        let j = self.rhat.partition_point(|&x| x <= r) - 1;
        let t = (r - self.rhat[j]) / (self.rhat[j + 1] - self.rhat[j]);
        let inv = 1.0 / self.sigma;
        let q = (1.0 - t) * self.rho[j].powf(inv) + t * self.rho[j + 1].powf(inv);
        q.powf(self.sigma)
    }

    /// Integral of the unscaled profile over shell `j`, split at `r̂_j` so
    /// every piece is smooth.
    fn profile_shell_integral(&self, j: usize) -> f64 {
        let m = self.rho.len();
        let n = self.n1 + 1.0;
        let (lo, mid, hi) = (self.r[j], self.rhat[j], self.r[j + 1]);
        let f = |r: f64| self.profile(r) * pw(r, self.n1);
        let left = if j == 0 {
            self.rho[0] * pw(mid, n) / n
        } else if mid > lo {
            gl_integrate(f, lo, mid)
        } else {
            0.0
        };
        let right = if j + 1 == m {
            let s = self.a - mid;
            if s > 0.0 {
                self.rho[m - 1] / s.powf(self.sigma)
                    * power_shell_integral(self.a, self.sigma, self.n1 as u32, 0.0, s)
            } else {
                0.0
            }
        } else if hi > mid {
            gl_integrate(f, mid, hi)
        } else {
            0.0
        };
        left + right
    }

    fn shell_of(&self, r: f64) -> usize {
        let m = self.rho.len();
        (self.r.partition_point(|&x| x <= r).max(1) - 1).min(m - 1)
    }

    pub fn rho(&self, r: f64) -> f64 {
        if r >= self.a {
            return 0.0;
        }
        self.scale[self.shell_of(r)] * self.profile(r)
    }

    pub fn u(&self, r: f64) -> f64 {
        let m = self.r.len() - 1;
        if r >= self.r[m] {
            return self.u[m];
        }
        let i = self.r.partition_point(|&x| x <= r).max(1) - 1;
        let t = (r - self.r[i]) / (self.r[i + 1] - self.r[i]);
        (1.0 - t) * self.u[i] + t * self.u[i + 1]
    }

    /// Mass coordinate of radius `r` under the reconstruction. Whole shells
    /// come from the cached integrals and the partial shell is split at its
    /// profile knot, so the jumps between shells never fall inside a
    /// quadrature panel.
    pub fn mass_coordinate(&self, r: f64) -> Result<f64> {
        if !(0.0..=self.a).contains(&r) {
            return Err(Error::OutOfRange {
                what: "radius",
                value: r,
                lo: 0.0,
                hi: self.a,
            });
        }
        let m = self.rho.len();
        if r >= self.a {
            return Ok(self.mass());
        }
        let j = self.shell_of(r);
        let whole: f64 = (0..j).map(|k| self.scale[k] * self.shell_integrals[k]).sum();
        let f = |y: f64| self.profile(y) * pw(y, self.n1);
        let (lo, mid) = (self.r[j], self.rhat[j]);
        let left = if j == 0 {
            self.rho[0] * pw(r.min(mid), self.n1 + 1.0) / (self.n1 + 1.0)
        } else {
            gl_integrate(f, lo, r.min(mid))
        };
        let right = if r <= mid {
            0.0
        } else if j + 1 == m {
            integrate_graded(f, mid, r)
        } else {
            gl_integrate(f, mid, r)
        };
        Ok(whole + self.scale[j] * (left + right))
    }

    /// `∫_0^a r^{N-1} ρ dr` of the reconstruction.
    pub fn mass(&self) -> f64 {
        self.scale
            .iter()
            .zip(&self.shell_integrals)
            .map(|(k, i)| k * i)
            .sum()
    }
}

fn check_monotone(r: &[f64]) -> Result<()> {
    if r[0] != 0.0 {
        return Err(Error::DegenerateState(format!("centre radius is {}", r[0])));
    }
    match r.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(Error::DegenerateState(format!(
            "radius not increasing at node {}",
            i + 1
        ))),
        None => Ok(()),
    }
}

/// Sample the reconstructed fields at `n_out` equally spaced radii in
/// `[0, a]`, both endpoints included.
pub fn to_eulerian(state: &LagrangianState, p: &Params, n_out: usize) -> Result<EulerianField> {
    if n_out < 2 {
        return Err(Error::InvalidProfile(format!("n_out must be >= 2, got {n_out}")));
    }
    let rec = Reconstruction::new(state, p)?;
    let a = state.a;
    let radii: Vec<f64> = (0..n_out)
        .map(|k| {
            if k + 1 == n_out {
                a
            } else {
                a * k as f64 / (n_out - 1) as f64
            }
        })
        .collect();
    let rho = radii.iter().map(|&r| rec.rho(r)).collect();
    let mut u: Vec<f64> = radii.iter().map(|&r| rec.u(r)).collect();
    u[0] = 0.0;
    Ok(EulerianField { radii, rho, u, a })
}

/// Total mass of the Eulerian reconstruction.
pub fn eulerian_mass(state: &LagrangianState, p: &Params) -> Result<f64> {
    Ok(Reconstruction::new(state, p)?.mass())
}

/// Fitted vacuum exponents near the free boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VacuumRateFit {
    /// Slope of `ln ρ` against `ln(a - r̂)`.
    pub sigma: f64,
    /// Slope of `ln ρ` against `ln(1 - x̂)`.
    pub beta: f64,
    pub cells_used: usize,
}

/// Log-log fit of the density against the distance to the boundary over
/// the last decade of cells, in both coordinates.
///
/// The Lagrangian representative point `x̂_j` is the one at which a pure
/// `(1-x)^β` profile takes its cell-averaged value.
pub fn vacuum_rate_fit(state: &LagrangianState, p: &Params) -> Result<VacuumRateFit> {
    let rec = Reconstruction::new(state, p)?;
    let grid = &state.grid;
    let m = grid.cells();
    let a = state.a;
    let d_last = a - rec.rhat[m - 1];
    let beta = p.beta();
    let mut ls = Vec::new();
    let mut lr = Vec::new();
    let mut lx = Vec::new();
    for j in 0..m {
        let d = a - rec.rhat[j];
        if d <= 10.0 * d_last && d > 0.0 {
            let (s0, s1) = (1.0 - grid.nodes[j + 1], 1.0 - grid.nodes[j]);
            let avg = (s1.powf(1.0 + beta) - s0.powf(1.0 + beta)) / ((1.0 + beta) * (s1 - s0));
            ls.push(d.ln());
            lx.push(avg.powf(1.0 / beta).ln());
            lr.push(state.rho[j].ln());
        }
    }
    if ls.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two cells in the boundary decade".into(),
        ));
    }
    Ok(VacuumRateFit {
        sigma: ls_slope(&ls, &lr),
        beta: ls_slope(&lx, &lr),
        cells_used: ls.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_initial_data, ProfileSpec, VelocityProfile};

    fn sv() -> Params {
        Params::saint_venant()
    }

    fn state(spec: ProfileSpec, cells: usize) -> LagrangianState {
        let d = make_initial_data(&sv(), &spec, cells).unwrap();
        LagrangianState::from_initial(&d)
    }

    #[test]
    fn uniform_density_mass_coordinate_is_r_squared() {
        for r in [0.0, 0.3, 0.7, 1.0] {
            let x = mass_coordinate(r, 1.0, |_| 2.0, &sv()).unwrap();
            assert!((x - r * r).abs() < 1e-14, "r={r} x={x}");
        }
    }

    #[test]
    fn mass_coordinate_rejects_radius_outside_domain() {
        assert!(mass_coordinate(1.1, 1.0, |_| 2.0, &sv()).is_err());
        assert!(mass_coordinate(-0.1, 1.0, |_| 2.0, &sv()).is_err());
    }

    #[test]
    fn uniform_density_radius_is_sqrt_x() {
        let s = state(ProfileSpec::uniform(VelocityProfile::Zero), 32);
        for x in [0.0, 0.1, 0.25, 0.5, 0.9] {
            let r = radius_from_mass(x, &s, &sv()).unwrap();
            assert!((r - x.sqrt()).abs() < 1e-14, "x={x} r={r}");
        }
        assert_eq!(radius_from_mass(1.0, &s, &sv()).unwrap(), s.a);
    }

    #[test]
    fn radius_from_mass_matches_nodes() {
        let s = state(ProfileSpec::power_law(VelocityProfile::Zero), 64);
        for (i, &x) in s.grid.nodes.iter().enumerate() {
            let r = radius_from_mass(x, &s, &sv()).unwrap();
            assert!((r - s.r[i]).abs() < 1e-13, "node {i}");
        }
    }

    #[test]
    fn radius_from_mass_rejects_non_positive_density() {
        let mut s = state(ProfileSpec::uniform(VelocityProfile::Zero), 16);
        s.rho[3] = 0.0;
        assert!(matches!(
            radius_from_mass(0.5, &s, &sv()),
            Err(Error::DegenerateState(_))
        ));
    }

    #[test]
    fn two_point_output_is_centre_and_boundary() {
        let s = state(ProfileSpec::power_law(VelocityProfile::Zero), 32);
        let e = to_eulerian(&s, &sv(), 2).unwrap();
        assert_eq!(e.radii, vec![0.0, s.a]);
        assert_eq!(e.rho[1], 0.0);
        assert_eq!(e.u[0], 0.0);
    }

    #[test]
    fn uniform_reconstruction_is_constant_in_interior() {
        let s = state(ProfileSpec::uniform(VelocityProfile::Zero), 32);
        let e = to_eulerian(&s, &sv(), 50).unwrap();
        for (r, rho) in e.radii.iter().zip(&e.rho) {
            if *r < 0.95 {
                assert!((rho - 2.0).abs() < 1e-12, "r={r} rho={rho}");
            }
        }
    }

    #[test]
    fn non_monotone_radius_is_degenerate() {
        let mut s = state(ProfileSpec::uniform(VelocityProfile::Zero), 16);
        s.r.swap(4, 5);
        assert!(matches!(to_eulerian(&s, &sv(), 10), Err(Error::DegenerateState(_))));
    }

    #[test]
    fn power_law_vacuum_rates_are_recovered() {
        let s = state(ProfileSpec::power_law(VelocityProfile::Zero), 256);
        let fit = vacuum_rate_fit(&s, &sv()).unwrap();
        assert!((fit.sigma - 0.5).abs() < 0.05, "{fit:?}");
        assert!((fit.beta - 1.0 / 3.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn reconstruction_mass_coordinate_agrees_with_generic_quadrature() {
        // reference: the generic rule between every jump and kink
        let s = state(ProfileSpec::power_law(VelocityProfile::Zero), 16);
        let rec = Reconstruction::new(&s, &sv()).unwrap();
        let mut breaks: Vec<f64> = s.r.iter().chain(&rec.rhat).copied().collect();
        breaks.sort_by(f64::total_cmp);
        for k in 1..40 {
            let r = s.a * k as f64 / 40.0;
            let fine: f64 = breaks
                .windows(2)
                .map(|w| {
                    let hi = w[1].min(r);
                    if hi <= w[0] {
                        0.0
                    } else {
                        integrate_graded(|y| rec.rho(y) * y, w[0], hi)
                    }
                })
                .sum();
            let got = rec.mass_coordinate(r).unwrap();
            assert!((got - fine).abs() < 1e-10, "r={r}: {got} vs {fine}");
        }
        assert_eq!(rec.mass_coordinate(s.a).unwrap(), rec.mass());
        assert!(rec.mass_coordinate(1.01 * s.a).is_err());
    }

    #[test]
    fn node_weights_sum_to_one() {
        let g = MassGrid::uniform(10);
        assert!((g.node_weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(MassGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(MassGrid::from_nodes(vec![0.0, 0.5, 0.9]).is_err());
    }
}
