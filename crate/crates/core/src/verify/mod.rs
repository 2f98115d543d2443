//! Executable checks over trajectories: conservation and energy identities,
//! envelopes and radius bounds, weak-form residuals, the BD transport law,
//! moment bounds, uniqueness separation and regularity monitors.

mod identities;
mod refinement;
mod regularity;
mod uniqueness;
mod weak_form;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::functionals::RegionSpec;
use crate::model::Params;
use crate::report::{CheckResult, VerificationReport};
use crate::solver::Trajectory;

pub use identities::{
    bd_transport_residual, check_bd_entropy, check_bd_transport, check_density_formula,
    check_energy_identity, check_envelopes, check_mass, check_moments, check_radius_bounds,
    energy_identity_residuals, separation_margin, EnergyResiduals,
};
pub use refinement::{refinement_study, GridRun, RefinementTargets};
pub use regularity::{regularity_monitor, MonitorSeries, RegularityOptions, RegularityReport};
pub use uniqueness::{separation_functional, uniqueness_contraction, SeparationFunctional, UniquenessReport};
pub use weak_form::{
    check_weak_form, weak_form_residuals, TestFunction, TestFunctionFamily, TestFunctionKind,
    WeakFormResiduals,
};

/// Tolerance constants. Identity-type checks accept residuals up to
/// `c1 Δx² + c2 Δτ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub c1: f64,
    pub c2: f64,
    /// Absolute tolerance on `Σ Δx - 1`.
    pub lagrangian_mass: f64,
    /// Relative slack in `M_k² <= M_{k-1} M_{k+1}`.
    pub log_convexity: f64,
    /// Allowed deviation of the fitted Eulerian vacuum rate from `σ`.
    pub vacuum_slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            c1: 10.0,
            c2: 10.0,
            lagrangian_mass: 1e-14,
            log_convexity: 1e-12,
            vacuum_slope: 0.05,
        }
    }
}

impl Tolerances {
    pub fn identity(&self, dx: f64, dtau: f64) -> f64 {
        self.c1 * dx * dx + self.c2 * dtau * dtau
    }
}

/// Largest gap between consecutive snapshot times.
pub fn snapshot_spacing(traj: &Trajectory) -> f64 {
    traj.snapshots
        .windows(2)
        .map(|w| w[1].tau - w[0].tau)
        .fold(0.0, f64::max)
}

/// Time up to which the envelope bounds are guaranteed: `min(T1a, T1b)`.
pub fn monitored_horizon(traj: &Trajectory) -> f64 {
    traj.monitors.t1a.min(traj.monitors.t1b)
}

/// Everything the single-trajectory suite needs beyond the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub tolerances: Tolerances,
    pub region: RegionSpec,
    pub family: TestFunctionFamily,
    pub regularity: RegularityOptions,
    /// Cap on the cutoff BD entropy relative to its initial budget.
    pub bd_entropy_cap: f64,
    /// Cap on the velocity moments relative to `1 + max_k M_k(0)`.
    pub moment_cap: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            tolerances: Tolerances::default(),
            region: RegionSpec::default(),
            family: TestFunctionFamily::default(),
            regularity: RegularityOptions::default(),
            bd_entropy_cap: 100.0,
            moment_cap: 100.0,
        }
    }
}

/// Run every single-trajectory check. The checks are independent and run
/// concurrently; the report lists them in a fixed order.
pub fn run_suite(traj: &Trajectory, p: &Params, cfg: &SuiteConfig) -> Result<VerificationReport> {
    cfg.region.validate()?;
    let tol = &cfg.tolerances;
    let jobs: Vec<Box<dyn Fn() -> Result<Vec<CheckResult>> + Sync + '_>> = vec![
        Box::new(|| Ok(check_energy_identity(traj, p, tol))),
        Box::new(|| check_mass(traj, p, tol)),
        Box::new(|| Ok(check_radius_bounds(traj, p))),
        Box::new(|| check_envelopes(traj, p, tol)),
        Box::new(|| check_weak_form(traj, &cfg.family, p, tol)),
        Box::new(|| {
            Ok(vec![
                check_bd_transport(traj, p, tol)?,
                check_bd_entropy(traj, &cfg.region, p, cfg.bd_entropy_cap)?,
                check_density_formula(traj, p, tol)?,
            ])
        }),
        Box::new(|| check_moments(traj, &cfg.region, p, tol, cfg.moment_cap)),
        Box::new(|| Ok(regularity_monitor(traj, &cfg.region, p, &cfg.regularity)?.checks())),
    ];
    let results: Vec<Result<Vec<CheckResult>>> = jobs.par_iter().map(|job| job()).collect();
    let mut report = VerificationReport::default();
    for r in results {
        for c in r? {
            report.push(c);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::model::{make_initial_data, ProfileSpec, VelocityProfile};
    use crate::report::Status;
    use crate::solver::{default_monitors, horizon_estimates, run, OutputControl, RunOptions};

    fn sv() -> Params {
        Params::saint_venant()
    }

    fn bump() -> VelocityProfile {
        VelocityProfile::Bump {
            amplitude: 0.25,
            center: 0.45,
            width: 0.35,
        }
    }

    fn short_run(cells: usize, velocity: VelocityProfile) -> Trajectory {
        let p = sv();
        let d = make_initial_data(&p, &ProfileSpec::power_law(velocity), cells).unwrap();
        let (m0, m1) = default_monitors(&d, &p);
        let h = horizon_estimates(&d, &p, m0, m1, 0.25);
        let horizon = 0.1 * h.t1a;
        let mut o = RunOptions::new(horizon, h);
        o.output = OutputControl::Interval(horizon / 8.0);
        run(&d, &p, &o).unwrap()
    }

    #[test]
    fn suite_passes_on_short_run() {
        let t = short_run(32, bump());
        let rep = run_suite(&t, &sv(), &SuiteConfig::default()).unwrap();
        assert!(rep.ok(), "{rep}");
        assert!(rep.get("weak_form.momentum").is_some());
        assert!(rep.get("regularity.interior_h3").is_some());
    }

    #[test]
    fn suite_is_deterministic() {
        let t = short_run(32, bump());
        let cfg = SuiteConfig::default();
        let a = run_suite(&t, &sv(), &cfg).unwrap();
        let b = run_suite(&t, &sv(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_test_function_reproduces_mass_defect() {
        let t = short_run(32, VelocityProfile::Zero);
        let w = weak_form_residuals(&t, &TestFunctionFamily::default(), &sv()).unwrap();
        let checks = check_weak_form(&t, &TestFunctionFamily::default(), &sv(), &Tolerances::default()).unwrap();
        let constant = checks.iter().find(|c| c.id == "weak_form.constant").unwrap();
        assert_eq!(constant.residual, 0.0);
        assert_ne!(w.constant, 0.0);
    }

    #[test]
    fn zero_amplitude_test_function_gives_exact_zero() {
        let t = short_run(32, bump());
        let mut fam = TestFunctionFamily::default();
        for f in &mut fam.members {
            f.amplitude = 0.0;
        }
        let w = weak_form_residuals(&t, &fam, &sv()).unwrap();
        assert!(w.mass.iter().chain(&w.momentum).all(|r| *r == 0.0));
    }

    #[test]
    fn test_function_support_must_be_interior() {
        let mut fam = TestFunctionFamily::default();
        fam.members[0].half_width = 0.3;
        assert!(matches!(fam.validate(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn weak_form_needs_two_snapshots() {
        let mut t = short_run(16, bump());
        t.snapshots.truncate(1);
        let e = weak_form_residuals(&t, &TestFunctionFamily::default(), &sv());
        assert!(matches!(e, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn density_scaling_breaks_the_momentum_form() {
        let t = short_run(64, bump());
        let mut bad = t.clone();
        for s in &mut bad.snapshots {
            for r in &mut s.rho {
                *r *= 1.1;
            }
        }
        let fam = TestFunctionFamily::default();
        let good = weak_form_residuals(&t, &fam, &sv()).unwrap().max_momentum();
        let broken = weak_form_residuals(&bad, &fam, &sv()).unwrap().max_momentum();
        assert!(broken > 5.0 * good, "{broken} vs {good}");
    }

    #[test]
    fn identical_runs_have_zero_separation() {
        let t = short_run(32, bump());
        let u = uniqueness_contraction(&t, &t.clone(), 0.9, &sv()).unwrap();
        assert!(u.identical());
        assert!(u.series.iter().all(|s| s.g == 0.0));
        assert!(u.passed());
    }

    #[test]
    fn uniqueness_rejects_mismatched_inputs() {
        let a = short_run(32, bump());
        let b = short_run(16, bump());
        assert!(matches!(
            uniqueness_contraction(&a, &b, 0.9, &sv()),
            Err(Error::Mismatch(_))
        ));
        assert!(matches!(
            uniqueness_contraction(&a, &a, 1.0, &sv()),
            Err(Error::OutOfRange { .. })
        ));
        let mut short = a.clone();
        short.snapshots.pop();
        assert!(matches!(
            uniqueness_contraction(&a, &short, 0.9, &sv()),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn refinement_needs_three_distinct_grids() {
        let a = short_run(16, bump());
        let b = short_run(32, bump());
        let region = RegionSpec::default();
        let fam = TestFunctionFamily::default();
        let targets = RefinementTargets::default();
        let two = [GridRun { cells: 16, traj: &a }, GridRun { cells: 32, traj: &b }];
        assert!(matches!(
            refinement_study(&two, &sv(), &region, &fam, &targets),
            Err(Error::InsufficientData(_))
        ));
        let dup = [
            GridRun { cells: 16, traj: &a },
            GridRun { cells: 16, traj: &a },
            GridRun { cells: 32, traj: &b },
        ];
        assert!(matches!(
            refinement_study(&dup, &sv(), &region, &fam, &targets),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn lambda0_outside_interval_is_rejected() {
        let t = short_run(16, bump());
        let (_, hi) = sv().lambda0_interval();
        let opts = RegularityOptions {
            lambda0: Some(hi + 0.1),
            ..Default::default()
        };
        assert!(matches!(
            regularity_monitor(&t, &RegionSpec::default(), &sv(), &opts),
            Err(Error::OutOfRange { what: "lambda0", .. })
        ));
    }

    #[test]
    fn tiny_regularity_cap_is_hit() {
        let t = short_run(16, bump());
        let opts = RegularityOptions {
            lambda0: None,
            cap_factor: 1e-9,
        };
        let rep = regularity_monitor(&t, &RegionSpec::default(), &sv(), &opts).unwrap();
        assert!(rep.monitors.iter().any(|m| m.hit));
        assert!(rep.checks().iter().any(|c| c.status == Status::Fail));
    }

    #[test]
    fn identity_tolerance_is_quadratic() {
        let tol = Tolerances::default();
        assert_eq!(tol.identity(0.1, 0.0), 4.0 * tol.identity(0.05, 0.0));
    }

    #[test]
    fn energy_forms_agree_for_saint_venant() {
        let t = short_run(32, bump());
        let r = energy_identity_residuals(&t, &sv());
        assert!(r.agreement <= r.strain + r.deviatoric + 1e-13);
    }
}
