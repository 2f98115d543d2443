//! Invariants checked over randomly drawn parameters, data and states.

use std::sync::Arc;

use proptest::prelude::*;
use vacuum_ns::coords::{radius_from_mass, MassGrid};
use vacuum_ns::functionals::{
    bd_effective_velocity, dissipation_increment, energy, velocity_moments, RegionSpec,
};
use vacuum_ns::model::{
    lagrangian_pinch_constants, make_initial_data, shell_mass, validate_params, ProfileSpec,
    VelocityProfile,
};
use vacuum_ns::solver::{
    default_monitors, horizon_estimates, run, step, OutputControl, RunOptions,
};
use vacuum_ns::verify::{
    run_suite, uniqueness_contraction, weak_form_residuals, SuiteConfig, TestFunction,
    TestFunctionFamily, TestFunctionKind,
};
use vacuum_ns::{LagrangianState, Params};

fn any_params() -> impl Strategy<Value = Params> {
    (2u32..=3, 1.05f64..4.0, 0.3f64..2.0, 0.05f64..2.0, 1u32..5).prop_map(
        |(dim, gamma, theta, sigma, m)| Params {
            dim,
            gamma,
            theta,
            sigma,
            m,
            rho_star_lo: 0.5,
            rho_star_hi: 8.0,
            a0: 1.0,
        },
    )
}

fn admissible_params() -> impl Strategy<Value = Params> {
    any_params().prop_filter("admissible", |p| validate_params(p).unwrap().admissible)
}

/// A state with arbitrary positive densities and velocities pinned at the
/// centre, radii consistent with the densities.
fn any_state(cells: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(0.05f64..5.0, cells),
        prop::collection::vec(-2.0f64..2.0, cells + 1),
    )
}

fn assemble(p: &Params, rho: Vec<f64>, mut u: Vec<f64>) -> LagrangianState {
    let m = rho.len();
    let grid = MassGrid::uniform(m);
    let n = p.n();
    let mut r = vec![0.0; m + 1];
    let mut acc = 0.0;
    for j in 0..m {
        acc += grid.widths[j] / rho[j];
        r[j + 1] = (n * acc).powf(1.0 / n);
    }
    u[0] = 0.0;
    LagrangianState {
        tau: 0.0,
        grid: Arc::new(grid),
        rho,
        u,
        a: r[m],
        r,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_lies_in_its_admissible_interval(p in admissible_params()) {
        let beta = p.beta();
        prop_assert_eq!(beta, p.sigma / (1.0 + p.sigma));
        let lo = 1.0 / (2.0 * p.gamma);
        let hi = (1.0 / (2.0 * p.theta)).min(1.0 / (1.0 + p.theta));
        prop_assert!(lo < hi);
        prop_assert!(lo < beta && beta < hi);
    }

    #[test]
    fn beta_is_monotone_in_sigma(a in 0.01f64..5.0, b in 0.01f64..5.0) {
        let p = |sigma| Params { sigma, ..Params::saint_venant() };
        prop_assert_eq!(a < b, p(a).beta() < p(b).beta());
    }

    #[test]
    fn generated_profiles_have_unit_mass(p in admissible_params(), cells in 16usize..200) {
        let p = Params { rho_star_lo: 1e-3, rho_star_hi: 1e3, ..p };
        let d = make_initial_data(&p, &ProfileSpec::power_law(VelocityProfile::Zero), cells).unwrap();
        let lagrangian: f64 = d.grid.widths.iter().sum();
        prop_assert!((lagrangian - 1.0).abs() <= 1e-14);
        prop_assert!((shell_mass(&p, &d.rho0, &d.r0) - 1.0).abs() <= 1e-12);
        prop_assert_eq!(d.u0[0], 0.0);
    }

    #[test]
    fn lagrangian_pinch_holds_at_every_cell(sigma in 0.3f64..0.9, cells in 16usize..256) {
        let p = Params { sigma, rho_star_lo: 0.5, rho_star_hi: 8.0, ..Params::saint_venant() };
        prop_assume!(validate_params(&p).unwrap().admissible);
        let d = make_initial_data(&p, &ProfileSpec::power_law(VelocityProfile::Zero), cells).unwrap();
        let (lo, hi) = lagrangian_pinch_constants(&p);
        for (j, &rho) in d.rho0.iter().enumerate() {
            let w = (1.0 - d.grid.centers[j]).powf(p.beta());
            prop_assert!(0.5 * lo * w <= rho && rho <= 2.0 * hi * w, "cell {}", j);
        }
    }

    #[test]
    fn energy_and_dissipation_are_non_negative(
        p in admissible_params(),
        (rho, u) in any_state(12),
    ) {
        let s = assemble(&p, rho, u);
        let e = energy(&s, &p);
        prop_assert!(e.kinetic >= 0.0 && e.internal >= 0.0 && e.total >= 0.0);
        let d = dissipation_increment(&s, &p);
        for v in d.strain.iter().chain(&d.deviatoric) {
            prop_assert!(*v >= 0.0, "{:?}", d);
        }
    }

    #[test]
    fn moments_are_log_convex((rho, u) in any_state(20)) {
        let p = Params::saint_venant();
        let s = assemble(&p, rho, u);
        let region = RegionSpec::default();
        let mk: Vec<f64> = (1..=2 * p.m).map(|k| velocity_moments(&s, &region, &p, k).unwrap()).collect();
        for k in 1..mk.len() - 1 {
            prop_assert!(mk[k] * mk[k] <= mk[k - 1] * mk[k + 1] * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn moments_decrease_for_small_velocities(rho in prop::collection::vec(0.1f64..3.0, 20), u in prop::collection::vec(-1.0f64..1.0, 21)) {
        let p = Params::saint_venant();
        let s = assemble(&p, rho, u);
        let region = RegionSpec::default();
        let mk: Vec<f64> = (1..=2 * p.m).map(|k| velocity_moments(&s, &region, &p, k).unwrap()).collect();
        prop_assert!(mk.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn uniform_density_effective_velocity_is_velocity(
        u in prop::collection::vec(-2.0f64..2.0, 17),
        level in 0.5f64..4.0,
    ) {
        let p = Params::saint_venant();
        let s = assemble(&p, vec![level; 16], u);
        prop_assert_eq!(bd_effective_velocity(&s, &p), s.u.clone());
    }

    #[test]
    fn radius_from_mass_inverts_the_nodes(p in admissible_params(), (rho, u) in any_state(10)) {
        let s = assemble(&p, rho, u);
        for (i, &x) in s.grid.nodes.iter().enumerate() {
            let r = radius_from_mass(x, &s, &p).unwrap();
            prop_assert!((r - s.r[i]).abs() <= 1e-12 * s.a.max(1.0), "node {}", i);
        }
    }

    #[test]
    fn step_conserves_lagrangian_mass_and_pins_centre((rho, u) in any_state(12)) {
        let p = Params::saint_venant();
        let s = assemble(&p, rho, u);
        let dt = 0.1 * vacuum_ns::solver::cfl_dtau(&s, &p, 0.4);
        if let Ok(next) = step(&s, dt, &p) {
            prop_assert_eq!(next.u[0], 0.0);
            prop_assert_eq!(next.r[0], 0.0);
            prop_assert_eq!(&next.grid.widths, &s.grid.widths);
        }
    }
}

/// Short fixed-step run; perturbed runs reuse the options derived from the
/// unperturbed data so that snapshot times coincide.
fn short_run(perturbation: f64, cells: usize) -> vacuum_ns::Trajectory {
    let p = Params::saint_venant();
    let mut spec = ProfileSpec::power_law(VelocityProfile::Bump {
        amplitude: 0.25,
        center: 0.45,
        width: 0.35,
    });
    let base = make_initial_data(&p, &spec, cells).unwrap();
    let (m0, m1) = default_monitors(&base, &p);
    let est = horizon_estimates(&base, &p, m0, m1, 0.25);
    let horizon = 0.05 * est.t1a;
    let mut o = RunOptions::new(horizon, est);
    o.output = OutputControl::Interval(horizon / 6.0);
    o.timestep = vacuum_ns::solver::TimeStepControl::Fixed(horizon / 60.0);
    if perturbation != 0.0 {
        spec.perturbation = Some(VelocityProfile::Bump {
            amplitude: perturbation,
            center: 0.4,
            width: 0.2,
        });
    }
    let d = make_initial_data(&p, &spec, cells).unwrap();
    run(&d, &p, &o).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn zero_test_functions_give_exact_zero(
        centers in prop::collection::vec(0.2f64..0.8, 1..5),
        trig in any::<bool>(),
    ) {
        let t = short_run(0.0, 16);
        let fam = TestFunctionFamily {
            kind: if trig { TestFunctionKind::Trigonometric } else { TestFunctionKind::PolynomialBump },
            members: centers.iter().map(|&c| TestFunction { center: c, half_width: 0.1, amplitude: 0.0 }).collect(),
        };
        let w = weak_form_residuals(&t, &fam, &Params::saint_venant()).unwrap();
        prop_assert!(w.mass.iter().chain(&w.momentum).all(|r| *r == 0.0));
    }

    #[test]
    fn uniqueness_verdict_is_symmetric(amp in prop::sample::select(vec![0.0, 1e-8, 1e-6, 1e-4]), cut in 0.5f64..0.95) {
        let p = Params::saint_venant();
        let a = short_run(0.0, 16);
        let b = short_run(amp, 16);
        let ab = uniqueness_contraction(&a, &b, cut, &p).unwrap();
        let ba = uniqueness_contraction(&b, &a, cut, &p).unwrap();
        prop_assert_eq!(ab.passed(), ba.passed());
        prop_assert_eq!(ab.identical(), ba.identical());
        prop_assert_eq!(ab.identical(), amp == 0.0);
    }
}

#[test]
fn identical_configurations_are_bitwise_identical() {
    let a = short_run(1e-6, 32);
    let b = short_run(1e-6, 32);
    assert_eq!(a, b);
    let u = uniqueness_contraction(&a, &b, 0.9, &Params::saint_venant()).unwrap();
    assert!(u.series.iter().all(|s| s.g.to_bits() == 0));
}

#[test]
fn verification_is_a_pure_function_of_its_inputs() {
    let t = short_run(0.0, 32);
    let cfg = SuiteConfig::default();
    let p = Params::saint_venant();
    let first = serde_json::to_string(&run_suite(&t, &p, &cfg).unwrap()).unwrap();
    for _ in 0..3 {
        assert_eq!(serde_json::to_string(&run_suite(&t, &p, &cfg).unwrap()).unwrap(), first);
    }
}
