//! Independent re-implementations of the discrete operators on small grids,
//! compared against the library.

mod common;

use common::{build, cases, oracle, rel_err};
use vacuum_ns::coords::{radius_from_mass, Reconstruction};
use vacuum_ns::model::{make_initial_data, ProfileSpec, VelocityProfile};
use vacuum_ns::solver::{cfl_dtau, semi_discrete_rhs, step};
use vacuum_ns::{LagrangianState, Params};

#[test]
fn rhs_matches_independent_oracle_on_manufactured_states() {
    for (k, case) in cases().iter().enumerate() {
        let s = build(case);
        let got = semi_discrete_rhs(&s, &case.p).unwrap();
        let want = oracle(&s, &case.p);
        let (eu, er) = (rel_err(&got.du, &want.du), rel_err(&got.drho, &want.drho));
        assert!(eu <= 1e-12 && er <= 1e-12, "case {k}: du {eu:e}, drho {er:e}");
        assert_eq!(got.du[0], 0.0);
        assert_eq!(got.dr, s.u);
        assert_eq!(got.da, s.u[s.u.len() - 1]);
    }
}

#[test]
fn rhs_at_midpoint_of_linear_state() {
    // ρ = 2 - x, u = x(1 - x), N = 2 on eight cells; x = 0.5 is node 4
    let case = &cases()[0];
    let s = build(case);
    let got = semi_discrete_rhs(&s, &case.p).unwrap().du[4];
    let want = oracle(&s, &case.p).du[4];
    assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
}

#[test]
fn step_is_heun_composition_of_rhs() {
    let case = &cases()[0];
    let p = &case.p;
    let s = build(case);
    let dt = 0.25 * cfl_dtau(&s, p, 0.4);
    let next = step(&s, dt, p).unwrap();

    let euler = |s: &LagrangianState| {
        let k = semi_discrete_rhs(s, p).unwrap();
        let mut out = s.clone();
        for (y, d) in out.rho.iter_mut().zip(&k.drho) {
            *y += dt * d;
        }
        for (y, d) in out.u.iter_mut().zip(&k.du) {
            *y += dt * d;
        }
        for (y, d) in out.r.iter_mut().zip(&k.dr) {
            *y += dt * d;
        }
        out.a += dt * k.da;
        out.u[0] = 0.0;
        out.r[0] = 0.0;
        out
    };
    let two = euler(&euler(&s));
    let half = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>();
    assert_eq!(next.rho, half(&s.rho, &two.rho));
    assert_eq!(next.u, half(&s.u, &two.u));
    assert_eq!(next.r, half(&s.r, &two.r));
    assert_eq!(next.a, 0.5 * (s.a + two.a));
    assert_eq!(next.u[0], 0.0);
    assert_eq!(next.tau, dt);
}

#[test]
fn cfl_matches_hand_formula() {
    for case in cases() {
        let s = build(&case);
        let p = &case.p;
        let n1 = p.dim as f64 - 1.0;
        let mut limit = f64::INFINITY;
        for j in 0..s.rho.len() {
            let dx = case.nodes[j + 1] - case.nodes[j];
            let rn = s.r[j + 1].powf(n1);
            let visc = dx * dx / (p.theta * s.rho[j].powf(p.theta + 1.0) * rn * rn);
            let acou = dx / (s.rho[j].powf(0.5 * (p.gamma - 1.0)) * rn);
            limit = limit.min(visc.min(acou));
        }
        let got = cfl_dtau(&s, p, 0.4);
        assert!((got - 0.4 * limit).abs() <= 1e-15 * limit, "{got} vs {}", 0.4 * limit);
    }
}

#[test]
fn coordinate_roundtrip_on_all_grids() {
    let p = Params::saint_venant();
    for cells in [16, 32, 64, 128, 256, 512] {
        let d = make_initial_data(&p, &ProfileSpec::power_law(VelocityProfile::Zero), cells).unwrap();
        let s = LagrangianState::from_initial(&d);
        let rec = Reconstruction::new(&s, &p).unwrap();
        for &x in &s.grid.nodes {
            let r = radius_from_mass(x, &s, &p).unwrap();
            let back = rec.mass_coordinate(r).unwrap();
            assert!((back - x).abs() <= 1e-12, "M={cells} x={x} back={back}");
        }
    }
}

#[test]
fn radius_from_mass_is_monotone() {
    let p = Params::saint_venant();
    let d = make_initial_data(&p, &ProfileSpec::power_law(VelocityProfile::Zero), 32).unwrap();
    let s = LagrangianState::from_initial(&d);
    let xs: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
    let rs: Vec<f64> = xs.iter().map(|&x| radius_from_mass(x, &s, &p).unwrap()).collect();
    assert!(rs.windows(2).all(|w| w[1] > w[0]));
}
