use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{bd_entropy, mass, RegionSpec};
use crate::model::Params;
use crate::quadrature::fit_order;
use crate::report::{CheckResult, VerificationReport};
use crate::solver::Trajectory;

use super::identities::{bd_transport_residual, energy_identity_residuals};
use super::weak_form::{weak_form_residuals, TestFunctionFamily};

/// One member of a refinement study.
#[derive(Clone, Copy, Debug)]
pub struct GridRun<'a> {
    pub cells: usize,
    pub traj: &'a Trajectory,
}

/// Minimum observed orders and the allowed BD entropy drift between the
/// two finest grids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementTargets {
    pub energy_order: f64,
    pub mass_order: f64,
    pub weak_form_order: f64,
    pub bd_order: f64,
    pub bd_entropy_variation: f64,
}

impl Default for RefinementTargets {
    fn default() -> Self {
        RefinementTargets {
            energy_order: 1.5,
            mass_order: 1.8,
            weak_form_order: 1.0,
            bd_order: 1.0,
            bd_entropy_variation: 0.10,
        }
    }
}

struct GridErrors {
    dx: f64,
    energy_strain: f64,
    energy_deviatoric: f64,
    eulerian_mass: f64,
    weak_form: f64,
    bd_transport: f64,
    bd_entropy: f64,
}

fn grid_errors(
    run: &GridRun,
    p: &Params,
    region: &RegionSpec,
    fam: &TestFunctionFamily,
) -> Result<GridErrors> {
    let traj = run.traj;
    let energy = energy_identity_residuals(traj, p);
    let mut eulerian_mass = 0.0_f64;
    let mut entropy = 0.0_f64;
    for s in &traj.snapshots {
        eulerian_mass = eulerian_mass.max((mass(s, p)?.eulerian - 1.0).abs());
        entropy = entropy.max(bd_entropy(s, region, p)?.value);
    }
    let weak = weak_form_residuals(traj, fam, p)?;
    Ok(GridErrors {
        dx: traj.snapshots[0].grid.max_width(),
        energy_strain: energy.strain,
        energy_deviatoric: energy.deviatoric,
        eulerian_mass,
        weak_form: weak.max_mass().max(weak.max_momentum()),
        bd_transport: bd_transport_residual(traj, p)?,
        bd_entropy: entropy,
    })
}

/// Observed convergence orders over at least three distinct grids, graded
/// against `targets`. Each run should share the configuration and refine
/// the output spacing together with the grid.
pub fn refinement_study(
    runs: &[GridRun],
    p: &Params,
    region: &RegionSpec,
    fam: &TestFunctionFamily,
    targets: &RefinementTargets,
) -> Result<VerificationReport> {
    let mut sorted: Vec<&GridRun> = runs.iter().collect();
    sorted.sort_by_key(|r| r.cells);
    if sorted.windows(2).any(|w| w[0].cells == w[1].cells) {
        return Err(Error::Mismatch("refinement grids must be distinct".into()));
    }
    if sorted.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "refinement study needs at least 3 grids, got {}",
            sorted.len()
        )));
    }
    let errors = sorted
        .iter()
        .map(|r| grid_errors(r, p, region, fam))
        .collect::<Result<Vec<_>>>()?;
    let dx: Vec<f64> = errors.iter().map(|e| e.dx).collect();
    let column = |f: fn(&GridErrors) -> f64| errors.iter().map(f).collect::<Vec<f64>>();

    let mut report = VerificationReport::default();
    let series: [(&str, &str, Vec<f64>, f64); 5] = [
        ("energy_identity.strain", "energy balance, strain form", column(|e| e.energy_strain), targets.energy_order),
        (
            "energy_identity.deviatoric",
            "energy balance, deviatoric form",
            column(|e| e.energy_deviatoric),
            targets.energy_order,
        ),
        ("mass.eulerian", "reconstructed Eulerian mass", column(|e| e.eulerian_mass), targets.mass_order),
        ("weak_form", "weak formulation residual", column(|e| e.weak_form), targets.weak_form_order),
        ("bd.transport", "effective velocity transport", column(|e| e.bd_transport), targets.bd_order),
    ];
    for (id, anchor, errs, target) in series {
        let order = fit_order(&dx, &errs);
        report.refinement_orders.insert(id.to_string(), order);
        let detail = errs
            .iter()
            .zip(&sorted)
            .map(|(e, r)| format!("M={}: {e:.3e}", r.cells))
            .collect::<Vec<_>>()
            .join(", ");
        report.push(
            CheckResult::graded(&format!("order.{id}"), anchor, (target - order).max(0.0), 0.0)
                .with_detail(format!("order {order:.3} (target {target}); {detail}")),
        );
    }

    let n = errors.len();
    let (fine, finer) = (errors[n - 2].bd_entropy, errors[n - 1].bd_entropy);
    let variation = (fine - finer).abs() / finer.abs().max(f64::MIN_POSITIVE);
    report.push(
        CheckResult::graded(
            "bd.entropy_grid_stability",
            "cutoff BD entropy grid stability",
            variation,
            targets.bd_entropy_variation,
        )
        .with_detail(format!("finest two grids: {fine:.6e}, {finer:.6e}")),
    );
    Ok(report)
}
