//! Simulation and verification of spherically symmetric free-boundary
//! compressible Navier-Stokes flow with density-dependent viscosity, in
//! Lagrangian mass coordinates.

pub mod cli;
pub mod coords;
pub mod error;
pub mod functionals;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use model::Params;
pub use report::{CheckResult, Status, VerificationReport};
pub use solver::{LagrangianState, Trajectory};
