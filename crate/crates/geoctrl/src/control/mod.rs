//! Frame-presented control systems `dx/dt = sum_i u_i X_i(x; w)`,
//! their restrictions/quotients/equivalences, trajectory integration,
//! endpoint maps and singular-control detection.
//!
//! Quotient parameters `w` (dropped coordinates of a coordinate projection)
//! are appended to the control vector: a signal sample carries first the
//! frame coefficients, then the parameter values.

mod equivalence;
mod integrate;
mod steering;
mod system;

pub use equivalence::{check_equivalence, EquivalenceReport, PolyMap};
pub use integrate::{endpoint, endpoint_jacobian, integrate, is_singular_control, SingularReport};
pub use steering::{
    projection_residual, steer_to_target, verify_quotient_controllability, ControllabilityReport,
    SteeringOptions, TargetOutcome,
};
pub use system::{
    quotient, restrict, BoxDomain, ControlSignal, ControlSystem, SystemLabel, Trajectory,
};
