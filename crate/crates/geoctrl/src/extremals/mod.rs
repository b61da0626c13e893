//! Hamiltonians of control systems and optimal-control problems, and the
//! constrained Hamiltonian systems of the maximum principle.
//!
//! Normal bi-extremals are integrated after eliminating the controls
//! (`u_i = <p, X_i(x)>` at `p0 = -1`); abnormal bi-extremals of rank-2
//! frames follow the characteristic control that preserves the three
//! pairing constraints. Every arc carries per-grid-point residual records.

mod abnormal;
mod arc;
mod hamiltonian;
mod normal;

pub use abnormal::{
    integrate_abnormal_rank2, AbnormalControlMode, PolyRank2, Rank2System, ABNORMAL_PRE_TOL,
};
pub use arc::{
    classify_abnormal, pmp_residual, pmp_residual_series, rank2_pmp_residual, AbnormalClass,
    BiExtremalArc, FlagSpans, ResidualReport,
};
pub use hamiltonian::{
    hamiltonian, normal_hamiltonian, ocp_hamiltonian, EnergyCost, OptimalControlProblem,
};
pub use normal::{
    integrate_normal, integrate_normal_batch, integrate_normal_batch_serial,
    integrate_normal_rank2, shoot_normal, ShootOptions,
};
