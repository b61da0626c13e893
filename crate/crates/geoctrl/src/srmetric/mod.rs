//! Sub-Riemannian metrics on pseudo-product splittings and the explicit
//! constrained Hamiltonian systems of the associated optimal control
//! problems, together with the lifting/reduction machinery for abnormal
//! bi-extremals of the quotients.

mod conegeo;
mod lift;
mod metric;
mod pmp;

pub use conegeo::{verify_cone_geodesics, ConeGeodesicOptions, ConeGeodesicReport};
pub use lift::{
    extend_biextremal, lift_abnormal, lift_abnormal_cone, lifted_residual,
    quotient_abnormal_residual, reduce_biextremal, y_quotient_abnormal, y_quotient_residual,
    YQuotientArc, LIPSCHITZ_BOUND,
};
pub use metric::{
    build_srcartan, product_metric, projective_fiber_distance, EnergySelector,
    ProductMetricStructure, SrCartanStructure, SubRiemannianMetric,
};
pub use pmp::{pmp_system, ChartChoice, LeafChartRank2, PmpProblemId, PmpSystem};
