//! Prolongation of a rank-2 growth-(2,3,5) distribution to the space of its
//! tangent lines, the pseudo-product splitting, the local leaf space of
//! lifted abnormal geodesics, the induced cone system, and the numerical
//! verification harnesses for the duality and asymmetry statements.

mod asymmetry;
mod duality;
mod five;
mod leaf;
mod prolong;

pub use asymmetry::{verify_asymmetry, ArcKind, AsymmetryArcReport, AsymmetryReport};
pub(crate) use duality::project_fiber_coordinate;
pub use duality::{
    cone_abnormal_extremal, sample_admissible_covector, symmetric_curve_distance, verify_duality,
    ConeAbnormalArc, DualityFiberReport, DualityOptions, DualityReport,
};
pub use five::{five_systems, FiveSystems, SystemDescriptor};
pub use leaf::{ConeSystem, LocalLeafSpace};
pub use prolong::{prolong, CartanModel, EFlagSpans, ProlongedChart, ProlongedRank2};
