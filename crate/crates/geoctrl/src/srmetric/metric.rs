//! Metric presentations: orthonormal frames, product metrics, the
//! projective fibre metric, and the metric structure on the prolongation.

use crate::cartan::{LocalLeafSpace, ProlongedChart};
use crate::error::{Error, Result};
use crate::linalg;
use crate::vecfield::PolyVectorField;

/// A sub-Riemannian metric presented by declaring a frame orthonormal.
#[derive(Debug, Clone)]
pub struct SubRiemannianMetric {
    pub frame: Vec<PolyVectorField>,
}

impl SubRiemannianMetric {
    pub fn new(frame: Vec<PolyVectorField>) -> Self {
        SubRiemannianMetric { frame }
    }

    /// Squared norm of a frame-coordinate vector.
    pub fn norm_sq(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().map(|c| c * c).sum()
    }
}

/// The product metric of two orthonormal-frame metrics on complementary
/// subbundles: the concatenated frame is orthonormal.
#[derive(Debug, Clone)]
pub struct ProductMetricStructure {
    pub gl: SubRiemannianMetric,
    pub gk: SubRiemannianMetric,
}

impl ProductMetricStructure {
    /// Squared product norm of `v + w` given the frame coordinates of each
    /// factor.
    pub fn norm_sq(&self, l_coeffs: &[f64], k_coeffs: &[f64]) -> f64 {
        self.gl.norm_sq(l_coeffs) + self.gk.norm_sq(k_coeffs)
    }

    /// The concatenated orthonormal frame of `g_E`.
    pub fn ge_frame(&self) -> Vec<PolyVectorField> {
        let mut out = self.gl.frame.clone();
        out.extend(self.gk.frame.iter().cloned());
        out
    }
}

/// Build the product metric, checking pointwise complementarity of the two
/// frames at the given sample points.
pub fn product_metric(
    gl: SubRiemannianMetric,
    gk: SubRiemannianMetric,
    samples: &[Vec<f64>],
) -> Result<ProductMetricStructure> {
    for x in samples {
        let mut rows = Vec::new();
        for f in gl.frame.iter().chain(gk.frame.iter()) {
            rows.push(f.eval_f64(x)?);
        }
        let rank = linalg::rank_f64(&rows, 1e-10);
        if rank != rows.len() {
            return Err(Error::DegeneratePoint {
                msg: format!(
                    "frames are not complementary at {x:?} (rank {rank} of {})",
                    rows.len()
                ),
            });
        }
    }
    Ok(ProductMetricStructure { gl, gk })
}

/// Distance between two lines through the origin of a metric plane, given
/// by their angles: the quotient metric of the unit circle under the
/// antipodal identification.
pub fn projective_fiber_distance(angle1: f64, angle2: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let d = (angle1 - angle2).rem_euclid(pi);
    d.min(pi - d)
}

/// Which energy an optimal control problem on the splitting charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergySelector {
    /// Energy of the L-controls only.
    L,
    /// Energy of the K-controls only.
    K,
    /// Total energy.
    E,
}

/// The sub-Riemannian pseudo-product structure on the prolongation of a
/// growth-(2,3,5) model: `v` is the fibre arclength (so the vertical frame
/// field is unit for the projective fibre metric) and the leaf frame field
/// is unit because its projection to the base is a unit vector of the base
/// metric.
#[derive(Debug, Clone)]
pub struct SrCartanStructure {
    prolonged: ProlongedChart,
    leaf_space: Option<LocalLeafSpace>,
}

impl SrCartanStructure {
    pub fn prolonged(&self) -> &ProlongedChart {
        &self.prolonged
    }

    pub fn leaf_space(&self) -> Result<&LocalLeafSpace> {
        self.leaf_space.as_ref().ok_or(Error::Unsupported {
            msg: "this operation needs the leaf-space chart; attach one with with_leaf_space"
                .into(),
        })
    }

    pub fn with_leaf_space(mut self, ls: LocalLeafSpace) -> Self {
        self.leaf_space = Some(ls);
        self
    }

    /// Norm of the base projection of the leaf frame field in the base
    /// metric (must be 1 by construction).
    pub fn gk_norm_of_eta(&self, z: &[f64]) -> Result<f64> {
        // pi_Y* eta = cos(v) eta1 + sin(v) eta2, which has unit frame
        // coordinates (cos v, sin v).
        let _ = self.prolonged.eta_vector(z)?;
        let (c, s) = (z[5].cos(), z[5].sin());
        Ok((c * c + s * s).sqrt())
    }

    /// Length of the projective fibre in the fibre metric.
    pub fn fiber_circumference(&self) -> f64 {
        std::f64::consts::PI
    }
}

/// Build the metric structure on the prolongation of `model`, requiring the
/// declared base metric frame to be the model frame itself.
pub fn build_srcartan(
    prolonged: &ProlongedChart,
    g_base: &SubRiemannianMetric,
) -> Result<SrCartanStructure> {
    if g_base.frame.len() != 2
        || g_base.frame[0] != prolonged.model().frame()[0]
        || g_base.frame[1] != prolonged.model().frame()[1]
    {
        return Err(Error::Unsupported {
            msg: "the base metric frame must equal the model frame".into(),
        });
    }
    Ok(SrCartanStructure {
        prolonged: prolonged.clone(),
        leaf_space: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::prolong;
    use crate::testkit::m5_frame;
    use crate::vecfield::{Chart, PolyVectorField};

    fn flat_metrics() -> (SubRiemannianMetric, SubRiemannianMetric) {
        (
            SubRiemannianMetric::new(vec![PolyVectorField::coordinate(2, 0)]),
            SubRiemannianMetric::new(vec![PolyVectorField::coordinate(2, 1)]),
        )
    }

    #[test]
    fn product_metric_adds_the_factor_norms() {
        let (gl, gk) = flat_metrics();
        let g = product_metric(gl, gk, &[vec![0.0, 0.0]]).unwrap();
        // v in L only.
        assert_eq!(g.norm_sq(&[2.0], &[0.0]), 4.0);
        // unit L vector plus unit K vector.
        assert_eq!(g.norm_sq(&[1.0], &[1.0]), 2.0);
        assert_eq!(g.ge_frame().len(), 2);
    }

    #[test]
    fn non_complementary_frames_are_rejected() {
        let gl = SubRiemannianMetric::new(vec![PolyVectorField::coordinate(2, 0)]);
        let gk = SubRiemannianMetric::new(vec![PolyVectorField::coordinate(2, 0)]);
        assert!(product_metric(gl, gk, &[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn projective_distance_examples() {
        let pi = std::f64::consts::PI;
        assert_eq!(projective_fiber_distance(0.7, 0.7), 0.0);
        assert!((projective_fiber_distance(0.0, pi / 2.0) - pi / 2.0).abs() < 1e-15);
        // Wraparound: angles 0 and 3pi/4 are pi/4 apart as lines.
        assert!((projective_fiber_distance(0.0, 3.0 * pi / 4.0) - pi / 4.0).abs() < 1e-15);
        // Antipodal lines coincide.
        assert!(projective_fiber_distance(0.3, 0.3 + pi) < 1e-12);
    }

    #[test]
    fn cartan_structure_units() {
        let f = m5_frame();
        let model = crate::cartan::CartanModel::new(
            Chart::standard(5),
            f[0].clone(),
            f[1].clone(),
            vec![crate::testkit::q(0, 1); 5],
        )
        .unwrap();
        let chart = prolong(&model).unwrap();
        let g_base = SubRiemannianMetric::new(f.clone());
        let structure = build_srcartan(&chart, &g_base).unwrap();
        // The leaf frame field projects to a unit vector of the base metric.
        let z = [0.1, 0.2, 0.0, 0.0, 0.0, 0.4];
        assert!((structure.gk_norm_of_eta(&z).unwrap() - 1.0).abs() < 1e-15);
        // The fibre is a projective line of circumference pi.
        assert!((structure.fiber_circumference() - std::f64::consts::PI).abs() < 1e-15);
        // Frame mismatch is rejected.
        let wrong = SubRiemannianMetric::new(vec![f[1].clone(), f[0].clone()]);
        assert!(build_srcartan(&chart, &wrong).is_err());
    }
}
