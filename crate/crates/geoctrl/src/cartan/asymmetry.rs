//! Numerical reproduction of the asymmetry statement: every abnormal
//! extremal of the prolonged system is (a parametrization of) a fibre of
//! one of the two projections, the vertical fibres carrying regular
//! abnormal bi-extremals and the leaf fibres totally irregular ones.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::prolong::{ProlongedChart, ProlongedRank2};
use crate::error::{Error, Result};
use crate::extremals::{
    classify_abnormal, integrate_abnormal_rank2, AbnormalClass, AbnormalControlMode, BiExtremalArc,
    Rank2System,
};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    /// Costate sampled in `E^(2)-perp \ E^(3)-perp`; characteristic control.
    RegularCandidate,
    /// The canonical characteristic covector in `E^(3)-perp`; the
    /// characteristic direction degenerates there, so the arc follows the
    /// leaf direction with frozen control.
    IrregularCandidate,
}

#[derive(Debug, Clone)]
pub struct AsymmetryArcReport {
    pub kind: ArcKind,
    /// Max over the grid of the velocity component orthogonal to the
    /// vertical direction, relative.
    pub tangency_vertical: f64,
    /// Same against the leaf direction.
    pub tangency_leaf: f64,
    /// Max pairing constraint residual along the arc.
    pub constraint_residual: f64,
    pub classification: AbnormalClass,
}

impl AsymmetryArcReport {
    /// The arc is a fibre parametrization within `tol` of one of the two
    /// kinds, with the classification the statement predicts.
    pub fn consistent(&self, tol: f64) -> bool {
        let vertical = self.tangency_vertical <= tol;
        let leaf = self.tangency_leaf <= tol;
        (vertical && self.classification == AbnormalClass::Regular)
            || (leaf && self.classification == AbnormalClass::TotallyIrregular)
    }
}

#[derive(Debug, Clone)]
pub struct AsymmetryReport {
    pub arcs: Vec<AsymmetryArcReport>,
    pub tol: f64,
}

impl AsymmetryReport {
    pub fn all_consistent(&self) -> bool {
        self.arcs.iter().all(|a| a.consistent(self.tol))
    }
}

fn tangency_residuals(sys: &ProlongedRank2<'_>, arc: &BiExtremalArc) -> (f64, f64) {
    let mut worst_v: f64 = 0.0;
    let mut worst_l: f64 = 0.0;
    for (z, u) in arc.states.iter().zip(&arc.controls) {
        let xi = sys.field(0, z);
        let eta = sys.field(1, z);
        let mut vel = vec![0.0; 6];
        for i in 0..6 {
            vel[i] = u[0] * xi[i] + u[1] * eta[i];
        }
        let nv = linalg::norm(&vel);
        if nv < 1e-14 {
            continue;
        }
        let res_against = |dir: &[f64]| -> f64 {
            let nd = linalg::norm(dir);
            let proj = linalg::dot(&vel, dir) / (nd * nd);
            let mut orth = vel.clone();
            linalg::axpy(&mut orth, -proj, dir);
            linalg::norm(&orth) / nv
        };
        worst_v = worst_v.max(res_against(&xi));
        worst_l = worst_l.max(res_against(&eta));
    }
    (worst_v, worst_l)
}

fn constraint_residual(sys: &ProlongedRank2<'_>, arc: &BiExtremalArc) -> f64 {
    let mut worst: f64 = 0.0;
    for (z, p) in arc.states.iter().zip(&arc.costates) {
        for v in [sys.field(0, z), sys.field(1, z), sys.bracket(z)] {
            worst = worst.max(linalg::dot(p, &v).abs());
        }
    }
    worst
}

/// Integrate abnormal bi-extremals of the prolonged rank-2 system from
/// admissible covectors of both annihilator types at fibre points over the
/// base point of `z0`, and check the fibre-tangency/classification pattern.
pub fn verify_asymmetry(
    chart: &ProlongedChart,
    z0: &[f64],
    nsamples: usize,
    tol: f64,
    t_final: f64,
    step: f64,
    seed: u64,
) -> Result<AsymmetryReport> {
    let sys = ProlongedRank2::new(chart);
    let spans = chart.flag_spans()?;
    let y0 = &z0[..5];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arcs = Vec::new();
    for k in 0..nsamples {
        let v = (z0[5] + k as f64 * std::f64::consts::PI / nsamples as f64) % std::f64::consts::PI;
        let mut z = y0.to_vec();
        z.push(v);

        // Type 1: a random covector annihilating the lifted distribution
        // but not its square -- the regular branch.
        let frame_rows = vec![
            chart.model().frame()[0].eval_f64(y0)?,
            chart.model().frame()[1].eval_f64(y0)?,
        ];
        let dperp = linalg::nullspace_f64(&frame_rows, 5, 1e-10);
        let x3_row = {
            let b = chart.model().frame()[0].lie_bracket(&chart.model().frame()[1])?;
            b.eval_f64(y0)?
        };
        let mut p_reg: Option<Vec<f64>> = None;
        for _ in 0..40 {
            let c: Vec<f64> = (0..dperp.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let mut p = vec![0.0; 5];
            for (ci, row) in c.iter().zip(&dperp) {
                linalg::axpy(&mut p, *ci, row);
            }
            let n = linalg::norm(&p);
            if n < 1e-6 {
                continue;
            }
            for x in p.iter_mut() {
                *x /= n;
            }
            if linalg::dot(&p, &x3_row).abs() > 0.1 {
                p_reg = Some(p);
                break;
            }
        }
        let p_reg = p_reg.ok_or(Error::DegeneratePoint {
            msg: "no covector outside the third-stage annihilator found".into(),
        })?;
        let mut cov = p_reg.clone();
        cov.push(0.0);
        let arc = integrate_abnormal_rank2(
            &sys,
            &z,
            &cov,
            t_final,
            step,
            AbnormalControlMode::Characteristic,
        )?;
        let (tv, tl) = tangency_residuals(&sys, &arc);
        let class = classify_abnormal(&spans, &arc, 1e-8)?;
        arcs.push(AsymmetryArcReport {
            kind: ArcKind::RegularCandidate,
            tangency_vertical: tv,
            tangency_leaf: tl,
            constraint_residual: constraint_residual(&sys, &arc),
            classification: class,
        });

        // Type 2: the canonical characteristic covector lies in
        // `E^(3)-perp`; the characteristic control is 0/0 there and the
        // admissible motion is the leaf direction.
        let p_irr = chart.characteristic_covector(y0, v)?;
        let mut cov = p_irr.clone();
        cov.push(0.0);
        let arc = integrate_abnormal_rank2(
            &sys,
            &z,
            &cov,
            t_final,
            step,
            AbnormalControlMode::Fixed(0.0, 1.0),
        )?;
        let (tv, tl) = tangency_residuals(&sys, &arc);
        let class = classify_abnormal(&spans, &arc, 1e-8)?;
        arcs.push(AsymmetryArcReport {
            kind: ArcKind::IrregularCandidate,
            tangency_vertical: tv,
            tangency_leaf: tl,
            constraint_residual: constraint_residual(&sys, &arc),
            classification: class,
        });
    }
    Ok(AsymmetryReport { arcs, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::prolong::prolong;
    use crate::cartan::prolong::tests::{m5_model, twisted_model};

    #[test]
    fn m5_arcs_are_fibres_with_the_predicted_classes() {
        let chart = prolong(&m5_model()).unwrap();
        let z0 = [0.0, 0.0, 0.0, 0.0, 0.0, 0.2];
        let rep = verify_asymmetry(&chart, &z0, 3, 1e-6, 0.4, 1e-3, 5).unwrap();
        assert_eq!(rep.arcs.len(), 6);
        for arc in &rep.arcs {
            assert!(arc.constraint_residual <= 1e-7, "{arc:?}");
            assert!(arc.consistent(1e-6), "{arc:?}");
            match arc.kind {
                ArcKind::RegularCandidate => {
                    assert_eq!(arc.classification, AbnormalClass::Regular);
                    assert!(arc.tangency_vertical <= 1e-6);
                }
                ArcKind::IrregularCandidate => {
                    assert_eq!(arc.classification, AbnormalClass::TotallyIrregular);
                    assert!(arc.tangency_leaf <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn twisted_model_shows_the_same_pattern() {
        let chart = prolong(&twisted_model()).unwrap();
        let z0 = [0.25, 0.1, 0.03, 0.02, 0.01, 0.5];
        let rep = verify_asymmetry(&chart, &z0, 2, 1e-5, 0.3, 1e-3, 9).unwrap();
        assert!(
            rep.arcs.iter().all(|a| a.consistent(1e-5)),
            "{:#?}",
            rep.arcs
        );
    }

    #[test]
    fn perturbed_costate_classifies_as_other() {
        use crate::extremals::BiExtremalArc;
        let chart = prolong(&m5_model()).unwrap();
        let spans = chart.flag_spans().unwrap();
        // A fibre arc whose costate is polluted by a frame direction.
        let times: Vec<f64> = (0..5).map(|k| 0.1 * k as f64).collect();
        let states: Vec<Vec<f64>> = times
            .iter()
            .map(|t| vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.2 + t])
            .collect();
        let costates = vec![vec![0.6, 0.0, 0.0, 0.0, 0.8, 0.0]; 5];
        let controls = vec![vec![1.0, 0.0]; 5];
        let arc = BiExtremalArc::new(times, states, costates, controls, 0.0).unwrap();
        let class = classify_abnormal(&spans, &arc, 1e-8).unwrap();
        assert_eq!(class, AbnormalClass::Other);
    }
}
