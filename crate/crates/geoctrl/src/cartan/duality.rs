//! Numerical reproduction of the duality statement: abnormal extremals of
//! the cone system on the local leaf space coincide, as unparametrized
//! curves, with the chart-map images of the vertical fibres.
//!
//! Two independent computations are compared. Candidates map the fibre
//! `{(y, v) : v}` through the leaf-space chart. Extremals integrate the
//! constrained Hamiltonian system of the rank-1 cone system (the fibre
//! coordinate enters as a control parameter): state `(x, p, w)` with
//!
//! `dx/dt = a G(x, w)`, `dp/dt = -a (dG/dx)^T p`,
//! constraints `<p, G(x, w)> = 0` and `<p, dG/dw(x, w)> = 0`,
//!
//! where the second constraint is solved for `w` at every stage evaluation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::leaf::{ConeSystem, LocalLeafSpace};
use super::prolong::ProlongedChart;
use crate::error::{Error, Result};
use crate::linalg;

/// An integrated abnormal arc of the cone system.
#[derive(Debug, Clone)]
pub struct ConeAbnormalArc {
    pub times: Vec<f64>,
    /// Slice coordinates of the state.
    pub states: Vec<Vec<f64>>,
    pub costates: Vec<Vec<f64>>,
    /// The fibre-coordinate control along the arc.
    pub fiber_controls: Vec<f64>,
    /// The speed control (constant).
    pub speed: f64,
    /// Max drift of `<p, G>` and `<p, G_w>` seen along the arc.
    pub constraint_drift: f64,
}

/// Solve `<p, G_w(x, w)> = 0` for `w` by Newton, warm-started at `w`. The
/// left side carries finite-difference noise around 1e-6 |p|, so the
/// stopping tolerance sits just above it.
pub(crate) fn project_fiber_coordinate(
    cone: &ConeSystem,
    x: &[f64],
    p: &[f64],
    mut w: f64,
) -> Result<f64> {
    let tol = 3e-6 * linalg::norm(p).max(1.0);
    for _ in 0..25 {
        let g = linalg::dot(p, &cone.generator_w(x, w)?);
        if g.abs() <= tol {
            return Ok(w);
        }
        let dg = linalg::dot(p, &cone.generator_ww(x, w)?);
        if dg.abs() < 1e-7 {
            return Err(Error::CharacteristicDegenerate { t: w });
        }
        let step = (-g / dg).clamp(-0.2, 0.2);
        w += step;
        if step.abs() < 1e-12 {
            break;
        }
    }
    let g = linalg::dot(p, &cone.generator_w(x, w)?);
    if g.abs() <= 10.0 * tol {
        Ok(w)
    } else {
        Err(Error::ShootingFailed {
            best_residual: g.abs(),
        })
    }
}

/// Integrate the cone-system abnormal arc from `(x0, w0, p0)` until the
/// accumulated arclength reaches `arclength`; `speed` is +1 or -1.
pub fn cone_abnormal_extremal(
    cone: &ConeSystem,
    x0: &[f64],
    w0: f64,
    p0: &[f64],
    arclength: f64,
    dt: f64,
    speed: f64,
) -> Result<ConeAbnormalArc> {
    let mut x = x0.to_vec();
    let mut p = p0.to_vec();
    let mut w = project_fiber_coordinate(cone, &x, &p, w0)?;
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut costates = vec![p.clone()];
    let mut fiber_controls = vec![w];
    let mut drift: f64 = 0.0;
    let mut length = 0.0;
    let mut t = 0.0;
    // Stage evaluation of the half-explicit system: solve the fibre
    // coordinate, then the differential part.
    let eval = |x: &[f64], p: &[f64], w_guess: f64| -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let w = project_fiber_coordinate(cone, x, p, w_guess)?;
        let g = cone.generator(x, w)?;
        let jac = cone.generator_x_jacobian(x, w)?;
        let dx: Vec<f64> = g.iter().map(|v| speed * v).collect();
        let mut dp = vec![0.0; 5];
        for j in 0..5 {
            let mut acc = 0.0;
            for i in 0..5 {
                acc += p[i] * jac[i][j];
            }
            dp[j] = -speed * acc;
        }
        Ok((dx, dp, w))
    };
    for _ in 0..10_000 {
        if length >= arclength {
            break;
        }
        let (k1x, k1p, w1) = eval(&x, &p, w)?;
        let x2: Vec<f64> = (0..5).map(|i| x[i] + 0.5 * dt * k1x[i]).collect();
        let p2: Vec<f64> = (0..5).map(|i| p[i] + 0.5 * dt * k1p[i]).collect();
        let (k2x, k2p, w2) = eval(&x2, &p2, w1)?;
        let x3: Vec<f64> = (0..5).map(|i| x[i] + 0.5 * dt * k2x[i]).collect();
        let p3: Vec<f64> = (0..5).map(|i| p[i] + 0.5 * dt * k2p[i]).collect();
        let (k3x, k3p, w3) = eval(&x3, &p3, w2)?;
        let x4: Vec<f64> = (0..5).map(|i| x[i] + dt * k3x[i]).collect();
        let p4: Vec<f64> = (0..5).map(|i| p[i] + dt * k3p[i]).collect();
        let (k4x, k4p, w4) = eval(&x4, &p4, w3)?;
        let mut dx_norm = 0.0;
        for i in 0..5 {
            let dx = dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            x[i] += dx;
            dx_norm += dx * dx;
            p[i] += dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
        }
        let _ = w4;
        w = project_fiber_coordinate(cone, &x, &p, w3)?;
        t += dt;
        length += dx_norm.sqrt();
        let g = cone.generator(&x, w)?;
        drift = drift.max(linalg::dot(&p, &g).abs());
        times.push(t);
        states.push(x.clone());
        costates.push(p.clone());
        fiber_controls.push(w);
        if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t_last: t });
        }
    }
    Ok(ConeAbnormalArc {
        times,
        states,
        costates,
        fiber_controls,
        speed,
        constraint_drift: drift,
    })
}

/// Sample a unit covector annihilating `G` and `G_w` at `(x0, w0)` with the
/// second-order nondegeneracy `<p, G_ww> != 0`.
pub fn sample_admissible_covector(
    cone: &ConeSystem,
    x0: &[f64],
    w0: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let rows = vec![cone.generator(x0, w0)?, cone.generator_w(x0, w0)?];
    let null = linalg::nullspace_f64(&rows, 5, 1e-9);
    if null.len() < 3 {
        return Err(Error::DegeneratePoint {
            msg: format!("cone constraint nullspace has dimension {}", null.len()),
        });
    }
    let gww = cone.generator_ww(x0, w0)?;
    for _ in 0..60 {
        let mut p = vec![0.0; 5];
        for row in &null {
            linalg::axpy(&mut p, rng.random_range(-1.0..1.0), row);
        }
        let n = linalg::norm(&p);
        if n < 1e-6 {
            continue;
        }
        for v in p.iter_mut() {
            *v /= n;
        }
        if linalg::dot(&p, &gww).abs() > 1e-3 {
            return Ok(p);
        }
    }
    Err(Error::DegeneratePoint {
        msg: "no second-order nondegenerate covector found".into(),
    })
}

/// Distance from a point to a polyline (nearest segment projection).
fn point_polyline_distance(pt: &[f64], curve: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for seg in curve.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let ab = linalg::sub(b, a);
        let ap = linalg::sub(pt, a);
        let denom = linalg::dot(&ab, &ab);
        let tproj = if denom > 0.0 {
            (linalg::dot(&ap, &ab) / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let d2: f64 = (0..pt.len())
            .map(|i| (pt[i] - (a[i] + tproj * ab[i])).powi(2))
            .sum();
        best = best.min(d2);
    }
    best.sqrt()
}

/// Symmetric polyline distance: the max of the two one-sided max-min
/// distances.
pub fn symmetric_curve_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one = |from: &[Vec<f64>], to: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|p| point_polyline_distance(p, to))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Trim a polyline that starts at the anchor to the given arclength,
/// interpolating the final point.
fn trim_to_arclength(curve: &[Vec<f64>], budget: f64) -> Vec<Vec<f64>> {
    let mut out = vec![curve[0].clone()];
    let mut acc = 0.0;
    for seg in curve.windows(2) {
        let step = linalg::norm(&linalg::sub(&seg[1], &seg[0]));
        if acc + step >= budget {
            let frac = if step > 0.0 {
                (budget - acc) / step
            } else {
                0.0
            };
            let last: Vec<f64> = (0..seg[0].len())
                .map(|i| seg[0][i] + frac * (seg[1][i] - seg[0][i]))
                .collect();
            out.push(last);
            return out;
        }
        acc += step;
        out.push(seg[1].clone());
    }
    out
}

#[derive(Debug, Clone)]
pub struct DualityOptions {
    pub nfibers: usize,
    pub covectors_per_fiber: usize,
    /// Total arclength window of the comparison (half per side).
    pub window: f64,
    /// Fibre-angle sampling step for the candidate curves.
    pub candidate_dv: f64,
    /// Time step of the extremal integration.
    pub dae_step: f64,
    pub tol: f64,
    /// Radius of the random base-point offsets for the sampled fibres.
    pub fiber_radius: f64,
    pub seed: u64,
}

impl Default for DualityOptions {
    fn default() -> Self {
        DualityOptions {
            nfibers: 5,
            covectors_per_fiber: 2,
            window: 0.5,
            candidate_dv: 5e-3,
            dae_step: 1.25e-2,
            tol: 1e-4,
            fiber_radius: 0.12,
            seed: 23,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualityFiberReport {
    pub base_offset: Vec<f64>,
    /// Distance of each integrated extremal to the fibre-image candidate.
    pub curve_distances: Vec<f64>,
    /// Max pairwise distance among the extremals of this fibre.
    pub uniqueness_gap: f64,
    /// Max slice drift of the chart map along the K-leaf through the
    /// anchor (a leaf image is a point, never a curve).
    pub leaf_image_drift: f64,
    /// Max `<p, G>` drift over the extremals.
    pub constraint_drift: f64,
}

#[derive(Debug, Clone)]
pub struct DualityReport {
    pub fibers: Vec<DualityFiberReport>,
    pub tol: f64,
}

impl DualityReport {
    pub fn max_curve_distance(&self) -> f64 {
        self.fibers
            .iter()
            .flat_map(|f| f.curve_distances.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn all_matched(&self) -> bool {
        self.max_curve_distance() <= self.tol
            && self.fibers.iter().all(|f| f.uniqueness_gap <= self.tol)
    }
}

/// Compare the chart-map images of vertical fibres with independently
/// integrated abnormal extremals of the cone system.
pub fn verify_duality(
    chart: &ProlongedChart,
    ls: &LocalLeafSpace,
    opts: &DualityOptions,
) -> Result<DualityReport> {
    let cone = ConeSystem::new(ls.clone());
    let z0 = ls.base_point();
    let v0 = z0[5];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut offsets = vec![vec![0.0; 5]];
    while offsets.len() < opts.nfibers {
        let off: Vec<f64> = (0..5)
            .map(|_| rng.random_range(-1.0..1.0) * opts.fiber_radius)
            .collect();
        offsets.push(off);
    }
    let half = 0.5 * opts.window;
    let mut fibers = Vec::new();
    for off in offsets {
        let y: Vec<f64> = (0..5).map(|i| z0[i] + off[i]).collect();
        // Candidate: the fibre {(y, v)} through the chart map, grown to the
        // arclength budget on each side of v0.
        let fiber_point = |v: f64| -> Vec<f64> {
            let mut z = y.clone();
            z.push(v);
            z
        };
        let anchor_cp = ls.chartmap(&fiber_point(v0))?;
        let grow = |dir: f64| -> Result<Vec<Vec<f64>>> {
            let mut pts = vec![anchor_cp.slice.clone()];
            let mut acc = 0.0;
            let mut v = v0;
            while acc < half * 1.02 {
                v += dir * opts.candidate_dv;
                let cp = ls.chartmap(&fiber_point(v))?;
                acc += linalg::norm(&linalg::sub(&cp.slice, pts.last().unwrap()));
                pts.push(cp.slice);
            }
            Ok(trim_to_arclength(&pts, half))
        };
        let fwd = grow(1.0)?;
        let bwd = grow(-1.0)?;
        let mut candidate: Vec<Vec<f64>> = bwd.into_iter().rev().collect();
        candidate.extend(fwd.into_iter().skip(1));

        // Independent extremals of the cone system from the anchor.
        let x0 = anchor_cp.slice.clone();
        let w0 = -anchor_cp.flow_time;
        let mut curve_distances = Vec::new();
        let mut extremal_curves: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut constraint_drift: f64 = 0.0;
        for _ in 0..opts.covectors_per_fiber {
            let p0 = sample_admissible_covector(&cone, &x0, w0, &mut rng)?;
            let fwd_arc = cone_abnormal_extremal(&cone, &x0, w0, &p0, half, opts.dae_step, 1.0)?;
            let bwd_arc = cone_abnormal_extremal(&cone, &x0, w0, &p0, half, opts.dae_step, -1.0)?;
            constraint_drift = constraint_drift
                .max(fwd_arc.constraint_drift)
                .max(bwd_arc.constraint_drift);
            let f = trim_to_arclength(&fwd_arc.states, half);
            let b = trim_to_arclength(&bwd_arc.states, half);
            let mut curve: Vec<Vec<f64>> = b.into_iter().rev().collect();
            curve.extend(f.into_iter().skip(1));
            curve_distances.push(symmetric_curve_distance(&candidate, &curve));
            extremal_curves.push(curve);
        }
        let mut uniqueness_gap: f64 = 0.0;
        for i in 0..extremal_curves.len() {
            for j in i + 1..extremal_curves.len() {
                uniqueness_gap = uniqueness_gap.max(symmetric_curve_distance(
                    &extremal_curves[i],
                    &extremal_curves[j],
                ));
            }
        }
        // A K-leaf maps to a single point of the leaf space.
        let mut leaf_image_drift: f64 = 0.0;
        for s in [-0.15, 0.1, 0.2] {
            let zl = {
                let mut z = fiber_point(v0);
                chart.flow_eta(&mut z, s, 2e-3)?;
                z
            };
            let cp = ls.chartmap(&zl)?;
            leaf_image_drift =
                leaf_image_drift.max(linalg::norm(&linalg::sub(&cp.slice, &anchor_cp.slice)));
        }
        fibers.push(DualityFiberReport {
            base_offset: off,
            curve_distances,
            uniqueness_gap,
            leaf_image_drift,
            constraint_drift,
        });
    }
    Ok(DualityReport {
        fibers,
        tol: opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::prolong::prolong;
    use crate::cartan::prolong::tests::m5_model;

    #[test]
    fn curve_distance_of_shifted_polylines() {
        let a: Vec<Vec<f64>> = (0..50).map(|k| vec![k as f64 * 0.01, 0.0]).collect();
        let b: Vec<Vec<f64>> = (0..50).map(|k| vec![k as f64 * 0.01, 1e-3]).collect();
        let d = symmetric_curve_distance(&a, &b);
        assert!((d - 1e-3).abs() < 1e-12);
        // Sampling density does not matter for points on the same segment.
        let c: Vec<Vec<f64>> = (0..8).map(|k| vec![k as f64 * 0.07, 0.0]).collect();
        assert!(symmetric_curve_distance(&a, &c) < 1e-12);
    }

    #[test]
    fn single_fiber_duality_on_m5() {
        let chart = prolong(&m5_model()).unwrap();
        let z0 = [0.0, 0.0, 0.0, 0.0, 0.0, 0.3];
        let ls = LocalLeafSpace::new(&chart, &z0).unwrap();
        let opts = DualityOptions {
            nfibers: 2,
            covectors_per_fiber: 2,
            window: 0.3,
            tol: 1e-4,
            seed: 3,
            ..DualityOptions::default()
        };
        let rep = verify_duality(&chart, &ls, &opts).unwrap();
        assert!(rep.all_matched(), "{rep:#?}");
        for f in &rep.fibers {
            assert!(f.leaf_image_drift <= 1e-7, "leaf image moved: {f:?}");
        }
    }
}
