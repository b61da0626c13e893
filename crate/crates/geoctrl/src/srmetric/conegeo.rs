//! Numerical check that normal geodesics of the quotient problems are
//! projections of fibre geodesics.
//!
//! Over the leaf space: normal extremals of the total-energy quotient
//! problem must match the chart-map images of unit-speed fibre curves, with
//! the eliminated leaf control identically zero. Over the base: normal
//! extremals of the total-energy quotient must match the base projections
//! of unit-speed leaf curves, with the eliminated vertical control zero.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metric::SrCartanStructure;
use super::pmp::{pmp_system, ChartChoice, PmpProblemId};
use crate::cartan::{symmetric_curve_distance, ConeSystem};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct ConeGeodesicOptions {
    pub npoints: usize,
    /// Arclength window for the curve comparison (half per side).
    pub window: f64,
    pub tol: f64,
    pub dae_step: f64,
    pub offset_radius: f64,
    pub seed: u64,
}

impl Default for ConeGeodesicOptions {
    fn default() -> Self {
        ConeGeodesicOptions {
            npoints: 5,
            window: 0.3,
            tol: 1e-4,
            dae_step: 1.25e-2,
            offset_radius: 0.1,
            seed: 37,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConeGeodesicReport {
    /// Curve distance per sample point, leaf-space side.
    pub x_side_distances: Vec<f64>,
    /// Max |b| of the eliminated leaf control, leaf-space side.
    pub max_b_residual: f64,
    /// Curve distance per sample point, base side.
    pub y_side_distances: Vec<f64>,
    /// Max |lambda| of the eliminated vertical control, base side.
    pub max_lambda_residual: f64,
    pub tol: f64,
}

impl ConeGeodesicReport {
    pub fn all_matched(&self) -> bool {
        self.x_side_distances.iter().all(|d| *d <= self.tol)
            && self.y_side_distances.iter().all(|d| *d <= self.tol)
    }
}

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
            out.push(
                (0..seg[0].len())
                    .map(|i| seg[0][i] + frac * (seg[1][i] - seg[0][i]))
                    .collect(),
            );
            return out;
        }
        acc += step;
        out.push(seg[1].clone());
    }
    out
}

fn two_sided(
    mut one_side: impl FnMut(f64) -> Result<Vec<Vec<f64>>>,
    half: f64,
) -> Result<Vec<Vec<f64>>> {
    let fwd = trim_to_arclength(&one_side(1.0)?, half);
    let bwd = trim_to_arclength(&one_side(-1.0)?, half);
    let mut out: Vec<Vec<f64>> = bwd.into_iter().rev().collect();
    out.extend(fwd.into_iter().skip(1));
    Ok(out)
}

/// Run both comparisons on the structure's leaf space.
pub fn verify_cone_geodesics(
    structure: &SrCartanStructure,
    opts: &ConeGeodesicOptions,
) -> Result<ConeGeodesicReport> {
    let ls = structure.leaf_space()?.clone();
    let chart = structure.prolonged().clone();
    let cone = ConeSystem::new(ls.clone());
    let z0 = ls.base_point().to_vec();
    let v0 = z0[5];
    let half = 0.5 * opts.window;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let x_system = pmp_system(structure, PmpProblemId::EModXFullEnergy, ChartChoice::XW)?;
    let y_system = pmp_system(structure, PmpProblemId::EModYFullEnergy, ChartChoice::YV)?;

    let mut x_side_distances = Vec::new();
    let mut y_side_distances = Vec::new();
    let mut max_b_residual: f64 = 0.0;
    let mut max_lambda_residual: f64 = 0.0;
    for k in 0..opts.npoints {
        let offset: Vec<f64> = if k == 0 {
            vec![0.0; 5]
        } else {
            (0..5)
                .map(|_| rng.random_range(-1.0..1.0) * opts.offset_radius)
                .collect()
        };
        let y: Vec<f64> = (0..5).map(|i| z0[i] + offset[i]).collect();
        let fiber_point = |v: f64| -> Vec<f64> {
            let mut z = y.clone();
            z.push(v);
            z
        };

        // ---- Leaf-space side: candidate = chart image of the unit-speed
        // fibre curve (v is fibre arclength).
        let anchor = ls.chartmap(&fiber_point(v0))?;
        let candidate_x = two_sided(
            |dir| {
                let mut pts = vec![anchor.slice.clone()];
                let mut acc = 0.0;
                let mut v = v0;
                while acc < half * 1.05 {
                    v += dir * 5e-3;
                    let cp = ls.chartmap(&fiber_point(v))?;
                    acc += linalg::norm(&linalg::sub(&cp.slice, pts.last().unwrap()));
                    pts.push(cp.slice);
                }
                Ok(pts)
            },
            half,
        )?;
        // Normal extremal of the quotient over the leaf space: costate with
        // <p, G> = 1 (unit speed) and <p, G_w> = 0.
        let x0 = anchor.slice.clone();
        let w0 = -anchor.flow_time;
        let g = cone.generator(&x0, w0)?;
        let gw = cone.generator_w(&x0, w0)?;
        let p_particular = linalg::solve_lsq(&[g.clone(), gw.clone()], &[1.0, 0.0], 1e-12).ok_or(
            Error::DegeneratePoint {
                msg: "cannot normalize the cone covector".into(),
            },
        )?;
        let null = linalg::nullspace_f64(&[g, gw], 5, 1e-9);
        let mut p0 = p_particular;
        for row in &null {
            linalg::axpy(&mut p0, rng.random_range(-0.5..0.5), row);
        }
        let extremal_x = two_sided(
            |dir| {
                let t_span = 1.4 * half;
                let arc =
                    x_system.integrate_normal(&x0, &p0, Some(w0), dir * t_span, opts.dae_step)?;
                for u in &arc.controls {
                    max_b_residual = max_b_residual.max(u[2].abs());
                }
                Ok(arc.states)
            },
            half,
        )?;
        x_side_distances.push(symmetric_curve_distance(&candidate_x, &extremal_x));

        // ---- Base side: candidate = base projection of the unit-speed
        // leaf curve.
        let candidate_y = two_sided(
            |dir| {
                let leaf = chart.k_leaf(&fiber_point(v0), dir * 1.4 * half, 2e-3)?;
                Ok(leaf.into_iter().map(|z| z[..5].to_vec()).collect())
            },
            half,
        )?;
        // Normal extremal of the quotient over the base. A quotient
        // extremal drags the angle control with dv/dt = <q, [eta1, eta2]>,
        // while the zero-extension lift to the full system needs
        // dv/dt = mu rho; the liftable covectors satisfy that compatibility
        // and its leafwise derivative on top of the stationarity and the
        // unit-speed normalization.
        let frame = chart.model().frame();
        let e1 = frame[0].eval_f64(&y)?;
        let e2 = frame[1].eval_f64(&y)?;
        let (c, s) = (v0.cos(), v0.sin());
        let dir0: Vec<f64> = (0..5).map(|i| c * e1[i] + s * e2[i]).collect();
        let dirp: Vec<f64> = (0..5).map(|i| -s * e1[i] + c * e2[i]).collect();
        let x3 = frame[0].lie_bracket(&frame[1])?;
        let w1 = frame[0].lie_bracket(&x3)?;
        let w2 = frame[1].lie_bracket(&x3)?;
        let x3v = x3.eval_f64(&y)?;
        let wv: Vec<f64> = (0..5)
            .map(|i| c * w1.eval_f64(&y).unwrap()[i] + s * w2.eval_f64(&y).unwrap()[i])
            .collect();
        let rho0 = chart.rho(&y, v0)?;
        // d(rho)/dt along the unit-speed leaf, by a central difference of
        // the fibre-angle velocity along the leaf flow.
        let rho_dot = {
            let h = 1e-3;
            let fwd = chart.k_leaf(&fiber_point(v0), h, 1e-3)?;
            let bwd = chart.k_leaf(&fiber_point(v0), -h, 1e-3)?;
            let zf = fwd.last().unwrap();
            let zb = bwd.last().unwrap();
            (chart.rho(&zf[..5], zf[5])? - chart.rho(&zb[..5], zb[5])?) / (2.0 * h)
        };
        let rows = vec![dir0.clone(), dirp.clone(), x3v.clone(), wv.clone()];
        let rhs = vec![1.0, 0.0, rho0, rho_dot];
        let q_particular = linalg::solve_lsq(&rows, &rhs, 1e-12).ok_or(Error::DegeneratePoint {
            msg: "cannot normalize the base covector".into(),
        })?;
        let nullq = linalg::nullspace_f64(&rows, 5, 1e-9);
        let mut q0 = q_particular;
        for row in &nullq {
            linalg::axpy(&mut q0, rng.random_range(-0.5..0.5), row);
        }
        let extremal_y = two_sided(
            |dir| {
                let arc = y_system.integrate_normal(&y, &q0, Some(v0), dir * 1.4 * half, 1e-3)?;
                for u in &arc.controls {
                    max_lambda_residual = max_lambda_residual.max(u[1].abs());
                }
                Ok(arc.states)
            },
            half,
        )?;
        y_side_distances.push(symmetric_curve_distance(&candidate_y, &extremal_y));
    }
    Ok(ConeGeodesicReport {
        x_side_distances,
        max_b_residual,
        y_side_distances,
        max_lambda_residual,
        tol: opts.tol,
    })
}
