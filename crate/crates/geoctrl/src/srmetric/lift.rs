//! Lifting abnormal bi-extremals of the quotients back to the full system,
//! and the reduction that forgets the inert control.
//!
//! Over the base (the `(y, v)` chart) the quotient's fibre control is the
//! line angle `v`; the lift reinstates it as a state with fibre control
//! `lambda = dv/dt` and costate extension `phi = 0`. Over the leaf space
//! the fibre control is `w` and the lifted leaf control must absorb the
//! fibre component of the horizontal frame field: `b = dw/dt - a f(x, w)`.
//!
//! Reduction forgets the control the projection kills (it appears in none
//! of the quotient's equations), so residuals are bitwise unchanged.

use crate::cartan::{ConeAbnormalArc, ConeSystem, ProlongedChart, ProlongedRank2};
use crate::error::{Error, Result};
use crate::extremals::{
    integrate_abnormal_rank2, rank2_pmp_residual, AbnormalControlMode, BiExtremalArc, PolyRank2,
    ResidualReport,
};
use crate::linalg;

/// Default bound on the grid difference quotients of the fibre control.
pub const LIPSCHITZ_BOUND: f64 = 1e3;

/// An abnormal bi-extremal of the quotient over the base: state `y`,
/// costate `q`, fibre-angle control `v(t)`, speed control `mu(t)`, and the
/// inert vertical control `lambda(t)` (present only on extended arcs).
#[derive(Debug, Clone)]
pub struct YQuotientArc {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub costates: Vec<Vec<f64>>,
    pub fiber_angles: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Option<Vec<f64>>,
}

/// Integrate an abnormal bi-extremal of the quotient over the base from
/// `(y0, v0)`: the projected characteristic flow downstairs, with the
/// fibre-angle control tracked continuously.
pub fn y_quotient_abnormal(
    chart: &ProlongedChart,
    y0: &[f64],
    v0: f64,
    t_final: f64,
    step: f64,
) -> Result<YQuotientArc> {
    let frame = chart.model().frame();
    let sys = PolyRank2::new(&frame[0], &frame[1])?;
    let p0 = chart.characteristic_covector(y0, v0)?;
    let arc = integrate_abnormal_rank2(
        &sys,
        y0,
        &p0,
        t_final,
        step,
        AbnormalControlMode::Characteristic,
    )?;
    // Unwrap the control angle continuously from v0.
    let mut fiber_angles = Vec::with_capacity(arc.len());
    let mut prev = v0;
    for u in &arc.controls {
        let raw = u[1].atan2(u[0]);
        let mut angle = raw;
        let pi = std::f64::consts::PI;
        while angle - prev > 0.5 * pi {
            angle -= pi;
        }
        while prev - angle > 0.5 * pi {
            angle += pi;
        }
        fiber_angles.push(angle);
        prev = angle;
    }
    let mu = vec![1.0; arc.len()];
    Ok(YQuotientArc {
        times: arc.times,
        states: arc.states,
        costates: arc.costates,
        fiber_angles,
        mu,
        lambda: None,
    })
}

/// Residuals of the quotient-over-base constrained system along the arc.
/// The inert `lambda` enters no equation, so extended and reduced arcs give
/// identical numbers.
pub fn y_quotient_residual(chart: &ProlongedChart, arc: &YQuotientArc) -> Result<ResidualReport> {
    let frame = chart.model().frame();
    let n = 5;
    let m = arc.times.len();
    let mut state_eq: f64 = 0.0;
    let mut costate_eq: f64 = 0.0;
    let mut stationarity: f64 = 0.0;
    let mut nontriviality = f64::INFINITY;
    for k in 0..m {
        let y = &arc.states[k];
        let q = &arc.costates[k];
        let (v, mu) = (arc.fiber_angles[k], arc.mu[k]);
        let e1 = frame[0].eval_f64(y)?;
        let e2 = frame[1].eval_f64(y)?;
        let (c, s) = (v.cos(), v.sin());
        let dir: Vec<f64> = (0..n).map(|i| c * e1[i] + s * e2[i]).collect();
        let dirp: Vec<f64> = (0..n).map(|i| -s * e1[i] + c * e2[i]).collect();
        // dH/dmu = <q, dir>, dH/dv = mu <q, dir'>; abnormal, so no p0 term.
        stationarity = stationarity
            .max(linalg::dot(q, &dir).abs())
            .max((mu * linalg::dot(q, &dirp)).abs());
        nontriviality = nontriviality.min(linalg::norm(q));
        if k == 0 || k + 1 == m {
            continue;
        }
        let dt = arc.times[k + 1] - arc.times[k - 1];
        for i in 0..n {
            let ydot = (arc.states[k + 1][i] - arc.states[k - 1][i]) / dt;
            state_eq = state_eq.max((ydot - mu * dir[i]).abs());
        }
        let j1 = frame[0].jacobian_f64(y)?;
        let j2 = frame[1].jacobian_f64(y)?;
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += q[i] * (c * j1[i][j] + s * j2[i][j]);
            }
            let qdot = (arc.costates[k + 1][j] - arc.costates[k - 1][j]) / dt;
            costate_eq = costate_eq.max((qdot + mu * acc).abs());
        }
    }
    Ok(ResidualReport {
        state_eq,
        costate_eq,
        stationarity,
        nontriviality,
    })
}

/// Forget the inert vertical control (the projection of the vertical frame
/// field vanishes, so nothing else changes).
pub fn reduce_biextremal(arc: &YQuotientArc) -> YQuotientArc {
    YQuotientArc {
        lambda: None,
        ..arc.clone()
    }
}

/// Re-attach an arbitrary inert control (default zero).
pub fn extend_biextremal(arc: &YQuotientArc, lambda: Option<Vec<f64>>) -> YQuotientArc {
    let lambda = lambda.unwrap_or_else(|| vec![0.0; arc.times.len()]);
    YQuotientArc {
        lambda: Some(lambda),
        ..arc.clone()
    }
}

fn difference_quotients(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let m = times.len();
    let mut out = vec![0.0; m];
    let mut max_q: f64 = 0.0;
    for k in 0..m {
        let (a, b) = if k == 0 {
            (k, k + 1)
        } else if k + 1 == m {
            (k - 1, k)
        } else {
            (k - 1, k + 1)
        };
        out[k] = (values[b] - values[a]) / (times[b] - times[a]);
        max_q = max_q.max(out[k].abs());
    }
    if max_q > LIPSCHITZ_BOUND {
        return Err(Error::NotLipschitz {
            max_quotient: max_q,
        });
    }
    Ok(out)
}

/// Lift a quotient-over-base abnormal arc to the prolongation: the fibre
/// angle becomes a state, the new vertical control is its derivative and
/// the costate extension is zero. Returns the lifted bi-extremal on the
/// `(y, v)` chart with controls `(lambda, mu)`.
pub fn lift_abnormal(arc: &YQuotientArc) -> Result<BiExtremalArc> {
    let vdot = difference_quotients(&arc.times, &arc.fiber_angles)?;
    let m = arc.times.len();
    let mut states = Vec::with_capacity(m);
    let mut costates = Vec::with_capacity(m);
    let mut controls = Vec::with_capacity(m);
    for k in 0..m {
        let mut z = arc.states[k].clone();
        z.push(arc.fiber_angles[k]);
        states.push(z);
        let mut cov = arc.costates[k].clone();
        cov.push(0.0);
        costates.push(cov);
        controls.push(vec![vdot[k], arc.mu[k]]);
    }
    BiExtremalArc::new(arc.times.clone(), states, costates, controls, 0.0)
}

/// Residuals of the full constrained system on Z along a lifted arc.
pub fn lifted_residual(chart: &ProlongedChart, arc: &BiExtremalArc) -> ResidualReport {
    let sys = ProlongedRank2::new(chart);
    rank2_pmp_residual(&sys, arc, &[])
}

/// Lift a cone-system abnormal arc to the `(x, w)` chart of the
/// prolongation: the fibre coordinate becomes a state, the new leaf control
/// absorbs the fibre component of the horizontal frame field,
/// `b = dw/dt - a f(x, w)`, and the costate extension is zero.
pub fn lift_abnormal_cone(cone: &ConeSystem, arc: &ConeAbnormalArc) -> Result<BiExtremalArc> {
    let wdot = difference_quotients(&arc.times, &arc.fiber_controls)?;
    let m = arc.times.len();
    let mut states = Vec::with_capacity(m);
    let mut costates = Vec::with_capacity(m);
    let mut controls = Vec::with_capacity(m);
    for k in 0..m {
        let x = &arc.states[k];
        let w = arc.fiber_controls[k];
        let f = cone.fiber_component(x, w)?;
        let mut z = x.clone();
        z.push(w);
        states.push(z);
        let mut cov = arc.costates[k].clone();
        cov.push(0.0);
        costates.push(cov);
        controls.push(vec![arc.speed, wdot[k] - arc.speed * f]);
    }
    BiExtremalArc::new(arc.times.clone(), states, costates, controls, 0.0)
}

/// Residuals of the quotient-over-leaf-space abnormal system along a cone
/// arc; the inert control `b` (carried separately by callers) enters no
/// equation.
pub fn quotient_abnormal_residual(
    cone: &ConeSystem,
    arc: &ConeAbnormalArc,
) -> Result<ResidualReport> {
    let n = 5;
    let m = arc.times.len();
    let mut state_eq: f64 = 0.0;
    let mut costate_eq: f64 = 0.0;
    let mut stationarity: f64 = 0.0;
    let mut nontriviality = f64::INFINITY;
    for k in 0..m {
        let x = &arc.states[k];
        let p = &arc.costates[k];
        let w = arc.fiber_controls[k];
        let g = cone.generator(x, w)?;
        let gw = cone.generator_w(x, w)?;
        stationarity = stationarity
            .max(linalg::dot(p, &g).abs())
            .max((arc.speed * linalg::dot(p, &gw)).abs());
        nontriviality = nontriviality.min(linalg::norm(p));
        if k == 0 || k + 1 == m {
            continue;
        }
        let dt = arc.times[k + 1] - arc.times[k - 1];
        for i in 0..n {
            let xdot = (arc.states[k + 1][i] - arc.states[k - 1][i]) / dt;
            state_eq = state_eq.max((xdot - arc.speed * g[i]).abs());
        }
        let jac = cone.generator_x_jacobian(x, w)?;
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += p[i] * jac[i][j];
            }
            let pdot = (arc.costates[k + 1][j] - arc.costates[k - 1][j]) / dt;
            costate_eq = costate_eq.max((pdot + arc.speed * acc).abs());
        }
    }
    Ok(ResidualReport {
        state_eq,
        costate_eq,
        stationarity,
        nontriviality,
    })
}
