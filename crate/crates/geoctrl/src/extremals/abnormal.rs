//! Abnormal bi-extremals of rank-2 frames.
//!
//! For a frame {X1, X2} the constrained system forces `<p, X1> = <p, X2> =
//! <p, [X1,X2]> = 0` along the arc; differentiating the bracket constraint
//! gives `u1 h1 + u2 h2 = 0` with `h_i = <p, [X_i, [X1, X2]]>`, so the
//! characteristic control is `u = (h2, -h1)/|(h2, -h1)|`. Points with
//! `h1 = h2 = 0` leave the control undetermined at first order; callers that
//! know the degenerate branch (fibre directions of a prolongation) can pin
//! the control with [`AbnormalControlMode::Fixed`].

use super::arc::BiExtremalArc;
use crate::error::{Error, Result};
use crate::linalg;
use crate::vecfield::{CompiledField, PolyVectorField};

/// Relative tolerance for the admissibility preconditions on the initial
/// covector.
pub const ABNORMAL_PRE_TOL: f64 = 1e-9;

/// Threshold below which the characteristic direction counts as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;

/// Evaluation interface for a rank-2 frame and the brackets the abnormal
/// system needs. Implemented by [`PolyRank2`] for polynomial frames and by
/// the prolongation machinery for frames with a numeric fibre component.
pub trait Rank2System: Sync {
    fn dim(&self) -> usize;
    /// `X_i(x)`, `i` in {0, 1}.
    fn field(&self, i: usize, x: &[f64]) -> Vec<f64>;
    /// `J[k][j] = d(X_i)_k/dx_j` at `x`.
    fn field_jacobian(&self, i: usize, x: &[f64]) -> Vec<Vec<f64>>;
    /// `[X1, X2](x)`.
    fn bracket(&self, x: &[f64]) -> Vec<f64>;
    /// `[X_i, [X1, X2]](x)`, `i` in {0, 1}.
    fn double_bracket(&self, i: usize, x: &[f64]) -> Vec<f64>;
}

/// Exact-bracket implementation for a pair of polynomial fields.
#[derive(Debug, Clone)]
pub struct PolyRank2 {
    dim: usize,
    fields: [CompiledField; 2],
    bracket: CompiledField,
    double: [CompiledField; 2],
}

impl PolyRank2 {
    pub fn new(x1: &PolyVectorField, x2: &PolyVectorField) -> Result<Self> {
        if x1.nvars() != x2.nvars() {
            return Err(Error::DimensionMismatch {
                context: "rank-2 frame",
                expected: x1.nvars(),
                got: x2.nvars(),
            });
        }
        let b = x1.lie_bracket(x2)?;
        let w1 = x1.lie_bracket(&b)?;
        let w2 = x2.lie_bracket(&b)?;
        Ok(PolyRank2 {
            dim: x1.nvars(),
            fields: [CompiledField::compile(x1), CompiledField::compile(x2)],
            bracket: CompiledField::compile(&b),
            double: [CompiledField::compile(&w1), CompiledField::compile(&w2)],
        })
    }
}

impl Rank2System for PolyRank2 {
    fn dim(&self) -> usize {
        self.dim
    }

    fn field(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.fields[i].eval(x)
    }

    fn field_jacobian(&self, i: usize, x: &[f64]) -> Vec<Vec<f64>> {
        self.fields[i].jacobian(x)
    }

    fn bracket(&self, x: &[f64]) -> Vec<f64> {
        self.bracket.eval(x)
    }

    fn double_bracket(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.double[i].eval(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbnormalControlMode {
    /// `u = (h2, -h1)/|(h2, -h1)|`; errors on degeneracy.
    Characteristic,
    /// A frozen control, for integrating the degenerate branch where
    /// `h1 = h2 = 0` leaves the control free.
    Fixed(f64, f64),
}

fn characteristic_control(
    sys: &impl Rank2System,
    x: &[f64],
    p: &[f64],
    mode: AbnormalControlMode,
    t: f64,
) -> Result<[f64; 2]> {
    match mode {
        AbnormalControlMode::Fixed(u1, u2) => Ok([u1, u2]),
        AbnormalControlMode::Characteristic => {
            let h1 = linalg::dot(p, &sys.double_bracket(0, x));
            let h2 = linalg::dot(p, &sys.double_bracket(1, x));
            let nrm = (h1 * h1 + h2 * h2).sqrt();
            if nrm < DEGENERACY_TOL * linalg::norm(p).max(1e-300) {
                return Err(Error::CharacteristicDegenerate { t });
            }
            Ok([h2 / nrm, -h1 / nrm])
        }
    }
}

fn abnormal_rhs(
    sys: &impl Rank2System,
    x: &[f64],
    p: &[f64],
    u: [f64; 2],
    dx: &mut [f64],
    dp: &mut [f64],
) {
    let n = sys.dim();
    let x1 = sys.field(0, x);
    let x2 = sys.field(1, x);
    for k in 0..n {
        dx[k] = u[0] * x1[k] + u[1] * x2[k];
    }
    let j1 = sys.field_jacobian(0, x);
    let j2 = sys.field_jacobian(1, x);
    for j in 0..n {
        let mut acc = 0.0;
        for k in 0..n {
            acc += p[k] * (u[0] * j1[k][j] + u[1] * j2[k][j]);
        }
        dp[j] = -acc;
    }
}

/// Integrate an abnormal bi-extremal of the rank-2 frame from `(x0, p0cov)`.
///
/// Preconditions: `<p, X1> = <p, X2> = <p, [X1,X2]> = 0` at the initial
/// point (relative tolerance [`ABNORMAL_PRE_TOL`]) and, in characteristic
/// mode, `(h1, h2) != (0, 0)` there. The costate keeps the caller's scale;
/// `p0 = 0`.
pub fn integrate_abnormal_rank2(
    sys: &impl Rank2System,
    x0: &[f64],
    p0cov: &[f64],
    t_final: f64,
    step: f64,
    mode: AbnormalControlMode,
) -> Result<BiExtremalArc> {
    let n = sys.dim();
    if x0.len() != n || p0cov.len() != n {
        return Err(Error::DimensionMismatch {
            context: "abnormal initial data",
            expected: n,
            got: x0.len().min(p0cov.len()),
        });
    }
    let pn = linalg::norm(p0cov);
    if pn < 1e-12 {
        return Err(Error::PreconditionViolated {
            constraint: "p0cov != 0".into(),
        });
    }
    for (name, v) in [
        ("<p, X1(x0)> = 0", sys.field(0, x0)),
        ("<p, X2(x0)> = 0", sys.field(1, x0)),
        ("<p, [X1,X2](x0)> = 0", sys.bracket(x0)),
    ] {
        let val = linalg::dot(p0cov, &v);
        if val.abs() > ABNORMAL_PRE_TOL * pn.max(1.0) {
            return Err(Error::PreconditionViolated {
                constraint: format!("{name} (got {val:.3e})"),
            });
        }
    }
    let steps = (t_final.abs() / step).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let mut x = x0.to_vec();
    let mut p = p0cov.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut costates = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let u0 = characteristic_control(sys, &x, &p, mode, 0.0)?;
    times.push(0.0);
    states.push(x.clone());
    costates.push(p.clone());
    controls.push(u0.to_vec());
    let mut dx = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for s in 0..steps {
        let t = s as f64 * h;
        let (mut kx, mut kp) = (vec![vec![0.0; n]; 4], vec![vec![0.0; n]; 4]);
        let u = characteristic_control(sys, &x, &p, mode, t)?;
        abnormal_rhs(sys, &x, &p, u, &mut dx, &mut dp);
        kx[0].copy_from_slice(&dx);
        kp[0].copy_from_slice(&dp);
        for (stage, w) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            let xs: Vec<f64> = (0..n).map(|i| x[i] + w * h * kx[stage - 1][i]).collect();
            let ps: Vec<f64> = (0..n).map(|i| p[i] + w * h * kp[stage - 1][i]).collect();
            let us = characteristic_control(sys, &xs, &ps, mode, t)?;
            abnormal_rhs(sys, &xs, &ps, us, &mut dx, &mut dp);
            kx[stage].copy_from_slice(&dx);
            kp[stage].copy_from_slice(&dp);
        }
        for i in 0..n {
            x[i] += h / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            p[i] += h / 6.0 * (kp[0][i] + 2.0 * kp[1][i] + 2.0 * kp[2][i] + kp[3][i]);
        }
        let t_next = (s + 1) as f64 * h;
        if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t_last: t_next });
        }
        let u_next = characteristic_control(sys, &x, &p, mode, t_next)?;
        times.push(t_next);
        states.push(x.clone());
        costates.push(p.clone());
        controls.push(u_next.to_vec());
    }
    BiExtremalArc::new(times, states, costates, controls, 0.0)
}
