//! Bi-extremal arcs, their residual reports and abnormal-type
//! classification.

use super::hamiltonian::OptimalControlProblem;
use crate::error::{Error, Result};
use crate::linalg;

/// A sampled curve `(x(t), p(t), u(t), p0)` in state-costate-control space.
///
/// Invariants: `p0 <= 0`; the nontriviality margin `|(p(t), p0)|` stays
/// above 1e-12 at every grid point; normal arcs are normalized to `p0 = -1`.
#[derive(Debug, Clone)]
pub struct BiExtremalArc {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub costates: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub p0: f64,
}

impl BiExtremalArc {
    pub fn new(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        costates: Vec<Vec<f64>>,
        controls: Vec<Vec<f64>>,
        p0: f64,
    ) -> Result<Self> {
        if p0 > 0.0 {
            return Err(Error::PreconditionViolated {
                constraint: "p0 <= 0".into(),
            });
        }
        let n = times.len();
        if states.len() != n || costates.len() != n || controls.len() != n {
            return Err(Error::DimensionMismatch {
                context: "bi-extremal arc grids",
                expected: n,
                got: states.len().min(costates.len()).min(controls.len()),
            });
        }
        for p in &costates {
            let margin = (linalg::dot(p, p) + p0 * p0).sqrt();
            if margin < 1e-12 {
                return Err(Error::PreconditionViolated {
                    constraint: "(p, p0) != 0 along the arc".into(),
                });
            }
        }
        Ok(BiExtremalArc {
            times,
            states,
            costates,
            controls,
            p0,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn endpoint(&self) -> &[f64] {
        self.states.last().expect("nonempty arc")
    }

    /// Running energy `int 1/2 |u_S|^2 dt` by the trapezoid rule.
    pub fn energy(&self, cost: &super::hamiltonian::EnergyCost) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len().saturating_sub(1) {
            let dt = self.times[k + 1] - self.times[k];
            acc += 0.5 * dt * (cost.eval(&self.controls[k]) + cost.eval(&self.controls[k + 1]));
        }
        acc
    }
}

/// Max residuals of the four constrained-system equation groups over the
/// arc's grid. Derivatives of the sampled curves are estimated by central
/// differences at interior grid points.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// `max |dx/dt - dH/dp|`.
    pub state_eq: f64,
    /// `max |dp/dt + dH/dx|`.
    pub costate_eq: f64,
    /// `max |dH/du|`.
    pub stationarity: f64,
    /// `min |(p, p0)|`.
    pub nontriviality: f64,
}

impl ResidualReport {
    pub fn max_equation_residual(&self) -> f64 {
        self.state_eq.max(self.costate_eq).max(self.stationarity)
    }
}

/// Per-grid-point residuals `(state_eq, costate_eq, stationarity)` along an
/// arc (derivative entries are zero at the two boundary points, where no
/// central difference exists).
pub fn pmp_residual_series(
    prob: &OptimalControlProblem,
    arc: &BiExtremalArc,
) -> Result<Vec<(f64, f64, f64)>> {
    let sys = &prob.system;
    let n = sys.state_dim();
    let r = sys.frame_dim();
    let m = arc.len();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let x = &arc.states[k];
        let p = &arc.costates[k];
        let u = &arc.controls[k];
        let (coeffs, _) = sys.split_control(u);
        let mut stat: f64 = 0.0;
        for i in 0..r {
            let xi = sys.frame()[i].eval_f64(&aug(sys, x, u))?;
            let hi = linalg::dot(p, &xi[..n]);
            let term = if prob.cost.contains(i) {
                arc.p0 * coeffs[i]
            } else {
                0.0
            };
            stat = stat.max((hi + term).abs());
        }
        let (mut se, mut ce): (f64, f64) = (0.0, 0.0);
        if k > 0 && k + 1 < m {
            let dt = arc.times[k + 1] - arc.times[k - 1];
            let f = sys.velocity(x, u);
            for i in 0..n {
                let xdot = (arc.states[k + 1][i] - arc.states[k - 1][i]) / dt;
                se = se.max((xdot - f[i]).abs());
            }
            let dhdx = hamiltonian_x_gradient(sys, x, p, u)?;
            for j in 0..n {
                let pdot = (arc.costates[k + 1][j] - arc.costates[k - 1][j]) / dt;
                ce = ce.max((pdot + dhdx[j]).abs());
            }
        }
        out.push((se, ce, stat));
    }
    Ok(out)
}

/// Residuals of the maximum-principle constrained system along an arc.
pub fn pmp_residual(prob: &OptimalControlProblem, arc: &BiExtremalArc) -> Result<ResidualReport> {
    let sys = &prob.system;
    let n = sys.state_dim();
    let r = sys.frame_dim();
    let m = arc.len();
    let mut state_eq: f64 = 0.0;
    let mut costate_eq: f64 = 0.0;
    let mut stationarity: f64 = 0.0;
    let mut nontriviality = f64::INFINITY;
    for k in 0..m {
        let x = &arc.states[k];
        let p = &arc.costates[k];
        let u = &arc.controls[k];
        let (coeffs, _) = sys.split_control(u);

        // Stationarity dH/du_i = <p, X_i(x)> + p0 u_i [i in S] for frame
        // coefficients (parameters are frozen by the caller's system).
        for i in 0..r {
            let xi = sys.frame()[i].eval_f64(&aug(sys, x, u))?;
            let hi = linalg::dot(p, &xi[..n]);
            let term = if prob.cost.contains(i) {
                arc.p0 * coeffs[i]
            } else {
                0.0
            };
            stationarity = stationarity.max((hi + term).abs());
        }
        nontriviality = nontriviality.min((linalg::dot(p, p) + arc.p0 * arc.p0).sqrt());

        if k == 0 || k + 1 == m {
            continue;
        }
        let dt = arc.times[k + 1] - arc.times[k - 1];
        // State equation: dx/dt = F(x, u).
        let f = sys.velocity(x, u);
        for i in 0..n {
            let xdot = (arc.states[k + 1][i] - arc.states[k - 1][i]) / dt;
            state_eq = state_eq.max((xdot - f[i]).abs());
        }
        // Costate equation: dp/dt = -dH/dx.
        let dhdx = hamiltonian_x_gradient(sys, x, p, u)?;
        for j in 0..n {
            let pdot = (arc.costates[k + 1][j] - arc.costates[k - 1][j]) / dt;
            costate_eq = costate_eq.max((pdot + dhdx[j]).abs());
        }
    }
    Ok(ResidualReport {
        state_eq,
        costate_eq,
        stationarity,
        nontriviality,
    })
}

fn aug(sys: &crate::control::ControlSystem, x: &[f64], u: &[f64]) -> Vec<f64> {
    let (_, params) = sys.split_control(u);
    let mut v = x.to_vec();
    v.extend_from_slice(params);
    v
}

/// `dH/dx_j = sum_i u_i <p, dX_i/dx_j>` (energy terms do not depend on x).
fn hamiltonian_x_gradient(
    sys: &crate::control::ControlSystem,
    x: &[f64],
    p: &[f64],
    u: &[f64],
) -> Result<Vec<f64>> {
    let n = sys.state_dim();
    let (coeffs, _) = sys.split_control(u);
    let point = aug(sys, x, u);
    let mut grad = vec![0.0; n];
    for (i, field) in sys.compiled_frame().iter().enumerate() {
        if coeffs[i] == 0.0 {
            continue;
        }
        let jac = field.jacobian(&point);
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += p[k] * jac[k][j];
            }
            grad[j] += coeffs[i] * acc;
        }
    }
    Ok(grad)
}

/// PMP residuals for an arc of an evaluable rank-2 frame (controls
/// `(u1, u2)`): state and costate equations by central differences,
/// stationarity `<p, X_i> + p0 u_i` for `i` in `energy_on`, else `<p, X_i>`.
pub fn rank2_pmp_residual(
    sys: &impl super::abnormal::Rank2System,
    arc: &BiExtremalArc,
    energy_on: &[usize],
) -> ResidualReport {
    let n = sys.dim();
    let m = arc.len();
    let mut state_eq: f64 = 0.0;
    let mut costate_eq: f64 = 0.0;
    let mut stationarity: f64 = 0.0;
    let mut nontriviality = f64::INFINITY;
    for k in 0..m {
        let x = &arc.states[k];
        let p = &arc.costates[k];
        let u = &arc.controls[k];
        let x1 = sys.field(0, x);
        let x2 = sys.field(1, x);
        for i in 0..2 {
            let hi = linalg::dot(p, if i == 0 { &x1 } else { &x2 });
            let term = if energy_on.contains(&i) {
                arc.p0 * u[i]
            } else {
                0.0
            };
            stationarity = stationarity.max((hi + term).abs());
        }
        nontriviality = nontriviality.min((linalg::dot(p, p) + arc.p0 * arc.p0).sqrt());
        if k == 0 || k + 1 == m {
            continue;
        }
        let dt = arc.times[k + 1] - arc.times[k - 1];
        for i in 0..n {
            let xdot = (arc.states[k + 1][i] - arc.states[k - 1][i]) / dt;
            state_eq = state_eq.max((xdot - u[0] * x1[i] - u[1] * x2[i]).abs());
        }
        let j1 = sys.field_jacobian(0, x);
        let j2 = sys.field_jacobian(1, x);
        for j in 0..n {
            let mut dh = 0.0;
            for i in 0..n {
                dh += p[i] * (u[0] * j1[i][j] + u[1] * j2[i][j]);
            }
            let pdot = (arc.costates[k + 1][j] - arc.costates[k - 1][j]) / dt;
            costate_eq = costate_eq.max((pdot + dh).abs());
        }
    }
    ResidualReport {
        state_eq,
        costate_eq,
        stationarity,
        nontriviality,
    }
}

/// Classification of an abnormal arc by annihilator membership of its
/// costate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbnormalClass {
    Regular,
    TotallyIrregular,
    Other,
}

/// Provider of spanning vectors of `E^(2)` and `E^(3)` at a point, used by
/// [`classify_abnormal`].
pub trait FlagSpans: Sync {
    fn span2(&self, x: &[f64]) -> Vec<Vec<f64>>;
    fn span3(&self, x: &[f64]) -> Vec<Vec<f64>>;
}

/// Classify an abnormal arc: regular when the costate stays in
/// `E^(2)-perp \ E^(3)-perp` at every sample, totally irregular when it
/// stays in `E^(3)-perp`, other otherwise. Membership is tested by relative
/// pairing residuals against the spanning vectors.
pub fn classify_abnormal(
    spans: &impl FlagSpans,
    arc: &BiExtremalArc,
    tol: f64,
) -> Result<AbnormalClass> {
    if arc.p0 != 0.0 {
        return Err(Error::PreconditionViolated {
            constraint: "classification requires an abnormal arc (p0 = 0)".into(),
        });
    }
    let mut all_in_2 = true;
    let mut all_in_3 = true;
    let mut all_out_3 = true;
    for (x, p) in arc.states.iter().zip(&arc.costates) {
        let pn = linalg::norm(p).max(1e-300);
        let res = |vs: &Vec<Vec<f64>>| -> f64 {
            vs.iter()
                .map(|v| {
                    let vn = linalg::norm(v);
                    if vn == 0.0 {
                        0.0
                    } else {
                        (linalg::dot(p, v) / (pn * vn)).abs()
                    }
                })
                .fold(0.0, f64::max)
        };
        let r2 = res(&spans.span2(x));
        let r3 = res(&spans.span3(x));
        if r2 > tol {
            all_in_2 = false;
        }
        if r3 > tol {
            all_in_3 = false;
        } else {
            all_out_3 = false;
        }
    }
    Ok(if all_in_3 {
        AbnormalClass::TotallyIrregular
    } else if all_in_2 && all_out_3 {
        AbnormalClass::Regular
    } else {
        AbnormalClass::Other
    })
}
