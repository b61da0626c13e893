//! The constrained Hamiltonian systems of the optimal control problems on
//! the prolonged splitting, in both local charts.
//!
//! On the `(y, v)` chart the frame is `{xi = d/dv, eta}`; on the `(x, w)`
//! chart (the leaf chart) it is `{xi = (c(x,w), f(x,w)), eta = d/dw}`.
//! Quotients over the leaf space integrate as a differential-algebraic
//! system: the fibre coordinate is a control parameter pinned by its
//! stationarity condition at every stage evaluation.

use super::metric::SrCartanStructure;
use crate::cartan::{project_fiber_coordinate, ConeSystem, ProlongedRank2};
use crate::error::{Error, Result};
use crate::extremals::{
    integrate_normal_rank2, rank2_pmp_residual, BiExtremalArc, Rank2System, ResidualReport,
};
use crate::linalg;

/// The six optimal control problems the structure supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmpProblemId {
    /// The full system with total energy.
    EFullEnergy,
    /// Quotient over the leaf space, total energy.
    EModXFullEnergy,
    /// Quotient over the leaf space, energy of the projected control only.
    EModXLEnergy,
    /// The rank-1 subsystem over the leaf space.
    LModXLEnergy,
    /// Quotient over the base, total energy.
    EModYFullEnergy,
    /// The leaf frame over the base with its own energy.
    KModYKEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartChoice {
    /// The `(y, v)` chart on Z.
    YV,
    /// The leaf chart `(x, w)`.
    XW,
}

/// The rank-2 frame `{xi, eta}` of the prolongation written in the leaf
/// chart: `xi = (G(x, w), f(x, w))`, `eta = d/dw`. All derivatives come
/// from finite differences of the chart functions.
pub struct LeafChartRank2 {
    cone: ConeSystem,
}

impl LeafChartRank2 {
    pub fn new(cone: ConeSystem) -> Self {
        LeafChartRank2 { cone }
    }

    pub fn cone(&self) -> &ConeSystem {
        &self.cone
    }
}

impl Rank2System for LeafChartRank2 {
    fn dim(&self) -> usize {
        6
    }

    fn field(&self, i: usize, z: &[f64]) -> Vec<f64> {
        let (x, w) = (&z[..5], z[5]);
        if i == 0 {
            let mut out = self.cone.generator(x, w).expect("generator evaluable");
            out.push(
                self.cone
                    .fiber_component(x, w)
                    .expect("fibre component evaluable"),
            );
            out
        } else {
            let mut out = vec![0.0; 6];
            out[5] = 1.0;
            out
        }
    }

    fn field_jacobian(&self, i: usize, z: &[f64]) -> Vec<Vec<f64>> {
        if i == 1 {
            return vec![vec![0.0; 6]; 6];
        }
        let (x, w) = (&z[..5], z[5]);
        let gx = self
            .cone
            .generator_x_jacobian(x, w)
            .expect("generator differentiable");
        let gw = self
            .cone
            .generator_w(x, w)
            .expect("generator differentiable");
        let fgrad = self
            .cone
            .fiber_component_gradient(x, w)
            .expect("fibre component differentiable");
        let mut jac = vec![vec![0.0; 6]; 6];
        for k in 0..5 {
            for j in 0..5 {
                jac[k][j] = gx[k][j];
            }
            jac[k][5] = gw[k];
        }
        jac[5].copy_from_slice(&fgrad);
        jac
    }

    fn bracket(&self, z: &[f64]) -> Vec<f64> {
        // [xi, eta] = -d(xi)/dw since eta is the coordinate field of w.
        let (x, w) = (&z[..5], z[5]);
        let h = 1e-3;
        let up = self.field(0, &with_w(z, w + h));
        let dn = self.field(0, &with_w(z, w - h));
        let _ = x;
        (0..6).map(|i| -(up[i] - dn[i]) / (2.0 * h)).collect()
    }

    fn double_bracket(&self, i: usize, z: &[f64]) -> Vec<f64> {
        // Brackets of the bracket with the frame, by finite differences of
        // evaluable fields; only used for diagnostics on this chart.
        let h = 1e-3;
        let b = |z: &[f64]| self.bracket(z);
        if i == 1 {
            let up = b(&with_w(z, z[5] + h));
            let dn = b(&with_w(z, z[5] - h));
            return (0..6).map(|k| -(up[k] - dn[k]) / (2.0 * h)).collect();
        }
        // [xi, [xi, eta]] = directional derivative of the bracket along xi
        // minus the derivative of xi along the bracket.
        let xi = self.field(0, z);
        let br = b(z);
        let dir_deriv = |f: &dyn Fn(&[f64]) -> Vec<f64>, dir: &[f64]| -> Vec<f64> {
            let mut up = z.to_vec();
            let mut dn = z.to_vec();
            for k in 0..6 {
                up[k] += h * dir[k];
                dn[k] -= h * dir[k];
            }
            let fu = f(&up);
            let fd = f(&dn);
            (0..6).map(|k| (fu[k] - fd[k]) / (2.0 * h)).collect()
        };
        let db_along_xi = dir_deriv(&|z| self.bracket(z), &xi);
        let dxi_along_b = dir_deriv(&|z| self.field(0, z), &br);
        (0..6).map(|k| db_along_xi[k] - dxi_along_b[k]).collect()
    }
}

fn with_w(z: &[f64], w: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    out[5] = w;
    out
}

/// A constrained-Hamiltonian-system descriptor: the Hamiltonian evaluator,
/// the normal elimination formulas, a normal integrator and the residual
/// groups for arcs of this problem.
pub struct PmpSystem {
    pub id: PmpProblemId,
    pub chart: ChartChoice,
    structure: SrCartanStructure,
}

/// Build the descriptor for a problem/chart combination; unsupported
/// combinations are rejected.
pub fn pmp_system(
    structure: &SrCartanStructure,
    id: PmpProblemId,
    chart: ChartChoice,
) -> Result<PmpSystem> {
    use ChartChoice::*;
    use PmpProblemId::*;
    let ok = matches!(
        (id, chart),
        (EFullEnergy, YV)
            | (EFullEnergy, XW)
            | (EModXFullEnergy, XW)
            | (EModXLEnergy, XW)
            | (LModXLEnergy, XW)
            | (EModYFullEnergy, YV)
            | (KModYKEnergy, YV)
    );
    if !ok {
        return Err(Error::Unsupported {
            msg: format!("{id:?} is not realized in the {chart:?} chart"),
        });
    }
    if matches!(chart, XW) {
        structure.leaf_space()?;
    }
    Ok(PmpSystem {
        id,
        chart,
        structure: structure.clone(),
    })
}

impl PmpSystem {
    /// State dimension of the realization.
    pub fn state_dim(&self) -> usize {
        match self.id {
            PmpProblemId::EFullEnergy => 6,
            _ => 5,
        }
    }

    /// Names of the control components the arcs record.
    pub fn control_names(&self) -> Vec<&'static str> {
        match self.id {
            PmpProblemId::EFullEnergy => match self.chart {
                ChartChoice::YV => vec!["lambda", "mu"],
                ChartChoice::XW => vec!["a", "b"],
            },
            PmpProblemId::EModXFullEnergy | PmpProblemId::EModXLEnergy => vec!["w", "a", "b"],
            PmpProblemId::LModXLEnergy => vec!["w", "a"],
            PmpProblemId::EModYFullEnergy => vec!["v", "lambda", "mu"],
            PmpProblemId::KModYKEnergy => vec!["v", "mu"],
        }
    }

    fn cone(&self) -> Result<ConeSystem> {
        Ok(ConeSystem::new(self.structure.leaf_space()?.clone()))
    }

    /// The Hamiltonian of the optimal control problem at `(state, costate,
    /// controls, p0)`, controls ordered as in [`Self::control_names`].
    pub fn hamiltonian(
        &self,
        state: &[f64],
        costate: &[f64],
        controls: &[f64],
        p0: f64,
    ) -> Result<f64> {
        if p0 > 0.0 {
            return Err(Error::PreconditionViolated {
                constraint: "p0 <= 0".into(),
            });
        }
        match self.id {
            PmpProblemId::EFullEnergy => {
                let (lam, mu) = (controls[0], controls[1]);
                let (h1, h2) = match self.chart {
                    ChartChoice::YV => {
                        let sys = ProlongedRank2::new(self.structure.prolonged());
                        (
                            linalg::dot(costate, &sys.field(0, state)),
                            linalg::dot(costate, &sys.field(1, state)),
                        )
                    }
                    ChartChoice::XW => {
                        let sys = LeafChartRank2::new(self.cone()?);
                        (
                            linalg::dot(costate, &sys.field(0, state)),
                            linalg::dot(costate, &sys.field(1, state)),
                        )
                    }
                };
                Ok(lam * h1 + mu * h2 + 0.5 * p0 * (lam * lam + mu * mu))
            }
            PmpProblemId::EModXFullEnergy
            | PmpProblemId::EModXLEnergy
            | PmpProblemId::LModXLEnergy => {
                let cone = self.cone()?;
                let (w, a) = (controls[0], controls[1]);
                let g = cone.generator(state, w)?;
                let base = a * linalg::dot(costate, &g);
                let energy = match self.id {
                    PmpProblemId::EModXFullEnergy => {
                        let b = controls[2];
                        a * a + b * b
                    }
                    _ => a * a,
                };
                Ok(base + 0.5 * p0 * energy)
            }
            PmpProblemId::EModYFullEnergy | PmpProblemId::KModYKEnergy => {
                let v = controls[0];
                let mu = *controls.last().unwrap();
                let frame = self.structure.prolonged().model().frame();
                let e1 = frame[0].eval_f64(state)?;
                let e2 = frame[1].eval_f64(state)?;
                let (c, s) = (v.cos(), v.sin());
                let h: f64 = (0..5).map(|i| costate[i] * (c * e1[i] + s * e2[i])).sum();
                let energy = match self.id {
                    PmpProblemId::EModYFullEnergy => {
                        let lam = controls[1];
                        lam * lam + mu * mu
                    }
                    _ => mu * mu,
                };
                Ok(mu * h + 0.5 * p0 * energy)
            }
        }
    }

    /// The normal-elimination formulas at `p0 = -1`: the controls expressed
    /// through `(state, costate)`. DAE variants take the current fibre
    /// control as `carry` (the algebraic variable is solved near it).
    pub fn normal_elimination(
        &self,
        state: &[f64],
        costate: &[f64],
        carry: Option<f64>,
    ) -> Result<Vec<f64>> {
        match self.id {
            PmpProblemId::EFullEnergy => match self.chart {
                ChartChoice::YV => {
                    let sys = ProlongedRank2::new(self.structure.prolonged());
                    Ok(vec![
                        linalg::dot(costate, &sys.field(0, state)),
                        linalg::dot(costate, &sys.field(1, state)),
                    ])
                }
                ChartChoice::XW => {
                    let sys = LeafChartRank2::new(self.cone()?);
                    Ok(vec![
                        linalg::dot(costate, &sys.field(0, state)),
                        linalg::dot(costate, &sys.field(1, state)),
                    ])
                }
            },
            PmpProblemId::EModXFullEnergy
            | PmpProblemId::EModXLEnergy
            | PmpProblemId::LModXLEnergy => {
                let cone = self.cone()?;
                let w = project_fiber_coordinate(&cone, state, costate, carry.unwrap_or(0.0))?;
                let a = linalg::dot(costate, &cone.generator(state, w)?);
                let mut out = vec![w, a];
                if matches!(
                    self.id,
                    PmpProblemId::EModXFullEnergy | PmpProblemId::EModXLEnergy
                ) {
                    // b = 0: the leaf generator projects to zero, so its
                    // stationarity reads p0 b = 0 (total energy) or 0 = 0.
                    out.push(0.0);
                }
                Ok(out)
            }
            PmpProblemId::EModYFullEnergy | PmpProblemId::KModYKEnergy => {
                let v = self.project_angle(state, costate, carry.unwrap_or(0.0))?;
                let frame = self.structure.prolonged().model().frame();
                let e1 = frame[0].eval_f64(state)?;
                let e2 = frame[1].eval_f64(state)?;
                let (c, s) = (v.cos(), v.sin());
                let mu: f64 = (0..5).map(|i| costate[i] * (c * e1[i] + s * e2[i])).sum();
                if matches!(self.id, PmpProblemId::EModYFullEnergy) {
                    // q0 lambda = 0 forces lambda = 0.
                    Ok(vec![v, 0.0, mu])
                } else {
                    Ok(vec![v, mu])
                }
            }
        }
    }

    /// Solve the angle stationarity `<q, -sin(v) eta1 + cos(v) eta2> = 0`
    /// for `v` near `carry` by Newton.
    fn project_angle(&self, y: &[f64], q: &[f64], mut v: f64) -> Result<f64> {
        let frame = self.structure.prolonged().model().frame();
        let e1 = frame[0].eval_f64(y)?;
        let e2 = frame[1].eval_f64(y)?;
        let q1 = linalg::dot(q, &e1);
        let q2 = linalg::dot(q, &e2);
        for _ in 0..40 {
            let g = -v.sin() * q1 + v.cos() * q2;
            let dg = -v.cos() * q1 - v.sin() * q2;
            if g.abs() <= 1e-13 {
                return Ok(v);
            }
            if dg.abs() < 1e-12 {
                return Err(Error::CharacteristicDegenerate { t: v });
            }
            v -= g / dg;
        }
        Err(Error::ShootingFailed {
            best_residual: f64::NAN,
        })
    }

    /// Integrate the normal flow from `(state0, costate0)`; for the DAE
    /// variants `fiber0` seeds the algebraic control.
    pub fn integrate_normal(
        &self,
        state0: &[f64],
        costate0: &[f64],
        fiber0: Option<f64>,
        t_final: f64,
        step: f64,
    ) -> Result<BiExtremalArc> {
        match self.id {
            PmpProblemId::EFullEnergy => match self.chart {
                ChartChoice::YV => {
                    let sys = ProlongedRank2::new(self.structure.prolonged());
                    integrate_normal_rank2(&sys, state0, costate0, t_final, step, &[0, 1])
                }
                ChartChoice::XW => {
                    let sys = LeafChartRank2::new(self.cone()?);
                    integrate_normal_rank2(&sys, state0, costate0, t_final, step, &[0, 1])
                }
            },
            _ => self.integrate_normal_dae(state0, costate0, fiber0.unwrap_or(0.0), t_final, step),
        }
    }

    /// Half-explicit RK4 for the quotient variants: the fibre control is
    /// re-solved at every stage evaluation.
    fn integrate_normal_dae(
        &self,
        state0: &[f64],
        costate0: &[f64],
        fiber0: f64,
        t_final: f64,
        step: f64,
    ) -> Result<BiExtremalArc> {
        let n = 5;
        let over_x = matches!(
            self.id,
            PmpProblemId::EModXFullEnergy | PmpProblemId::EModXLEnergy | PmpProblemId::LModXLEnergy
        );
        let cone = if over_x { Some(self.cone()?) } else { None };
        let frame = self.structure.prolonged().model().frame().clone();
        let e1c = crate::vecfield::CompiledField::compile(&frame[0]);
        let e2c = crate::vecfield::CompiledField::compile(&frame[1]);
        // Stage evaluation: solve the fibre control, then the derivatives.
        let eval = |x: &[f64], p: &[f64], carry: f64| -> Result<(Vec<f64>, Vec<f64>, f64)> {
            if let Some(cone) = &cone {
                let w = project_fiber_coordinate(cone, x, p, carry)?;
                let g = cone.generator(x, w)?;
                let a = linalg::dot(p, &g);
                let dx: Vec<f64> = g.iter().map(|v| a * v).collect();
                let jac = cone.generator_x_jacobian(x, w)?;
                let mut dp = vec![0.0; n];
                for j in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += p[i] * jac[i][j];
                    }
                    dp[j] = -a * acc;
                }
                Ok((dx, dp, w))
            } else {
                let v = self.project_angle(x, p, carry)?;
                let (c, s) = (v.cos(), v.sin());
                let f1 = e1c.eval(x);
                let f2 = e2c.eval(x);
                let mu: f64 = (0..n).map(|i| p[i] * (c * f1[i] + s * f2[i])).sum();
                let dx: Vec<f64> = (0..n).map(|i| mu * (c * f1[i] + s * f2[i])).collect();
                let j1 = e1c.jacobian(x);
                let j2 = e2c.jacobian(x);
                let mut dp = vec![0.0; n];
                for j in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += p[i] * (c * j1[i][j] + s * j2[i][j]);
                    }
                    dp[j] = -mu * acc;
                }
                Ok((dx, dp, v))
            }
        };
        let steps = (t_final.abs() / step).ceil().max(1.0) as usize;
        let h = t_final / steps as f64;
        let mut x = state0.to_vec();
        let mut p = costate0.to_vec();
        let mut carry = fiber0;
        let mut times = vec![0.0];
        let mut states = vec![x.clone()];
        let mut costates = vec![p.clone()];
        let mut controls = vec![self.normal_elimination(&x, &p, Some(carry))?];
        for s in 0..steps {
            let (k1x, k1p, w1) = eval(&x, &p, carry)?;
            let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1x[i]).collect();
            let p2: Vec<f64> = (0..n).map(|i| p[i] + 0.5 * h * k1p[i]).collect();
            let (k2x, k2p, w2) = eval(&x2, &p2, w1)?;
            let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2x[i]).collect();
            let p3: Vec<f64> = (0..n).map(|i| p[i] + 0.5 * h * k2p[i]).collect();
            let (k3x, k3p, w3) = eval(&x3, &p3, w2)?;
            let x4: Vec<f64> = (0..n).map(|i| x[i] + h * k3x[i]).collect();
            let p4: Vec<f64> = (0..n).map(|i| p[i] + h * k3p[i]).collect();
            let (k4x, k4p, _) = eval(&x4, &p4, w3)?;
            for i in 0..n {
                x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
                p[i] += h / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
            }
            carry = w3;
            if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
                return Err(Error::IntegrationDiverged {
                    t_last: (s + 1) as f64 * h,
                });
            }
            times.push((s + 1) as f64 * h);
            states.push(x.clone());
            costates.push(p.clone());
            let u = self.normal_elimination(&x, &p, Some(carry))?;
            carry = u[0];
            controls.push(u);
        }
        BiExtremalArc::new(times, states, costates, controls, -1.0)
    }

    /// Residuals of the three constrained-equation groups along an arc of
    /// this problem.
    pub fn residuals(&self, arc: &BiExtremalArc) -> Result<ResidualReport> {
        match self.id {
            PmpProblemId::EFullEnergy => match self.chart {
                ChartChoice::YV => {
                    let sys = ProlongedRank2::new(self.structure.prolonged());
                    Ok(rank2_pmp_residual(&sys, arc, &[0, 1]))
                }
                ChartChoice::XW => {
                    let sys = LeafChartRank2::new(self.cone()?);
                    Ok(rank2_pmp_residual(&sys, arc, &[0, 1]))
                }
            },
            _ => self.dae_residuals(arc),
        }
    }

    fn dae_residuals(&self, arc: &BiExtremalArc) -> Result<ResidualReport> {
        let n = 5;
        let over_x = matches!(
            self.id,
            PmpProblemId::EModXFullEnergy | PmpProblemId::EModXLEnergy | PmpProblemId::LModXLEnergy
        );
        let cone = if over_x { Some(self.cone()?) } else { None };
        let frame = self.structure.prolonged().model().frame().clone();
        let mut state_eq: f64 = 0.0;
        let mut costate_eq: f64 = 0.0;
        let mut stationarity: f64 = 0.0;
        let mut nontriviality = f64::INFINITY;
        let m = arc.len();
        for k in 0..m {
            let x = &arc.states[k];
            let p = &arc.costates[k];
            let u = &arc.controls[k];
            let (vel, fiber_stat, speed_stat): (Vec<f64>, f64, f64) = if let Some(cone) = &cone {
                let (w, a) = (u[0], u[1]);
                let g = cone.generator(x, w)?;
                let gw = cone.generator_w(x, w)?;
                let h = linalg::dot(p, &g);
                (
                    g.iter().map(|v| a * v).collect(),
                    (a * linalg::dot(p, &gw)).abs(),
                    (h + arc.p0 * a).abs(),
                )
            } else {
                let (v, mu) = (u[0], *u.last().unwrap());
                let e1 = frame[0].eval_f64(x)?;
                let e2 = frame[1].eval_f64(x)?;
                let (c, s) = (v.cos(), v.sin());
                let dir: Vec<f64> = (0..n).map(|i| c * e1[i] + s * e2[i]).collect();
                let dirp: Vec<f64> = (0..n).map(|i| -s * e1[i] + c * e2[i]).collect();
                let h = linalg::dot(p, &dir);
                (
                    dir.iter().map(|d| mu * d).collect(),
                    (mu * linalg::dot(p, &dirp)).abs(),
                    (h + arc.p0 * mu).abs(),
                )
            };
            stationarity = stationarity.max(fiber_stat).max(speed_stat);
            if matches!(self.id, PmpProblemId::EModXFullEnergy) {
                // p0 b = 0 with b recorded on the arc.
                stationarity = stationarity.max((arc.p0 * u[2]).abs());
            }
            if matches!(self.id, PmpProblemId::EModYFullEnergy) {
                // q0 lambda = 0.
                stationarity = stationarity.max((arc.p0 * u[1]).abs());
            }
            nontriviality = nontriviality.min((linalg::dot(p, p) + arc.p0 * arc.p0).sqrt());
            if k == 0 || k + 1 == m {
                continue;
            }
            let dt = arc.times[k + 1] - arc.times[k - 1];
            for i in 0..n {
                let xdot = (arc.states[k + 1][i] - arc.states[k - 1][i]) / dt;
                state_eq = state_eq.max((xdot - vel[i]).abs());
            }
            // Costate residual through the analytic gradient of H in x.
            let dhdx: Vec<f64> = if let Some(cone) = &cone {
                let (w, a) = (u[0], u[1]);
                let jac = cone.generator_x_jacobian(x, w)?;
                (0..n)
                    .map(|j| a * (0..n).map(|i| p[i] * jac[i][j]).sum::<f64>())
                    .collect()
            } else {
                let (v, mu) = (u[0], *u.last().unwrap());
                let (c, s) = (v.cos(), v.sin());
                let j1 = frame[0].jacobian_f64(x)?;
                let j2 = frame[1].jacobian_f64(x)?;
                (0..n)
                    .map(|j| {
                        mu * (0..n)
                            .map(|i| p[i] * (c * j1[i][j] + s * j2[i][j]))
                            .sum::<f64>()
                    })
                    .collect()
            };
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
}
