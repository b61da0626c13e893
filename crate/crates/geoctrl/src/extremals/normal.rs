//! Normal extremal flow (controls eliminated, p0 = -1) and two-point
//! shooting.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arc::BiExtremalArc;
use super::hamiltonian::OptimalControlProblem;
use crate::error::{Error, Result};
use crate::linalg;

/// Right-hand side of the reduced normal flow:
/// `xdot = sum_{i in S} h_i X_i(x)`, `pdot_j = -sum_{i in S} h_i <p, dX_i/dx_j>`
/// with `h_i = <p, X_i(x)>`. Controls outside the cost subset are held at 0.
fn normal_rhs(prob: &OptimalControlProblem, x: &[f64], p: &[f64], dx: &mut [f64], dp: &mut [f64]) {
    let sys = &prob.system;
    let n = sys.state_dim();
    dx.iter_mut().for_each(|v| *v = 0.0);
    dp.iter_mut().for_each(|v| *v = 0.0);
    for &i in prob.cost.indices() {
        let field = &sys.compiled_frame()[i];
        let xi = field.eval(x);
        let hi = linalg::dot(p, &xi[..n]);
        if hi == 0.0 {
            continue;
        }
        for k in 0..n {
            dx[k] += hi * xi[k];
        }
        let jac = field.jacobian(x);
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += p[k] * jac[k][j];
            }
            dp[j] -= hi * acc;
        }
    }
}

/// Integrate the reduced Hamiltonian flow of the normal problem from
/// `(x0, p0cov)` over `[0, t_final]`, recording the eliminated controls
/// `u_i = <p, X_i(x)>` (zero outside the cost subset).
pub fn integrate_normal(
    prob: &OptimalControlProblem,
    x0: &[f64],
    p0cov: &[f64],
    t_final: f64,
    step: f64,
) -> Result<BiExtremalArc> {
    let sys = &prob.system;
    if sys.param_count() > 0 {
        return Err(Error::Unsupported {
            msg: "integrate_normal expects a parameter-free frame".into(),
        });
    }
    let n = sys.state_dim();
    if x0.len() != n || p0cov.len() != n {
        return Err(Error::DimensionMismatch {
            context: "normal initial data",
            expected: n,
            got: x0.len().min(p0cov.len()),
        });
    }
    let steps = (t_final.abs() / step).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let r = sys.frame_dim();
    let mut x = x0.to_vec();
    let mut p = p0cov.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut costates = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let record = |x: &Vec<f64>, p: &Vec<f64>, controls: &mut Vec<Vec<f64>>| -> Result<()> {
        let mut u = vec![0.0; r];
        for &i in prob.cost.indices() {
            let xi = sys.frame()[i].eval_f64(x)?;
            u[i] = linalg::dot(p, &xi[..n]);
        }
        controls.push(u);
        Ok(())
    };
    times.push(0.0);
    states.push(x.clone());
    costates.push(p.clone());
    record(&x, &p, &mut controls)?;
    let mut dx = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for s in 0..steps {
        // RK4 on the coupled (x, p) system.
        let (mut kx, mut kp) = (vec![vec![0.0; n]; 4], vec![vec![0.0; n]; 4]);
        normal_rhs(prob, &x, &p, &mut dx, &mut dp);
        kx[0].copy_from_slice(&dx);
        kp[0].copy_from_slice(&dp);
        for (stage, w) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            let xs: Vec<f64> = (0..n).map(|i| x[i] + w * h * kx[stage - 1][i]).collect();
            let ps: Vec<f64> = (0..n).map(|i| p[i] + w * h * kp[stage - 1][i]).collect();
            normal_rhs(prob, &xs, &ps, &mut dx, &mut dp);
            kx[stage].copy_from_slice(&dx);
            kp[stage].copy_from_slice(&dp);
        }
        for i in 0..n {
            x[i] += h / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            p[i] += h / 6.0 * (kp[0][i] + 2.0 * kp[1][i] + 2.0 * kp[2][i] + kp[3][i]);
        }
        let t = (s + 1) as f64 * h;
        if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { t_last: t });
        }
        times.push(t);
        states.push(x.clone());
        costates.push(p.clone());
        record(&x, &p, &mut controls)?;
    }
    BiExtremalArc::new(times, states, costates, controls, -1.0)
}

/// Reduced normal flow over an evaluable rank-2 frame: controls
/// `u_i = <p, X_i(x)>` for the indices in `energy_on` (held at zero
/// otherwise), at `p0 = -1`.
pub fn integrate_normal_rank2(
    sys: &impl super::abnormal::Rank2System,
    x0: &[f64],
    p0: &[f64],
    t_final: f64,
    step: f64,
    energy_on: &[usize],
) -> Result<BiExtremalArc> {
    let n = sys.dim();
    if x0.len() != n || p0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "rank-2 normal initial data",
            expected: n,
            got: x0.len().min(p0.len()),
        });
    }
    let rhs = |x: &[f64], p: &[f64], dx: &mut [f64], dp: &mut [f64]| {
        dx.iter_mut().for_each(|v| *v = 0.0);
        dp.iter_mut().for_each(|v| *v = 0.0);
        for &i in energy_on {
            let xi = sys.field(i, x);
            let hi = linalg::dot(p, &xi);
            if hi == 0.0 {
                continue;
            }
            for k in 0..n {
                dx[k] += hi * xi[k];
            }
            let jac = sys.field_jacobian(i, x);
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += p[k] * jac[k][j];
                }
                dp[j] -= hi * acc;
            }
        }
    };
    let steps = (t_final.abs() / step).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let mut x = x0.to_vec();
    let mut p = p0.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut costates = vec![p.clone()];
    let record = |x: &Vec<f64>, p: &Vec<f64>| -> Vec<f64> {
        (0..2)
            .map(|i| {
                if energy_on.contains(&i) {
                    linalg::dot(p, &sys.field(i, x))
                } else {
                    0.0
                }
            })
            .collect()
    };
    let mut controls = vec![record(&x, &p)];
    let mut dx = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for s in 0..steps {
        let (mut kx, mut kp) = (vec![vec![0.0; n]; 4], vec![vec![0.0; n]; 4]);
        rhs(&x, &p, &mut dx, &mut dp);
        kx[0].copy_from_slice(&dx);
        kp[0].copy_from_slice(&dp);
        for (stage, w) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            let xs: Vec<f64> = (0..n).map(|i| x[i] + w * h * kx[stage - 1][i]).collect();
            let ps: Vec<f64> = (0..n).map(|i| p[i] + w * h * kp[stage - 1][i]).collect();
            rhs(&xs, &ps, &mut dx, &mut dp);
            kx[stage].copy_from_slice(&dx);
            kp[stage].copy_from_slice(&dp);
        }
        for i in 0..n {
            x[i] += h / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            p[i] += h / 6.0 * (kp[0][i] + 2.0 * kp[1][i] + 2.0 * kp[2][i] + kp[3][i]);
        }
        if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged {
                t_last: (s + 1) as f64 * h,
            });
        }
        times.push((s + 1) as f64 * h);
        states.push(x.clone());
        costates.push(p.clone());
        controls.push(record(&x, &p));
    }
    BiExtremalArc::new(times, states, costates, controls, -1.0)
}

/// Batch of normal arcs (data-parallel when enabled).
pub fn integrate_normal_batch(
    prob: &OptimalControlProblem,
    inits: &[(Vec<f64>, Vec<f64>)],
    t_final: f64,
    step: f64,
) -> Vec<Result<BiExtremalArc>> {
    crate::par::map_collect(inits, |(x0, p0)| {
        integrate_normal(prob, x0, p0, t_final, step)
    })
}

/// Sequential reference for the bench suite.
pub fn integrate_normal_batch_serial(
    prob: &OptimalControlProblem,
    inits: &[(Vec<f64>, Vec<f64>)],
    t_final: f64,
    step: f64,
) -> Vec<Result<BiExtremalArc>> {
    crate::par::map_collect_serial(inits, |(x0, p0)| {
        integrate_normal(prob, x0, p0, t_final, step)
    })
}

#[derive(Debug, Clone)]
pub struct ShootOptions {
    pub step: f64,
    pub max_iters: usize,
    pub multistarts: usize,
    pub seed: u64,
    /// Finite-difference step for the shooting Jacobian.
    pub fd_step: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            step: 1e-3,
            max_iters: 60,
            multistarts: 8,
            seed: 11,
            fd_step: 1e-6,
        }
    }
}

/// Two-point shooting for normal extremals: damped Newton on
/// `p0cov -> endpoint`, with finite-difference Jacobian and random
/// multistarts. Returns an arc whose terminal state is within `tol` of `x1`.
pub fn shoot_normal(
    prob: &OptimalControlProblem,
    x0: &[f64],
    x1: &[f64],
    t_final: f64,
    tol: f64,
    opts: &ShootOptions,
) -> Result<BiExtremalArc> {
    let n = prob.system.state_dim();
    let shoot = |p: &[f64]| -> Result<Vec<f64>> {
        let arc = integrate_normal(prob, x0, p, t_final, opts.step)?;
        Ok(linalg::sub(arc.endpoint(), x1))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_overall = f64::INFINITY;
    for start in 0..opts.multistarts.max(1) {
        let mut p: Vec<f64> = if start == 0 {
            linalg::sub(x1, x0).iter().map(|d| d / t_final).collect()
        } else {
            (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()
        };
        let Ok(mut g) = shoot(&p) else { continue };
        let mut best = linalg::norm(&g);
        for _ in 0..opts.max_iters {
            if best <= tol {
                let arc = integrate_normal(prob, x0, &p, t_final, opts.step)?;
                return Ok(arc);
            }
            // Central finite-difference Jacobian dEnd/dp.
            let mut jac = vec![vec![0.0; n]; n];
            let mut fd_failed = false;
            for j in 0..n {
                let mut up = p.clone();
                up[j] += opts.fd_step;
                let mut dn = p.clone();
                dn[j] -= opts.fd_step;
                match (shoot(&up), shoot(&dn)) {
                    (Ok(gu), Ok(gd)) => {
                        for i in 0..n {
                            jac[i][j] = (gu[i] - gd[i]) / (2.0 * opts.fd_step);
                        }
                    }
                    _ => {
                        fd_failed = true;
                        break;
                    }
                }
            }
            if fd_failed {
                break;
            }
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            // Least-squares step tolerates the rank-deficient Jacobians of
            // symmetric targets.
            let Some(delta) = linalg::solve_lsq(&jac, &neg_g, 1e-10) else {
                break;
            };
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let trial: Vec<f64> = p.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
                if let Ok(gt) = shoot(&trial) {
                    let nt = linalg::norm(&gt);
                    if nt < best {
                        p = trial;
                        g = gt;
                        best = nt;
                        improved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best_overall = best_overall.min(best);
    }
    Err(Error::ShootingFailed {
        best_residual: best_overall,
    })
}
