//! Steering to nearby targets (random multi-arc search plus Gauss-Newton on
//! the endpoint) and the quotient local-controllability verification.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::integrate::{endpoint, endpoint_jacobian, integrate};
use super::system::{quotient, ControlSignal, ControlSystem};
use crate::error::{Error, Result};
use crate::flags;
use crate::linalg;

#[derive(Debug, Clone)]
pub struct SteeringOptions {
    pub narcs: usize,
    pub horizon: f64,
    pub step: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub multistarts: usize,
    pub seed: u64,
    /// Rank the bracket closure must reach for the precondition; defaults to
    /// the ambient dimension. Charts with an invariant submanifold (the
    /// trig-extension cylinder) pass the submanifold dimension here.
    pub reachable_rank: Option<usize>,
}

impl Default for SteeringOptions {
    fn default() -> Self {
        SteeringOptions {
            narcs: 4,
            horizon: 1.0,
            step: 1e-2,
            tol: 1e-6,
            max_iters: 60,
            multistarts: 12,
            seed: 7,
            reachable_rank: None,
        }
    }
}

fn signal_from_flat(flat: &[f64], cd: usize, narcs: usize, horizon: f64) -> ControlSignal {
    let samples: Vec<Vec<f64>> = (0..narcs)
        .map(|m| flat[m * cd..(m + 1) * cd].to_vec())
        .collect();
    ControlSignal::new(0.0, horizon, samples).expect("valid signal")
}

/// Gauss-Newton refinement of `rows(End(u)) = target` from an initial flat
/// control vector. Returns the refined controls and the terminal residual.
fn refine(
    sys: &ControlSystem,
    x0: &[f64],
    rows: &[usize],
    target: &[f64],
    mut flat: Vec<f64>,
    opts: &SteeringOptions,
) -> Result<(Vec<f64>, f64)> {
    let cd = sys.control_dim();
    let residual = |flat: &[f64]| -> Result<Vec<f64>> {
        let sig = signal_from_flat(flat, cd, opts.narcs, opts.horizon);
        let end = endpoint(sys, &sig, x0, opts.step)?;
        Ok(rows.iter().zip(target).map(|(&r, t)| end[r] - t).collect())
    };
    let mut g = residual(&flat)?;
    let mut best = linalg::norm(&g);
    for _ in 0..opts.max_iters {
        if best <= opts.tol {
            break;
        }
        let sig = signal_from_flat(&flat, cd, opts.narcs, opts.horizon);
        let jac_full = endpoint_jacobian(sys, &sig, x0, opts.step)?;
        let jac: Vec<Vec<f64>> = rows.iter().map(|&r| jac_full[r].clone()).collect();
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(delta) = linalg::solve_lsq(&jac, &neg_g, 1e-12) else {
            break;
        };
        // Backtracking line search on the residual norm.
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..25 {
            let trial: Vec<f64> = flat
                .iter()
                .zip(&delta)
                .map(|(u, d)| u + alpha * d)
                .collect();
            if let Ok(gt) = residual(&trial) {
                let nt = linalg::norm(&gt);
                if nt < best {
                    flat = trial;
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
    Ok((flat, best))
}

/// Find a control steering `sys` so that the `rows` coordinates of the
/// endpoint reach `target`: random multi-arc initialization, then
/// Gauss-Newton with a line search.
pub fn steer_to_target(
    sys: &ControlSystem,
    x0: &[f64],
    rows: &[usize],
    target: &[f64],
    opts: &SteeringOptions,
) -> Result<ControlSignal> {
    let cd = sys.control_dim();
    let nflat = cd * opts.narcs;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..opts.multistarts.max(1) {
        let scale = 1.0 / opts.horizon.max(1e-6);
        let init: Vec<f64> = (0..nflat)
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        let (flat, res) = refine(sys, x0, rows, target, init, opts)?;
        let better = best.as_ref().map(|(_, b)| res < *b).unwrap_or(true);
        if better {
            best = Some((flat, res));
        }
        if best.as_ref().unwrap().1 <= opts.tol {
            break;
        }
    }
    let (flat, res) = best.expect("at least one start");
    if res > opts.tol {
        return Err(Error::ShootingFailed { best_residual: res });
    }
    Ok(signal_from_flat(&flat, cd, opts.narcs, opts.horizon))
}

#[derive(Debug, Clone)]
pub struct TargetOutcome {
    pub target: Vec<f64>,
    pub reached: bool,
    pub terminal_error: f64,
    /// Max pointwise residual of the projected trajectory against the
    /// quotient dynamics.
    pub projection_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ControllabilityReport {
    pub outcomes: Vec<TargetOutcome>,
    pub successes: usize,
    pub max_terminal_error: f64,
    pub max_projection_residual: f64,
}

/// Max over the trajectory grid of the residual between the projected
/// full-system velocity and the quotient field evaluated at the projected
/// state with the dropped coordinates as parameters.
pub fn projection_residual(
    sys: &ControlSystem,
    quot: &ControlSystem,
    keep: &[usize],
    traj: &super::system::Trajectory,
) -> f64 {
    let dropped: Vec<usize> = (0..sys.state_dim()).filter(|i| !keep.contains(i)).collect();
    let mut max_res: f64 = 0.0;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let u = traj
            .signal
            .value_at((*t + 1e-12).min(traj.signal.t1 - 1e-12));
        let full_vel = sys.velocity(state, u);
        let proj_state: Vec<f64> = keep.iter().map(|&i| state[i]).collect();
        let mut q_control: Vec<f64> = u.to_vec();
        q_control.extend(dropped.iter().map(|&i| state[i]));
        let q_vel = quot.velocity(&proj_state, &q_control);
        for (row, &i) in keep.iter().enumerate() {
            max_res = max_res.max((full_vel[i] - q_vel[row]).abs());
        }
    }
    max_res
}

/// Verify local controllability of the quotient: steer the full system so
/// that the projected endpoint reaches random nearby quotient targets, and
/// check that the projected trajectory solves the quotient dynamics.
pub fn verify_quotient_controllability(
    sys: &ControlSystem,
    keep: &[usize],
    x0: &[f64],
    radius: f64,
    trials: usize,
    opts: &SteeringOptions,
) -> Result<ControllabilityReport> {
    let needed = opts.reachable_rank.unwrap_or(sys.state_dim());
    let flag = flags::derived_flag_f64(sys.frame(), x0, sys.state_dim() + 2, 1e-8)?;
    if flag.final_rank() < needed {
        return Err(Error::PreconditionViolated {
            constraint: format!(
                "system is not bracket-generating at x0 (rank {} < {needed})",
                flag.final_rank()
            ),
        });
    }
    let quot = quotient(sys, keep)?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    let base: Vec<f64> = keep_sorted.iter().map(|&i| x0[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e3779b97f4a7c15);
    let targets: Vec<Vec<f64>> = (0..trials)
        .map(|_| {
            let dir: Vec<f64> = (0..base.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let n = linalg::norm(&dir).max(1e-9);
            let r = radius * rng.random_range(0.2..1.0);
            base.iter().zip(&dir).map(|(b, d)| b + r * d / n).collect()
        })
        .collect();
    let seeds: Vec<u64> = (0..trials)
        .map(|i| opts.seed.wrapping_add(i as u64 * 101))
        .collect();
    let jobs: Vec<(Vec<f64>, u64)> = targets.into_iter().zip(seeds).collect();
    let outcomes: Vec<TargetOutcome> = crate::par::map_collect(&jobs, |(target, seed)| {
        let mut o = opts.clone();
        o.seed = *seed;
        match steer_to_target(sys, x0, &keep_sorted, target, &o) {
            Ok(sig) => {
                let traj = integrate(sys, &sig, x0, o.step).expect("steered signal integrates");
                let endp = traj.endpoint();
                let err = keep_sorted
                    .iter()
                    .zip(target)
                    .map(|(&i, t)| (endp[i] - t).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let proj = projection_residual(sys, &quot, &keep_sorted, &traj);
                TargetOutcome {
                    target: target.clone(),
                    reached: err <= o.tol * 10.0,
                    terminal_error: err,
                    projection_residual: proj,
                }
            }
            Err(_) => TargetOutcome {
                target: target.clone(),
                reached: false,
                terminal_error: f64::INFINITY,
                projection_residual: f64::INFINITY,
            },
        }
    });
    let successes = outcomes.iter().filter(|o| o.reached).count();
    let max_terminal_error = outcomes
        .iter()
        .filter(|o| o.reached)
        .map(|o| o.terminal_error)
        .fold(0.0, f64::max);
    let max_projection_residual = outcomes
        .iter()
        .filter(|o| o.reached)
        .map(|o| o.projection_residual)
        .fold(0.0, f64::max);
    Ok(ControllabilityReport {
        outcomes,
        successes,
        max_terminal_error,
        max_projection_residual,
    })
}
