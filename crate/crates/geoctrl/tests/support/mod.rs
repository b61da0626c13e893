//! Shared fixtures and independent oracles for the integration suites.
//! Each test target compiles this module separately, so not every item is
//! used everywhere.
#![allow(dead_code)]

use num_rational::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use geoctrl::control::{endpoint, endpoint_jacobian, ControlSignal, ControlSystem};
use geoctrl::linalg;
use geoctrl::vecfield::{Chart, PolyVectorField, Polynomial};

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Free-nilpotent growth-(2,3,5) frame on R^5.
pub fn m5_frame() -> Vec<PolyVectorField> {
    let n = 5;
    let x1 = Polynomial::var(n, 0);
    let x2 = Polynomial::var(n, 1);
    let one = Polynomial::constant_i64(n, 1);
    let zero = Polynomial::zero(n);
    vec![
        PolyVectorField::new(vec![
            one.clone(),
            zero.clone(),
            zero.clone(),
            zero.clone(),
            zero.clone(),
        ])
        .unwrap(),
        PolyVectorField::new(vec![
            zero.clone(),
            one,
            x1.clone(),
            x1.pow(2).scale(&q(1, 2)),
            x1.mul(&x2),
        ])
        .unwrap(),
    ]
}

pub fn m5_system() -> ControlSystem {
    ControlSystem::new(Chart::standard(5), m5_frame()).unwrap()
}

/// Heisenberg frame {d/dx, d/dy + x d/dz} on R^3.
pub fn heisenberg_system() -> ControlSystem {
    let one = Polynomial::constant_i64(3, 1);
    let zero = Polynomial::zero(3);
    let f1 = PolyVectorField::new(vec![one.clone(), zero.clone(), zero.clone()]).unwrap();
    let f2 = PolyVectorField::new(vec![zero.clone(), one, Polynomial::var(3, 0)]).unwrap();
    ControlSystem::new(Chart::new(vec!["x", "y", "z"]).unwrap(), vec![f1, f2]).unwrap()
}

/// Result of the direct-transcription energy minimization.
pub struct TranscriptionResult {
    pub signal: ControlSignal,
    pub energy: f64,
    pub endpoint: Vec<f64>,
    pub terminal_error: f64,
}

/// Independent optimality oracle: minimize the control energy of a
/// piecewise-constant control over `intervals` intervals subject to a
/// terminal constraint, by penalty continuation with Gauss-Newton steps.
///
/// The normal equations `(w I + lam^2 Phi^T Phi) d = -g` are solved through
/// the Woodbury identity, so each step costs one endpoint Jacobian plus an
/// n x n solve.
pub fn transcription_minimum(
    sys: &ControlSystem,
    x0: &[f64],
    x1: &[f64],
    t_final: f64,
    intervals: usize,
    step: f64,
    seed: u64,
) -> TranscriptionResult {
    let n = sys.state_dim();
    let r = sys.control_dim();
    let nu = r * intervals;
    let dt = t_final / intervals as f64;
    let w_energy = dt; // grad of energy (dt/2)|u|^2 is dt*u
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Loop-shaped initialization: for bracket-reachable targets the rest
    // control is a stationary point of the penalized objective (the
    // endpoint differential misses the bracket directions at rest), so
    // start from a control that already encircles area, plus noise.
    let mut u: Vec<f64> = (0..nu)
        .map(|j| {
            let k = j / r;
            let phase = 2.0 * std::f64::consts::PI * k as f64 / intervals as f64;
            let base = match j % r {
                0 => phase.cos(),
                1 => phase.sin(),
                _ => 0.0,
            };
            base + rng.random_range(-0.1..0.1)
        })
        .collect();
    let signal_of = |u: &[f64]| -> ControlSignal {
        let samples: Vec<Vec<f64>> = (0..intervals)
            .map(|k| u[k * r..(k + 1) * r].to_vec())
            .collect();
        ControlSignal::new(0.0, t_final, samples).unwrap()
    };
    let terminal = |u: &[f64]| -> Vec<f64> {
        let end = endpoint(sys, &signal_of(u), x0, step).expect("transcription integrates");
        linalg::sub(&end, x1)
    };
    let objective = |u: &[f64], lam: f64| -> f64 {
        let g = terminal(u);
        0.5 * w_energy * linalg::dot(u, u) + 0.5 * lam * lam * linalg::dot(&g, &g)
    };
    // The first penalty weight must already make the terminal mismatch more
    // expensive than the control energy of a full loop, otherwise the zero
    // control (a blind stationary point for bracket-direction targets) wins
    // the first line search.
    for lam in [30.0, 100.0, 300.0, 1000.0, 3000.0] {
        for _ in 0..40 {
            let g = terminal(&u);
            let phi_rows =
                endpoint_jacobian(sys, &signal_of(&u), x0, step).expect("transcription Jacobian");
            // gradient = w u + lam^2 Phi^T g
            let mut grad: Vec<f64> = u.iter().map(|v| w_energy * v).collect();
            for i in 0..n {
                for j in 0..nu {
                    grad[j] += lam * lam * phi_rows[i][j] * g[i];
                }
            }
            let gnorm = linalg::norm(&grad);
            if gnorm < 1e-10 * (1.0 + lam * lam) {
                break;
            }
            // Woodbury solve of (wI + lam^2 Phi^T Phi) d = grad:
            // d = (1/w)(grad - lam^2 Phi^T s), (w I_n + lam^2 Phi Phi^T) s = Phi grad.
            let lam2 = lam * lam;
            let phig: Vec<f64> = (0..n).map(|i| linalg::dot(&phi_rows[i], &grad)).collect();
            let mut m = vec![vec![0.0; n]; n];
            for a in 0..n {
                for b in 0..n {
                    m[a][b] = lam2 * linalg::dot(&phi_rows[a], &phi_rows[b]);
                }
                m[a][a] += w_energy;
            }
            let s = linalg::solve_square(&m, &phig).expect("penalty system solvable");
            let mut d: Vec<f64> = grad.clone();
            for i in 0..n {
                for j in 0..nu {
                    d[j] -= lam2 * phi_rows[i][j] * s[i];
                }
            }
            for dj in d.iter_mut() {
                *dj /= w_energy;
            }
            // Backtracking on the penalized objective.
            let f0 = objective(&u, lam);
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(ui, di)| ui - alpha * di).collect();
                if objective(&trial, lam) < f0 {
                    u = trial;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
    }
    let signal = signal_of(&u);
    let end = endpoint(sys, &signal, x0, step).unwrap();
    let terminal_error = linalg::norm(&linalg::sub(&end, x1));
    let energy = 0.5 * dt * linalg::dot(&u, &u);
    TranscriptionResult {
        signal,
        energy,
        endpoint: end,
        terminal_error,
    }
}
