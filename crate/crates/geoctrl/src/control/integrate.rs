//! Fixed-step RK4 integration, endpoint maps, variational Jacobians and the
//! singular-control test.

use super::system::{ControlSignal, ControlSystem, Trajectory};
use crate::error::{Error, Result};
use crate::linalg;

/// One classical RK4 step of `dx/dt = F(x, u)` with `u` frozen.
fn rk4_step(sys: &ControlSystem, x: &[f64], u: &[f64], h: f64, aug: &mut Vec<f64>) -> Vec<f64> {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    sys.velocity_into(x, u, aug, &mut k1);
    let mut tmp: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
    sys.velocity_into(&tmp, u, aug, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    sys.velocity_into(&tmp, u, aug, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    sys.velocity_into(&tmp, u, aug, &mut k4);
    (0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrate the system along a piecewise-constant signal.
///
/// Steps are snapped to the control-interval boundaries (each interval gets a
/// whole number of uniform substeps) so the scheme keeps its order across the
/// control discontinuities.
pub fn integrate(
    sys: &ControlSystem,
    sig: &ControlSignal,
    x0: &[f64],
    step: f64,
) -> Result<Trajectory> {
    if x0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial point",
            expected: sys.state_dim(),
            got: x0.len(),
        });
    }
    if sig.control_dim() != sys.control_dim() {
        return Err(Error::DimensionMismatch {
            context: "signal control dimension",
            expected: sys.control_dim(),
            got: sig.control_dim(),
        });
    }
    let width = sig.interval_width();
    if !(step > 0.0) || step > width + 1e-15 {
        return Err(Error::PreconditionViolated {
            constraint: format!("0 < step <= interval width {width}"),
        });
    }
    if let Some(dom) = sys.domain() {
        if !dom.contains(x0) {
            return Err(Error::DomainExit { t_exit: sig.t0 });
        }
    }
    let substeps = (width / step).ceil() as usize;
    let h = width / substeps as f64;
    let mut aug = Vec::new();
    let mut times = Vec::with_capacity(sig.intervals() * substeps + 1);
    let mut states = Vec::with_capacity(sig.intervals() * substeps + 1);
    times.push(sig.t0);
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    for (m, u) in sig.samples.iter().enumerate() {
        let t_base = sig.t0 + m as f64 * width;
        for s in 0..substeps {
            x = rk4_step(sys, &x, u, h, &mut aug);
            let t = t_base + (s + 1) as f64 * h;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationDiverged { t_last: t });
            }
            if let Some(dom) = sys.domain() {
                if !dom.contains(&x) {
                    return Err(Error::DomainExit { t_exit: t });
                }
            }
            times.push(t);
            states.push(x.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        signal: sig.clone(),
    })
}

/// Terminal state of the integrated trajectory.
pub fn endpoint(
    sys: &ControlSystem,
    sig: &ControlSignal,
    x0: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    Ok(integrate(sys, sig, x0, step)?.endpoint().to_vec())
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let k = b.len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let ail = a[i][l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

/// Derivative of the endpoint with respect to every piecewise-constant
/// control value, by integrating the variational equation alongside the
/// state. Columns are interval-major: column `k * control_dim + i` is the
/// sensitivity to component `i` of interval `k`.
pub fn endpoint_jacobian(
    sys: &ControlSystem,
    sig: &ControlSignal,
    x0: &[f64],
    step: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = sys.state_dim();
    let cd = sys.control_dim();
    if sig.control_dim() != cd {
        return Err(Error::DimensionMismatch {
            context: "signal control dimension",
            expected: cd,
            got: sig.control_dim(),
        });
    }
    let width = sig.interval_width();
    let substeps = (width / step).ceil() as usize;
    let h = width / substeps as f64;
    let ncols = sig.intervals() * cd;
    // Sensitivity S = dx(t)/du, n x ncols, propagated through each step.
    let mut sens = vec![vec![0.0; ncols]; n];
    let mut x = x0.to_vec();
    let mut aug = Vec::new();
    let eye = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    };
    for (m, u) in sig.samples.iter().enumerate() {
        for _ in 0..substeps {
            // Stage values and their state/control linearizations.
            let (a1, b1) = sys.linearization(&x, u);
            let mut k1 = vec![0.0; n];
            sys.velocity_into(&x, u, &mut aug, &mut k1);

            let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
            let (a2, b2) = sys.linearization(&x2, u);
            let mut k2 = vec![0.0; n];
            sys.velocity_into(&x2, u, &mut aug, &mut k2);

            let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2[i]).collect();
            let (a3, b3) = sys.linearization(&x3, u);
            let mut k3 = vec![0.0; n];
            sys.velocity_into(&x3, u, &mut aug, &mut k3);

            let x4: Vec<f64> = (0..n).map(|i| x[i] + h * k3[i]).collect();
            let (a4, b4) = sys.linearization(&x4, u);
            let mut k4 = vec![0.0; n];
            sys.velocity_into(&x4, u, &mut aug, &mut k4);

            // Chain rule through the four stages: K_i = dk_i/dx, D_i = dk_i/du.
            let kk1 = a1.clone();
            let dd1 = b1.clone();
            let mut m2 = eye(n);
            for i in 0..n {
                for j in 0..n {
                    m2[i][j] += 0.5 * h * kk1[i][j];
                }
            }
            let kk2 = mat_mul(&a2, &m2);
            let mut dd2 = b2.clone();
            let a2d1 = mat_mul(&a2, &dd1);
            for i in 0..n {
                for j in 0..cd {
                    dd2[i][j] += 0.5 * h * a2d1[i][j];
                }
            }
            let mut m3 = eye(n);
            for i in 0..n {
                for j in 0..n {
                    m3[i][j] += 0.5 * h * kk2[i][j];
                }
            }
            let kk3 = mat_mul(&a3, &m3);
            let mut dd3 = b3.clone();
            let a3d2 = mat_mul(&a3, &dd2);
            for i in 0..n {
                for j in 0..cd {
                    dd3[i][j] += 0.5 * h * a3d2[i][j];
                }
            }
            let mut m4 = eye(n);
            for i in 0..n {
                for j in 0..n {
                    m4[i][j] += h * kk3[i][j];
                }
            }
            let kk4 = mat_mul(&a4, &m4);
            let mut dd4 = b4.clone();
            let a4d3 = mat_mul(&a4, &dd3);
            for i in 0..n {
                for j in 0..cd {
                    dd4[i][j] += h * a4d3[i][j];
                }
            }

            // Step transition Phi = I + h/6 (K1 + 2K2 + 2K3 + K4) and the
            // explicit control derivative of the step map.
            let mut phi = eye(n);
            for i in 0..n {
                for j in 0..n {
                    phi[i][j] +=
                        h / 6.0 * (kk1[i][j] + 2.0 * kk2[i][j] + 2.0 * kk3[i][j] + kk4[i][j]);
                }
            }
            let mut du = vec![vec![0.0; cd]; n];
            for i in 0..n {
                for j in 0..cd {
                    du[i][j] =
                        h / 6.0 * (dd1[i][j] + 2.0 * dd2[i][j] + 2.0 * dd3[i][j] + dd4[i][j]);
                }
            }

            sens = mat_mul(&phi, &sens);
            for i in 0..n {
                for j in 0..cd {
                    sens[i][m * cd + j] += du[i][j];
                }
            }
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationDiverged {
                    t_last: sig.t0 + (m as f64 + 1.0) * width,
                });
            }
        }
    }
    Ok(sens)
}

#[derive(Debug, Clone)]
pub struct SingularReport {
    pub singular: bool,
    pub rank: usize,
    /// The n-th largest singular value of the endpoint Jacobian (the one a
    /// rank deficiency drives to zero).
    pub smallest_sv: f64,
}

/// Rank test of the endpoint Jacobian: the control is singular iff the
/// numerical rank (relative threshold `tol`) falls below the state dimension.
pub fn is_singular_control(
    sys: &ControlSystem,
    sig: &ControlSignal,
    x0: &[f64],
    step: f64,
    tol: f64,
) -> Result<SingularReport> {
    let jac = endpoint_jacobian(sys, sig, x0, step)?;
    let n = sys.state_dim();
    let (sv, _) = linalg::singular_values(&jac);
    let rank = linalg::numeric_rank(&sv, tol);
    let smallest_sv = sv.get(n - 1).copied().unwrap_or(0.0);
    Ok(SingularReport {
        singular: rank < n,
        rank,
        smallest_sv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::system::{restrict, BoxDomain};
    use crate::testkit::m5_system;
    use crate::vecfield::{Chart, PolyVectorField};

    #[test]
    fn constant_field_reaches_unit_distance() {
        let sys = ControlSystem::new(Chart::standard(1), vec![PolyVectorField::coordinate(1, 0)])
            .unwrap();
        let sig = ControlSignal::constant(0.0, 1.0, vec![1.0]).unwrap();
        let end = endpoint(&sys, &sig, &[0.0], 1e-2).unwrap();
        assert!((end[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn m5_two_arc_endpoint_matches_flow_composition() {
        // Closed form: flowing X1 for time 1 then X2 for time 1 from the
        // origin lands at (1, 1, 1, 1/2, 1/2).
        let sys = m5_system();
        let sig = ControlSignal::new(0.0, 2.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let end = endpoint(&sys, &sig, &[0.0; 5], 1e-3).unwrap();
        let expected = [1.0, 1.0, 1.0, 0.5, 0.5];
        for (a, b) in end.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10, "{end:?}");
        }
    }

    #[test]
    fn zero_control_is_stationary() {
        let sys = m5_system();
        let sig = ControlSignal::constant(0.0, 1.0, vec![0.0, 0.0]).unwrap();
        let x0 = [0.3, -0.2, 0.1, 0.0, 0.5];
        let traj = integrate(&sys, &sig, &x0, 1e-2).unwrap();
        for s in &traj.states {
            assert_eq!(s.as_slice(), &x0);
        }
    }

    #[test]
    fn trajectory_satisfies_discrete_scheme() {
        let sys = m5_system();
        let sig = ControlSignal::new(0.0, 1.0, vec![vec![0.7, -0.3], vec![0.2, 0.9]]).unwrap();
        let traj = integrate(&sys, &sig, &[0.1, 0.0, 0.0, 0.0, 0.0], 0.05).unwrap();
        let mut aug = Vec::new();
        for k in 0..traj.states.len() - 1 {
            let t_mid = traj.times[k];
            let u = sig.value_at(t_mid + 1e-12);
            let h = traj.times[k + 1] - traj.times[k];
            let re = rk4_step(&sys, &traj.states[k], u, h, &mut aug);
            for (a, b) in re.iter().zip(&traj.states[k + 1]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn integrator_is_fourth_order() {
        // Halving the step shrinks the endpoint error ~16x against a fine
        // reference on a smooth control. (M5 itself is nilpotent and RK4 is
        // exact on it, so use a rotation field with real truncation error.)
        let rot = PolyVectorField::new(vec![
            crate::vecfield::Polynomial::var(2, 1).neg(),
            crate::vecfield::Polynomial::var(2, 0),
        ])
        .unwrap();
        let shift = PolyVectorField::coordinate(2, 0);
        let sys = ControlSystem::new(Chart::standard(2), vec![rot, shift]).unwrap();
        let sig = ControlSignal::constant(0.0, 1.0, vec![1.0, 0.3]).unwrap();
        let x0 = [1.0, 0.0];
        let reference = endpoint(&sys, &sig, &x0, 1e-4).unwrap();
        let err = |step: f64| -> f64 {
            let e = endpoint(&sys, &sig, &x0, step).unwrap();
            e.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let e1 = err(0.05);
        let e2 = err(0.025);
        let ratio = e1 / e2;
        assert!(
            (8.0..40.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio} ({e1} -> {e2})"
        );
    }

    #[test]
    fn restriction_errors_on_exit_and_is_transparent_inside() {
        let sys = m5_system();
        let small = BoxDomain::new(vec![-0.5; 5], vec![0.5; 5]).unwrap();
        let restricted = restrict(&sys, small).unwrap();
        let sig = ControlSignal::constant(0.0, 1.0, vec![1.0, 0.0]).unwrap();
        // Exits x1 = 0.5 at t = 0.5.
        match integrate(&restricted, &sig, &[0.0; 5], 1e-2) {
            Err(Error::DomainExit { t_exit }) => assert!((t_exit - 0.5).abs() < 0.02),
            other => panic!("expected domain exit, got {other:?}"),
        }
        // Identical to the unrestricted trajectory while inside.
        let short = ControlSignal::constant(0.0, 0.3, vec![1.0, 0.0]).unwrap();
        let a = integrate(&restricted, &short, &[0.0; 5], 1e-2).unwrap();
        let b = integrate(&sys, &short, &[0.0; 5], 1e-2).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn jacobian_single_field_single_interval() {
        let sys = ControlSystem::new(Chart::standard(1), vec![PolyVectorField::coordinate(1, 0)])
            .unwrap();
        let sig = ControlSignal::constant(0.0, 1.0, vec![1.0]).unwrap();
        let jac = endpoint_jacobian(&sys, &sig, &[0.0], 0.25).unwrap();
        assert_eq!(jac.len(), 1);
        assert!((jac[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences_on_m5() {
        let sys = m5_system();
        let samples = vec![
            vec![0.9, 0.1],
            vec![-0.3, 0.7],
            vec![0.5, 0.5],
            vec![0.2, -0.8],
        ];
        let sig = ControlSignal::new(0.0, 1.0, samples.clone()).unwrap();
        let x0 = [0.05, -0.1, 0.0, 0.02, 0.0];
        let step = 1e-2;
        let jac = endpoint_jacobian(&sys, &sig, &x0, step).unwrap();
        let h = 1e-5;
        for m in 0..samples.len() {
            for c in 0..2 {
                let mut up = samples.clone();
                up[m][c] += h;
                let mut dn = samples.clone();
                dn[m][c] -= h;
                let eu =
                    endpoint(&sys, &ControlSignal::new(0.0, 1.0, up).unwrap(), &x0, step).unwrap();
                let ed =
                    endpoint(&sys, &ControlSignal::new(0.0, 1.0, dn).unwrap(), &x0, step).unwrap();
                for i in 0..5 {
                    let fd = (eu[i] - ed[i]) / (2.0 * h);
                    assert!(
                        (fd - jac[i][m * 2 + c]).abs() < 1e-5,
                        "entry ({i}, {m}, {c}): fd {fd} vs variational {}",
                        jac[i][m * 2 + c]
                    );
                }
            }
        }
    }

    #[test]
    fn straight_abnormal_line_is_singular_and_generic_is_not() {
        let sys = m5_system();
        // u = (1, 0): the rank-deficiency direction is dx5.
        let sig = ControlSignal::new(0.0, 1.0, vec![vec![1.0, 0.0]; 20]).unwrap();
        let rep = is_singular_control(&sys, &sig, &[0.0; 5], 1e-2, 1e-8).unwrap();
        assert!(rep.singular, "straight line must be singular: {rep:?}");
        assert!(rep.rank < 5);

        // A generic random-ish control with 20 intervals has full rank.
        let samples: Vec<Vec<f64>> = (0..20)
            .map(|k| {
                let t = k as f64;
                vec![(0.3 + 0.1 * t).sin(), (1.7 * t + 0.4).cos()]
            })
            .collect();
        let sig = ControlSignal::new(0.0, 1.0, samples).unwrap();
        let rep = is_singular_control(&sys, &sig, &[0.0; 5], 1e-2, 1e-8).unwrap();
        assert!(!rep.singular, "generic control flagged singular: {rep:?}");
        assert_eq!(rep.rank, 5);
    }

    #[test]
    fn one_state_system_is_never_singular() {
        let sys = ControlSystem::new(Chart::standard(1), vec![PolyVectorField::coordinate(1, 0)])
            .unwrap();
        let sig = ControlSignal::new(0.0, 1.0, vec![vec![0.3], vec![-0.2]]).unwrap();
        let rep = is_singular_control(&sys, &sig, &[0.0], 1e-2, 1e-8).unwrap();
        assert!(!rep.singular);
    }

    #[test]
    fn time_reversed_constant_control_returns_home() {
        let sys = m5_system();
        let sig = ControlSignal::new(0.0, 2.0, vec![vec![0.6, 0.0], vec![-0.6, 0.0]]).unwrap();
        let end = endpoint(&sys, &sig, &[0.2, 0.1, 0.0, 0.0, 0.0], 1e-3).unwrap();
        let expected = [0.2, 0.1, 0.0, 0.0, 0.0];
        for (a, b) in end.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
