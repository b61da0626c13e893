//! Hamiltonian functions of control systems and optimal-control problems.

use crate::control::ControlSystem;
use crate::error::{Error, Result};

/// A quadratic energy cost `e(u) = 1/2 sum_{i in S} u_i^2` on a subset of
/// the frame-coefficient controls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergyCost {
    indices: Vec<usize>,
}

impl EnergyCost {
    /// Energy on all `r` frame coefficients.
    pub fn full(r: usize) -> Self {
        EnergyCost {
            indices: (0..r).collect(),
        }
    }

    /// Energy on a subset of frame-coefficient indices.
    pub fn subset(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::PreconditionViolated {
                constraint: "energy index set must be nonempty".into(),
            });
        }
        Ok(EnergyCost { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        0.5 * self.indices.iter().map(|&i| u[i] * u[i]).sum::<f64>()
    }
}

/// A control system together with an energy cost on its controls.
#[derive(Debug, Clone)]
pub struct OptimalControlProblem {
    pub system: ControlSystem,
    pub cost: EnergyCost,
}

impl OptimalControlProblem {
    pub fn new(system: ControlSystem, cost: EnergyCost) -> Result<Self> {
        if cost.indices.iter().any(|&i| i >= system.frame_dim()) {
            return Err(Error::DimensionMismatch {
                context: "energy cost index",
                expected: system.frame_dim(),
                got: *cost.indices.last().unwrap(),
            });
        }
        Ok(OptimalControlProblem { system, cost })
    }

    /// Full sub-Riemannian energy on every frame coefficient.
    pub fn sub_riemannian(system: ControlSystem) -> Self {
        let cost = EnergyCost::full(system.frame_dim());
        OptimalControlProblem { system, cost }
    }
}

/// `H(x, p, u) = <p, F(x, u)> = sum_i u_i <p, X_i(x)>`.
pub fn hamiltonian(sys: &ControlSystem, x: &[f64], p: &[f64], u: &[f64]) -> Result<f64> {
    if p.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "hamiltonian covector",
            expected: sys.state_dim(),
            got: p.len(),
        });
    }
    if u.len() != sys.control_dim() {
        return Err(Error::DimensionMismatch {
            context: "hamiltonian control",
            expected: sys.control_dim(),
            got: u.len(),
        });
    }
    let f = sys.velocity(x, u);
    Ok(crate::linalg::dot(p, &f))
}

/// `H(x, p, u, p0) = <p, F(x,u)> + p0 e(x, u)` with `p0 <= 0`.
pub fn ocp_hamiltonian(
    prob: &OptimalControlProblem,
    x: &[f64],
    p: &[f64],
    u: &[f64],
    p0: f64,
) -> Result<f64> {
    if p0 > 0.0 {
        return Err(Error::PreconditionViolated {
            constraint: "p0 <= 0".into(),
        });
    }
    Ok(hamiltonian(&prob.system, x, p, u)? + p0 * prob.cost.eval(u))
}

/// The reduced normal Hamiltonian `h(x, p) = 1/2 sum_{i in S} <p, X_i(x)>^2`
/// obtained by eliminating `u_i = <p, X_i(x)>` at `p0 = -1`.
pub fn normal_hamiltonian(prob: &OptimalControlProblem, x: &[f64], p: &[f64]) -> Result<f64> {
    let sys = &prob.system;
    if sys.param_count() > 0 {
        return Err(Error::Unsupported {
            msg: "normal_hamiltonian expects a parameter-free frame".into(),
        });
    }
    let mut acc = 0.0;
    for &i in prob.cost.indices() {
        let v = sys.frame()[i].eval_f64(x)?;
        let hi = crate::linalg::dot(p, &v);
        acc += hi * hi;
    }
    Ok(0.5 * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::m5_system;
    use crate::vecfield::{Chart, PolyVectorField};

    #[test]
    fn hamiltonian_examples_on_m5() {
        let sys = m5_system();
        // p = dx1, u = (1,0) at the origin -> 1.
        let h = hamiltonian(&sys, &[0.0; 5], &[1.0, 0.0, 0.0, 0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(h, 1.0);
        // p annihilating the frame at x -> 0 for any u.
        let h = hamiltonian(&sys, &[0.0; 5], &[0.0, 0.0, 1.0, 1.0, 1.0], &[0.7, -0.4]).unwrap();
        assert_eq!(h, 0.0);
        // p = dx3, u = (0,1) at x = (1,0,0,0,0) -> coefficient x1 of d/dx3 = 1.
        let h = hamiltonian(
            &sys,
            &[1.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0],
            &[0.0, 1.0],
        )
        .unwrap();
        assert_eq!(h, 1.0);
    }

    #[test]
    fn ocp_hamiltonian_examples() {
        let prob = OptimalControlProblem::sub_riemannian(m5_system());
        let x = [0.0; 5];
        // p0 = 0 reduces to the system Hamiltonian.
        let p = [1.0, 0.0, 0.0, 0.0, 0.0];
        let u = [1.0, 0.0];
        assert_eq!(
            ocp_hamiltonian(&prob, &x, &p, &u, 0.0).unwrap(),
            hamiltonian(&prob.system, &x, &p, &u).unwrap()
        );
        // u = 0 gives 0 for energy costs.
        assert_eq!(
            ocp_hamiltonian(&prob, &x, &p, &[0.0, 0.0], -1.0).unwrap(),
            0.0
        );
        // p0 = -1, u = (1,0), p = dx1 at the origin -> 1 - 1/2 = 1/2.
        assert_eq!(ocp_hamiltonian(&prob, &x, &p, &u, -1.0).unwrap(), 0.5);
        // Positive p0 rejected.
        assert!(ocp_hamiltonian(&prob, &x, &p, &u, 0.5).is_err());
    }

    #[test]
    fn normal_hamiltonian_examples() {
        let prob = OptimalControlProblem::sub_riemannian(m5_system());
        // p in the annihilator of D at x -> 0.
        let h = normal_hamiltonian(&prob, &[0.0; 5], &[0.0, 0.0, 1.0, -2.0, 0.5]).unwrap();
        assert_eq!(h, 0.0);
        // Flat orthonormal frame, p = (3,4) -> 25/2.
        let flat = ControlSystem::new(
            Chart::standard(2),
            vec![
                PolyVectorField::coordinate(2, 0),
                PolyVectorField::coordinate(2, 1),
            ],
        )
        .unwrap();
        let prob2 = OptimalControlProblem::sub_riemannian(flat);
        assert_eq!(
            normal_hamiltonian(&prob2, &[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            12.5
        );
        // M5, p = dx3 at (1,0,0,0,0): <p,X1> = 0, <p,X2> = 1 -> 1/2.
        let h = normal_hamiltonian(
            &prob,
            &[1.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(h, 0.5);
    }
}
