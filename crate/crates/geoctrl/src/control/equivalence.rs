//! Equivalence checks between two frame-presented systems.
//!
//! An equivalence is a pair `(psi, phi)`: `phi` a state diffeomorphism and
//! `psi` a fiberwise control map, with `F'(phi(z), psi(z, u)) =
//! phi_* F(z, u)`. The check samples the velocity identity and the induced
//! Hamiltonian identity `H(z, p, u) = H'(phi(z), (Dphi)^{-T} p, psi(z, u))`.

use super::system::ControlSystem;
use crate::error::{Error, Result};
use crate::linalg;
use crate::vecfield::Polynomial;

/// A polynomial map between charts, one polynomial per output component.
#[derive(Debug, Clone)]
pub struct PolyMap {
    pub components: Vec<Polynomial>,
}

impl PolyMap {
    pub fn new(components: Vec<Polynomial>) -> Self {
        PolyMap { components }
    }

    pub fn identity(nvars: usize) -> Self {
        PolyMap {
            components: (0..nvars).map(|i| Polynomial::var(nvars, i)).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval_f64(x)).collect()
    }

    /// Jacobian rows `J[k][j] = d map_k / dx_j`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let nvars = self.components.first().map(|c| c.nvars()).unwrap_or(0);
        self.components
            .iter()
            .map(|c| (0..nvars).map(|j| c.partial(j).eval_f64(x)).collect())
            .collect()
    }
}

/// A sample for the equivalence check: state, control and a covector at the
/// state.
#[derive(Debug, Clone)]
pub struct EquivalenceSample {
    pub state: Vec<f64>,
    pub control: Vec<f64>,
    pub covector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// Max over samples of `|F'(psi(z,u)) - phi_* F(z,u)|`.
    pub max_velocity_residual: f64,
    /// Max over samples of the Hamiltonian identity residual.
    pub max_hamiltonian_residual: f64,
    /// Smallest |det Dphi| seen (invertibility margin).
    pub min_jacobian_det: f64,
}

impl EquivalenceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_velocity_residual <= tol && self.max_hamiltonian_residual <= tol
    }
}

/// Check `(psi, phi)` on the samples. `psi` maps the joint chart
/// `(state of sys, controls of sys)` to the control values of `sys2`; `phi`
/// maps states to states. When `phi_inv` is given, `phi_inv(phi(z)) = z` is
/// verified on the samples; otherwise invertibility is checked through the
/// Jacobian determinant.
pub fn check_equivalence(
    sys: &ControlSystem,
    sys2: &ControlSystem,
    psi: &PolyMap,
    phi: &PolyMap,
    phi_inv: Option<&PolyMap>,
    samples: &[EquivalenceSample],
) -> Result<EquivalenceReport> {
    let mut max_velocity_residual: f64 = 0.0;
    let mut max_hamiltonian_residual: f64 = 0.0;
    let mut min_jacobian_det = f64::INFINITY;
    for (idx, s) in samples.iter().enumerate() {
        let dphi = phi.jacobian(&s.state)?;
        let det = det_f64(&dphi);
        min_jacobian_det = min_jacobian_det.min(det.abs());
        if det.abs() < 1e-12 {
            return Err(Error::NonInvertibleMap { index: idx });
        }
        if let Some(inv) = phi_inv {
            let back = inv.eval(&phi.eval(&s.state)?)?;
            let err: f64 = back
                .iter()
                .zip(&s.state)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if err > 1e-8 {
                return Err(Error::NonInvertibleMap { index: idx });
            }
        }

        // Velocity identity.
        let joint: Vec<f64> = s.state.iter().chain(s.control.iter()).copied().collect();
        let u2 = psi.eval(&joint)?;
        let z2 = phi.eval(&s.state)?;
        let f = sys.velocity(&s.state, &s.control);
        let f2 = sys2.velocity(&z2, &u2);
        let pushed: Vec<f64> = dphi.iter().map(|row| linalg::dot(row, &f)).collect();
        let vres = f2
            .iter()
            .zip(&pushed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        max_velocity_residual = max_velocity_residual.max(vres);

        // Hamiltonian identity at the sampled covector: the transported
        // covector is q = (Dphi)^{-T} p.
        let n = s.state.len();
        let mut dphi_t = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                dphi_t[i][j] = dphi[j][i];
            }
        }
        let q = linalg::solve_square(&dphi_t, &s.covector)
            .ok_or(Error::NonInvertibleMap { index: idx })?;
        let h1 = linalg::dot(&s.covector, &f);
        let h2 = linalg::dot(&q, &f2);
        max_hamiltonian_residual = max_hamiltonian_residual.max((h1 - h2).abs());
    }
    Ok(EquivalenceReport {
        max_velocity_residual,
        max_hamiltonian_residual,
        min_jacobian_det,
    })
}

fn det_f64(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let flat: Vec<f64> = m.iter().flat_map(|r| r.iter().copied()).collect();
    nalgebra::DMatrix::from_row_slice(n, n, &flat).determinant()
}
