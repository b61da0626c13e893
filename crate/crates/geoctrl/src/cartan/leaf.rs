//! The local leaf space of the K-foliation and the induced cone system.
//!
//! The leaf space X is realized on an affine transversal slice S through a
//! base point `z0` of Z, orthogonal (in chart coordinates) to `eta(z0)`.
//! The chart map flows a point along its K-leaf until it hits S, by Newton
//! iteration on the hitting time; the fibre coordinate is the signed flow
//! time from the slice. Differentials of the chart map are finite
//! differences with Richardson extrapolation; there is no symbolic form.

use super::prolong::ProlongedChart;
use crate::error::{Error, Result};
use crate::linalg;

/// Default substep for flows along `eta`.
const LEAF_FLOW_STEP: f64 = 2e-3;
/// Bound on the hitting-time search before giving up.
const MAX_FLOW_TIME: f64 = 3.0;
/// Finite-difference step for chart-map differentials. The chart map is
/// solved to ~1e-12, so with Richardson extrapolation this step keeps the
/// difference-quotient noise near 1e-9 while the truncation term stays
/// below it.
const CHART_FD_STEP: f64 = 1e-3;

/// Image of a point under the leaf-space chart map.
#[derive(Debug, Clone)]
pub struct ChartPoint {
    /// Coordinates on the 5-dimensional slice.
    pub slice: Vec<f64>,
    /// The hit point on the slice, in Z coordinates.
    pub hit: Vec<f64>,
    /// Flow time from the query point to the slice.
    pub flow_time: f64,
}

/// A local chart of the leaf space of lifted abnormal geodesics.
#[derive(Debug, Clone)]
pub struct LocalLeafSpace {
    prolonged: ProlongedChart,
    z0: Vec<f64>,
    /// Unit `eta(z0)`, the slice normal.
    normal: Vec<f64>,
    /// Orthonormal tangent basis of the slice (5 rows of length 6).
    basis: Vec<Vec<f64>>,
    flow_step: f64,
}

impl LocalLeafSpace {
    pub fn new(prolonged: &ProlongedChart, z0: &[f64]) -> Result<Self> {
        if z0.len() != 6 {
            return Err(Error::DimensionMismatch {
                context: "leaf-space base point",
                expected: 6,
                got: z0.len(),
            });
        }
        let eta0 = prolonged.eta_vector(z0)?;
        let n = linalg::norm(&eta0);
        if n < 1e-10 {
            return Err(Error::DegeneratePoint {
                msg: "eta vanishes at the leaf-space base point".into(),
            });
        }
        let normal: Vec<f64> = eta0.iter().map(|x| x / n).collect();
        let basis = linalg::nullspace_f64(std::slice::from_ref(&normal), 6, 1e-12);
        debug_assert_eq!(basis.len(), 5);
        Ok(LocalLeafSpace {
            prolonged: prolonged.clone(),
            z0: z0.to_vec(),
            normal,
            basis,
            flow_step: LEAF_FLOW_STEP,
        })
    }

    pub fn prolonged(&self) -> &ProlongedChart {
        &self.prolonged
    }

    /// Relax or tighten the substep of the leaf flows (default 2e-3).
    pub fn with_flow_step(mut self, step: f64) -> Self {
        self.flow_step = step;
        self
    }

    pub fn base_point(&self) -> &[f64] {
        &self.z0
    }

    fn offset(&self, z: &[f64]) -> f64 {
        (0..6).map(|i| self.normal[i] * (z[i] - self.z0[i])).sum()
    }

    /// Slice coordinates of a Z-point lying (numerically) on the slice.
    pub fn slice_coords(&self, zeta: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| (0..6).map(|i| b[i] * (zeta[i] - self.z0[i])).sum())
            .collect()
    }

    /// The Z-point of given slice coordinates.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.z0.clone();
        for (xi, b) in x.iter().zip(&self.basis) {
            for i in 0..6 {
                z[i] += xi * b[i];
            }
        }
        z
    }

    /// Flow `z` along its K-leaf to the slice (Newton on the hitting time).
    pub fn chartmap(&self, z: &[f64]) -> Result<ChartPoint> {
        let mut cur = z.to_vec();
        let mut t = 0.0_f64;
        for _ in 0..80 {
            let g = self.offset(&cur);
            if g.abs() <= 1e-13 {
                return Ok(ChartPoint {
                    slice: self.slice_coords(&cur),
                    hit: cur,
                    flow_time: t,
                });
            }
            let eta = self.prolonged.eta_vector(&cur)?;
            let slope = linalg::dot(&self.normal, &eta);
            if slope.abs() < 1e-8 {
                return Err(Error::ChartTooLarge);
            }
            let delta = -g / slope;
            if (t + delta).abs() > MAX_FLOW_TIME {
                return Err(Error::ChartTooLarge);
            }
            self.prolonged.flow_eta(&mut cur, delta, self.flow_step)?;
            t += delta;
        }
        Err(Error::ChartTooLarge)
    }

    /// Signed fibre coordinate: the flow time from the slice to `z`.
    pub fn fibercoord(&self, z: &[f64]) -> Result<f64> {
        Ok(-self.chartmap(z)?.flow_time)
    }

    /// The leaf point over slice coordinates `x` at fibre coordinate `s`.
    pub fn leaf_point(&self, x: &[f64], s: f64) -> Result<Vec<f64>> {
        let mut z = self.lift(x);
        self.prolonged.flow_eta(&mut z, s, self.flow_step)?;
        Ok(z)
    }

    /// Numerical Jacobian of the slice-coordinate chart map at `z`
    /// (5 rows, 6 columns), by central differences.
    pub fn chartmap_jacobian(&self, z: &[f64]) -> Result<Vec<Vec<f64>>> {
        let h = CHART_FD_STEP;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(6);
        for j in 0..6 {
            let mut up = z.to_vec();
            up[j] += h;
            let mut dn = z.to_vec();
            dn[j] -= h;
            let cu = self.chartmap(&up)?.slice;
            let cd = self.chartmap(&dn)?.slice;
            cols.push((0..5).map(|i| (cu[i] - cd[i]) / (2.0 * h)).collect());
        }
        let mut rows = vec![vec![0.0; 6]; 5];
        for i in 0..5 {
            for j in 0..6 {
                rows[i][j] = cols[j][i];
            }
        }
        Ok(rows)
    }
}

/// The cone system on the local leaf space: controls `(s, a)` with `s`
/// selecting the leaf point over `x` and `a` the speed along the projected
/// fibre direction; dynamics `dx/dt = a G(x, s)` with
/// `G = chartmap_* xi (leaf_point(x, s))`.
#[derive(Debug, Clone)]
pub struct ConeSystem {
    ls: LocalLeafSpace,
}

impl ConeSystem {
    pub fn new(ls: LocalLeafSpace) -> Self {
        ConeSystem { ls }
    }

    pub fn leaf_space(&self) -> &LocalLeafSpace {
        &self.ls
    }

    fn chartmap_along_xi(&self, z: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut up = z.to_vec();
        up[5] += h;
        let mut dn = z.to_vec();
        dn[5] -= h;
        let cu = self.ls.chartmap(&up)?.slice;
        let cd = self.ls.chartmap(&dn)?.slice;
        Ok((0..5).map(|i| (cu[i] - cd[i]) / (2.0 * h)).collect())
    }

    /// The generator `G(x, s)`: Richardson-extrapolated difference of the
    /// chart map through the fibre direction at the leaf point.
    pub fn generator(&self, x: &[f64], s: f64) -> Result<Vec<f64>> {
        let z = self.ls.leaf_point(x, s)?;
        let h = CHART_FD_STEP;
        let d1 = self.chartmap_along_xi(&z, h)?;
        let d2 = self.chartmap_along_xi(&z, 0.5 * h)?;
        Ok((0..5).map(|i| (4.0 * d2[i] - d1[i]) / 3.0).collect())
    }

    /// `dG/ds` by central differences in the fibre coordinate.
    pub fn generator_w(&self, x: &[f64], s: f64) -> Result<Vec<f64>> {
        let h = 1e-3;
        let gu = self.generator(x, s + h)?;
        let gd = self.generator(x, s - h)?;
        Ok((0..5).map(|i| (gu[i] - gd[i]) / (2.0 * h)).collect())
    }

    /// `d2G/ds2` by the three-point stencil. Only the Newton slope of the
    /// fibre-coordinate projection consumes this, so percent-level accuracy
    /// is enough.
    pub fn generator_ww(&self, x: &[f64], s: f64) -> Result<Vec<f64>> {
        let h = 2e-2;
        let gu = self.generator(x, s + h)?;
        let g0 = self.generator(x, s)?;
        let gd = self.generator(x, s - h)?;
        Ok((0..5)
            .map(|i| (gu[i] - 2.0 * g0[i] + gd[i]) / (h * h))
            .collect())
    }

    /// `dG/dx` (5x5, column j = variation of x_j) by central differences.
    pub fn generator_x_jacobian(&self, x: &[f64], s: f64) -> Result<Vec<Vec<f64>>> {
        let h = 1e-4;
        let mut jac = vec![vec![0.0; 5]; 5];
        for j in 0..5 {
            let mut up = x.to_vec();
            up[j] += h;
            let mut dn = x.to_vec();
            dn[j] -= h;
            let gu = self.generator(&up, s)?;
            let gd = self.generator(&dn, s)?;
            for i in 0..5 {
                jac[i][j] = (gu[i] - gd[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// The fibre component `f(x, s)` of `xi` in the `(x, w)` chart:
    /// the derivative of the fibre coordinate along the fibre direction.
    pub fn fiber_component(&self, x: &[f64], s: f64) -> Result<f64> {
        let z = self.ls.leaf_point(x, s)?;
        self.fiber_component_at(&z)
    }

    fn fiber_component_at(&self, z: &[f64]) -> Result<f64> {
        let h = CHART_FD_STEP;
        let eval = |h: f64| -> Result<f64> {
            let mut up = z.to_vec();
            up[5] += h;
            let mut dn = z.to_vec();
            dn[5] -= h;
            let fu = self.ls.fibercoord(&up)?;
            let fd = self.ls.fibercoord(&dn)?;
            Ok((fu - fd) / (2.0 * h))
        };
        let d1 = eval(h)?;
        let d2 = eval(0.5 * h)?;
        Ok((4.0 * d2 - d1) / 3.0)
    }

    /// Gradient of the fibre component in the `(x, w)` chart, entries
    /// `(df/dx_1..5, df/dw)`. Second mixed derivatives of the fibre
    /// coordinate are taken with a 4-point stencil directly on the
    /// coordinate function to stay above its noise floor.
    pub fn fiber_component_gradient(&self, x: &[f64], s: f64) -> Result<Vec<f64>> {
        let k = 1e-3;
        let mut grad = vec![0.0; 6];
        for j in 0..5 {
            let mut up = x.to_vec();
            up[j] += k;
            let mut dn = x.to_vec();
            dn[j] -= k;
            let zu = self.ls.leaf_point(&up, s)?;
            let zd = self.ls.leaf_point(&dn, s)?;
            grad[j] = (self.fiber_stencil(&zu)? - self.fiber_stencil(&zd)?) / (2.0 * k);
        }
        let zu = self.ls.leaf_point(x, s + k)?;
        let zd = self.ls.leaf_point(x, s - k)?;
        grad[5] = (self.fiber_stencil(&zu)? - self.fiber_stencil(&zd)?) / (2.0 * k);
        Ok(grad)
    }

    /// Plain central difference of the fibre coordinate along the fibre
    /// direction (no Richardson; used inside second-derivative stencils).
    fn fiber_stencil(&self, z: &[f64]) -> Result<f64> {
        let h = 1e-3;
        let mut up = z.to_vec();
        up[5] += h;
        let mut dn = z.to_vec();
        dn[5] -= h;
        Ok((self.ls.fibercoord(&up)? - self.ls.fibercoord(&dn)?) / (2.0 * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::prolong::prolong;
    use crate::cartan::prolong::tests::m5_model;
    use crate::linalg::rank_f64;

    fn m5_leaf_space() -> LocalLeafSpace {
        let chart = prolong(&m5_model()).unwrap();
        let z0 = [0.0, 0.0, 0.0, 0.0, 0.0, 0.3];
        LocalLeafSpace::new(&chart, &z0).unwrap()
    }

    #[test]
    fn chartmap_is_the_identity_on_the_transversal() {
        let ls = m5_leaf_space();
        let cp = ls.chartmap(ls.base_point()).unwrap();
        assert!(cp.flow_time.abs() < 1e-12);
        assert!(linalg::norm(&cp.slice) < 1e-12);
        // A point lifted onto the slice maps to itself.
        let x = [0.02, -0.03, 0.01, 0.04, -0.02];
        let z = ls.lift(&x);
        let cp = ls.chartmap(&z).unwrap();
        for (a, b) in cp.slice.iter().zip(&x) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn chartmap_is_constant_along_leaves() {
        let ls = m5_leaf_space();
        let x = [0.05, 0.02, -0.01, 0.03, 0.02];
        let base = ls.chartmap(&ls.lift(&x)).unwrap().slice;
        for s in [-0.2, -0.05, 0.1, 0.25] {
            let z = ls.leaf_point(&x, s).unwrap();
            let cp = ls.chartmap(&z).unwrap();
            let gap: f64 = cp
                .slice
                .iter()
                .zip(&base)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(gap <= 1e-7, "chartmap drift {gap} at s = {s}");
            // The fibre coordinate recovers the flow time.
            let fc = ls.fibercoord(&z).unwrap();
            assert!((fc - s).abs() < 1e-9, "fibercoord {fc} vs {s}");
        }
    }

    #[test]
    fn chartmap_jacobian_has_rank_five() {
        let ls = m5_leaf_space();
        let z = ls
            .leaf_point(&[0.01, 0.02, 0.0, -0.01, 0.03], 0.15)
            .unwrap();
        let jac = ls.chartmap_jacobian(&z).unwrap();
        assert_eq!(rank_f64(&jac, 1e-8), 5);
    }

    #[test]
    fn cone_generator_at_the_base_point() {
        let ls = m5_leaf_space();
        let cone = ConeSystem::new(ls);
        // At s = 0 the generator is chartmap_* xi at the lifted point.
        let g = cone.generator(&[0.0; 5], 0.0).unwrap();
        let jac = cone
            .leaf_space()
            .chartmap_jacobian(cone.leaf_space().base_point())
            .unwrap();
        let xi = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        for i in 0..5 {
            let expected = linalg::dot(&jac[i], &xi);
            assert!((g[i] - expected).abs() < 1e-6, "component {i}");
        }
        // Zero speed is stationary: dx/dt = a G with a = 0.
        let v: Vec<f64> = g.iter().map(|c| 0.0 * c).collect();
        assert!(linalg::norm(&v) == 0.0);
    }

    #[test]
    fn cone_generators_are_pairwise_nonproportional() {
        // The cone over a fixed x is genuinely curved: generators at eight
        // fibre coordinates are pairwise non-proportional.
        let ls = m5_leaf_space();
        let cone = ConeSystem::new(ls);
        let x = [0.0; 5];
        let mut gens = Vec::new();
        for k in 0..8 {
            let s = -0.35 + 0.1 * k as f64;
            gens.push(cone.generator(&x, s).unwrap());
        }
        for i in 0..gens.len() {
            for j in i + 1..gens.len() {
                let a = &gens[i];
                let b = &gens[j];
                let na = linalg::norm(a);
                let nb = linalg::norm(b);
                let cosang = (linalg::dot(a, b) / (na * nb)).abs();
                assert!(
                    cosang < 1.0 - 1e-6,
                    "generators {i} and {j} are proportional (cos = {cosang})"
                );
            }
        }
    }
}
