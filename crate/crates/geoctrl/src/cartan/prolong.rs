//! The prolonged chart on the space Z of tangent lines of a rank-2
//! growth-(2,3,5) distribution.
//!
//! Coordinates on Z are `(y1..y5, v)` with `v` the line angle in the frame
//! `(eta1, eta2)`, taken mod pi with the identification `v ~ v + pi`,
//! `eta ~ -eta`. The splitting is `L = span{xi}`, `K = span{eta}` with
//!
//! `xi = d/dv`, `eta = cos(v) eta1 + sin(v) eta2 + rho(y, v) d/dv`.
//!
//! `rho` is the fibre-angle velocity of the abnormal extremal through `y`
//! with direction `(cos v, sin v)`: writing `h_i(p) = <p, [eta_i, [eta1,
//! eta2]]>` and picking the covector `p` in the second-stage annihilator
//! with `cos(v) h1(p) + sin(v) h2(p) = 0`, the characteristic control is
//! the unit vector along `(h2, -h1)` and
//!
//! `rho = (h1 h2dot - h1dot h2) / (h1^2 + h2^2)`,
//!
//! where `h_i dot = sum_j u_j <p, [eta_j, [eta_i, [eta1, eta2]]]>` with
//! `u = (cos v, sin v)` (the chain rule along the characteristic flow).
//! All brackets are exact; only the final assembly is numeric.
//!
//! For growth and annihilator computations on Z a trigonometric extension
//! chart `(y1..y5, cv, sv)` is used: a field `a(y,v) + b(y,v) d/dv` embeds
//! as `a + b (-sv d/dcv + cv d/dsv)`, which preserves Lie brackets, so the
//! flag of `E = span{xi, eta - rho xi}` is polynomial-exact there.

use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::extremals::{FlagSpans, Rank2System};
use crate::flags::{self, BracketWords};
use crate::linalg;
use crate::vecfield::{Chart, CompiledField, PolyVectorField, Polynomial};

/// Finite-difference step for derivatives of `rho`.
const RHO_FD_STEP: f64 = 1e-5;

/// A certified growth-(2,3,5) model: a rank-2 frame on a 5-dimensional
/// chart whose derived flag at the base point is (2,3,5).
#[derive(Debug, Clone)]
pub struct CartanModel {
    chart: Chart,
    frame: [PolyVectorField; 2],
    base_point: Vec<BigRational>,
}

impl CartanModel {
    pub fn new(
        chart: Chart,
        eta1: PolyVectorField,
        eta2: PolyVectorField,
        base_point: Vec<BigRational>,
    ) -> Result<Self> {
        if chart.dim() != 5 {
            return Err(Error::DimensionMismatch {
                context: "growth-(2,3,5) model chart",
                expected: 5,
                got: chart.dim(),
            });
        }
        let frame = [eta1, eta2];
        if !flags::is_cartan(&frame, &base_point)? {
            return Err(Error::DegeneratePoint {
                msg: "frame does not have growth (2,3,5) at the base point".into(),
            });
        }
        Ok(CartanModel {
            chart,
            frame,
            base_point,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn frame(&self) -> &[PolyVectorField; 2] {
        &self.frame
    }

    pub fn base_point(&self) -> &[BigRational] {
        &self.base_point
    }

    pub fn base_point_f64(&self) -> Vec<f64> {
        self.base_point
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN))
            .collect()
    }
}

/// The prolonged chart `(y, v)` with evaluable frame fields and exact
/// bracket caches.
#[derive(Debug, Clone)]
pub struct ProlongedChart {
    model: CartanModel,
    eta: [CompiledField; 2],
    /// `[eta1, eta2]`.
    x3: CompiledField,
    /// `w[i] = [eta_i, [eta1, eta2]]`.
    w: [CompiledField; 2],
    /// `ww[i][j] = [eta_j, [eta_i, [eta1, eta2]]]`.
    ww: [[CompiledField; 2]; 2],
    /// The frame `{xi, eta - rho xi}` on the trig-extension chart.
    trig_frame: Vec<PolyVectorField>,
    trig_chart: Chart,
}

/// Build the prolonged chart; fails when the characteristic construction is
/// degenerate on the base fibre.
pub fn prolong(model: &CartanModel) -> Result<ProlongedChart> {
    let [e1, e2] = model.frame();
    let x3 = e1.lie_bracket(e2)?;
    let w1 = e1.lie_bracket(&x3)?;
    let w2 = e2.lie_bracket(&x3)?;
    let ww = [
        [e1.lie_bracket(&w1)?, e2.lie_bracket(&w1)?],
        [e1.lie_bracket(&w2)?, e2.lie_bracket(&w2)?],
    ];
    // Trig extension: (y1..y5, cv, sv); d/dv embeds as -sv d/dcv + cv d/dsv.
    let trig_chart = model.chart().extend(vec!["cv", "sv"])?;
    let lift = |f: &PolyVectorField| f.remap_vars(&[0, 1, 2, 3, 4], 7);
    let cv = Polynomial::var(7, 5);
    let sv = Polynomial::var(7, 6);
    let mut xi_ext_components = vec![Polynomial::zero(7); 7];
    xi_ext_components[5] = sv.neg();
    xi_ext_components[6] = cv.clone();
    let xi_ext = PolyVectorField::on_chart(7, xi_ext_components)?;
    let eta0_ext = lift(e1).scale_poly(&cv).add(&lift(e2).scale_poly(&sv));
    let chart = ProlongedChart {
        model: model.clone(),
        eta: [CompiledField::compile(e1), CompiledField::compile(e2)],
        x3: CompiledField::compile(&x3),
        w: [CompiledField::compile(&w1), CompiledField::compile(&w2)],
        ww: [
            [
                CompiledField::compile(&ww[0][0]),
                CompiledField::compile(&ww[0][1]),
            ],
            [
                CompiledField::compile(&ww[1][0]),
                CompiledField::compile(&ww[1][1]),
            ],
        ],
        trig_frame: vec![xi_ext, eta0_ext],
        trig_chart,
    };
    // Reject models whose base fibre is characteristic-degenerate.
    let y0 = model.base_point_f64();
    for k in 0..8 {
        let v = k as f64 * std::f64::consts::PI / 8.0;
        chart
            .characteristic_covector(&y0, v)
            .map_err(|_| Error::NotAGenericPoint {
                msg: format!("characteristic covector undefined at the base point, v = {v}"),
            })?;
    }
    Ok(chart)
}

impl ProlongedChart {
    pub fn model(&self) -> &CartanModel {
        &self.model
    }

    pub fn trig_chart(&self) -> &Chart {
        &self.trig_chart
    }

    /// The frame `{xi, eta - rho xi}` on the trig-extension chart. It spans
    /// the same distribution E as `{xi, eta}` (the fibre term of `eta` is a
    /// multiple of `xi`), with polynomial components.
    pub fn trig_frame(&self) -> &[PolyVectorField] {
        &self.trig_frame
    }

    /// Map a Z-point `(y, v)` to the trig-extension chart.
    pub fn to_trig_point(&self, z: &[f64]) -> Vec<f64> {
        let mut p = z[..5].to_vec();
        p.push(z[5].cos());
        p.push(z[5].sin());
        p
    }

    /// The characteristic covector `p(y, v)`: the unit element of the
    /// second-stage annihilator at `y` with `cos(v) h1 + sin(v) h2 = 0`,
    /// signed so that the characteristic control `(h2, -h1)` points along
    /// `+(cos v, sin v)`.
    pub fn characteristic_covector(&self, y: &[f64], v: f64) -> Result<Vec<f64>> {
        let rows = vec![self.eta[0].eval(y), self.eta[1].eval(y), self.x3.eval(y)];
        let ann = linalg::nullspace_elim(&rows, 5, 1e-10);
        if ann.len() != 2 {
            return Err(Error::DegeneratePoint {
                msg: format!("second-stage annihilator has dimension {}", ann.len()),
            });
        }
        let w1 = self.w[0].eval(y);
        let w2 = self.w[1].eval(y);
        let (c, s) = (v.cos(), v.sin());
        // One linear condition on the coefficients of p = c1 a1 + c2 a2.
        let m: Vec<f64> = ann
            .iter()
            .map(|a| c * linalg::dot(a, &w1) + s * linalg::dot(a, &w2))
            .collect();
        let coeff = [-m[1], m[0]];
        let nrm = (coeff[0] * coeff[0] + coeff[1] * coeff[1]).sqrt();
        if nrm < 1e-12 {
            return Err(Error::CharacteristicDegenerate { t: 0.0 });
        }
        let mut p = vec![0.0; 5];
        for j in 0..5 {
            p[j] = (coeff[0] * ann[0][j] + coeff[1] * ann[1][j]) / nrm;
        }
        let pn = linalg::norm(&p);
        if pn < 1e-12 {
            return Err(Error::CharacteristicDegenerate { t: 0.0 });
        }
        for x in p.iter_mut() {
            *x /= pn;
        }
        // Fix the sign: (h2, -h1) . (cos v, sin v) > 0.
        let h1 = linalg::dot(&p, &w1);
        let h2 = linalg::dot(&p, &w2);
        if h2 * c - h1 * s < 0.0 {
            for x in p.iter_mut() {
                *x = -*x;
            }
        }
        Ok(p)
    }

    /// The fibre-angle velocity `rho(y, v)` along the abnormal extremal
    /// through `y` with direction `(cos v, sin v)`.
    pub fn rho(&self, y: &[f64], v: f64) -> Result<f64> {
        let p = self.characteristic_covector(y, v)?;
        let h1 = linalg::dot(&p, &self.w[0].eval(y));
        let h2 = linalg::dot(&p, &self.w[1].eval(y));
        let (c, s) = (v.cos(), v.sin());
        let hd = |i: usize| -> f64 {
            c * linalg::dot(&p, &self.ww[i][0].eval(y))
                + s * linalg::dot(&p, &self.ww[i][1].eval(y))
        };
        let h1d = hd(0);
        let h2d = hd(1);
        let denom = h1 * h1 + h2 * h2;
        if denom < 1e-24 {
            return Err(Error::CharacteristicDegenerate { t: 0.0 });
        }
        Ok((h1 * h2d - h1d * h2) / denom)
    }

    /// `xi = d/dv` at a Z-point, as a 6-vector.
    pub fn xi_vector(&self) -> Vec<f64> {
        let mut v = vec![0.0; 6];
        v[5] = 1.0;
        v
    }

    /// `eta(y, v) = cos(v) eta1 + sin(v) eta2 + rho d/dv` as a 6-vector.
    pub fn eta_vector(&self, z: &[f64]) -> Result<Vec<f64>> {
        let (y, v) = (&z[..5], z[5]);
        let (c, s) = (v.cos(), v.sin());
        let e1 = self.eta[0].eval(y);
        let e2 = self.eta[1].eval(y);
        let mut out = vec![0.0; 6];
        for k in 0..5 {
            out[k] = c * e1[k] + s * e2[k];
        }
        out[5] = self.rho(y, v)?;
        Ok(out)
    }

    /// First derivatives of `rho` at `(y, v)` by central differences:
    /// `(drho/dy_1..5, drho/dv)`.
    fn rho_gradient(&self, y: &[f64], v: f64) -> Result<Vec<f64>> {
        let h = RHO_FD_STEP;
        let mut grad = vec![0.0; 6];
        let mut yy = y.to_vec();
        for j in 0..5 {
            yy[j] = y[j] + h;
            let up = self.rho(&yy, v)?;
            yy[j] = y[j] - h;
            let dn = self.rho(&yy, v)?;
            yy[j] = y[j];
            grad[j] = (up - dn) / (2.0 * h);
        }
        grad[5] = (self.rho(y, v + h)? - self.rho(y, v - h)?) / (2.0 * h);
        Ok(grad)
    }

    /// Second v-derivative of `rho` by the three-point stencil.
    fn rho_vv(&self, y: &[f64], v: f64) -> Result<f64> {
        let h = RHO_FD_STEP;
        Ok((self.rho(y, v + h)? - 2.0 * self.rho(y, v)? + self.rho(y, v - h)?) / (h * h))
    }

    /// Mixed derivatives `d(drho/dv)/dy_j` and `d(drho/dv)/dv` by stencils.
    fn rho_v_gradient(&self, y: &[f64], v: f64) -> Result<Vec<f64>> {
        let h = RHO_FD_STEP;
        let rv = |y: &[f64], v: f64| -> Result<f64> {
            Ok((self.rho(y, v + h)? - self.rho(y, v - h)?) / (2.0 * h))
        };
        let mut grad = vec![0.0; 6];
        let mut yy = y.to_vec();
        for j in 0..5 {
            yy[j] = y[j] + h;
            let up = rv(&yy, v)?;
            yy[j] = y[j] - h;
            let dn = rv(&yy, v)?;
            yy[j] = y[j];
            grad[j] = (up - dn) / (2.0 * h);
        }
        grad[5] = self.rho_vv(y, v)?;
        Ok(grad)
    }

    /// Advance `z` along the flow of `eta` for time `t` (RK4, substeps of
    /// size at most `step`).
    pub fn flow_eta(&self, z: &mut [f64], t: f64, step: f64) -> Result<()> {
        if t == 0.0 {
            return Ok(());
        }
        let steps = (t.abs() / step).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        for s in 0..steps {
            let k1 = self.eta_vector(z)?;
            let z2: Vec<f64> = (0..6).map(|i| z[i] + 0.5 * h * k1[i]).collect();
            let k2 = self.eta_vector(&z2)?;
            let z3: Vec<f64> = (0..6).map(|i| z[i] + 0.5 * h * k2[i]).collect();
            let k3 = self.eta_vector(&z3)?;
            let z4: Vec<f64> = (0..6).map(|i| z[i] + h * k3[i]).collect();
            let k4 = self.eta_vector(&z4)?;
            for i in 0..6 {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if z.iter().any(|x| !x.is_finite()) {
                return Err(Error::IntegrationDiverged {
                    t_last: (s + 1) as f64 * h,
                });
            }
        }
        Ok(())
    }

    /// Integral curve of `eta` from `z0`, sampled on the RK4 grid.
    /// Its projection to Y is an abnormal extremal of the base
    /// distribution; `v` is continued continuously (no mod-pi wrap).
    pub fn k_leaf(&self, z0: &[f64], t_final: f64, step: f64) -> Result<Vec<Vec<f64>>> {
        let steps = (t_final.abs() / step).ceil().max(1.0) as usize;
        let h = t_final / steps as f64;
        let mut z = z0.to_vec();
        let mut out = Vec::with_capacity(steps + 1);
        out.push(z.clone());
        for _ in 0..steps {
            self.flow_eta(&mut z, h, step)?;
            out.push(z.clone());
        }
        Ok(out)
    }

    /// Growth vector of `{xi, eta}` on Z at `(y, v)`, computed through the
    /// trig-extension frame (floating rank at relative threshold `tol`).
    /// Rank 6 is full on Z, so the reported sequence is truncated there
    /// (the extension chart has one extra ambient dimension).
    pub fn growth_on_z(&self, z: &[f64], maxdepth: usize, tol: f64) -> Result<Vec<usize>> {
        let p = self.to_trig_point(z);
        let mut growth = flags::derived_flag_f64(&self.trig_frame, &p, maxdepth, tol)?.growth;
        if let Some(first_full) = growth.iter().position(|&r| r == 6) {
            growth.truncate(first_full + 1);
        }
        Ok(growth)
    }

    /// Spanning-vector provider of `E^(2)` and `E^(3)` on Z for abnormal
    /// classification.
    pub fn flag_spans(&self) -> Result<EFlagSpans> {
        let mut words = BracketWords::new(&self.trig_frame)?;
        words.extend_to(3)?;
        let compile_up_to = |len: usize| -> Vec<CompiledField> {
            words
                .up_to(len)
                .map(|(_, f)| CompiledField::compile(f))
                .collect()
        };
        Ok(EFlagSpans {
            depth2: compile_up_to(2),
            depth3: compile_up_to(3),
        })
    }
}

/// Spanning fields of `E^(2)` and `E^(3)` on Z, evaluated through the trig
/// extension and mapped back to `(y, v)` tangent vectors.
pub struct EFlagSpans {
    depth2: Vec<CompiledField>,
    depth3: Vec<CompiledField>,
}

impl EFlagSpans {
    fn eval_at(&self, fields: &[CompiledField], z: &[f64]) -> Vec<Vec<f64>> {
        let (c, s) = (z[5].cos(), z[5].sin());
        let mut p = z[..5].to_vec();
        p.push(c);
        p.push(s);
        fields
            .iter()
            .map(|f| {
                let v7 = f.eval(&p);
                // Tangent of the cylinder: v-component = cv * a_sv - sv * a_cv.
                let mut v6 = v7[..5].to_vec();
                v6.push(c * v7[6] - s * v7[5]);
                v6
            })
            .collect()
    }
}

impl FlagSpans for EFlagSpans {
    fn span2(&self, z: &[f64]) -> Vec<Vec<f64>> {
        self.eval_at(&self.depth2, z)
    }

    fn span3(&self, z: &[f64]) -> Vec<Vec<f64>> {
        self.eval_at(&self.depth3, z)
    }
}

/// The rank-2 frame `{xi, eta}` on Z as an abnormal-integrable system.
/// Polynomial parts are exact; derivatives of `rho` come from central
/// differences.
pub struct ProlongedRank2<'a> {
    chart: &'a ProlongedChart,
}

impl<'a> ProlongedRank2<'a> {
    pub fn new(chart: &'a ProlongedChart) -> Self {
        ProlongedRank2 { chart }
    }

    fn base_frame_at(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.chart.eta[0].eval(y), self.chart.eta[1].eval(y))
    }
}

impl Rank2System for ProlongedRank2<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn field(&self, i: usize, z: &[f64]) -> Vec<f64> {
        if i == 0 {
            self.chart.xi_vector()
        } else {
            self.chart.eta_vector(z).expect("eta evaluable")
        }
    }

    fn field_jacobian(&self, i: usize, z: &[f64]) -> Vec<Vec<f64>> {
        if i == 0 {
            return vec![vec![0.0; 6]; 6];
        }
        let (y, v) = (&z[..5], z[5]);
        let (c, s) = (v.cos(), v.sin());
        let j1 = self.chart.eta[0].jacobian(y);
        let j2 = self.chart.eta[1].jacobian(y);
        let (e1, e2) = self.base_frame_at(y);
        let mut jac = vec![vec![0.0; 6]; 6];
        for k in 0..5 {
            for j in 0..5 {
                jac[k][j] = c * j1[k][j] + s * j2[k][j];
            }
            jac[k][5] = -s * e1[k] + c * e2[k];
        }
        let grad = self.chart.rho_gradient(y, v).expect("rho differentiable");
        jac[5].copy_from_slice(&grad);
        jac
    }

    fn bracket(&self, z: &[f64]) -> Vec<f64> {
        // [xi, eta] = d(eta)/dv.
        let (y, v) = (&z[..5], z[5]);
        let (c, s) = (v.cos(), v.sin());
        let (e1, e2) = self.base_frame_at(y);
        let mut out = vec![0.0; 6];
        for k in 0..5 {
            out[k] = -s * e1[k] + c * e2[k];
        }
        out[5] = self.chart.rho_gradient(y, v).expect("rho differentiable")[5];
        out
    }

    fn double_bracket(&self, i: usize, z: &[f64]) -> Vec<f64> {
        let (y, v) = (&z[..5], z[5]);
        let (c, s) = (v.cos(), v.sin());
        let (e1, e2) = self.base_frame_at(y);
        if i == 0 {
            // [xi, [xi, eta]] = d^2(eta)/dv^2 = (-(cos v eta1 + sin v eta2), rho_vv).
            let mut out = vec![0.0; 6];
            for k in 0..5 {
                out[k] = -(c * e1[k] + s * e2[k]);
            }
            out[5] = self.chart.rho_vv(y, v).expect("rho differentiable");
            out
        } else {
            // [eta, [xi, eta]] with eta = (a, rho), [xi, eta] = (a', rho_v):
            // y-part  = [eta1,eta2](y) + rho * (-a) - rho_v * a'
            // v-part  = <a, grad_y rho_v> + rho rho_vv - <a', grad_y rho> - rho_v^2.
            let a: Vec<f64> = (0..5).map(|k| c * e1[k] + s * e2[k]).collect();
            let a_prime: Vec<f64> = (0..5).map(|k| -s * e1[k] + c * e2[k]).collect();
            let x3 = self.chart.x3.eval(y);
            let rho = self.chart.rho(y, v).expect("rho evaluable");
            let grad = self.chart.rho_gradient(y, v).expect("rho differentiable");
            let grad_v = self.chart.rho_v_gradient(y, v).expect("rho differentiable");
            let rho_v = grad[5];
            let rho_vv = grad_v[5];
            let mut out = vec![0.0; 6];
            for k in 0..5 {
                out[k] = x3[k] - rho * a[k] - rho_v * a_prime[k];
            }
            out[5] = linalg::dot(&a, &grad_v[..5]) + rho * rho_vv
                - linalg::dot(&a_prime, &grad[..5])
                - rho_v * grad[5];
            out
        }
    }
}
