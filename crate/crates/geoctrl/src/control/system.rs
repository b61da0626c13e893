//! Control-system, signal and trajectory types; restriction and quotient.

use crate::error::{Error, Result};
use crate::vecfield::{Chart, CompiledField, PolyVectorField, Polynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemLabel {
    Base,
    Restriction,
    Quotient,
}

/// An axis-aligned open box in state space.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "box domain",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::PreconditionViolated {
                constraint: "box must be nonempty (lo < hi componentwise)".into(),
            });
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (lo, hi))| *xi > *lo && *xi < *hi)
    }

    /// Intersection with another box on the same chart.
    pub fn intersect(&self, other: &BoxDomain) -> Result<BoxDomain> {
        let lo: Vec<f64> = self
            .lo
            .iter()
            .zip(&other.lo)
            .map(|(a, b)| a.max(*b))
            .collect();
        let hi: Vec<f64> = self
            .hi
            .iter()
            .zip(&other.hi)
            .map(|(a, b)| a.min(*b))
            .collect();
        BoxDomain::new(lo, hi)
    }
}

/// A control system presented by a frame of polynomial vector fields.
///
/// The frame fields live on the extended chart `(state..., params...)`;
/// their parameter components are identically zero. `F(x, u, w) =
/// sum_i u_i X_i(x, w)` is linear in the frame coefficients `u`, while the
/// quotient parameters `w` enter the fields themselves.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    state_chart: Chart,
    full_chart: Chart,
    frame: Vec<PolyVectorField>,
    compiled: Vec<CompiledField>,
    param_names: Vec<String>,
    label: SystemLabel,
    domain: Option<BoxDomain>,
}

impl ControlSystem {
    /// A base system: frame fields on the state chart, no parameters.
    pub fn new(chart: Chart, frame: Vec<PolyVectorField>) -> Result<Self> {
        if frame.is_empty() {
            return Err(Error::PreconditionViolated {
                constraint: "control_dim >= 1".into(),
            });
        }
        let n = chart.dim();
        for f in &frame {
            if f.nvars() != n {
                return Err(Error::DimensionMismatch {
                    context: "control system frame",
                    expected: n,
                    got: f.nvars(),
                });
            }
        }
        let compiled = frame.iter().map(CompiledField::compile).collect();
        Ok(ControlSystem {
            state_chart: chart.clone(),
            full_chart: chart,
            frame,
            compiled,
            param_names: vec![],
            label: SystemLabel::Base,
            domain: None,
        })
    }

    /// A system whose frame fields live on `(state..., params...)`.
    pub fn with_params(
        state_chart: Chart,
        param_names: Vec<String>,
        frame: Vec<PolyVectorField>,
        label: SystemLabel,
    ) -> Result<Self> {
        let full_chart = state_chart.extend(param_names.clone())?;
        let n = full_chart.dim();
        for f in &frame {
            if f.nvars() != n {
                return Err(Error::DimensionMismatch {
                    context: "control system frame",
                    expected: n,
                    got: f.nvars(),
                });
            }
        }
        let compiled = frame.iter().map(CompiledField::compile).collect();
        Ok(ControlSystem {
            state_chart,
            full_chart,
            frame,
            compiled,
            param_names,
            label,
            domain: None,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_chart.dim()
    }

    pub fn frame_dim(&self) -> usize {
        self.frame.len()
    }

    pub fn param_count(&self) -> usize {
        self.param_names.len()
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    /// Frame coefficients plus quotient parameters.
    pub fn control_dim(&self) -> usize {
        self.frame.len() + self.param_names.len()
    }

    pub fn chart(&self) -> &Chart {
        &self.state_chart
    }

    pub fn full_chart(&self) -> &Chart {
        &self.full_chart
    }

    pub fn frame(&self) -> &[PolyVectorField] {
        &self.frame
    }

    pub fn compiled_frame(&self) -> &[CompiledField] {
        &self.compiled
    }

    pub fn label(&self) -> SystemLabel {
        self.label
    }

    pub fn domain(&self) -> Option<&BoxDomain> {
        self.domain.as_ref()
    }

    /// Split a signal sample into frame coefficients and parameter values.
    pub fn split_control<'a>(&self, u: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        u.split_at(self.frame.len())
    }

    /// `F(x, u) = sum_i u_i X_i(x, w)` written into `out` (state_dim).
    pub fn velocity_into(&self, x: &[f64], control: &[f64], aug: &mut Vec<f64>, out: &mut [f64]) {
        let n = self.state_dim();
        let (coeffs, params) = self.split_control(control);
        aug.clear();
        aug.extend_from_slice(x);
        aug.extend_from_slice(params);
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; self.full_chart.dim()];
        for (ui, field) in coeffs.iter().zip(&self.compiled) {
            if *ui == 0.0 {
                continue;
            }
            field.eval_into(aug, &mut tmp);
            for k in 0..n {
                out[k] += ui * tmp[k];
            }
        }
    }

    /// Convenience allocation form of [`Self::velocity_into`].
    pub fn velocity(&self, x: &[f64], control: &[f64]) -> Vec<f64> {
        let mut aug = Vec::new();
        let mut out = vec![0.0; self.state_dim()];
        self.velocity_into(x, control, &mut aug, &mut out);
        out
    }

    /// State Jacobian `A[k][j] = dF_k/dx_j` and control Jacobian
    /// `B[k][i]` (i over frame coefficients then parameters) at `(x, u)`.
    pub fn linearization(&self, x: &[f64], control: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.state_dim();
        let q = self.param_count();
        let r = self.frame.len();
        let (coeffs, params) = self.split_control(control);
        let mut aug = Vec::with_capacity(n + q);
        aug.extend_from_slice(x);
        aug.extend_from_slice(params);
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![vec![0.0; r + q]; n];
        for (i, field) in self.compiled.iter().enumerate() {
            let val = field.eval(&aug);
            let jac = field.jacobian(&aug);
            for k in 0..n {
                b[k][i] = val[k];
                for j in 0..n {
                    a[k][j] += coeffs[i] * jac[k][j];
                }
                for j in 0..q {
                    b[k][r + j] += coeffs[i] * jac[k][n + j];
                }
            }
        }
        (a, b)
    }
}

/// A piecewise-constant control on a uniform grid of `N` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    pub t0: f64,
    pub t1: f64,
    pub samples: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn new(t0: f64, t1: f64, samples: Vec<Vec<f64>>) -> Result<Self> {
        if !(t0 < t1) {
            return Err(Error::PreconditionViolated {
                constraint: "t0 < t1".into(),
            });
        }
        if samples.is_empty() {
            return Err(Error::PreconditionViolated {
                constraint: "N >= 1 control intervals".into(),
            });
        }
        let d = samples[0].len();
        if samples.iter().any(|s| s.len() != d) {
            return Err(Error::DimensionMismatch {
                context: "control samples",
                expected: d,
                got: samples.iter().map(|s| s.len()).find(|&l| l != d).unwrap(),
            });
        }
        Ok(ControlSignal { t0, t1, samples })
    }

    /// Constant control over `[t0, t1]`.
    pub fn constant(t0: f64, t1: f64, value: Vec<f64>) -> Result<Self> {
        Self::new(t0, t1, vec![value])
    }

    pub fn intervals(&self) -> usize {
        self.samples.len()
    }

    pub fn control_dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn interval_width(&self) -> f64 {
        (self.t1 - self.t0) / self.samples.len() as f64
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        let k = (((t - self.t0) / self.interval_width()).floor() as isize)
            .clamp(0, self.samples.len() as isize - 1) as usize;
        &self.samples[k]
    }
}

/// An integrated trajectory with its generating signal.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub signal: ControlSignal,
}

impl Trajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.states.last().expect("nonempty trajectory")
    }
}

/// Restriction of a system to an open box; integration errors out when the
/// state leaves the box.
pub fn restrict(sys: &ControlSystem, domain: BoxDomain) -> Result<ControlSystem> {
    if domain.lo.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "restriction box",
            expected: sys.state_dim(),
            got: domain.lo.len(),
        });
    }
    let mut out = sys.clone();
    out.domain = Some(match &sys.domain {
        Some(existing) => existing.intersect(&domain)?,
        None => domain,
    });
    out.label = SystemLabel::Restriction;
    Ok(out)
}

/// Quotient by the coordinate projection keeping the `keep` state indices.
///
/// Frame fields are pushed forward; dropped coordinates join the control
/// parameters (after the existing ones of `sys`).
pub fn quotient(sys: &ControlSystem, keep: &[usize]) -> Result<ControlSystem> {
    let n = sys.state_dim();
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() || keep.len() >= n || keep.iter().any(|&i| i >= n) {
        return Err(Error::BadKeepSet);
    }
    let dropped: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let q_old = sys.param_count();
    let total = n + q_old;
    // New variable order: kept states, dropped states, old params.
    let mut perm = vec![0usize; total];
    for (new_i, &old_i) in keep.iter().chain(dropped.iter()).enumerate() {
        perm[old_i] = new_i;
    }
    for j in 0..q_old {
        perm[n + j] = n + j;
    }
    let new_state_dim = keep.len();
    let frame: Vec<PolyVectorField> = sys
        .frame
        .iter()
        .map(|f| {
            let remapped = f.remap_vars(&perm, total);
            // Zero out the components of dropped coordinates and params.
            let components: Vec<Polynomial> = (0..total)
                .map(|i| {
                    if i < new_state_dim {
                        remapped.component(i).clone()
                    } else {
                        Polynomial::zero(total)
                    }
                })
                .collect();
            PolyVectorField::on_chart(total, components).expect("widths agree")
        })
        .collect();
    let state_names: Vec<String> = keep
        .iter()
        .map(|&i| sys.state_chart.names()[i].clone())
        .collect();
    let mut param_names: Vec<String> = dropped
        .iter()
        .map(|&i| sys.state_chart.names()[i].clone())
        .collect();
    param_names.extend(sys.param_names.iter().cloned());
    ControlSystem::with_params(
        Chart::new(state_names)?,
        param_names,
        frame,
        SystemLabel::Quotient,
    )
}
