//! Polynomial vector fields, covectors and the coordinate-projection
//! pushforward.

use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// A vector field on an n-dimensional chart with polynomial components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyVectorField {
    nvars: usize,
    components: Vec<Polynomial>,
}

impl PolyVectorField {
    pub fn new(components: Vec<Polynomial>) -> Result<Self> {
        let nvars = components.len();
        for c in &components {
            if c.nvars() != nvars {
                return Err(Error::DimensionMismatch {
                    context: "vector field component",
                    expected: nvars,
                    got: c.nvars(),
                });
            }
        }
        Ok(PolyVectorField { nvars, components })
    }

    /// Field with the given components on a chart of `nvars` variables
    /// (components may be fewer polynomials padded with zeros? no — must
    /// match; use this when components live on a wider chart than their count).
    pub fn on_chart(nvars: usize, components: Vec<Polynomial>) -> Result<Self> {
        for c in &components {
            if c.nvars() != nvars {
                return Err(Error::DimensionMismatch {
                    context: "vector field component",
                    expected: nvars,
                    got: c.nvars(),
                });
            }
        }
        Ok(PolyVectorField { nvars, components })
    }

    /// The coordinate field ∂/∂x_i.
    pub fn coordinate(nvars: usize, i: usize) -> Self {
        let mut components = vec![Polynomial::zero(nvars); nvars];
        components[i] = Polynomial::constant_i64(nvars, 1);
        PolyVectorField { nvars, components }
    }

    pub fn zero(nvars: usize) -> Self {
        PolyVectorField {
            nvars,
            components: vec![Polynomial::zero(nvars); nvars],
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Polynomial {
        &self.components[i]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &PolyVectorField) -> PolyVectorField {
        debug_assert_eq!(self.nvars, other.nvars);
        PolyVectorField {
            nvars: self.nvars,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: &BigRational) -> PolyVectorField {
        PolyVectorField {
            nvars: self.nvars,
            components: self.components.iter().map(|c| c.scale(s)).collect(),
        }
    }

    /// Multiply every component by a polynomial.
    pub fn scale_poly(&self, f: &Polynomial) -> PolyVectorField {
        PolyVectorField {
            nvars: self.nvars,
            components: self.components.iter().map(|c| c.mul(f)).collect(),
        }
    }

    /// Lie bracket `[X, Y] = X(Y) - Y(X)` by exact differentiation:
    /// component k of the result is `sum_j X_j dY_k/dx_j - Y_j dX_k/dx_j`.
    pub fn lie_bracket(&self, other: &PolyVectorField) -> Result<PolyVectorField> {
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch {
                context: "lie_bracket",
                expected: self.nvars,
                got: other.nvars,
            });
        }
        let n = self.nvars;
        let mut components = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = Polynomial::zero(n);
            for j in 0..n {
                let xy = self.components[j].mul(&other.components[k].partial(j));
                let yx = other.components[j].mul(&self.components[k].partial(j));
                acc = acc.add(&xy).sub(&yx);
            }
            components.push(acc);
        }
        Ok(PolyVectorField {
            nvars: n,
            components,
        })
    }

    pub fn eval_rational(&self, x: &[BigRational]) -> Result<Vec<BigRational>> {
        self.components.iter().map(|c| c.eval_rational(x)).collect()
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval_f64(x)).collect()
    }

    /// Jacobian matrix at a point: `J[k][j] = dX_k/dx_j (x)`.
    pub fn jacobian_f64(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.nvars;
        let mut rows = Vec::with_capacity(n);
        for k in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(self.components[k].partial(j).eval_f64(x)?);
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Rewrite onto a permuted/extended chart; see [`Polynomial::remap_vars`].
    /// `perm[i]` is the new index of old variable `i`; components are placed
    /// at their permuted slots, missing slots are zero.
    pub fn remap_vars(&self, perm: &[usize], new_nvars: usize) -> PolyVectorField {
        let mut components = vec![Polynomial::zero(new_nvars); new_nvars];
        for (i, c) in self.components.iter().enumerate() {
            components[perm[i]] = c.remap_vars(perm, new_nvars);
        }
        PolyVectorField {
            nvars: new_nvars,
            components,
        }
    }
}

/// A covector `p` anchored at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
}

impl Covector {
    pub fn new(base: Vec<f64>, components: Vec<f64>) -> Result<Self> {
        if base.len() != components.len() {
            return Err(Error::DimensionMismatch {
                context: "covector",
                expected: base.len(),
                got: components.len(),
            });
        }
        Ok(Covector { base, components })
    }

    /// `<p, X(base)>`.
    pub fn pairing(&self, field: &PolyVectorField) -> Result<f64> {
        if field.nvars() != self.base.len() {
            return Err(Error::DimensionMismatch {
                context: "pairing",
                expected: self.base.len(),
                got: field.nvars(),
            });
        }
        let v = field.eval_f64(&self.base)?;
        Ok(self.components.iter().zip(&v).map(|(p, x)| p * x).sum())
    }
}

/// A vector field of a quotient chart: the retained components of a field,
/// with the dropped coordinates re-labeled as formal control parameters.
///
/// The underlying polynomials live on the reordered chart
/// `(kept variables..., dropped variables...)`; callers evaluate at
/// `(state, params)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedField {
    /// Components of the retained coordinates on the reordered chart.
    pub field: PolyVectorField,
    /// Number of retained (state) variables.
    pub state_dim: usize,
    /// Indices (in the original chart) of the dropped variables, in order.
    pub params: Vec<usize>,
}

/// Push a field forward along the coordinate projection keeping `keep`.
///
/// Components of dropped coordinates are discarded; retained components are
/// rewritten on the chart `(kept..., dropped...)` so the dropped coordinates
/// act as parameters. Always well-defined.
pub fn pushforward_projection(field: &PolyVectorField, keep: &[usize]) -> ProjectedField {
    let n = field.nvars();
    let kept: Vec<usize> = keep.to_vec();
    let dropped: Vec<usize> = (0..n).filter(|i| !kept.contains(i)).collect();
    // perm[old index] = new index in (kept..., dropped...)
    let mut perm = vec![0usize; n];
    for (new_i, &old_i) in kept.iter().chain(dropped.iter()).enumerate() {
        perm[old_i] = new_i;
    }
    let remapped = field.remap_vars(&perm, n);
    // Truncate to retained components; parameters keep their polynomial slots.
    let mut components: Vec<Polynomial> = Vec::with_capacity(n);
    for i in 0..kept.len() {
        components.push(remapped.component(i).clone());
    }
    for _ in kept.len()..n {
        components.push(Polynomial::zero(n));
    }
    ProjectedField {
        field: PolyVectorField::on_chart(n, components).expect("chart widths agree"),
        state_dim: kept.len(),
        params: dropped,
    }
}

/// Compiled f64 form of a polynomial for hot evaluation loops.
#[derive(Debug, Clone)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(u16, u32)>)>,
}

impl CompiledPoly {
    pub fn compile(p: &Polynomial) -> Self {
        let terms = p
            .terms()
            .map(|(e, c)| {
                let coeff = c.to_f64().unwrap_or(f64::NAN);
                let powers: Vec<(u16, u32)> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &ei)| ei > 0)
                    .map(|(i, &ei)| (i as u16, ei))
                    .collect();
                (coeff, powers)
            })
            .collect();
        CompiledPoly { terms }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, powers) in &self.terms {
            let mut t = *c;
            for &(i, e) in powers {
                t *= x[i as usize].powi(e as i32);
            }
            acc += t;
        }
        acc
    }
}

/// A compiled vector field together with its compiled Jacobian entries.
#[derive(Debug, Clone)]
pub struct CompiledField {
    nvars: usize,
    components: Vec<CompiledPoly>,
    jacobian: Vec<Vec<CompiledPoly>>,
}

impl CompiledField {
    pub fn compile(field: &PolyVectorField) -> Self {
        let n = field.nvars();
        let components = field
            .components()
            .iter()
            .map(CompiledPoly::compile)
            .collect();
        let jacobian = field
            .components()
            .iter()
            .map(|c| {
                (0..n)
                    .map(|j| CompiledPoly::compile(&c.partial(j)))
                    .collect()
            })
            .collect();
        CompiledField {
            nvars: n,
            components,
            jacobian,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(x)).collect()
    }

    /// `J[k][j] = dX_k/dx_j (x)`.
    pub fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.jacobian
            .iter()
            .map(|row| row.iter().map(|p| p.eval(x)).collect())
            .collect()
    }
}
