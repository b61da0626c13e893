//! Multivariate polynomials with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A polynomial in `nvars` variables, stored as a map from exponent
/// multi-indices to nonzero rational coefficients.
///
/// Invariants: every stored coefficient is nonzero and every multi-index has
/// length exactly `nvars`. The map ordering makes iteration (and hence
/// display and hashing of derived data) deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Polynomial::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn constant_i64(nvars: usize, c: i64) -> Self {
        Self::constant(nvars, BigRational::from_integer(c.into()))
    }

    /// The monomial `x_i` (zero-based index).
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index out of range");
        let mut exp = vec![0; nvars];
        exp[i] = 1;
        let mut p = Polynomial::zero(nvars);
        p.terms.insert(exp, BigRational::one());
        p
    }

    pub fn from_terms(nvars: usize, terms: Vec<(Vec<u32>, BigRational)>) -> Result<Self> {
        let mut p = Polynomial::zero(nvars);
        for (exp, c) in terms {
            if exp.len() != nvars {
                return Err(Error::DimensionMismatch {
                    context: "polynomial term",
                    expected: nvars,
                    got: exp.len(),
                });
            }
            p.add_term(exp, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &BigRational)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    fn add_term(&mut self, exp: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exp) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Polynomial {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exp: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exp, ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, s: &BigRational) -> Polynomial {
        if s.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = &*c * s;
        }
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, BigRational::one());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Partial derivative with respect to variable `i`.
    pub fn partial(&self, i: usize) -> Polynomial {
        assert!(i < self.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut exp = e.clone();
            exp[i] -= 1;
            let factor = BigRational::from_integer(e[i].into());
            out.add_term(exp, c * factor);
        }
        out
    }

    pub fn eval_rational(&self, x: &[BigRational]) -> Result<BigRational> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                context: "poly_eval",
                expected: self.nvars,
                got: x.len(),
            });
        }
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &ei) in x.iter().zip(e) {
                for _ in 0..ei {
                    t = t * xi;
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                context: "poly_eval",
                expected: self.nvars,
                got: x.len(),
            });
        }
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (xi, &ei) in x.iter().zip(e) {
                if ei > 0 {
                    t *= xi.powi(ei as i32);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Rewrite onto a chart with `new_nvars` variables, sending old variable
    /// `i` to new variable `perm[i]`.
    pub fn remap_vars(&self, perm: &[usize], new_nvars: usize) -> Polynomial {
        assert_eq!(perm.len(), self.nvars);
        let mut out = Polynomial::zero(new_nvars);
        for (e, c) in &self.terms {
            let mut exp = vec![0u32; new_nvars];
            for (i, &ei) in e.iter().enumerate() {
                exp[perm[i]] += ei;
            }
            out.add_term(exp, c.clone());
        }
        out
    }

    /// Substitute polynomials for every variable (composition).
    pub fn substitute(&self, subs: &[Polynomial]) -> Polynomial {
        assert_eq!(subs.len(), self.nvars);
        let target_nvars = subs.first().map(|p| p.nvars).unwrap_or(0);
        let mut out = Polynomial::zero(target_nvars);
        for (e, c) in &self.terms {
            let mut t = Polynomial::constant(target_nvars, c.clone());
            for (i, &ei) in e.iter().enumerate() {
                if ei > 0 {
                    t = t.mul(&subs[i].pow(ei));
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Render as an expression string in the given variable names, parseable
    /// by the expression parser.
    pub fn display_with(&self, names: &[String]) -> String {
        assert_eq!(names.len(), self.nvars);
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        // Highest-degree terms first reads more naturally.
        let mut entries: Vec<_> = self.terms.iter().collect();
        entries.sort_by(|a, b| {
            let da: u32 = a.0.iter().sum();
            let db: u32 = b.0.iter().sum();
            db.cmp(&da).then(b.0.cmp(a.0))
        });
        for (k, (e, c)) in entries.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let mut factors: Vec<String> = Vec::new();
            let is_const = e.iter().all(|&x| x == 0);
            if !mag.is_one() || is_const {
                if mag.is_integer() {
                    factors.push(format!("{}", mag.numer()));
                } else {
                    factors.push(format!("({}/{})", mag.numer(), mag.denom()));
                }
            }
            for (i, &ei) in e.iter().enumerate() {
                if ei == 1 {
                    factors.push(names[i].clone());
                } else if ei > 1 {
                    factors.push(format!("{}^{}", names[i], ei));
                }
            }
            let _ = write!(out, "{}", factors.join("*"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn eval_square() {
        // p = x1^2 at (3) -> 9
        let p = Polynomial::var(1, 0).pow(2);
        assert_eq!(p.eval_rational(&[q(3, 1)]).unwrap(), q(9, 1));
    }

    #[test]
    fn eval_empty_is_zero() {
        let p = Polynomial::zero(4);
        assert_eq!(
            p.eval_rational(&[q(1, 1), q(2, 1), q(3, 1), q(4, 1)])
                .unwrap(),
            q(0, 1)
        );
        assert_eq!(p.eval_f64(&[0.5, 0.5, 0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn eval_mixed_terms() {
        // p = x1*x2 + (1/2)*x1^2 at (1,2) -> 5/2
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let p = x1.mul(&x2).add(&x1.pow(2).scale(&q(1, 2)));
        assert_eq!(p.eval_rational(&[q(1, 1), q(2, 1)]).unwrap(), q(5, 2));
    }

    #[test]
    fn eval_dimension_mismatch() {
        let p = Polynomial::var(2, 0);
        assert!(p.eval_rational(&[q(1, 1)]).is_err());
    }

    #[test]
    fn partial_derivative() {
        // d/dx1 (x1^2 x2) = 2 x1 x2
        let p = Polynomial::var(2, 0).pow(2).mul(&Polynomial::var(2, 1));
        let d = p.partial(0);
        assert_eq!(d.eval_rational(&[q(3, 1), q(5, 1)]).unwrap(), q(30, 1));
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let p = Polynomial::var(3, 1);
        let s = p.sub(&p);
        assert!(s.is_zero());
        assert_eq!(s.terms.len(), 0);
    }

    #[test]
    fn display_is_readable() {
        let names: Vec<String> = vec!["x1".into(), "x2".into()];
        let x1 = Polynomial::var(2, 0);
        let x2 = Polynomial::var(2, 1);
        let p = x1
            .pow(2)
            .scale(&q(1, 2))
            .add(&x1.mul(&x2))
            .sub(&Polynomial::constant(2, q(3, 1)));
        assert_eq!(p.display_with(&names), "(1/2)*x1^2 + x1*x2 - 3");
    }
}
