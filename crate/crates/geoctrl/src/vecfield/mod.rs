//! Exact multivariate polynomial arithmetic and vector-field calculus.
//!
//! Coefficients are arbitrary-precision rationals so that Lie brackets,
//! derived flags and annihilators can be computed without floating-point
//! rank decisions. Evaluation is available both over the rationals and over
//! f64 (through [`CompiledField`] for hot loops).

mod field;
mod parse;
mod poly;

pub use field::{pushforward_projection, CompiledField, CompiledPoly, Covector, PolyVectorField};
pub use parse::parse_polynomial;
pub use poly::Polynomial;

use crate::error::{Error, Result};

/// A coordinate chart: an ordered list of distinct variable names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chart {
    names: Vec<String>,
}

impl Chart {
    pub fn new<S: Into<String>>(names: Vec<S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "chart",
                expected: 1,
                got: 0,
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(Error::Parse {
                    line: 0,
                    col: 0,
                    msg: format!("duplicate coordinate name `{n}`"),
                });
            }
        }
        Ok(Chart { names })
    }

    /// Standard chart x1..xn.
    pub fn standard(dim: usize) -> Self {
        Chart {
            names: (1..=dim).map(|i| format!("x{i}")).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// New chart with extra coordinates appended.
    pub fn extend<S: Into<String>>(&self, extra: Vec<S>) -> Result<Self> {
        let mut names = self.names.clone();
        names.extend(extra.into_iter().map(Into::into));
        Chart::new(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_rejects_duplicates() {
        assert!(Chart::new(vec!["x", "x"]).is_err());
        let c = Chart::standard(3);
        assert_eq!(c.names(), &["x1", "x2", "x3"]);
        assert_eq!(c.index_of("x2"), Some(1));
    }
}
