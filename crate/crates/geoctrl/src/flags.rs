//! Derived flags of distributions: growth vectors, bracket-generation tests,
//! growth-(2,3,5) detection and annihilator bases.
//!
//! The flag of a frame `X_1..X_r` at a point is computed from the free
//! bracket words of the frame: stage k spans the values of all words of
//! length <= k. Words are kept in length-lexicographic order so spanning
//! sets and annihilator bases are reproducible. Ranks are exact over the
//! rationals, or SVD-based with a relative threshold in floating mode.

use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::linalg;
use crate::vecfield::{Covector, PolyVectorField};

/// Default relative singular-value threshold for floating-point ranks.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Bracket words of a frame, generated lazily depth by depth.
///
/// A word `[i, j, k, ...]` denotes the left-nested bracket
/// `[X_i, [X_j, [X_k, ...]]]`; length-1 words are the frame fields.
#[derive(Debug, Clone)]
pub struct BracketWords {
    frame: Vec<PolyVectorField>,
    /// words[d] = words of length d+1, each with its symbolic field.
    levels: Vec<Vec<(Vec<usize>, PolyVectorField)>>,
}

impl BracketWords {
    pub fn new(frame: &[PolyVectorField]) -> Result<Self> {
        if frame.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "frame",
                expected: 1,
                got: 0,
            });
        }
        let n = frame[0].nvars();
        for f in frame {
            if f.nvars() != n {
                return Err(Error::DimensionMismatch {
                    context: "frame field",
                    expected: n,
                    got: f.nvars(),
                });
            }
        }
        let base: Vec<(Vec<usize>, PolyVectorField)> = frame
            .iter()
            .enumerate()
            .map(|(i, f)| (vec![i], f.clone()))
            .collect();
        Ok(BracketWords {
            frame: frame.to_vec(),
            levels: vec![base],
        })
    }

    pub fn frame(&self) -> &[PolyVectorField] {
        &self.frame
    }

    /// Ensure words up to the given length exist.
    pub fn extend_to(&mut self, len: usize) -> Result<()> {
        while self.levels.len() < len {
            let last = self.levels.last().unwrap();
            let mut next = Vec::with_capacity(self.frame.len() * last.len());
            for (i, x) in self.frame.iter().enumerate() {
                for (w, field) in last {
                    let mut word = vec![i];
                    word.extend_from_slice(w);
                    next.push((word, x.lie_bracket(field)?));
                }
            }
            next.sort_by(|a, b| a.0.cmp(&b.0));
            self.levels.push(next);
        }
        Ok(())
    }

    /// All (word, field) pairs of length <= len, length-lex ordered.
    pub fn up_to(&self, len: usize) -> impl Iterator<Item = &(Vec<usize>, PolyVectorField)> {
        self.levels[..len.min(self.levels.len())].iter().flatten()
    }
}

/// One stage `D^(k)` of a derived flag.
#[derive(Debug, Clone)]
pub struct FlagStage {
    pub depth: usize,
    pub rank: usize,
    /// Bracket words whose values span the stage, length-lex ordered.
    pub words: Vec<Vec<usize>>,
    /// The evaluated spanning vectors, one per word.
    pub vectors: Vec<Vec<f64>>,
    /// Exact values when the flag was computed at a rational point.
    pub vectors_exact: Option<Vec<Vec<BigRational>>>,
}

/// The derived flag `D ⊂ D^(2) ⊂ ...` of a frame at a point.
#[derive(Debug, Clone)]
pub struct DistributionFlag {
    pub point: Vec<f64>,
    pub stages: Vec<FlagStage>,
    /// The rank sequence, one entry per stage.
    pub growth: Vec<usize>,
    /// False when maxdepth was exhausted before the ranks stabilized.
    pub complete: bool,
    pub ambient_dim: usize,
}

impl DistributionFlag {
    pub fn final_rank(&self) -> usize {
        self.growth.last().copied().unwrap_or(0)
    }
}

/// Exact derived flag at a rational point.
pub fn derived_flag(
    frame: &[PolyVectorField],
    x: &[BigRational],
    maxdepth: usize,
) -> Result<DistributionFlag> {
    let mut words = BracketWords::new(frame)?;
    derived_flag_cached(&mut words, x, maxdepth)
}

/// Exact derived flag reusing a bracket-word cache.
pub fn derived_flag_cached(
    words: &mut BracketWords,
    x: &[BigRational],
    maxdepth: usize,
) -> Result<DistributionFlag> {
    let n = words.frame()[0].nvars();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "derived_flag point",
            expected: n,
            got: x.len(),
        });
    }
    let xf: Vec<f64> = x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let mut stages: Vec<FlagStage> = Vec::new();
    let mut growth = Vec::new();
    let mut complete = false;
    for depth in 1..=maxdepth {
        words.extend_to(depth)?;
        let mut wlist = Vec::new();
        let mut vecs_exact = Vec::new();
        for (w, field) in words.up_to(depth) {
            wlist.push(w.clone());
            vecs_exact.push(field.eval_rational(x)?);
        }
        let rank = linalg::rank_exact(&vecs_exact);
        let vectors: Vec<Vec<f64>> = vecs_exact
            .iter()
            .map(|v| v.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect())
            .collect();
        stages.push(FlagStage {
            depth,
            rank,
            words: wlist,
            vectors,
            vectors_exact: Some(vecs_exact),
        });
        growth.push(rank);
        if rank == n || (depth > 1 && growth[depth - 2] == rank) {
            complete = true;
            break;
        }
    }
    Ok(DistributionFlag {
        point: xf,
        stages,
        growth,
        complete,
        ambient_dim: n,
    })
}

/// Floating-point derived flag: exact symbolic brackets, SVD ranks at the
/// given relative threshold. Needed when the point is not rational.
pub fn derived_flag_f64(
    frame: &[PolyVectorField],
    x: &[f64],
    maxdepth: usize,
    tol: f64,
) -> Result<DistributionFlag> {
    let mut words = BracketWords::new(frame)?;
    derived_flag_f64_cached(&mut words, x, maxdepth, tol)
}

pub fn derived_flag_f64_cached(
    words: &mut BracketWords,
    x: &[f64],
    maxdepth: usize,
    tol: f64,
) -> Result<DistributionFlag> {
    let n = words.frame()[0].nvars();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "derived_flag point",
            expected: n,
            got: x.len(),
        });
    }
    let mut stages: Vec<FlagStage> = Vec::new();
    let mut growth = Vec::new();
    let mut complete = false;
    for depth in 1..=maxdepth {
        words.extend_to(depth)?;
        let mut wlist = Vec::new();
        let mut vectors = Vec::new();
        for (w, field) in words.up_to(depth) {
            wlist.push(w.clone());
            vectors.push(field.eval_f64(x)?);
        }
        let rank = linalg::rank_f64(&vectors, tol);
        stages.push(FlagStage {
            depth,
            rank,
            words: wlist,
            vectors,
            vectors_exact: None,
        });
        growth.push(rank);
        if rank == n || (depth > 1 && growth[depth - 2] == rank) {
            complete = true;
            break;
        }
    }
    Ok(DistributionFlag {
        point: x.to_vec(),
        stages,
        growth,
        complete,
        ambient_dim: n,
    })
}

/// True iff the frame spans a rank-2 growth-(2,3,5) distribution at `x`.
/// The ambient dimension must be 5.
pub fn is_cartan(frame: &[PolyVectorField], x: &[BigRational]) -> Result<bool> {
    let n = frame.first().map(|f| f.nvars()).unwrap_or(0);
    if n != 5 {
        return Err(Error::DimensionMismatch {
            context: "is_cartan ambient dimension",
            expected: 5,
            got: n,
        });
    }
    let flag = derived_flag(frame, x, 3)?;
    Ok(flag.growth == vec![2, 3, 5])
}

/// True iff the growth reaches the ambient dimension within `maxdepth`.
pub fn is_bracket_generating(
    frame: &[PolyVectorField],
    x: &[BigRational],
    maxdepth: usize,
) -> Result<bool> {
    let flag = derived_flag(frame, x, maxdepth)?;
    Ok(flag.final_rank() == flag.ambient_dim)
}

/// Floating variant of [`is_bracket_generating`].
pub fn is_bracket_generating_f64(
    frame: &[PolyVectorField],
    x: &[f64],
    maxdepth: usize,
    tol: f64,
) -> Result<bool> {
    let flag = derived_flag_f64(frame, x, maxdepth, tol)?;
    Ok(flag.final_rank() == flag.ambient_dim)
}

/// Exact annihilator basis of `D^(k)` at the flag's point.
///
/// The basis is the canonical reduced-echelon nullspace, so it is
/// deterministic. Errors when the flag has no exact data or `k` exceeds the
/// computed depth.
pub fn annihilator_basis_exact(flag: &DistributionFlag, k: usize) -> Result<Vec<Vec<BigRational>>> {
    let stage = flag
        .stages
        .get(k.wrapping_sub(1))
        .ok_or(Error::Unsupported {
            msg: format!(
                "flag computed to depth {}, stage {k} requested",
                flag.stages.len()
            ),
        })?;
    let exact = stage.vectors_exact.as_ref().ok_or(Error::Unsupported {
        msg: "flag has no exact data (computed at a floating point)".into(),
    })?;
    Ok(linalg::nullspace_exact(exact, flag.ambient_dim))
}

/// Annihilator basis of `D^(k)` as covectors at the flag's point.
pub fn annihilator_basis(flag: &DistributionFlag, k: usize) -> Result<Vec<Covector>> {
    let stage = flag
        .stages
        .get(k.wrapping_sub(1))
        .ok_or(Error::Unsupported {
            msg: format!(
                "flag computed to depth {}, stage {k} requested",
                flag.stages.len()
            ),
        })?;
    let rows = if let Some(exact) = &stage.vectors_exact {
        linalg::nullspace_exact(exact, flag.ambient_dim)
            .into_iter()
            .map(|v| v.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect())
            .collect::<Vec<Vec<f64>>>()
    } else {
        linalg::nullspace_f64(&stage.vectors, flag.ambient_dim, DEFAULT_RANK_TOL)
    };
    rows.into_iter()
        .map(|components| Covector::new(flag.point.clone(), components))
        .collect()
}

/// Growth vectors for a batch of points (data-parallel).
pub fn growth_batch(
    frame: &[PolyVectorField],
    points: &[Vec<BigRational>],
    maxdepth: usize,
) -> Vec<Result<Vec<usize>>> {
    crate::par::map_collect(points, |x| {
        derived_flag(frame, x, maxdepth).map(|f| f.growth)
    })
}

/// Sequential reference for the bench suite.
pub fn growth_batch_serial(
    frame: &[PolyVectorField],
    points: &[Vec<BigRational>],
    maxdepth: usize,
) -> Vec<Result<Vec<usize>>> {
    crate::par::map_collect_serial(points, |x| {
        derived_flag(frame, x, maxdepth).map(|f| f.growth)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecfield::Polynomial;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn origin(n: usize) -> Vec<BigRational> {
        vec![BigRational::from_integer(0.into()); n]
    }

    pub(crate) fn m5_frame() -> Vec<PolyVectorField> {
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

    #[test]
    fn m5_growth_is_235() {
        let frame = m5_frame();
        let flag = derived_flag(&frame, &origin(5), 4).unwrap();
        assert_eq!(flag.growth, vec![2, 3, 5]);
        assert!(flag.complete);
        assert!(is_cartan(&frame, &origin(5)).unwrap());
        // Also away from the origin.
        let p = vec![q(3, 10), q(-1, 7), q(2, 3), q(5, 11), q(-4, 9)];
        assert_eq!(derived_flag(&frame, &p, 4).unwrap().growth, vec![2, 3, 5]);
    }

    #[test]
    fn involutive_frame_stabilizes_at_two() {
        let frame = vec![
            PolyVectorField::coordinate(3, 0),
            PolyVectorField::coordinate(3, 1),
        ];
        let flag = derived_flag(&frame, &origin(3), 5).unwrap();
        assert_eq!(flag.growth, vec![2, 2]);
        assert!(flag.complete);
        assert!(!is_bracket_generating(&frame, &origin(3), 5).unwrap());
    }

    #[test]
    fn engel_type_padded_is_not_cartan() {
        // Engel-like rank-2 frame on R^4 padded with a flat fifth direction:
        // X1 = d1, X2 = d2 + x1 d3 + x3 d4 gives growth (2,3,4) in R^4, and
        // never reaches the padded direction in R^5.
        let n = 5;
        let zero = Polynomial::zero(n);
        let one = Polynomial::constant_i64(n, 1);
        let f1 = PolyVectorField::new(vec![
            one.clone(),
            zero.clone(),
            zero.clone(),
            zero.clone(),
            zero.clone(),
        ])
        .unwrap();
        let f2 = PolyVectorField::new(vec![
            zero.clone(),
            one,
            Polynomial::var(n, 0),
            Polynomial::var(n, 2),
            zero.clone(),
        ])
        .unwrap();
        let frame = vec![f1, f2];
        let flag = derived_flag(&frame, &origin(5), 6).unwrap();
        assert_eq!(flag.growth, vec![2, 3, 4, 4]);
        assert!(!is_cartan(&frame, &origin(5)).unwrap());
    }

    #[test]
    fn is_cartan_rejects_wrong_ambient_dimension() {
        let frame = vec![
            PolyVectorField::coordinate(3, 0),
            PolyVectorField::coordinate(3, 1),
        ];
        assert!(is_cartan(&frame, &origin(3)).is_err());
    }

    #[test]
    fn annihilators_at_the_origin() {
        let frame = m5_frame();
        let flag = derived_flag(&frame, &origin(5), 3).unwrap();
        // D^(1) annihilator = span{dx3, dx4, dx5}
        let a1 = annihilator_basis_exact(&flag, 1).unwrap();
        assert_eq!(a1.len(), 3);
        for v in &a1 {
            assert_eq!(v[0], q(0, 1));
            assert_eq!(v[1], q(0, 1));
        }
        // D^(2) annihilator = span{dx4, dx5}
        let a2 = annihilator_basis_exact(&flag, 2).unwrap();
        assert_eq!(a2.len(), 2);
        for v in &a2 {
            for i in 0..3 {
                assert_eq!(v[i], q(0, 1));
            }
        }
        // Final stage of a bracket-generating flag has empty annihilator.
        let a3 = annihilator_basis_exact(&flag, 3).unwrap();
        assert!(a3.is_empty());
    }

    #[test]
    fn dimension_count_and_chain_property() {
        let frame = m5_frame();
        let p = vec![q(1, 2), q(-1, 3), q(2, 5), q(0, 1), q(3, 7)];
        let flag = derived_flag(&frame, &p, 4).unwrap();
        for (k, stage) in flag.stages.iter().enumerate() {
            let ann = annihilator_basis_exact(&flag, k + 1).unwrap();
            assert_eq!(stage.rank + ann.len(), 5, "rank-nullity at stage {}", k + 1);
        }
        // chain: annihilator(D^(k+1)) ⊆ annihilator(D^(k)): each later
        // annihilator vector kills every earlier-stage spanning vector.
        for k in 1..flag.stages.len() {
            let later = annihilator_basis_exact(&flag, k + 1).unwrap();
            let earlier = flag.stages[k - 1].vectors_exact.as_ref().unwrap();
            for p in &later {
                for v in earlier {
                    let dot: BigRational = p.iter().zip(v).map(|(a, b)| a * b).sum();
                    assert_eq!(dot, q(0, 1));
                }
            }
        }
    }

    #[test]
    fn incomplete_flag_is_flagged() {
        let frame = m5_frame();
        let flag = derived_flag(&frame, &origin(5), 2).unwrap();
        assert_eq!(flag.growth, vec![2, 3]);
        assert!(!flag.complete);
    }

    #[test]
    fn growth_is_invariant_under_unimodular_frame_changes() {
        // Replace the frame by an invertible polynomial combination
        // (triangular with unit diagonal, hence unimodular everywhere).
        let frame = m5_frame();
        let p = vec![q(1, 3), q(-2, 5), q(1, 7), q(2, 9), q(-1, 4)];
        let reference = derived_flag(&frame, &p, 4).unwrap().growth;
        let combos: [(Polynomial, Polynomial); 3] = [
            (Polynomial::var(5, 0), Polynomial::zero(5)),
            (
                Polynomial::var(5, 1).mul(&Polynomial::var(5, 2)),
                Polynomial::constant_i64(5, 3),
            ),
            (
                Polynomial::var(5, 3).pow(2).scale(&q(1, 2)),
                Polynomial::var(5, 4).neg(),
            ),
        ];
        for (f, g) in combos {
            let y1 = frame[0].add(&frame[1].scale_poly(&f));
            let y2 = frame[1].add(&y1.scale_poly(&g));
            let transformed = vec![y1, y2];
            let growth = derived_flag(&transformed, &p, 4).unwrap().growth;
            assert_eq!(growth, reference);
        }
    }

    #[test]
    fn float_mode_matches_exact_on_m5() {
        let frame = m5_frame();
        let x = [0.37, -0.21, 0.11, 0.05, -0.4];
        let flag = derived_flag_f64(&frame, &x, 4, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(flag.growth, vec![2, 3, 5]);
    }
}
