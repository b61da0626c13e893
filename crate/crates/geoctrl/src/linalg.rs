//! Small linear-algebra helpers: exact elimination over the rationals and
//! floating-point rank/nullspace built on SVD.

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::Zero;

/// Row-reduce `rows` in place to reduced row echelon form (exact arithmetic).
/// Returns the pivot column indices.
pub fn rref(rows: &mut Vec<Vec<BigRational>>) -> Vec<usize> {
    let nrows = rows.len();
    if nrows == 0 {
        return vec![];
    }
    let ncols = rows[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(pr) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, pr);
        let inv = rows[r][c].clone();
        for x in rows[r].iter_mut() {
            *x = &*x / &inv;
        }
        for i in 0..nrows {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..ncols {
                    let s = &rows[r][j] * &f;
                    rows[i][j] = &rows[i][j] - &s;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == nrows {
            break;
        }
    }
    pivots
}

/// Exact rank of a rational matrix given as rows.
pub fn rank_exact(rows: &[Vec<BigRational>]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m).len()
}

/// Canonical basis of `{ p : A p = 0 }` for the rational matrix `A` (rows).
///
/// The basis comes from the reduced echelon form with free variables set to 1
/// one at a time, so it is deterministic in the column order.
pub fn nullspace_exact(rows: &[Vec<BigRational>], ncols: usize) -> Vec<Vec<BigRational>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m);
    let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = vec![BigRational::zero(); ncols];
        v[free] = BigRational::from_integer(1.into());
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[i][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Numerical rank: singular values above `tol` times the largest.
pub fn rank_f64(rows: &[Vec<f64>], tol: f64) -> usize {
    let (sv, _) = singular_values(rows);
    numeric_rank(&sv, tol)
}

/// Singular values (descending) and the right singular vectors (rows of V^T).
pub fn singular_values(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let nrows = rows.len();
    if nrows == 0 {
        return (vec![], vec![]);
    }
    let ncols = rows[0].len();
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    let m = DMatrix::from_row_slice(nrows, ncols, &flat);
    let svd = m.svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let vt = svd.v_t.expect("v_t requested");
    let vt_rows: Vec<Vec<f64>> = (0..vt.nrows())
        .map(|i| vt.row(i).iter().copied().collect())
        .collect();
    (sv, vt_rows)
}

pub fn numeric_rank(sv: &[f64], tol: f64) -> usize {
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Orthonormal basis of `{ p : <p, row_i> = 0 }` for f64 rows, via SVD.
/// Wide systems are padded with zero rows so the full right factor is
/// available.
pub fn nullspace_f64(rows: &[Vec<f64>], ncols: usize, tol: f64) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return (0..ncols)
            .map(|i| {
                let mut v = vec![0.0; ncols];
                v[i] = 1.0;
                v
            })
            .collect();
    }
    let mut padded = rows.to_vec();
    while padded.len() < ncols {
        padded.push(vec![0.0; ncols]);
    }
    let (sv, vt) = singular_values(&padded);
    let rank = numeric_rank(&sv, tol);
    vt[rank..].to_vec()
}

/// Orthonormal nullspace basis of a small well-conditioned row system by
/// Gaussian elimination with partial pivoting; much cheaper than SVD for
/// the hot per-point solves. `pivot_tol` is the absolute pivot threshold.
pub fn nullspace_elim(rows: &[Vec<f64>], ncols: usize, pivot_tol: f64) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let nrows = m.len();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(pr) = (r..nrows)
            .filter(|&i| m[i][c].abs() > pivot_tol)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
        else {
            continue;
        };
        m.swap(r, pr);
        let inv = 1.0 / m[r][c];
        for x in m[r].iter_mut() {
            *x *= inv;
        }
        for i in 0..nrows {
            if i != r && m[i][c] != 0.0 {
                let f = m[i][c];
                for j in 0..ncols {
                    m[i][j] -= f * m[r][j];
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == nrows {
            break;
        }
    }
    let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for free in 0..ncols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = vec![0.0; ncols];
        v[free] = 1.0;
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[i][free];
        }
        // Gram-Schmidt against the accumulated basis.
        for b in &basis {
            let proj = dot(&v, b);
            axpy(&mut v, -proj, b);
        }
        let n = norm(&v);
        if n > 1e-300 {
            for x in v.iter_mut() {
                *x /= n;
            }
        }
        basis.push(v);
    }
    basis
}

/// Solve the dense least-squares problem `min |A x - b|` via SVD.
pub fn solve_lsq(a: &[Vec<f64>], b: &[f64], eps: f64) -> Option<Vec<f64>> {
    let nrows = a.len();
    let ncols = a[0].len();
    let flat: Vec<f64> = a.iter().flat_map(|r| r.iter().copied()).collect();
    let m = DMatrix::from_row_slice(nrows, ncols, &flat);
    let rhs = DMatrix::from_column_slice(nrows, 1, b);
    let svd = m.svd(true, true);
    svd.solve(&rhs, eps).ok().map(|x| x.as_slice().to_vec())
}

/// Solve a square system `A x = b` by LU; `None` when singular.
pub fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let flat: Vec<f64> = a.iter().flat_map(|r| r.iter().copied()).collect();
    let m = DMatrix::from_row_slice(n, n, &flat);
    let rhs = nalgebra::DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.as_slice().to_vec())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn rref_rank_and_nullspace() {
        // rows span a 2-plane in R^3; nullspace is 1-dimensional.
        let rows = vec![
            vec![q(1, 1), q(0, 1), q(1, 1)],
            vec![q(0, 1), q(1, 1), q(1, 1)],
            vec![q(1, 1), q(1, 1), q(2, 1)],
        ];
        assert_eq!(rank_exact(&rows), 2);
        let ns = nullspace_exact(&rows, 3);
        assert_eq!(ns.len(), 1);
        // p = (-1, -1, 1) up to the canonical free-variable normalization.
        assert_eq!(ns[0][2], BigRational::one());
        assert_eq!(ns[0][0], q(-1, 1));
        assert_eq!(ns[0][1], q(-1, 1));
    }

    #[test]
    fn f64_rank_with_threshold() {
        let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1e-12, 0.0]];
        assert_eq!(rank_f64(&rows, 1e-8), 1);
        assert_eq!(rank_f64(&rows, 1e-14), 2);
    }
}
