//! Exact rational elimination and SVD-based numerical kernels.

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref(rows: &mut Vec<Vec<BigRational>>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].clone();
        for v in rows[r].iter_mut() {
            *v /= &inv;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    pivots
}

pub fn rank_exact(rows: &[Vec<BigRational>], ncols: usize) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m, ncols).len()
}

/// Basis of the right kernel, one vector per free column (free entry set to 1).
pub fn nullspace_exact(rows: &[Vec<BigRational>], ncols: usize) -> Vec<Vec<BigRational>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m, ncols);
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![BigRational::zero(); ncols];
        v[free] = BigRational::from_integer(1.into());
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[row][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Singular values (descending) and right singular vectors as rows of `vt`,
/// padded so that `vt` is always square.
pub fn svd_full(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut sorted = DMatrix::zeros(order.len(), n);
    for (k, &i) in order.iter().enumerate() {
        sorted.set_row(k, &vt.row(i));
    }
    (sigma, sorted)
}

/// Number of singular values above `rel * sigma_max`.
pub fn numeric_rank(a: &DMatrix<f64>, rel: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = a.singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel * max).count()
}

pub fn max_abs(v: &[BigRational]) -> BigRational {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(BigRational::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn exact_kernel_of_small_matrix() {
        let rows = vec![vec![q(1), q(0)], vec![q(0), q(0)]];
        assert_eq!(rank_exact(&rows, 2), 1);
        assert_eq!(nullspace_exact(&rows, 2), vec![vec![q(0), q(1)]]);
    }

    #[test]
    fn exact_kernel_vectors_annihilate() {
        let rows = vec![vec![q(1), q(2), q(3), q(4)], vec![q(2), q(4), q(7), q(1)]];
        let ker = nullspace_exact(&rows, 4);
        assert_eq!(ker.len(), 2);
        for v in &ker {
            for r in &rows {
                let dot: BigRational = r.iter().zip(v).map(|(a, b)| a * b).sum();
                assert!(dot.is_zero());
            }
        }
    }

    #[test]
    fn svd_pads_wide_matrices() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let (s, vt) = svd_full(&a);
        assert_eq!(s.len(), 3);
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1].abs() < 1e-15);
        assert_eq!(vt.shape(), (3, 3));
        assert_eq!(numeric_rank(&a, 1e-8), 1);
    }
}
