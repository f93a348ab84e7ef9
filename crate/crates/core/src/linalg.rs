//! Small dense solvers used by the reconstruction code: Cholesky on Gram
//! systems, LU with partial pivoting, and a power-iteration spectral norm.
//!
//! Everything here is plain row-by-row arithmetic. At the problem sizes the
//! toolkit targets (N up to ~1024) that is fast enough, and it keeps results
//! bit-identical across runs and hosts.

use ndarray::{Array1, Array2};

use crate::error::{CsError, Result};
use crate::keys::{domain, BitStream};

/// Solves G c = b for symmetric positive definite G via Cholesky.
///
/// Fails with `RankDeficient` (tagging `atoms`) when a pivot collapses,
/// which is how the greedy solver reports a dependent active set.
pub fn cholesky_solve(
    gram: &Array2<f64>,
    rhs: &Array1<f64>,
    atoms: &[usize],
) -> Result<Array1<f64>> {
    let n = gram.nrows();
    assert_eq!(gram.ncols(), n);
    assert_eq!(rhs.len(), n);

    let max_diag = (0..n).map(|i| gram[[i, i]].abs()).fold(0.0f64, f64::max);
    let tol = 1e-13 * max_diag.max(1e-300);

    // Lower-triangular factor, row major.
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = gram[[i, j]];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= tol {
                    return Err(CsError::RankDeficient {
                        atoms: atoms.to_vec(),
                    });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }

    // Forward then back substitution.
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Ok(x)
}

/// Solves A X = B with square A via LU with partial pivoting.
/// B may carry many right-hand sides (one per column).
pub fn lu_solve_multi(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CsError::DimensionMismatch(format!(
            "LU expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(CsError::DimensionMismatch(format!(
            "rhs has {} rows, matrix has {}",
            b.nrows(),
            n
        )));
    }

    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = lu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = 1e-13 * scale.max(1e-300);

    for col in 0..n {
        // Partial pivot.
        let mut pivot_row = col;
        let mut pivot_val = lu[[col, col]].abs();
        for row in col + 1..n {
            let v = lu[[row, col]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val <= tiny {
            return Err(CsError::DegenerateInput(format!(
                "singular matrix (pivot {pivot_val:.3e} at column {col})"
            )));
        }
        if pivot_row != col {
            for k in 0..n {
                let tmp = lu[[col, k]];
                lu[[col, k]] = lu[[pivot_row, k]];
                lu[[pivot_row, k]] = tmp;
            }
            perm.swap(col, pivot_row);
        }
        let pivot = lu[[col, col]];
        for row in col + 1..n {
            let factor = lu[[row, col]] / pivot;
            lu[[row, col]] = factor;
            for k in col + 1..n {
                lu[[row, k]] -= factor * lu[[col, k]];
            }
        }
    }

    let nrhs = b.ncols();
    let mut x = Array2::zeros((n, nrhs));
    for rhs in 0..nrhs {
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            let mut sum = b[[perm[i], rhs]];
            for k in 0..i {
                sum -= lu[[i, k]] * y[k];
            }
            y[i] = sum;
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= lu[[i, k]] * x[[k, rhs]];
            }
            x[[i, rhs]] = sum / lu[[i, i]];
        }
    }
    Ok(x)
}

/// Power-iteration estimate of the squared spectral norm of A.
///
/// Runs a fixed 50 iterations on A^T A from a start vector drawn off a
/// fixed public seed, so the estimate is reproducible.
pub fn spectral_norm_sq(a: &Array2<f64>) -> f64 {
    const ITERS: usize = 50;
    const SEED: u64 = 0x5350_4543_3530_3031;

    let n = a.ncols();
    let mut stream = BitStream::public(SEED, domain::POWER_ITER);
    let mut v = Array1::from_shape_fn(n, |_| stream.standard_normal());
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    v.mapv_inplace(|x| x / norm);

    let mut sigma_sq = 0.0;
    for _ in 0..ITERS {
        let av = a.dot(&v);
        let w = a.t().dot(&av);
        let w_norm = w.dot(&w).sqrt();
        if w_norm == 0.0 {
            return 0.0;
        }
        sigma_sq = v.dot(&w); // Rayleigh quotient for A^T A
        v = w / w_norm;
    }
    sigma_sq.max(0.0)
}

pub fn frobenius_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let g = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![2.0, 5.0];
        let x = cholesky_solve(&g, &b, &[0, 1]).unwrap();
        // Solved by hand: x = [-0.5, 2.0].
        assert!((x[0] + 0.5).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_reports_rank_deficiency() {
        let g = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![1.0, 1.0];
        match cholesky_solve(&g, &b, &[3, 9]) {
            Err(CsError::RankDeficient { atoms }) => assert_eq!(atoms, vec![3, 9]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn lu_matches_hand_solution() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let b = array![[3.0], [5.0]];
        let x = lu_solve_multi(&a, &b).unwrap();
        // 2x + y = 3, x + 3y = 5 -> x = 0.8, y = 1.4
        assert!((x[[0, 0]] - 0.8).abs() < 1e-12);
        assert!((x[[1, 0]] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn lu_detects_singularity() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let b = array![[1.0], [2.0]];
        assert!(lu_solve_multi(&a, &b).is_err());
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        let est = spectral_norm_sq(&a);
        assert!((est - 9.0).abs() < 1e-8, "estimate {est}");
    }
}
