//! Rank and kernel through fully pivoted Gaussian elimination.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::{vec_norm, ComplexMatrix};

/// Result of the pivoted forward elimination shared by rank, kernel and
/// pivot-column selection.
struct Elimination {
    reduced: ComplexMatrix,
    col_perm: Vec<usize>,
    rank: usize,
}

/// Forward elimination with full (row and column) pivoting. Pivots not
/// exceeding `threshold` (absolute) terminate the sweep.
fn eliminate(m: &ComplexMatrix, threshold: f64) -> Elimination {
    let rows = m.rows();
    let cols = m.cols();
    let mut w = m.clone();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    if m.max_abs() == 0.0 {
        return Elimination {
            reduced: w,
            col_perm,
            rank: 0,
        };
    }
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        // Full pivot over the trailing block.
        let mut best = (k, k);
        let mut best_mag = 0.0;
        for i in k..rows {
            for j in k..cols {
                let mag = w[(i, j)].norm();
                if mag > best_mag {
                    best = (i, j);
                    best_mag = mag;
                }
            }
        }
        if best_mag <= threshold {
            break;
        }
        let (pr, pc) = best;
        if pr != k {
            for j in 0..cols {
                let tmp = w[(k, j)];
                w[(k, j)] = w[(pr, j)];
                w[(pr, j)] = tmp;
            }
        }
        if pc != k {
            for i in 0..rows {
                let tmp = w[(i, k)];
                w[(i, k)] = w[(i, pc)];
                w[(i, pc)] = tmp;
            }
            col_perm.swap(k, pc);
        }
        let pivot = w[(k, k)];
        for i in k + 1..rows {
            let factor = w[(i, k)] / pivot;
            w[(i, k)] = Complex64::new(0.0, 0.0);
            for j in k + 1..cols {
                let sub = factor * w[(k, j)];
                w[(i, j)] -= sub;
            }
        }
        rank += 1;
    }
    Elimination {
        reduced: w,
        col_perm,
        rank,
    }
}

/// Numerical rank and an orthonormal kernel basis.
///
/// Returns `(rank, kernel)` where `kernel` is `cols × (cols - rank)` with
/// orthonormal columns satisfying `M·v ≈ 0` within `tol·‖M‖`.
pub fn rank_kernel(m: &ComplexMatrix, tol: f64) -> (usize, ComplexMatrix) {
    assert!(tol > 0.0, "tolerance must be positive");
    rank_kernel_threshold(m, tol * m.max_abs())
}

/// Same as [`rank_kernel`] but against an absolute pivot threshold; used by
/// the generalized-eigenspace growth where the relevant scale is a power of
/// the first shifted matrix, not the entry size of the current power.
pub(crate) fn rank_kernel_threshold(m: &ComplexMatrix, threshold: f64) -> (usize, ComplexMatrix) {
    let cols = m.cols();
    let elim = eliminate(m, threshold);
    let rank = elim.rank;
    let nullity = cols - rank;
    let mut kernel = ComplexMatrix::zeros(cols, nullity);
    if nullity == 0 {
        return (rank, kernel);
    }
    // Back-substitute each free (permuted) column against the pivot block.
    let u = &elim.reduced;
    for (t, f) in (rank..cols).enumerate() {
        let mut x = vec![Complex64::new(0.0, 0.0); cols];
        x[f] = Complex64::new(1.0, 0.0);
        for i in (0..rank).rev() {
            let mut acc = -u[(i, f)];
            for j in i + 1..rank {
                acc -= u[(i, j)] * x[j];
            }
            x[i] = acc / u[(i, i)];
        }
        for p in 0..cols {
            kernel[(elim.col_perm[p], t)] = x[p];
        }
    }
    orthonormalize_columns(&mut kernel);
    (rank, kernel)
}

/// Numerical rank and the column indices (original numbering) of a
/// maximal-pivot independent column set, chosen by pivoted elimination.
pub fn pivot_columns(m: &ComplexMatrix, tol: f64) -> (usize, Vec<usize>) {
    let elim = eliminate(m, tol * m.max_abs());
    let mut cols: Vec<usize> = elim.col_perm[..elim.rank].to_vec();
    cols.sort_unstable();
    (elim.rank, cols)
}

/// Modified Gram–Schmidt with one re-orthogonalization pass, using the
/// Hermitian inner product (numerical only; never the symmetric pairing).
fn orthonormalize_columns(m: &mut ComplexMatrix) {
    let n = m.rows();
    let k = m.cols();
    for j in 0..k {
        let mut v = m.column(j);
        for _pass in 0..2 {
            for p in 0..j {
                let u = m.column(p);
                let mut dot = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    dot += u[i].conj() * v[i];
                }
                for i in 0..n {
                    v[i] -= dot * u[i];
                }
            }
        }
        let norm = vec_norm(&v);
        if norm > 0.0 {
            for z in v.iter_mut() {
                *z /= Complex64::new(norm, 0.0);
            }
        }
        m.set_column(j, &v);
    }
}
