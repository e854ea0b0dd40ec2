//! Partially pivoted LU factorization: determinants, linear solves, inverses.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::TorsionError;
use crate::scalar::LogComplex;

/// LU factorization with row pivoting, `P·A = L·U`.
pub struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    sign_flips: usize,
    /// Largest and smallest pivot magnitude, a cheap conditioning probe.
    pivot_max: f64,
    pivot_min: f64,
}

impl Lu {
    /// Factor a square matrix. Returns `None` when an exact zero pivot
    /// column is hit (matrix singular to working precision).
    pub fn factor(a: &ComplexMatrix) -> Option<Lu> {
        assert!(a.is_square(), "LU of non-square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign_flips = 0;
        let mut pivot_max: f64 = 0.0;
        let mut pivot_min = f64::INFINITY;
        for k in 0..n {
            let mut best = k;
            let mut best_mag = lu[(k, k)].norm();
            for i in k + 1..n {
                let mag = lu[(i, k)].norm();
                if mag > best_mag {
                    best = i;
                    best_mag = mag;
                }
            }
            if best_mag == 0.0 {
                return None;
            }
            if best != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(best, j)];
                    lu[(best, j)] = tmp;
                }
                perm.swap(k, best);
                sign_flips += 1;
            }
            pivot_max = pivot_max.max(best_mag);
            pivot_min = pivot_min.min(best_mag);
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let sub = factor * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
            }
        }
        Some(Lu {
            lu,
            perm,
            sign_flips,
            pivot_max,
            pivot_min,
        })
    }

    pub fn det_log(&self) -> LogComplex {
        let n = self.lu.rows();
        let mut acc = LogComplex::ONE;
        for k in 0..n {
            acc = acc.mul(LogComplex::from_complex(self.lu[(k, k)]));
        }
        if self.sign_flips % 2 == 1 {
            acc = acc.mul(LogComplex::from_real(-1.0));
        }
        acc
    }

    pub fn det(&self) -> Complex64 {
        self.det_log().to_complex()
    }

    /// Ratio of smallest to largest pivot; a rough (optimistic) inverse
    /// condition estimate. 1 for empty matrices.
    pub fn pivot_ratio(&self) -> f64 {
        if self.lu.rows() == 0 {
            1.0
        } else {
            self.pivot_min / self.pivot_max
        }
    }

    /// Solve `A·X = B` for every column of `B`.
    pub fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n, "shape mismatch in solve");
        let mut x = ComplexMatrix::zeros(n, b.cols());
        for col in 0..b.cols() {
            let mut y = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                let mut acc = b[(self.perm[i], col)];
                for j in 0..i {
                    acc -= self.lu[(i, j)] * y[j];
                }
                y[i] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = y[i];
                for j in i + 1..n {
                    acc -= self.lu[(i, j)] * y[j];
                }
                y[i] = acc / self.lu[(i, i)];
            }
            x.set_column(col, &y);
        }
        x
    }
}

/// Inverse through LU; errors with the supplied context when singular.
pub fn inverse(a: &ComplexMatrix, context: &str) -> Result<ComplexMatrix, TorsionError> {
    let lu = Lu::factor(a).ok_or_else(|| TorsionError::SingularForm(String::from(context)))?;
    Ok(lu.solve(&ComplexMatrix::identity(a.rows())))
}

/// 1-norm condition number estimate `‖A‖₁ · ‖A⁻¹‖₁`; infinite when singular.
pub fn condition_estimate(a: &ComplexMatrix) -> f64 {
    if a.rows() == 0 {
        return 1.0;
    }
    match Lu::factor(a) {
        None => f64::INFINITY,
        Some(lu) => {
            let inv = lu.solve(&ComplexMatrix::identity(a.rows()));
            norm_one(a) * norm_one(&inv)
        }
    }
}

fn norm_one(a: &ComplexMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.cols() {
        let mut colsum = 0.0;
        for i in 0..a.rows() {
            colsum += a[(i, j)].norm();
        }
        worst = worst.max(colsum);
    }
    worst
}
