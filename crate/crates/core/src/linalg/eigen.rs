//! Eigenvalues of general complex matrices.
//!
//! Householder reduction to upper Hessenberg form followed by an explicit
//! single-shift QR iteration with Wilkinson shifts, Givens rotations and
//! occasional exceptional shifts. Eigenvectors are not accumulated here;
//! generalized eigenspaces are recovered separately through kernel growth.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::TorsionError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// All eigenvalues of a square complex matrix, with multiplicity, in
/// deterministic order (by magnitude, then argument).
pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<Complex64>, TorsionError> {
    assert!(m.is_square(), "eigenvalues of non-square matrix");
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !m.is_finite() {
        return Err(TorsionError::InvalidInput(String::from(
            "matrix has non-finite entries",
        )));
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(vec![ZERO; n]);
    }
    let mut h = m.scale(Complex64::new(1.0 / scale, 0.0));
    hessenberg_in_place(&mut h);
    let mut eigs = qr_eigenvalues(h)?;
    for e in eigs.iter_mut() {
        *e *= scale;
    }
    eigs.sort_by(|a, b| {
        (a.norm(), a.arg())
            .partial_cmp(&(b.norm(), b.arg()))
            .expect("finite eigenvalues")
    });
    Ok(eigs)
}

/// In-place unitary similarity reduction to upper Hessenberg form.
fn hessenberg_in_place(h: &mut ComplexMatrix) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        // Householder vector annihilating column k below the subdiagonal.
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let tail: f64 = v.iter().skip(1).map(|z| z.norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = v[0];
        let norm = libm::sqrt(x0.norm_sqr() + tail);
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm;
        v[0] -= alpha;
        let vnorm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum());
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= Complex64::new(vnorm, 0.0);
        }
        // H ← P H P with P = I - 2 v vᴴ (Hermitian, unitary), v supported on
        // rows/cols k+1..n.
        for j in k..n {
            let mut dot = ZERO;
            for (t, vi) in v.iter().enumerate() {
                dot += vi.conj() * h[(k + 1 + t, j)];
            }
            let dot2 = dot * 2.0;
            for (t, vi) in v.iter().enumerate() {
                let sub = dot2 * vi;
                h[(k + 1 + t, j)] -= sub;
            }
        }
        for i in 0..n {
            let mut dot = ZERO;
            for (t, vi) in v.iter().enumerate() {
                dot += h[(i, k + 1 + t)] * *vi;
            }
            let dot2 = dot * 2.0;
            for (t, vi) in v.iter().enumerate() {
                let sub = dot2 * vi.conj();
                h[(i, k + 1 + t)] -= sub;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Givens rotation `[[c, s], [-s̄, c]]` (c real) mapping `(f, g)` to `(r, 0)`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64, Complex64) {
    if g.norm() == 0.0 {
        return (1.0, ZERO, f);
    }
    if f.norm() == 0.0 {
        let s = g.conj() / g.norm();
        return (0.0, s, Complex64::new(g.norm(), 0.0));
    }
    let fa = f.norm();
    let ga = g.norm();
    let d = libm::hypot(fa, ga);
    let c = fa / d;
    let phase = f / fa;
    let s = phase * (g.conj() / d);
    (c, s, phase * d)
}

/// Eigenvalues of a 2×2 block with cancellation-safe arithmetic: the
/// discriminant is formed as `(a-d)² + 4bc` (exact for near-degenerate
/// diagonals) and the roots as `mean ± disc/2` around the midpoint.
fn eig2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let mean = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let disc = (half_diff * half_diff + b * c).sqrt();
    // Sign choice maximizing |mean + disc| avoids subtractive cancellation.
    let shift = if (mean.conj() * disc).re >= 0.0 {
        disc
    } else {
        -disc
    };
    let l1 = mean + shift;
    let det = a * d - b * c;
    let l2 = if l1.norm() > (mean.norm() + disc.norm()) * 1e-8 {
        det / l1
    } else {
        mean - shift
    };
    (l1, l2)
}

fn qr_eigenvalues(mut h: ComplexMatrix) -> Result<Vec<Complex64>, TorsionError> {
    let n = h.rows();
    let hnorm = h.max_abs().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut eigs = vec![ZERO; n];
    let mut hi = n;
    let mut stalled = 0usize;
    let mut total = 0usize;
    let total_max = 60 * n + 200;
    while hi > 0 {
        // Innermost unreduced block [lo, hi).
        let mut lo = hi - 1;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut local = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if local == 0.0 {
                local = hnorm;
            }
            if sub <= eps * local {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        let size = hi - lo;
        if size == 1 {
            eigs[hi - 1] = h[(hi - 1, hi - 1)];
            hi -= 1;
            stalled = 0;
            continue;
        }
        if size == 2 {
            let (l1, l2) = eig2(
                h[(lo, lo)],
                h[(lo, lo + 1)],
                h[(lo + 1, lo)],
                h[(lo + 1, lo + 1)],
            );
            eigs[lo] = l1;
            eigs[lo + 1] = l2;
            hi -= 2;
            stalled = 0;
            continue;
        }
        total += 1;
        stalled += 1;
        if total > total_max {
            return Err(TorsionError::ClusterAmbiguous(String::from(
                "QR eigenvalue iteration did not converge",
            )));
        }
        let shift = if stalled % 10 == 0 {
            // Exceptional shift to break limit cycles.
            h[(hi - 1, hi - 1)] + Complex64::new(0.75 * h[(hi - 1, hi - 2)].norm(), 0.0)
        } else {
            let (l1, l2) = eig2(
                h[(hi - 2, hi - 2)],
                h[(hi - 2, hi - 1)],
                h[(hi - 1, hi - 2)],
                h[(hi - 1, hi - 1)],
            );
            let target = h[(hi - 1, hi - 1)];
            if (l1 - target).norm() < (l2 - target).norm() {
                l1
            } else {
                l2
            }
        };
        qr_step(&mut h, lo, hi, shift);
    }
    Ok(eigs)
}

/// Explicit single-shift QR sweep `H ← Qᴴ H Q` on the active block,
/// updating the coupled rows/columns outside it.
fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, shift: Complex64) {
    let n = h.rows();
    for i in lo..hi {
        h[(i, i)] -= shift;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for j in lo..hi - 1 {
        let (c, s, r) = givens(h[(j, j)], h[(j + 1, j)]);
        h[(j, j)] = r;
        h[(j + 1, j)] = ZERO;
        for k in j + 1..n {
            let x = h[(j, k)];
            let y = h[(j + 1, k)];
            h[(j, k)] = x * c + s * y;
            h[(j + 1, k)] = -s.conj() * x + y * c;
        }
        rotations.push((c, s));
    }
    for (t, (c, s)) in rotations.iter().enumerate() {
        let j = lo + t;
        for i in 0..=(j + 1).min(hi - 1) {
            let x = h[(i, j)];
            let y = h[(i, j + 1)];
            h[(i, j)] = x * *c + y * s.conj();
            h[(i, j + 1)] = -(*s) * x + y * *c;
        }
    }
    for i in lo..hi {
        h[(i, i)] += shift;
    }
}
