//! Matrix-valued trigonometric polynomials on the circle.
//!
//! `f(θ) = Σ_{|m| ≤ deg} f_m e^{imθ}` with `k×k` complex matrix
//! coefficients. Products and derivatives are exact; inversion goes through
//! uniform sampling and a discrete Fourier transform, with the tail checked
//! against the samples.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::error::TorsionError;
use crate::linalg::{ComplexMatrix, Lu};

/// Matrix-valued trig polynomial; coefficient of mode `m` sits at index
/// `m + deg`.
#[derive(Debug, Clone)]
pub struct TrigPoly {
    k: usize,
    deg: i64,
    coeffs: Vec<ComplexMatrix>,
}

impl TrigPoly {
    pub fn zero(k: usize) -> Self {
        TrigPoly {
            k,
            deg: 0,
            coeffs: vec![ComplexMatrix::zeros(k, k)],
        }
    }

    pub fn constant(m: ComplexMatrix) -> Self {
        assert!(m.is_square(), "trig polynomial coefficients must be square");
        TrigPoly {
            k: m.rows(),
            deg: 0,
            coeffs: vec![m],
        }
    }

    pub fn constant_scalar(z: Complex64) -> Self {
        Self::constant(ComplexMatrix::scalar(z))
    }

    /// Build from `(mode, coefficient)` pairs; repeated modes add up.
    pub fn from_modes(k: usize, modes: &[(i64, ComplexMatrix)]) -> Result<Self, TorsionError> {
        let deg = modes.iter().map(|(m, _)| m.abs()).max().unwrap_or(0);
        let mut coeffs = vec![ComplexMatrix::zeros(k, k); (2 * deg + 1) as usize];
        for (m, c) in modes {
            if c.rows() != k || c.cols() != k {
                return Err(TorsionError::InvalidInput(format!(
                    "Fourier coefficient at mode {m} is {}x{}, expected {k}x{k}",
                    c.rows(),
                    c.cols()
                )));
            }
            if !c.is_finite() {
                return Err(TorsionError::InvalidInput(format!(
                    "non-finite Fourier coefficient at mode {m}"
                )));
            }
            let idx = (m + deg) as usize;
            coeffs[idx] = coeffs[idx].add(c);
        }
        Ok(TrigPoly { k, deg, coeffs }.trimmed())
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn degree(&self) -> i64 {
        self.deg
    }

    /// Coefficient of mode `m` (zero outside the stored band).
    pub fn coeff(&self, m: i64) -> ComplexMatrix {
        if m.abs() > self.deg {
            ComplexMatrix::zeros(self.k, self.k)
        } else {
            self.coeffs[(m + self.deg) as usize].clone()
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, &ComplexMatrix)> {
        let deg = self.deg;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (i as i64 - deg, c))
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.max_abs()))
    }

    /// Drop an all-but-zero outer band.
    fn trimmed(mut self) -> Self {
        let scale = self.max_coeff_norm();
        let cut = 1e-300_f64.max(0.0 * scale);
        while self.deg > 0 {
            let lo = self.coeffs.first().unwrap().max_abs();
            let hi = self.coeffs.last().unwrap().max_abs();
            if lo <= cut && hi <= cut {
                self.coeffs.remove(0);
                self.coeffs.pop();
                self.deg -= 1;
            } else {
                break;
            }
        }
        self
    }

    pub fn eval(&self, theta: f64) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.k, self.k);
        for (m, c) in self.modes() {
            let phase = Complex64::new(0.0, m as f64 * theta).exp();
            out = out.add(&c.scale(phase));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.k, other.k);
        let deg = self.deg.max(other.deg);
        let mut coeffs = vec![ComplexMatrix::zeros(self.k, self.k); (2 * deg + 1) as usize];
        for (m, c) in self.modes() {
            coeffs[(m + deg) as usize] = coeffs[(m + deg) as usize].add(c);
        }
        for (m, c) in other.modes() {
            coeffs[(m + deg) as usize] = coeffs[(m + deg) as usize].add(c);
        }
        TrigPoly {
            k: self.k,
            deg,
            coeffs,
        }
        .trimmed()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, z: Complex64) -> Self {
        TrigPoly {
            k: self.k,
            deg: self.deg,
            coeffs: self.coeffs.iter().map(|c| c.scale(z)).collect(),
        }
    }

    /// Pointwise matrix product (Fourier convolution).
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.k, other.k);
        let deg = self.deg + other.deg;
        let mut coeffs = vec![ComplexMatrix::zeros(self.k, self.k); (2 * deg + 1) as usize];
        for (m1, c1) in self.modes() {
            if c1.max_abs() == 0.0 {
                continue;
            }
            for (m2, c2) in other.modes() {
                if c2.max_abs() == 0.0 {
                    continue;
                }
                let idx = (m1 + m2 + deg) as usize;
                coeffs[idx] = coeffs[idx].add(&c1.mul(c2));
            }
        }
        TrigPoly {
            k: self.k,
            deg,
            coeffs,
        }
        .trimmed()
    }

    /// d/dθ: mode `m` picks up a factor `im`.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .modes()
            .map(|(m, c)| c.scale(Complex64::new(0.0, m as f64)))
            .collect();
        TrigPoly {
            k: self.k,
            deg: self.deg,
            coeffs,
        }
        .trimmed()
    }

    /// Coefficient-wise transpose, i.e. `θ ↦ f(θ)ᵗ`.
    pub fn transpose(&self) -> Self {
        TrigPoly {
            k: self.k,
            deg: self.deg,
            coeffs: self.coeffs.iter().map(ComplexMatrix::transpose).collect(),
        }
    }

    /// Pointwise trace as a scalar (1×1) trig polynomial.
    pub fn trace(&self) -> TrigPoly {
        TrigPoly {
            k: 1,
            deg: self.deg,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| ComplexMatrix::scalar(c.trace()))
                .collect(),
        }
        .trimmed()
    }

    /// `∫₀^{2π} f dθ = 2π · f̂₀` — exact for trig polynomials, and equal to
    /// the trapezoidal rule on any uniform grid finer than the bandwidth.
    pub fn integral(&self) -> ComplexMatrix {
        self.coeff(0).scale(Complex64::new(2.0 * PI, 0.0))
    }

    /// Uniform samples `f(2πj/n)`, `j = 0..n`.
    pub fn sample(&self, n: usize) -> Vec<ComplexMatrix> {
        (0..n)
            .map(|j| self.eval(2.0 * PI * j as f64 / n as f64))
            .collect()
    }

    /// Inverse DFT of uniform samples, keeping modes `|m| ≤ n/2 - 1` above a
    /// relative floor.
    pub fn from_samples(samples: &[ComplexMatrix]) -> Result<Self, TorsionError> {
        let n = samples.len();
        if n < 4 {
            return Err(TorsionError::InvalidInput("need at least 4 samples".into()));
        }
        let k = samples[0].rows();
        let deg = (n / 2 - 1) as i64;
        let mut coeffs = vec![ComplexMatrix::zeros(k, k); (2 * deg + 1) as usize];
        for m in -deg..=deg {
            let mut acc = ComplexMatrix::zeros(k, k);
            for (j, s) in samples.iter().enumerate() {
                let phase = Complex64::new(0.0, -(m as f64) * 2.0 * PI * j as f64 / n as f64).exp();
                acc = acc.add(&s.scale(phase));
            }
            coeffs[(m + deg) as usize] = acc.scale(Complex64::new(1.0 / n as f64, 0.0));
        }
        // Relative floor keeps the band compact.
        let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.max_abs()));
        for c in coeffs.iter_mut() {
            if c.max_abs() <= 1e-14 * scale {
                *c = ComplexMatrix::zeros(k, k);
            }
        }
        Ok(TrigPoly { k, deg, coeffs }.trimmed())
    }

    /// Pointwise inverse through sampling; fails when some sample is not
    /// comfortably invertible or the inverse is not resolved by `n` modes.
    pub fn inverse(&self, n: usize, tol: f64) -> Result<Self, TorsionError> {
        let samples = self.sample(n);
        let mut inverted = Vec::with_capacity(n);
        for (j, s) in samples.iter().enumerate() {
            let lu = Lu::factor(s)
                .filter(|lu| lu.pivot_ratio() > tol)
                .ok_or_else(|| {
                    TorsionError::SingularForm(format!(
                        "matrix function singular near θ = {:.4}",
                        2.0 * PI * j as f64 / n as f64
                    ))
                })?;
            inverted.push(lu.solve(&ComplexMatrix::identity(self.k)));
        }
        let poly = Self::from_samples(&inverted)?;
        // The inverse of a trig polynomial is analytic but generally not a
        // trig polynomial; verify the truncation against fresh off-grid
        // samples.
        for j in 0..8 {
            let theta = 2.0 * PI * (j as f64 + 0.37) / 7.3;
            let product = poly.eval(theta).mul(&self.eval(theta));
            let defect = product.sub(&ComplexMatrix::identity(self.k)).max_abs();
            if defect > 1e-8 {
                return Err(TorsionError::SingularForm(format!(
                    "inverse not resolved at {n} samples (defect {defect:.3e}); \
                     increase sample_count"
                )));
            }
        }
        Ok(poly)
    }

    /// Largest pointwise deviation from coefficient-wise symmetry.
    pub fn symmetry_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .fold(0.0, |acc, c| acc.max(c.symmetry_defect()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.max_abs() == 0.0)
    }
}

/// Scalar trapezoidal quadrature of samples of a periodic function over
/// `[0, 2π]`; spectrally accurate on trig polynomials.
pub fn trapezoid_quadrature(samples: &[Complex64]) -> Complex64 {
    let n = samples.len();
    let sum: Complex64 = samples.iter().sum();
    sum * Complex64::new(2.0 * PI / n as f64, 0.0)
}
