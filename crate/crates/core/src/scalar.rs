//! Log-space complex scalars.
//!
//! Torsion formulas multiply long alternating products of determinants whose
//! magnitudes can overflow or underflow `f64`. Products are therefore
//! accumulated as `log|z|` plus a phase that is *summed* rather than reduced
//! modulo `2π`, so squared quantities and parameter sweeps never suffer
//! branch jumps.

use num_complex::Complex64;

/// A nonzero complex number stored as `exp(log_abs + i·arg)`.
///
/// `arg` is not normalized; repeated multiplication keeps winding
/// information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex {
    pub log_abs: f64,
    pub arg: f64,
}

impl LogComplex {
    pub const ONE: LogComplex = LogComplex {
        log_abs: 0.0,
        arg: 0.0,
    };

    pub fn new(log_abs: f64, arg: f64) -> Self {
        LogComplex { log_abs, arg }
    }

    /// Logarithm of a finite complex number. Zero maps to `log_abs = -inf`.
    pub fn from_complex(z: Complex64) -> Self {
        LogComplex {
            log_abs: libm::log(z.norm()),
            arg: z.arg(),
        }
    }

    pub fn from_real(x: f64) -> Self {
        if x >= 0.0 {
            LogComplex {
                log_abs: libm::log(x),
                arg: 0.0,
            }
        } else {
            LogComplex {
                log_abs: libm::log(-x),
                arg: core::f64::consts::PI,
            }
        }
    }

    pub fn to_complex(self) -> Complex64 {
        let r = libm::exp(self.log_abs);
        Complex64::new(r * libm::cos(self.arg), r * libm::sin(self.arg))
    }

    pub fn is_zero(self) -> bool {
        self.log_abs == f64::NEG_INFINITY
    }

    pub fn mul(self, other: LogComplex) -> LogComplex {
        LogComplex {
            log_abs: self.log_abs + other.log_abs,
            arg: self.arg + other.arg,
        }
    }

    pub fn div(self, other: LogComplex) -> LogComplex {
        LogComplex {
            log_abs: self.log_abs - other.log_abs,
            arg: self.arg - other.arg,
        }
    }

    /// Integer power; exact on the winding-tracked phase.
    pub fn powi(self, n: i32) -> LogComplex {
        LogComplex {
            log_abs: self.log_abs * n as f64,
            arg: self.arg * n as f64,
        }
    }

    pub fn inv(self) -> LogComplex {
        self.powi(-1)
    }

    pub fn conj(self) -> LogComplex {
        LogComplex {
            log_abs: self.log_abs,
            arg: -self.arg,
        }
    }
}

impl From<Complex64> for LogComplex {
    fn from(z: Complex64) -> Self {
        LogComplex::from_complex(z)
    }
}
