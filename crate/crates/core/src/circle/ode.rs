//! Adaptive Dormand–Prince 5(4) integration of matrix ODEs on `[0, 2π]`.

use alloc::format;
use num_complex::Complex64;

use crate::error::TorsionError;
use crate::linalg::ComplexMatrix;

/// Integrate `Y'(t) = f(t, Y)` from `t0` to `t1` with embedded 5(4) error
/// control on the max-norm.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: ComplexMatrix,
    rtol: f64,
    atol: f64,
) -> Result<ComplexMatrix, TorsionError>
where
    F: FnMut(f64, &ComplexMatrix) -> ComplexMatrix,
{
    // Dormand–Prince coefficients.
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // 5th-order weights are the last row of A (FSAL); 4th-order weights:
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let span = t1 - t0;
    if span <= 0.0 {
        return Err(TorsionError::InvalidInput(
            "integration span must be positive".into(),
        ));
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = span / 64.0;
    let h_min = span * 1e-13;
    let mut steps = 0usize;
    let max_steps = 2_000_000usize;
    let mut k: [Option<ComplexMatrix>; 7] = [None, None, None, None, None, None, None];

    while t < t1 {
        if steps > max_steps {
            return Err(TorsionError::IntegrationDiverged(format!(
                "step budget exhausted at t = {t:.6}"
            )));
        }
        steps += 1;
        if t + h > t1 {
            h = t1 - t;
        }
        k[0] = Some(f(t, &y));
        for stage in 1..7 {
            let mut acc = y.clone();
            for (j, kj) in k.iter().take(stage).enumerate() {
                let w = A[stage - 1][j];
                if w != 0.0 {
                    acc = acc.add(&kj.as_ref().unwrap().scale(Complex64::new(h * w, 0.0)));
                }
            }
            k[stage] = Some(f(t + C[stage] * h, &acc));
        }
        // 5th-order solution is the stage-7 argument (FSAL structure).
        let mut y5 = y.clone();
        for (j, w) in A[5].iter().enumerate() {
            if *w != 0.0 {
                y5 = y5.add(&k[j].as_ref().unwrap().scale(Complex64::new(h * *w, 0.0)));
            }
        }
        let mut y4 = y.clone();
        for (j, w) in B4.iter().enumerate() {
            if *w != 0.0 {
                y4 = y4.add(&k[j].as_ref().unwrap().scale(Complex64::new(h * *w, 0.0)));
            }
        }
        let err = y5.sub(&y4).max_abs() / (atol + rtol * y5.max_abs().max(1.0));
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err > 0.0 {
            0.9 * libm::pow(err, -0.2)
        } else {
            5.0
        };
        h *= factor.clamp(0.2, 5.0);
        if h < h_min && t < t1 {
            return Err(TorsionError::IntegrationDiverged(format!(
                "step size underflow at t = {t:.6}"
            )));
        }
    }
    Ok(y)
}
