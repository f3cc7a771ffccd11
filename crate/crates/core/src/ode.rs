//! Dormand–Prince 5(4) with adaptive step control, for linear matrix ODEs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QjsError, Result};

type State = DMatrix<Complex64>;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th order minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// `y + h * sum_i c_i k_i`
fn combo(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = y.clone();
    for (c, k) in terms {
        let s = c * h;
        out.zip_apply(*k, |o, x| *o += x * s);
    }
    out
}

/// Outcome of an integration.
#[derive(Debug, Clone)]
pub struct Solution {
    pub state: State,
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` with absolute and relative
/// tolerance `tol` on every entry.
pub fn dopri5<F>(f: F, t0: f64, y0: State, t1: f64, tol: f64) -> Result<Solution>
where
    F: Fn(f64, &State) -> State,
{
    if !(tol > 0.0) {
        return Err(QjsError::Domain(format!("ODE tolerance must be > 0, got {tol}")));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(Solution {
            state: y0,
            accepted: 0,
            rejected: 0,
        });
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = dir * (span.abs() * 1e-3).max(1e-6).min(span.abs());
    let mut k1 = f(t, &y);
    let (mut accepted, mut rejected) = (0, 0);
    const MAX_STEPS: usize = 2_000_000;

    while (t1 - t) * dir > 0.0 {
        if accepted + rejected > MAX_STEPS {
            return Err(QjsError::StepperFailure {
                t,
                reason: "step budget exhausted".into(),
            });
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, &combo(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + h, &combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = combo(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);
        let err_vec = combo(
            &State::zeros(y.nrows(), y.ncols()),
            h,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );

        let mut err: f64 = 0.0;
        for ((e, a), b) in err_vec.iter().zip(y.iter()).zip(y_new.iter()) {
            let sc = tol + tol * a.norm().max(b.norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            return Err(QjsError::StepperFailure {
                t,
                reason: "non-finite error estimate".into(),
            });
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            accepted += 1;
        } else {
            rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(QjsError::StepperFailure {
                t,
                reason: "step size underflow".into(),
            });
        }
    }
    Ok(Solution {
        state: y,
        accepted,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_exponential() {
        let y0 = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let lambda = Complex64::new(-0.5, 2.0);
        let sol = dopri5(|_, y| y * lambda, 0.0, y0, 3.0, 1e-12).unwrap();
        let exact = (lambda * 3.0).exp();
        assert!((sol.state[(0, 0)] - exact).norm() < 1e-10);
    }

    #[test]
    fn backward_integration() {
        let y0 = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let sol = dopri5(|_, y| y * Complex64::new(1.0, 0.0), 0.0, y0, -2.0, 1e-12).unwrap();
        assert!((sol.state[(0, 0)].re - (-2.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let y0 = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        assert!(dopri5(|_, y| y.clone(), 0.0, y0, 1.0, 0.0).is_err());
    }
}
