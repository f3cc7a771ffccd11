//! Cancellation-free elementary functions used by the closed forms.
//!
//! Everything here is built on `expm1`: the time-averaged rates are
//! differences of exponentials whose arguments are tiny at resonance
//! (`tau * (1 + 2 nbar - xi)` can be of order 1e-3 while `tau` is 5e5).

use num_complex::Complex64;

/// `exp(z) - 1` with full relative precision for small `|z|`.
pub fn expm1_c(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half = (0.5 * y).sin();
    let re = x.exp_m1() * y.cos() - 2.0 * half * half;
    let im = x.exp() * y.sin();
    Complex64::new(re, im)
}

/// `phi1(z) = (exp(z) - 1) / z`, entire, `phi1(0) = 1`.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-8 {
        1.0 + z * (0.5 + z / 6.0)
    } else {
        expm1_c(z) / z
    }
}

/// `P(x) = (1 - exp(-x tau)) / x`, i.e. `int_0^tau exp(-x u) du`, with
/// `P(0) = tau`.
pub fn exp_window(x: Complex64, tau: f64) -> Complex64 {
    phi1(-x * tau) * tau
}

/// `I_k(z) = int_0^1 s^k exp(z s) ds` for `k = 0..=K`.
fn exp_moments<const K: usize>(z: Complex64) -> [Complex64; K] {
    let mut out = [Complex64::new(0.0, 0.0); K];
    if z.norm() < 1.0 {
        // sum_m z^m / (m! (m + k + 1))
        for (k, slot) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..60 {
                let add = term / (m + k + 1) as f64;
                acc += add;
                if add.norm() < 1e-18 * acc.norm() {
                    break;
                }
                term = term * z / (m + 1) as f64;
            }
            *slot = acc;
        }
    } else {
        let ez = z.exp();
        out[0] = phi1(z);
        for k in 1..K {
            out[k] = (ez - out[k - 1] * k as f64) / z;
        }
    }
    out
}

/// Divided difference `(phi1(z + h) - phi1(z)) / h`, uniformly accurate
/// as `h -> 0` where it tends to `phi1'(z)`.
pub fn phi1_divided_difference(z: Complex64, h: Complex64) -> Complex64 {
    if h.norm() > 1e-3 {
        return (phi1(z + h) - phi1(z)) / h;
    }
    // sum_{k>=1} h^{k-1} I_k(z) / k!, truncation below h^5 / 6!
    let moments = exp_moments::<7>(z);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut hp = Complex64::new(1.0, 0.0);
    let mut fact = 1.0;
    for (k, mk) in moments.iter().enumerate().skip(1) {
        fact *= k as f64;
        acc += hp * mk / fact;
        hp *= h;
    }
    acc
}

/// `int_0^tau u^m exp(-a u) du` for `a > 0`.
pub fn power_moment(m: u32, a: f64, tau: f64) -> f64 {
    let x = a * tau;
    if x <= m as f64 + 30.0 {
        // Kummer form of the lower incomplete gamma: positive terms only.
        let mut term = 1.0 / (m as f64 + 1.0);
        let mut acc = term;
        for j in 1..10_000 {
            term *= x / (m as f64 + 1.0 + j as f64);
            acc += term;
            if term < 1e-18 * acc {
                break;
            }
        }
        tau.powi(m as i32 + 1) * (-x).exp() * acc
    } else {
        let mut term = (-x).exp();
        let mut tail = term;
        let mut factorial = 1.0;
        for j in 1..=m {
            term *= x / j as f64;
            tail += term;
            factorial *= j as f64;
        }
        factorial / a.powi(m as i32 + 1) * (1.0 - tail)
    }
}
