//! Matrix elements of the no-decay propagator `X_t = exp(-i H_e t)`.
//!
//! Inside each excitation block `{|e,n-1>, |g,n>}` the propagator is built
//! from `C_n(t) = cos(t B_n)` and `S_n(t) = sin(t B_n) / B_n` (time in `1/g`).
//! `S_n` is entire in `B_n^2`, so `B_n = 0` needs no special casing beyond a
//! series for small arguments.

use num_complex::Complex64;

use crate::error::{QjsError, Result};
use crate::params::{spectral_root, DetectorParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Returns `exp(-damping) * (cos(t B), sin(t B) / B)`.
///
/// The damping is folded into the exponentials so that large `|Im(t B)|`
/// never overflows as long as the net exponent is bounded.
pub fn damped_cos_sin(root: Complex64, t: f64, damping: f64) -> (Complex64, Complex64) {
    let z = root * t;
    let up = (I * z - damping).exp();
    let down = (-I * z - damping).exp();
    let cos = 0.5 * (up + down);
    let sin_over_root = if z.norm() < 1e-2 {
        let z2 = z * z;
        let series = 1.0 - z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0)));
        series * t * (-damping).exp()
    } else {
        (up - down) / (2.0 * I * root)
    };
    (cos, sin_over_root)
}

/// `exp(-damping) * [C_n(t) - i delta S_n(t)]`, i.e. `chi_n(t)` without the
/// carrier phase `exp(-i omega t / 2)`.
pub fn damped_chi(root: Complex64, delta: Complex64, t: f64, damping: f64) -> Complex64 {
    let (c, s) = damped_cos_sin(root, t, damping);
    c - I * delta * s
}

/// One evaluation of `C_n`, `S_n` and `chi_n` at time `t` (units of `1/g`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiEval {
    pub n: usize,
    pub t: f64,
    pub chi: Complex64,
    pub s: Complex64,
    pub c: Complex64,
}

impl ChiEval {
    pub fn new(n: usize, t: f64, params: &DetectorParams) -> Self {
        let delta = params.delta();
        let root = spectral_root(n, delta);
        let (c, s) = damped_cos_sin(root, t, 0.0);
        let phase = (-0.5 * I * params.carrier() * t).exp();
        ChiEval {
            n,
            t,
            chi: phase * (c - I * delta * s),
            s,
            c,
        }
    }

    /// `C_n^2 + (n + delta^2) S_n^2 - 1`, relative to the size of its terms.
    /// Zero up to round-off; the terms grow like `exp(2 |Im B_n| t)`.
    pub fn identity_residual(&self, params: &DetectorParams) -> f64 {
        let w = params.delta() * params.delta() + self.n as f64;
        let (cc, ss) = (self.c * self.c, w * self.s * self.s);
        (cc + ss - 1.0).norm() / cc.norm().max(ss.norm()).max(1.0)
    }
}

/// Damped squared amplitudes of one excitation block as functions of the
/// dimensionless time `u = gamma t`. Each carries its share `exp(-a u)` of
/// the overall window factor, `a = 1 + 2 nbar`.
#[derive(Debug, Clone, Copy)]
pub struct BlockAmplitudes {
    root: Complex64,
    delta: Complex64,
    inv_b: f64,
    half_decay: f64,
}

impl BlockAmplitudes {
    pub fn new(n: usize, params: &DetectorParams) -> Result<Self> {
        if params.b() == 0.0 {
            return Err(QjsError::BiasOff);
        }
        Ok(BlockAmplitudes {
            root: spectral_root(n, params.delta()),
            delta: params.delta(),
            inv_b: 1.0 / params.b(),
            half_decay: 0.5 * params.window_decay(),
        })
    }

    /// `exp(-a u) |S_n(u)|^2`: photon absorbed (or emitted) across the block.
    pub fn transfer(&self, u: f64) -> f64 {
        damped_cos_sin(self.root, u * self.inv_b, self.half_decay * u).1.norm_sqr()
    }

    /// `exp(-a u) |chi_n(u)|^2`: sensor stays excited.
    pub fn excited(&self, u: f64) -> f64 {
        damped_chi(self.root, self.delta, u * self.inv_b, self.half_decay * u).norm_sqr()
    }

    /// `exp(-a u) |chi_n(-u)|^2`: sensor stays in the ground state.
    pub fn ground(&self, u: f64) -> f64 {
        damped_chi(self.root, self.delta, -u * self.inv_b, self.half_decay * u).norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_over_root_is_continuous_through_zero_root() {
        let t = 0.7;
        let (_, s0) = damped_cos_sin(Complex64::new(0.0, 0.0), t, 0.0);
        assert!((s0.re - t).abs() < 1e-16);
        let (_, s_small) = damped_cos_sin(Complex64::new(0.0141, 0.0), t, 0.0);
        let (_, s_large) = damped_cos_sin(Complex64::new(0.0143, 0.0), t, 0.0);
        let exact = |r: f64| (r * t).sin() / r;
        assert!((s_small.re - exact(0.0141)).abs() < 1e-15);
        assert!((s_large.re - exact(0.0143)).abs() < 1e-15);
    }

    #[test]
    fn ground_state_vacuum_decays_at_two_nbar() {
        // |g,0> is uncoupled: exp(-a u)|chi_0(-u)|^2 = exp(-2 nbar u)
        let p = DetectorParams::from_detuning(3.0, 2.5, 10.0, 0.2).unwrap();
        let amp = BlockAmplitudes::new(0, &p).unwrap();
        for &u in &[0.0, 0.5, 3.0, 40.0, 1e4] {
            let expected = (-0.4f64 * u).exp();
            assert!((amp.ground(u) - expected).abs() < 1e-12 * expected.max(1e-300));
        }
    }

    #[test]
    fn no_overflow_at_long_times() {
        let p = DetectorParams::from_detuning(0.0, 380.0, 5e5, 1e-11).unwrap();
        for n in [0, 1, 5] {
            let amp = BlockAmplitudes::new(n, &p).unwrap();
            for &u in &[1e3, 1e5, 5e5] {
                assert!(amp.excited(u).is_finite());
                assert!(amp.ground(u).is_finite());
                assert!(amp.transfer(u).is_finite());
            }
        }
    }

    #[test]
    fn chi_at_origin_is_one() {
        let p = DetectorParams::from_detuning(1.0, 0.5, 1.0, 0.0).unwrap().with_carrier(7.0);
        let e = ChiEval::new(3, 0.0, &p);
        assert_eq!(e.chi, Complex64::new(1.0, 0.0));
        assert_eq!(e.s, Complex64::new(0.0, 0.0));
    }
}
