//! Time-averaged jump coefficients.
//!
//! In the Fock basis the averaged jump superoperator acts on the diagonal as
//!
//! ```text
//! J rho = sum_n rho_nn [ n B_n |n-1><n-1| + D_n |n><n| + (n+1) E_n |n+1><n+1| ]
//! ```
//!
//! with `B_n` the bright (photoabsorption) rate, `D_n` the dark rate driven by
//! the amplifier's intrinsic excitations and `E_n` the emission rate. All
//! three are returned in units of `g`. Bright and dark use closed forms; the
//! emission term is a triple integral evaluated by nested quadrature.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QjsError, Result};
use crate::params::{spectral_root, spectral_terms, DetectorParams, SpectralTerms};
use crate::propagator::BlockAmplitudes;
use crate::quad::{self, Cumulative, Tolerance};
use crate::special::{exp_window, phi1_divided_difference, power_moment};

/// Default truncation of the coefficient tables.
pub const DEFAULT_N_MAX: usize = 128;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `int_0^tau exp(-u (1 + 2 nbar)) cos(u phi) du`.
pub fn g_integral(tau: f64, nbar: f64, phi: f64) -> f64 {
    let a = 1.0 + 2.0 * nbar;
    exp_window(Complex64::new(a, -phi), tau).re
}

/// `int_0^tau exp(-u (1 + 2 nbar)) cosh(u xi) du`; continuous through the
/// degenerate points `xi = +-(1 + 2 nbar)`.
pub fn f_integral(tau: f64, nbar: f64, xi: f64) -> f64 {
    let a = 1.0 + 2.0 * nbar;
    0.5 * (exp_window(Complex64::new(a - xi, 0.0), tau).re + exp_window(Complex64::new(a + xi, 0.0), tau).re)
}

/// `(F_n - G_n) / |B_n|^2`, i.e. `2 int_0^tau exp(-a u) |S_n(u)|^2 du`.
///
/// Near `B_n = 0` the difference is expanded in powers of `xi^2` and
/// `phi^2` so the ratio stays finite and accurate.
fn bright_ratio(terms: &SpectralTerms, a: f64, tau: f64, b: f64) -> f64 {
    let spread = terms.xi.abs().max(terms.phi.abs());
    if spread * tau.min(1.0 / a) > 0.1 {
        bright_ratio_direct(terms, a, tau)
    } else {
        bright_ratio_series(terms, a, tau, b)
    }
}

fn bright_ratio_direct(terms: &SpectralTerms, a: f64, tau: f64) -> f64 {
    let (xi, phi) = (terms.xi, terms.phi);
    let f = 0.5 * (exp_window(Complex64::new(a - xi, 0.0), tau).re + exp_window(Complex64::new(a + xi, 0.0), tau).re);
    let g = exp_window(Complex64::new(a, -phi), tau).re;
    (f - g) / terms.root.norm_sqr()
}

fn bright_ratio_series(terms: &SpectralTerms, a: f64, tau: f64, b: f64) -> f64 {
    // cosh(xi u) - cos(phi u) = sum_k (xi^2k - (-phi^2)^k) u^2k / (2k)!
    // and (X^k - Y^k) / (X - Y) = sum_i X^i Y^(k-1-i) with X = xi^2, Y = -phi^2.
    let (x, y) = (terms.xi * terms.xi, -terms.phi * terms.phi);
    let mut acc = 0.0;
    let mut factorial = 1.0;
    for k in 1..60u32 {
        factorial *= (2 * k - 1) as f64 * (2 * k) as f64;
        let mut quotient = 0.0;
        for i in 0..k {
            quotient += x.powi(i as i32) * y.powi((k - 1 - i) as i32);
        }
        let term = quotient * power_moment(2 * k, a, tau) / factorial;
        acc += term;
        if term.abs() <= 1e-17 * acc.abs() {
            break;
        }
    }
    // |B|^2 = b^2 (xi^2 + phi^2) / 4
    4.0 * acc / (b * b)
}

/// Bright rate `J_n^(B)` in units of `g`.
pub fn bright_coeff(n: usize, params: &DetectorParams) -> Result<f64> {
    let terms = spectral_terms(n, params)?;
    bright_from_terms(&terms, params)
}

fn bright_from_terms(terms: &SpectralTerms, params: &DetectorParams) -> Result<f64> {
    let (b, tau, nbar) = (params.b(), params.tau(), params.nbar());
    let ratio = bright_ratio(terms, params.window_decay(), tau, b);
    clamp_round_off(b * (1.0 + nbar) / tau * ratio, b * (1.0 + nbar) / tau * ratio.abs(), "bright")
}

#[doc(hidden)]
pub fn bright_coeff_with_root(n: usize, root: Complex64, params: &DetectorParams) -> Result<f64> {
    bright_from_terms(&SpectralTerms::from_root(n, root, params.b())?, params)
}

fn clamp_round_off(value: f64, scale: f64, what: &str) -> Result<f64> {
    if !value.is_finite() {
        return Err(QjsError::Residue(format!("{what} coefficient is not finite")));
    }
    if value >= 0.0 {
        Ok(value)
    } else if -value <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        Ok(0.0)
    } else {
        Err(QjsError::Residue(format!("{what} coefficient negative beyond round-off: {value:e}")))
    }
}

/// Which variant of the dark double sum to evaluate. `SignFault` flips the
/// sign inside the first pair of branch weights; it exists only so the
/// self-check can prove it detects a corrupted formula.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DarkFormula {
    Exact,
    SignFault,
}

/// Dark rate `J_n^(D)` in units of `g`, excluding the additive constant.
pub fn dark_coeff(n: usize, params: &DetectorParams) -> Result<f64> {
    dark_coeff_variant(n, params, DarkFormula::Exact)
}

#[doc(hidden)]
pub fn dark_coeff_variant(n: usize, params: &DetectorParams, formula: DarkFormula) -> Result<f64> {
    if params.b() == 0.0 {
        return Err(QjsError::BiasOff);
    }
    if params.nbar() == 0.0 {
        return Ok(0.0);
    }
    let delta = params.delta();
    let w_lo = delta * delta + n as f64;
    let w_hi = w_lo + 1.0;
    // The branch weights carry delta / B; at B = 0 the sum is a removable
    // singularity, resolved by averaging two evaluations at B^2 +- eps.
    const NEAR_ZERO: f64 = 1e-6;
    const SHIFT: f64 = 1e-4;
    if w_lo.norm() < NEAR_ZERO || w_hi.norm() < NEAR_ZERO {
        let shift = |w: Complex64, s: f64| if w.norm() < NEAR_ZERO { w + s } else { w };
        let root = |w: Complex64| {
            let r = w.sqrt();
            if r.re < 0.0 {
                -r
            } else {
                r
            }
        };
        let plus = dark_from_roots(root(shift(w_lo, SHIFT)), root(shift(w_hi, SHIFT)), params, formula)?;
        let minus = dark_from_roots(root(shift(w_lo, -SHIFT)), root(shift(w_hi, -SHIFT)), params, formula)?;
        return Ok(0.5 * (plus + minus));
    }
    dark_from_roots(spectral_root(n, delta), spectral_root(n + 1, delta), params, formula)
}

#[doc(hidden)]
pub fn dark_coeff_with_roots(root_n: Complex64, root_n1: Complex64, params: &DetectorParams) -> Result<f64> {
    dark_from_roots(root_n, root_n1, params, DarkFormula::Exact)
}

/// `J^(D) = b nbar (1 + nbar) / (4 tau) * sum_jk W_j W_k^* K_jk` where
/// `K_jk = int_0^tau du exp(i alpha_jk u) int_0^u du1 exp(i eta_jk u1)`,
/// `alpha_jk = i a + (w_j - w_k^*)/b`, `eta_jk = (y_j - y_k^*)/b`.
fn dark_from_roots(bn: Complex64, bn1: Complex64, params: &DetectorParams, formula: DarkFormula) -> Result<f64> {
    let (b, tau, nbar) = (params.b(), params.tau(), params.nbar());
    let a = params.window_decay();
    let delta = params.delta();
    let (lo_minus, lo_plus) = match formula {
        DarkFormula::Exact => (1.0 - delta / bn, 1.0 + delta / bn),
        DarkFormula::SignFault => (1.0 + delta / bn, 1.0 + delta / bn),
    };
    let hi_minus = 1.0 - delta / bn1;
    let hi_plus = 1.0 + delta / bn1;
    let weights = [hi_minus * lo_minus, hi_minus * lo_plus, hi_plus * lo_minus, hi_plus * lo_plus];
    let w = [bn1, bn1, -bn1, -bn1];
    let y = [-(bn1 + bn), bn - bn1, bn1 - bn, bn1 + bn];

    let mut sum = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for j in 0..4 {
        for k in 0..4 {
            let alpha = I * a + (w[j] - w[k].conj()) / b;
            let eta = (y[j] - y[k].conj()) / b;
            let kernel = phi1_divided_difference(I * alpha * tau, I * eta * tau) * (tau * tau);
            let term = weights[j] * weights[k].conj() * kernel;
            scale += term.norm();
            sum += term;
        }
    }
    if sum.im.abs() > 1e-10 * scale {
        return Err(QjsError::Residue(format!(
            "dark sum imaginary residue {:e} of scale {:e}",
            sum.im, scale
        )));
    }
    let prefactor = b * nbar * (1.0 + nbar) / (4.0 * tau);
    clamp_round_off(prefactor * sum.re, prefactor * scale, "dark")
}

/// Emission rate `J_n^(E)` in units of `g` (the `(n+1)` weight of the
/// creation operator is applied by the caller).
///
/// Evaluates `2b(1+nbar)(2 nbar)^2 / tau` times the integral over the simplex
/// `s0 + s1 + s2 <= tau` of
/// `ground_n(s2) * transfer_{n+1}(s1) * excited_{n+2}(s0)`: the sensor waits in
/// `|g,n>`, is excited, hands a photon to the field, is excited again and
/// finally decays.
pub fn emission_coeff(n: usize, params: &DetectorParams, quad_tol: f64) -> Result<f64> {
    if !(quad_tol > 0.0) {
        return Err(QjsError::Domain(format!("quadrature tolerance must be > 0, got {quad_tol}")));
    }
    if params.b() == 0.0 {
        return Err(QjsError::BiasOff);
    }
    let nbar = params.nbar();
    if nbar == 0.0 {
        return Ok(0.0);
    }
    let tau = params.tau();
    let waiting = BlockAmplitudes::new(n, params)?;
    let handover = BlockAmplitudes::new(n + 1, params)?;
    let final_block = BlockAmplitudes::new(n + 2, params)?;
    let panel = oscillation_panel(&[n, n + 1, n + 2], params)?;
    let mesh = quad::geometric_breakpoints(tau, panel);
    let inner_tol = Tolerance::relative(0.05 * quad_tol).with_max_panels(8000);

    // Convolution form: with K(v) = int_0^v transfer(s1) excited(v - s1) and
    // the running integral of the ground factor, the simplex integral is
    // int_0^tau K(v) Ground(tau - v) dv.
    let mut ground = Cumulative::build(|s| Ok(waiting.ground(s)), &mesh, inner_tol)?;
    let handed = |v: f64| -> Result<f64> {
        if v <= 0.0 {
            return Ok(0.0);
        }
        quad::integrate(
            |s1| Ok(handover.transfer(s1) * final_block.excited(v - s1)),
            &quad::two_sided_breakpoints(v, panel),
            Tolerance::relative(0.2 * quad_tol).with_abs(1e-300).with_max_panels(8000),
        )
        .map(|e| e.value)
    };
    let outer = quad::integrate(
        |v| Ok(handed(v)? * ground.at(tau - v)?),
        &mesh,
        Tolerance::relative(quad_tol).with_max_panels(8000),
    )?;
    let b = params.b();
    let value = 2.0 * b * (1.0 + nbar) * (2.0 * nbar).powi(2) / tau * outer.value;
    clamp_round_off(value, value.abs(), "emission")
}

/// Initial panel width: at most one unit of `gamma t` and at most one period
/// of the fastest block oscillation.
pub(crate) fn oscillation_panel(blocks: &[usize], params: &DetectorParams) -> Result<f64> {
    let mut fastest: f64 = 1.0;
    for &n in blocks {
        let t = spectral_terms(n, params)?;
        fastest = fastest.max(t.phi.abs()).max(t.xi.abs());
    }
    Ok(1.0 / fastest)
}

/// Coefficient tables for `n = 0..=n_max`, units of `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct QjsCoefficients {
    pub n_max: usize,
    pub bright: Vec<f64>,
    pub dark: Vec<f64>,
    /// All zeros unless the emission term was requested.
    pub emission: Vec<f64>,
    pub emission_computed: bool,
}

impl QjsCoefficients {
    /// Builds a table from explicit arrays (all of length `n_max + 1`).
    pub fn from_arrays(bright: Vec<f64>, dark: Vec<f64>, emission: Vec<f64>) -> Result<Self> {
        let len = bright.len();
        if len < 2 || dark.len() != len || emission.len() != len {
            return Err(QjsError::Domain("coefficient arrays must share a length >= 2".into()));
        }
        for v in bright.iter().chain(&dark).chain(&emission) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(QjsError::Domain(format!("coefficients must be finite and >= 0, got {v}")));
            }
        }
        let emission_computed = emission.iter().any(|&e| e > 0.0);
        Ok(QjsCoefficients {
            n_max: len - 1,
            bright,
            dark,
            emission,
            emission_computed,
        })
    }
}

/// Fills bright and dark tables for `n = 0..=n_max`.
pub fn qjs(params: &DetectorParams, n_max: usize) -> Result<QjsCoefficients> {
    build_table(params, n_max, None)
}

/// As [`qjs`], also integrating the emission term to relative tolerance `quad_tol`.
pub fn qjs_with_emission(params: &DetectorParams, n_max: usize, quad_tol: f64) -> Result<QjsCoefficients> {
    build_table(params, n_max, Some(quad_tol))
}

fn build_table(params: &DetectorParams, n_max: usize, emission_tol: Option<f64>) -> Result<QjsCoefficients> {
    if n_max < 1 {
        return Err(QjsError::Domain("n_max must be >= 1".into()));
    }
    let rows: Vec<(f64, f64, f64)> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let bright = bright_coeff(n, params)?;
            let dark = dark_coeff(n, params)?;
            let emission = match emission_tol {
                Some(tol) => emission_coeff(n, params, tol)?,
                None => 0.0,
            };
            Ok((bright, dark, emission))
        })
        .collect::<Result<_>>()?;
    Ok(QjsCoefficients {
        n_max,
        bright: rows.iter().map(|r| r.0).collect(),
        dark: rows.iter().map(|r| r.1).collect(),
        emission: rows.iter().map(|r| r.2).collect(),
        emission_computed: emission_tol.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Literal closed forms, valid away from the degenerate points.
    fn g_textbook(tau: f64, nbar: f64, phi: f64) -> f64 {
        let a = 1.0 + 2.0 * nbar;
        (a - (-tau * a).exp() * (a * (tau * phi).cos() - phi * (tau * phi).sin())) / (a * a + phi * phi)
    }

    fn f_textbook(tau: f64, nbar: f64, xi: f64) -> f64 {
        let a = 1.0 + 2.0 * nbar;
        (a - (-tau * a).exp() * (a * (tau * xi).cosh() + xi * (tau * xi).sinh())) / (a * a - xi * xi)
    }

    #[test]
    fn g_integral_examples() {
        assert!((g_integral(1.0, 0.0, 0.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(g_integral(1e-300, 0.0, 3.0).abs() < 1e-299);
        // value frozen from adaptive quadrature of the integrand
        assert!((g_integral(10.0, 0.0, 1.7320508) - 0.249_979_886_315_794).abs() < 1e-14);
    }

    #[test]
    fn f_integral_examples() {
        let degenerate = 0.5 + (1.0 - (-2.0f64).exp()) / 4.0;
        assert!((f_integral(1.0, 0.0, 1.0) - degenerate).abs() < 1e-15);
        assert!((f_integral(1.0, 0.0, -1.0) - degenerate).abs() < 1e-15);
        assert!((f_integral(1.0, 0.0, 0.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((degenerate - 0.716166).abs() < 1e-6);
    }

    #[test]
    fn stable_forms_match_textbook_where_well_conditioned() {
        for &tau in &[0.5, 1.0, 10.0, 50.0] {
            for &nbar in &[0.0, 0.01, 0.1] {
                for &x in &[0.0, 0.3, 0.9, 1.7, 4.0] {
                    let g = g_integral(tau, nbar, x);
                    assert!((g - g_textbook(tau, nbar, x)).abs() <= 1e-12 * g.abs().max(1e-300));
                    let a = 1.0 + 2.0 * nbar;
                    if (a * a - x * x).abs() > 1e-3 && x * tau < 30.0 {
                        let f = f_integral(tau, nbar, x);
                        assert!((f - f_textbook(tau, nbar, x)).abs() <= 1e-12 * f, "tau {tau} nbar {nbar} xi {x}");
                    }
                }
            }
        }
    }

    #[test]
    fn bright_vanishing_root_is_finite() {
        // q = 0, b = 2, n = 1: B_1 = 0
        let p = DetectorParams::from_detuning(0.0, 2.0, 10.0, 0.0).unwrap();
        let at = bright_coeff(1, &p).unwrap();
        assert!(at.is_finite() && at > 0.0);
        let near = bright_coeff(1, &p.with_b(2.0 + 1e-7).unwrap()).unwrap();
        assert!((at - near).abs() < 1e-6 * at);
    }

    #[test]
    fn bright_series_and_direct_agree() {
        // |B_1| of order 0.05: both branches are accurate here
        for &(q, b, tau) in &[(0.0, 2.0025, 10.0), (0.1, 2.0, 10.0), (0.0, 1.9975, 3.0), (0.03, 2.001, 50.0)] {
            let p = DetectorParams::from_detuning(q, b, tau, 0.01).unwrap();
            let t = spectral_terms(1, &p).unwrap();
            let a = p.window_decay();
            let direct = bright_ratio_direct(&t, a, tau);
            let series = bright_ratio_series(&t, a, tau, b);
            assert!((direct - series).abs() < 1e-10 * series, "{direct} vs {series}");
        }
    }

    #[test]
    fn zero_nbar_kills_dark_and_emission() {
        let p = DetectorParams::from_detuning(1.0, 1.0, 10.0, 0.0).unwrap();
        let table = qjs_with_emission(&p, 4, 1e-6).unwrap();
        assert!(table.dark.iter().all(|&d| d == 0.0));
        assert!(table.emission.iter().all(|&e| e == 0.0));
        assert!(table.bright.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn bias_off_errors() {
        let p = DetectorParams::from_detuning(1.0, 0.0, 10.0, 0.1).unwrap();
        assert_eq!(bright_coeff(1, &p).unwrap_err(), QjsError::BiasOff);
        assert_eq!(dark_coeff(1, &p).unwrap_err(), QjsError::BiasOff);
        assert_eq!(emission_coeff(1, &p, 1e-6).unwrap_err(), QjsError::BiasOff);
    }

    #[test]
    fn table_needs_two_rows() {
        let p = DetectorParams::from_detuning(1.0, 1.0, 10.0, 0.0).unwrap();
        assert!(matches!(qjs(&p, 0), Err(QjsError::Domain(_))));
    }
}
