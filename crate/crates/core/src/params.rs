//! Detector parameters and the per-photon-number spectral roots.
//!
//! Internally every time is measured in `1/g` (or in `1/gamma` inside the
//! time averages) and every rate in units of `g`; `g` itself only enters
//! when a rate is converted back to s^-1.

use num_complex::Complex64;

use crate::error::{QjsError, Result};

/// Exact speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Dimensionless detuning `q = (omega0 - omega) / g` from wavelengths in metres
/// and the coupling `g` in rad/s.
pub fn detuning_q(lambda: f64, lambda0: f64, g: f64) -> Result<f64> {
    for (name, v) in [("lambda", lambda), ("lambda0", lambda0), ("g", g)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(QjsError::Domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let q = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * (1.0 / lambda0 - 1.0 / lambda) / g;
    if !q.is_finite() {
        return Err(QjsError::Domain(format!("detuning overflowed for g = {g}")));
    }
    Ok(q)
}

/// Sensor and field wavelengths, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavelengths {
    pub sensor: f64,
    pub field: f64,
}

/// Physical and dimensionless parameters of the sensor + amplifier model.
///
/// Immutable; the `with_*` methods return modified copies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    g: f64,
    q: f64,
    b: f64,
    tau: f64,
    nbar: f64,
    dark_const: f64,
    carrier: f64,
    wavelengths: Option<Wavelengths>,
}

impl Default for DetectorParams {
    /// Reference detector: 500 nm sensor at resonance, `g = 1e11`,
    /// `tau = 5e5`, `nbar = 1e-11`, biased at `b = 380`.
    fn default() -> Self {
        DetectorParams::from_wavelengths(1e11, 500e-9, 500e-9, 380.0, 5e5, 1e-11)
            .expect("reference parameters are valid")
    }
}

fn check_non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(QjsError::Domain(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(QjsError::Domain(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl DetectorParams {
    /// Builds parameters from wavelengths in metres and `g` in rad/s.
    pub fn from_wavelengths(g: f64, lambda0: f64, lambda: f64, b: f64, tau: f64, nbar: f64) -> Result<Self> {
        let q = detuning_q(lambda, lambda0, g)?;
        check_non_negative("b", b)?;
        check_positive("tau", tau)?;
        check_non_negative("nbar", nbar)?;
        let p = DetectorParams {
            g,
            q,
            b,
            tau,
            nbar,
            dark_const: 0.0,
            carrier: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (lambda * g),
            wavelengths: Some(Wavelengths {
                sensor: lambda0,
                field: lambda,
            }),
        };
        p.warn_weak_coupling();
        Ok(p)
    }

    /// Builds dimensionless parameters directly from the detuning `q`
    /// (`g = 1`, rotating frame).
    pub fn from_detuning(q: f64, b: f64, tau: f64, nbar: f64) -> Result<Self> {
        if !q.is_finite() {
            return Err(QjsError::Domain(format!("q must be finite, got {q}")));
        }
        check_non_negative("b", b)?;
        check_positive("tau", tau)?;
        check_non_negative("nbar", nbar)?;
        Ok(DetectorParams {
            g: 1.0,
            q,
            b,
            tau,
            nbar,
            dark_const: 0.0,
            carrier: 0.0,
            wavelengths: None,
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn nbar(&self) -> f64 {
        self.nbar
    }
    /// Additive dark rate that does not excite the sensor, units of `g`.
    pub fn dark_const(&self) -> f64 {
        self.dark_const
    }
    pub fn wavelengths(&self) -> Option<Wavelengths> {
        self.wavelengths
    }

    /// `gamma = b g`, rad/s.
    pub fn gamma(&self) -> f64 {
        self.b * self.g
    }

    /// `delta = (q - i b) / 2`.
    pub fn delta(&self) -> Complex64 {
        Complex64::new(0.5 * self.q, -0.5 * self.b)
    }

    /// Decay constant `1 + 2 nbar` of the time-averaging window (per unit `gamma t`).
    pub fn window_decay(&self) -> f64 {
        1.0 + 2.0 * self.nbar
    }

    /// Field frequency in units of `g`; zero in the rotating frame.
    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    /// Sensor frequency in units of `g`.
    pub fn sensor_frequency(&self) -> f64 {
        self.carrier + self.q
    }

    /// `true` when `omega, omega0 >= 100 max(gamma, g)`. Only meaningful
    /// for parameters built from wavelengths.
    pub fn weak_coupling_ok(&self) -> bool {
        let scale = 100.0 * self.b.max(1.0);
        self.carrier >= scale && self.sensor_frequency() >= scale
    }

    /// Logs a violated weak-coupling flag, once per process; sweeps would
    /// otherwise repeat it at every point.
    fn warn_weak_coupling(&self) {
        static WARNED: std::sync::Once = std::sync::Once::new();
        if self.wavelengths.is_some() && !self.weak_coupling_ok() {
            WARNED.call_once(|| log::warn!(
                "weak-coupling assumption violated: omega/g = {:.3e}, omega0/g = {:.3e}, b = {}",
                self.carrier,
                self.sensor_frequency(),
                self.b
            ));
        }
    }

    pub fn with_b(mut self, b: f64) -> Result<Self> {
        check_non_negative("b", b)?;
        self.b = b;
        self.warn_weak_coupling();
        Ok(self)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        check_positive("tau", tau)?;
        self.tau = tau;
        Ok(self)
    }

    pub fn with_nbar(mut self, nbar: f64) -> Result<Self> {
        check_non_negative("nbar", nbar)?;
        self.nbar = nbar;
        Ok(self)
    }

    pub fn with_dark_const(mut self, dark_const: f64) -> Result<Self> {
        check_non_negative("dark_const", dark_const)?;
        self.dark_const = dark_const;
        Ok(self)
    }

    /// Replaces the field wavelength (metres); requires wavelength-built parameters.
    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        let w = self
            .wavelengths
            .ok_or_else(|| QjsError::Domain("parameters were built from a bare detuning".into()))?;
        let mut p = DetectorParams::from_wavelengths(self.g, w.sensor, lambda, self.b, self.tau, self.nbar)?;
        p.dark_const = self.dark_const;
        Ok(p)
    }

    /// Replaces the coupling `g` (rad/s), recomputing `q` from the wavelengths.
    pub fn with_g(self, g: f64) -> Result<Self> {
        match self.wavelengths {
            Some(w) => {
                let mut p = DetectorParams::from_wavelengths(g, w.sensor, w.field, self.b, self.tau, self.nbar)?;
                p.dark_const = self.dark_const;
                Ok(p)
            }
            None => {
                check_positive("g", g)?;
                Ok(DetectorParams { g, ..self })
            }
        }
    }

    /// Replaces the detuning and drops the wavelengths.
    pub fn with_detuning(self, q: f64) -> Result<Self> {
        let mut p = DetectorParams::from_detuning(q, self.b, self.tau, self.nbar)?;
        p.g = self.g;
        p.dark_const = self.dark_const;
        Ok(p)
    }

    /// Overrides the field frequency (units of `g`) used for lab-frame propagators.
    pub fn with_carrier(mut self, carrier: f64) -> Self {
        self.carrier = carrier;
        self
    }
}

/// Principal square root of `n + delta^2`; on the branch cut the root with
/// non-negative imaginary part is chosen.
pub fn spectral_root(n: usize, delta: Complex64) -> Complex64 {
    let w = delta * delta + n as f64;
    let mut r = w.sqrt();
    if r.re == 0.0 {
        r.re = 0.0;
        if r.im < 0.0 {
            r = -r;
        }
    }
    r
}

/// `B_n` and the two real phases `phi_n = 2 Re(B_n)/b`, `xi_n = 2 Im(B_n)/b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralTerms {
    pub n: usize,
    pub root: Complex64,
    pub phi: f64,
    pub xi: f64,
}

impl SpectralTerms {
    /// Builds the terms from an explicit root; used to exercise the sign freedom.
    pub fn from_root(n: usize, root: Complex64, b: f64) -> Result<Self> {
        if b == 0.0 {
            return Err(QjsError::BiasOff);
        }
        Ok(SpectralTerms {
            n,
            root,
            phi: 2.0 * root.re / b,
            xi: 2.0 * root.im / b,
        })
    }
}

pub fn spectral_terms(n: usize, params: &DetectorParams) -> Result<SpectralTerms> {
    SpectralTerms::from_root(n, spectral_root(n, params.delta()), params.b())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detuning_examples() {
        assert_eq!(detuning_q(500e-9, 500e-9, 1e11).unwrap(), 0.0);
        let q = detuning_q(1000e-9, 500e-9, 1e11).unwrap();
        // 2 pi c (1/500nm - 1/1000nm) / 1e11, evaluated by hand
        let hand = 2.0 * std::f64::consts::PI * 299_792_458.0 * 1e6 / 1e11;
        assert!((q - hand).abs() < 1e-9 * hand);
        assert!((q - 1.8837e4).abs() < 1.0);
        let q3 = detuning_q(1500e-9, 500e-9, 1e11).unwrap();
        assert!((q3 - 2.5116e4).abs() < 1.0);
    }

    #[test]
    fn detuning_rejects_non_positive() {
        assert!(matches!(detuning_q(0.0, 500e-9, 1e11), Err(QjsError::Domain(_))));
        assert!(matches!(detuning_q(500e-9, -1.0, 1e11), Err(QjsError::Domain(_))));
        assert!(matches!(detuning_q(500e-9, 500e-9, 0.0), Err(QjsError::Domain(_))));
    }

    #[test]
    fn detuning_antisymmetric() {
        let a = detuning_q(700e-9, 450e-9, 3e10).unwrap();
        let b = detuning_q(450e-9, 700e-9, 3e10).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn spectral_examples_at_resonance() {
        let p = DetectorParams::from_detuning(0.0, 2.0, 1.0, 0.0).unwrap();
        assert_eq!(p.delta(), Complex64::new(0.0, -1.0));
        let s0 = spectral_terms(0, &p).unwrap();
        assert_eq!(s0.root, Complex64::new(0.0, 1.0));
        assert_eq!((s0.phi, s0.xi), (0.0, 1.0));
        let s1 = spectral_terms(1, &p).unwrap();
        assert_eq!(s1.root, Complex64::new(0.0, 0.0));
        let s2 = spectral_terms(2, &p).unwrap();
        assert_eq!(s2.root, Complex64::new(1.0, 0.0));
        assert_eq!((s2.phi, s2.xi), (1.0, 0.0));
    }

    #[test]
    fn bias_off_is_an_error() {
        let p = DetectorParams::from_detuning(0.5, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(spectral_terms(3, &p).unwrap_err(), QjsError::BiasOff);
    }

    #[test]
    fn root_squares_back_and_is_principal() {
        for &(q, b) in &[(0.0, 0.3), (3.0, 1.0), (-2.0, 7.0), (1e4, 380.0), (0.0, 380.0)] {
            let p = DetectorParams::from_detuning(q, b, 1.0, 0.0).unwrap();
            for n in 0..50 {
                let r = spectral_root(n, p.delta());
                let back = r * r;
                let target = p.delta() * p.delta() + n as f64;
                assert!((back - target).norm() <= 1e-12 * target.norm().max(1.0));
                assert!(r.re > 0.0 || (r.re == 0.0 && r.im >= 0.0));
            }
        }
    }

    #[test]
    fn reference_parameters() {
        let p = DetectorParams::default();
        assert_eq!(p.q(), 0.0);
        assert_eq!(p.gamma(), 380.0 * 1e11);
        // omega / gamma is just under 100 at b = 380
        assert!(!p.weak_coupling_ok());
        assert!(p.with_b(190.0).unwrap().weak_coupling_ok());
        let far = p.with_lambda(1500e-9).unwrap();
        assert!((far.q() - 2.5116e4).abs() < 1.0);
        assert!(p.with_b(-1.0).is_err());
    }
}
