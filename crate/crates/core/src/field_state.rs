//! Diagonal field states and the action of a click on them.

use crate::analytic::QjsCoefficients;
use crate::error::{QjsError, Result};

/// Photon-number distribution `rho_nn`, `n = 0..=n_max`.
///
/// Only diagonal states are representable: after a click the averaged
/// superoperator has no off-diagonal output, so coherences have nothing to
/// act on.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution {
    probs: Vec<f64>,
}

const NORM_TOL: f64 = 1e-12;

impl FockDistribution {
    /// Wraps probabilities that already sum to one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(QjsError::Domain("empty distribution".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(QjsError::Domain("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(QjsError::Domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(FockDistribution { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(QjsError::Domain("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(QjsError::Domain("weights sum to zero".into()));
        }
        Ok(FockDistribution {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(QjsError::Domain(format!("Fock state {n} beyond n_max = {n_max}")));
        }
        let mut probs = vec![0.0; n_max + 1];
        probs[n] = 1.0;
        Ok(FockDistribution { probs })
    }

    pub fn vacuum(n_max: usize) -> Self {
        Self::fock(0, n_max).expect("0 <= n_max")
    }

    /// Bose–Einstein distribution with the given mean, truncated and renormalized.
    pub fn thermal(mean: f64, n_max: usize) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(QjsError::Domain(format!("thermal mean must be >= 0, got {mean}")));
        }
        let ratio = mean / (1.0 + mean);
        Self::from_weights((0..=n_max).map(|n| ratio.powi(n as i32)).collect())
    }

    /// Poisson distribution (coherent-state photon statistics), truncated and renormalized.
    pub fn poisson(mean: f64, n_max: usize) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(QjsError::Domain(format!("poisson mean must be >= 0, got {mean}")));
        }
        let mut weights = Vec::with_capacity(n_max + 1);
        let mut term = (-mean).exp();
        for n in 0..=n_max {
            if n > 0 {
                term *= mean / n as f64;
            }
            weights.push(term);
        }
        Self::from_weights(weights)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Total-variation distance, padding the shorter support with zeros.
    pub fn total_variation(&self, other: &FockDistribution) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        0.5 * (0..len).map(|i| (get(&self.probs, i) - get(&other.probs, i)).abs()).sum::<f64>()
    }
}

/// Result of one click.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOutcome {
    pub state: FockDistribution,
    /// `Tr[J rho]`, units of `g`.
    pub rate: f64,
    /// Fraction of `Tr[J rho]` carried by emission out of the truncated space.
    pub leakage: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JumpOptions {
    /// Drop weight that the emission channel pushes past `n_max` instead of failing.
    pub truncation_absorb: bool,
}

/// Unnormalized post-click weights and the weight lost past `n_max`.
fn jump_weights(rho: &FockDistribution, coeffs: &QjsCoefficients) -> Result<(Vec<f64>, f64)> {
    let top = rho.n_max();
    if top > coeffs.n_max {
        return Err(QjsError::Domain(format!(
            "state reaches n = {top} but coefficients stop at n = {}",
            coeffs.n_max
        )));
    }
    let mut w = vec![0.0; top + 1];
    let mut overflow = 0.0;
    for (n, &p) in rho.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        if n > 0 {
            w[n - 1] += n as f64 * coeffs.bright[n] * p;
        }
        w[n] += coeffs.dark[n] * p;
        let emitted = (n + 1) as f64 * coeffs.emission[n] * p;
        if n < top {
            w[n + 1] += emitted;
        } else {
            overflow += emitted;
        }
    }
    Ok((w, overflow))
}

/// Post-click state `J rho / Tr[J rho]` and the click rate `Tr[J rho]`.
pub fn apply_jump(rho: &FockDistribution, coeffs: &QjsCoefficients, options: JumpOptions) -> Result<JumpOutcome> {
    let (w, overflow) = jump_weights(rho, coeffs)?;
    let kept: f64 = w.iter().sum();
    let rate = kept + overflow;
    if !(rate > 0.0) {
        return Err(QjsError::NoClickPossible);
    }
    let leakage = overflow / rate;
    if overflow > 0.0 && !options.truncation_absorb {
        return Err(QjsError::TruncationOverflow {
            n_max: rho.n_max(),
            leakage,
        });
    }
    if !(kept > 0.0) {
        return Err(QjsError::NoClickPossible);
    }
    Ok(JumpOutcome {
        state: FockDistribution {
            probs: w.into_iter().map(|x| x / kept).collect(),
        },
        rate,
        leakage,
    })
}

/// `Tr[J rho]` in units of `g`, without forming the post-click state.
pub fn click_rate(rho: &FockDistribution, coeffs: &QjsCoefficients) -> Result<f64> {
    let (w, overflow) = jump_weights(rho, coeffs)?;
    Ok(w.iter().sum::<f64>() + overflow)
}

/// Probability of a click within `dt` seconds: `Tr[J rho] g dt`.
pub fn click_probability(rho: &FockDistribution, coeffs: &QjsCoefficients, dt: f64, g: f64) -> Result<f64> {
    if !(dt >= 0.0 && g > 0.0) {
        return Err(QjsError::Domain(format!("need dt >= 0 and g > 0, got dt = {dt}, g = {g}")));
    }
    let p = click_rate(rho, coeffs)? * g * dt;
    if p > 1.0 {
        return Err(QjsError::ResolutionTooCoarse(p));
    }
    Ok(p)
}

/// Dark part of the fitted operator form:
/// `R_D [ |0><0| rho |0><0| + d Lambda n^-beta rho n^-beta Lambda ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedDark {
    pub rate: f64,
    pub d: f64,
    pub beta: f64,
}

/// Jump operators used for comparison with the microscopic coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpModel {
    /// `O = a`.
    SrinivasDavies,
    /// `O = (n + 1)^(-1/2) a`.
    Exponential,
    /// `O = (n + 1)^(-beta) a`, optionally with the fitted dark term.
    PowerLaw { beta: f64, dark: Option<FittedDark> },
    /// Bright channel of a computed coefficient table.
    Microscopic(QjsCoefficients),
}

/// Applies the bright jump of `model` with overall rate `strength` and
/// returns the normalized post-click distribution.
pub fn model_comparator(rho: &FockDistribution, model: &JumpModel, strength: f64) -> Result<FockDistribution> {
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(QjsError::Domain(format!("strength must be > 0, got {strength}")));
    }
    let top = rho.n_max();
    let mut w = vec![0.0; top + 1];
    let power_law = |w: &mut [f64], beta: f64| {
        for n in 1..=top {
            w[n - 1] += strength * (n as f64).powf(1.0 - 2.0 * beta) * rho.probs[n];
        }
    };
    match model {
        JumpModel::SrinivasDavies => power_law(&mut w, 0.0),
        JumpModel::Exponential => power_law(&mut w, 0.5),
        JumpModel::PowerLaw { beta, dark } => {
            power_law(&mut w, *beta);
            if let Some(dark) = dark {
                w[0] += dark.rate * rho.probs[0];
                for n in 1..=top {
                    w[n] += dark.rate * dark.d * (n as f64).powf(-2.0 * dark.beta) * rho.probs[n];
                }
            }
        }
        JumpModel::Microscopic(coeffs) => {
            if top > coeffs.n_max {
                return Err(QjsError::Domain("state exceeds coefficient table".into()));
            }
            for n in 1..=top {
                w[n - 1] += strength * n as f64 * coeffs.bright[n] * rho.probs[n];
            }
        }
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(QjsError::NoClickPossible);
    }
    Ok(FockDistribution {
        probs: w.into_iter().map(|x| x / total).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(bright: Vec<f64>, dark: Vec<f64>, emission: Vec<f64>) -> QjsCoefficients {
        QjsCoefficients::from_arrays(bright, dark, emission).unwrap()
    }

    #[test]
    fn single_photon_without_dark_goes_to_vacuum() {
        let j = table(vec![0.3, 0.1, 0.05], vec![0.0; 3], vec![0.0; 3]);
        let out = apply_jump(&FockDistribution::fock(1, 2).unwrap(), &j, JumpOptions::default()).unwrap();
        assert_eq!(out.state.probs(), &[1.0, 0.0, 0.0]);
        assert_eq!(out.rate, 0.1);
    }

    #[test]
    fn vacuum_without_dark_cannot_click() {
        let j = table(vec![0.3, 0.1, 0.05], vec![0.0; 3], vec![0.0; 3]);
        let err = apply_jump(&FockDistribution::vacuum(2), &j, JumpOptions::default()).unwrap_err();
        assert_eq!(err, QjsError::NoClickPossible);
    }

    #[test]
    fn mixture_weights_by_direct_arithmetic() {
        let (b, d) = (vec![9.0, 0.4, 0.25], vec![1e-3, 5e-4, 2e-4]);
        let j = table(b.clone(), d.clone(), vec![0.0; 3]);
        let rho = FockDistribution::new(vec![0.5, 0.0, 0.5]).unwrap();
        let out = apply_jump(&rho, &j, JumpOptions::default()).unwrap();
        let w = [0.5 * d[0], 0.5 * 2.0 * b[2], 0.5 * d[2]];
        let total: f64 = w.iter().sum();
        assert!((out.rate - total).abs() < 1e-16);
        for (got, want) in out.state.probs().iter().zip(w.iter()) {
            assert!((got - want / total).abs() < 1e-15);
        }
    }

    #[test]
    fn emission_overflow_needs_absorb_flag() {
        let j = table(vec![0.0, 0.1, 0.1], vec![0.01; 3], vec![1e-3; 3]);
        let rho = FockDistribution::new(vec![0.0, 0.5, 0.5]).unwrap();
        let err = apply_jump(&rho, &j, JumpOptions::default()).unwrap_err();
        assert!(matches!(err, QjsError::TruncationOverflow { n_max: 2, .. }));
        let out = apply_jump(&rho, &j, JumpOptions { truncation_absorb: true }).unwrap();
        let leaked = 3.0 * 1e-3 * 0.5;
        assert!((out.leakage - leaked / out.rate).abs() < 1e-15);
        assert!((out.state.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn click_probability_is_linear_in_dt() {
        let j = table(vec![0.0, 0.1, 0.1], vec![0.0; 3], vec![0.0; 3]);
        let rho = FockDistribution::fock(1, 2).unwrap();
        let p = click_probability(&rho, &j, 1e-13, 1e11).unwrap();
        assert!((p - 1e-3).abs() < 1e-18);
        let p2 = click_probability(&rho, &j, 2e-13, 1e11).unwrap();
        assert!((p2 - 2.0 * p).abs() < 1e-18);
        assert_eq!(click_probability(&FockDistribution::vacuum(2), &j, 1e-13, 1e11).unwrap(), 0.0);
        assert!(matches!(
            click_probability(&rho, &j, 1e-9, 1e11),
            Err(QjsError::ResolutionTooCoarse(_))
        ));
    }

    #[test]
    fn ad_hoc_models_on_diagonals() {
        let rho = FockDistribution::poisson(1.5, 30).unwrap();
        let sd = model_comparator(&rho, &JumpModel::SrinivasDavies, 1.0).unwrap();
        let e = model_comparator(&rho, &JumpModel::Exponential, 1.0).unwrap();
        let p = rho.probs();
        let sd_norm: f64 = (0..30).map(|n| (n + 1) as f64 * p[n + 1]).sum();
        let e_norm: f64 = (0..30).map(|n| p[n + 1]).sum();
        for n in 0..30 {
            assert!((sd.probs()[n] - (n + 1) as f64 * p[n + 1] / sd_norm).abs() < 1e-14);
            assert!((e.probs()[n] - p[n + 1] / e_norm).abs() < 1e-14);
        }
        // on a pure Fock state both give |n-1>
        let f = FockDistribution::fock(4, 8).unwrap();
        for m in [JumpModel::SrinivasDavies, JumpModel::Exponential] {
            let out = model_comparator(&f, &m, 2.0).unwrap();
            assert_eq!(out.probs()[3], 1.0);
            assert!((out.mean() - 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fitted_dark_term() {
        let rho = FockDistribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        let model = JumpModel::PowerLaw {
            beta: 0.5,
            dark: Some(FittedDark {
                rate: 1.0,
                d: 0.5,
                beta: 0.5,
            }),
        };
        let out = model_comparator(&rho, &model, 1.0).unwrap();
        let w = [0.25 + 0.5, 0.25 + 0.5 * 0.25, 0.5 * 0.5 * 0.25];
        let total: f64 = w.iter().sum();
        for n in 0..3 {
            assert!((out.probs()[n] - w[n] / total).abs() < 1e-15);
        }
    }

    #[test]
    fn distributions_validate() {
        assert!(FockDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(FockDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(FockDistribution::fock(3, 2).is_err());
        let th = FockDistribution::thermal(2.0, 64).unwrap();
        assert!((th.mean() - 2.0).abs() < 1e-9);
        assert!((th.probs().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
