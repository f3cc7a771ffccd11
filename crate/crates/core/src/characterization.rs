//! Counting rates, signal-to-noise sweeps, breakdown detection and power-law
//! fits of the coefficient tables.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{bright_coeff, dark_coeff};
use crate::error::{QjsError, Result};
use crate::params::DetectorParams;

/// Fraction of the plateau signal-to-noise ratio that still counts as
/// "before breakdown". The breakdown bias marks the onset of the fall of
/// `S`, so the default sits just below one; the plateau itself is flat to
/// about 1e-5 relative.
pub const BREAKDOWN_FRACTION: f64 = 0.999;

/// Largest relative spread of `S` tolerated over the plateau window.
pub const PLATEAU_SPREAD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountingRates {
    /// Bright rate `J_1^(B)`, units of `g`.
    pub r_b: f64,
    /// Dark rate `J_0^(D)` plus the additive constant, units of `g`.
    pub r_d: f64,
    /// Signal-to-noise ratio `r_b / r_d`.
    pub s: f64,
}

pub fn counting_rates(params: &DetectorParams) -> Result<CountingRates> {
    let r_b = bright_coeff(1, params)?;
    let r_d = dark_coeff(0, params)? + params.dark_const();
    if r_d == 0.0 {
        return Err(QjsError::Noiseless);
    }
    Ok(CountingRates { r_b, r_d, s: r_b / r_d })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `x` is the bias `b`.
    Bias,
    /// `x` is the field wavelength in metres.
    Wavelength,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub r_b: f64,
    pub r_d: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }
}

fn at_point(params: &DetectorParams, axis: SweepAxis, x: f64) -> Result<DetectorParams> {
    match axis {
        SweepAxis::Bias => params.with_b(x),
        SweepAxis::Wavelength => params.with_lambda(x),
    }
}

/// Counting rates along `grid`, one independent evaluation per point.
pub fn sweep(params: &DetectorParams, axis: SweepAxis, grid: &[f64]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(QjsError::Domain("sweep grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QjsError::Domain("sweep grid must be strictly increasing".into()));
    }
    let points = grid
        .par_iter()
        .map(|&x| {
            let rates = counting_rates(&at_point(params, axis, x)?)?;
            Ok(SweepPoint {
                x,
                r_b: rates.r_b,
                r_d: rates.r_d,
                s: rates.s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { axis, points })
}

/// Breakdown bias with the default plateau fraction.
pub fn find_breakdown(sweep: &SweepResult) -> Result<f64> {
    find_breakdown_at(sweep, BREAKDOWN_FRACTION)
}

/// Largest `b` at which `S` is still at least `fraction` of the plateau.
///
/// The plateau is the median `S` over the lowest quarter of the grid. The
/// crossing is located by linear interpolation in `log b` between the last
/// grid point above the threshold and its successor.
pub fn find_breakdown_at(sweep: &SweepResult, fraction: f64) -> Result<f64> {
    if sweep.axis != SweepAxis::Bias {
        return Err(QjsError::Domain("breakdown needs a sweep over b".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(QjsError::Domain(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let pts = &sweep.points;
    if pts.len() < 8 {
        return Err(QjsError::Domain(format!("need at least 8 sweep points, got {}", pts.len())));
    }
    let quarter = pts.len().div_ceil(4);
    let mut low: Vec<f64> = pts[..quarter].iter().map(|p| p.s).collect();
    low.sort_by(f64::total_cmp);
    let plateau = if quarter % 2 == 1 {
        low[quarter / 2]
    } else {
        0.5 * (low[quarter / 2 - 1] + low[quarter / 2])
    };
    let spread = (low[quarter - 1] - low[0]) / plateau;
    if !(spread <= PLATEAU_SPREAD) {
        return Err(QjsError::NoPlateau { spread });
    }
    let threshold = fraction * plateau;
    let last = match pts.iter().rposition(|p| p.s >= threshold) {
        Some(i) => i,
        None => return Err(QjsError::NoPlateau { spread }),
    };
    if last + 1 == pts.len() {
        return Ok(pts[last].x);
    }
    let (p, q) = (pts[last], pts[last + 1]);
    let frac = (p.s - threshold) / (p.s - q.s);
    Ok((p.x.ln() + frac * (q.x.ln() - p.x.ln())).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// `coeff[n] ~ amplitude * n^(-2 beta)`.
    pub beta: f64,
    pub amplitude: f64,
    /// `coeff[1] / coeff[0]`; the dark suppression factor when fitting a dark table.
    pub d: f64,
    /// RMS of the residuals of the log-log fit.
    pub residual: f64,
    pub n_range: (usize, usize),
}

/// Ordinary least squares of `ln coeff[n]` on `ln n` for `n` in `n_range` (inclusive).
pub fn fit_power_law(coeffs: &[f64], n_range: (usize, usize)) -> Result<PowerLawFit> {
    let (lo, hi) = n_range;
    if lo < 1 || hi <= lo || hi >= coeffs.len() {
        return Err(QjsError::Domain(format!(
            "fit range {lo}..={hi} must satisfy 1 <= lo < hi < {}",
            coeffs.len()
        )));
    }
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for n in lo..=hi {
        let c = coeffs[n];
        if !(c > 0.0 && c.is_finite()) {
            return Err(QjsError::Domain(format!("coefficient at n = {n} is not positive: {c}")));
        }
        xs.push((n as f64).ln());
        ys.push(c.ln());
    }
    let line = linear_fit(&xs, &ys)?;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - line.intercept - line.slope * x).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(PowerLawFit {
        beta: -0.5 * line.slope,
        amplitude: line.intercept.exp(),
        d: coeffs[1] / coeffs[0],
        residual,
        n_range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(QjsError::Domain("linear fit needs two or more paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(QjsError::Domain("linear fit with identical abscissae".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// `n` points from `start` to `stop`, evenly spaced or log-spaced.
pub fn grid(start: f64, stop: f64, count: usize, log: bool) -> Result<Vec<f64>> {
    if count < 2 || !(stop > start) {
        return Err(QjsError::Domain(format!("bad grid {start}:{stop}:{count}")));
    }
    if log && !(start > 0.0) {
        return Err(QjsError::Domain("log grid needs a positive start".into()));
    }
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let f = i as f64 / last;
            if log {
                (start.ln() + f * (stop.ln() - start.ln())).exp()
            } else {
                start + f * (stop - start)
            }
        })
        .collect())
}
