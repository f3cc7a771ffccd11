//! Globally adaptive Gauss–Kronrod (10/21) quadrature with bisection.
//!
//! The integrand is fallible so that nested integrals can report their own
//! non-convergence through the outer call.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{QjsError, Result};

// Published node and weight tables, kept at full length.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_745_604_406,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Integration tolerances. Convergence is declared when the summed error
/// estimate drops below `max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Tolerance {
    pub fn relative(rel_tol: f64) -> Self {
        Tolerance {
            abs_tol: 0.0,
            rel_tol,
            max_panels: 4000,
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_panels(mut self, max_panels: usize) -> Self {
        self.max_panels = max_panels;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

fn kronrod21<F>(f: &mut F, lo: f64, hi: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center)?;
    let mut res_k = f_center * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let error = rescale_error((res_k - res_g) * half, res_abs * half.abs(), res_asc * half.abs());
    Ok(Panel {
        lo,
        hi,
        value,
        error,
    })
}

fn adaptive<F>(f: &mut F, breakpoints: &[f64], tol: Tolerance) -> Result<(Vec<Panel>, Estimate)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if breakpoints.len() < 2 {
        return Err(QjsError::Domain("quadrature needs at least two breakpoints".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breakpoints.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let p = kronrod21(f, w[0], w[1])?;
        value += p.value;
        error += p.error;
        heap.push(p);
    }
    // the per-panel error estimate never drops below ~50 eps
    let target = |v: f64| tol.abs_tol.max(tol.rel_tol.max(100.0 * f64::EPSILON) * v.abs());
    while error > target(value) {
        if heap.len() >= tol.max_panels {
            return Err(QjsError::QuadratureNonConvergence {
                achieved: error / value.abs().max(f64::MIN_POSITIVE),
                requested: tol.rel_tol,
            });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // panel at floating-point resolution; keep it and stop refining
            heap.push(worst);
            break;
        }
        let left = kronrod21(f, worst.lo, mid)?;
        let right = kronrod21(f, mid, worst.hi)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    let panels = heap.into_vec();
    // resum to shed the running-update round-off
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    if error > target(value) {
        return Err(QjsError::QuadratureNonConvergence {
            achieved: error / value.abs().max(f64::MIN_POSITIVE),
            requested: tol.rel_tol,
        });
    }
    Ok((panels, Estimate { value, error }))
}

/// Integrates `f` over `[breakpoints[0], breakpoints[last]]`, starting from
/// one panel per breakpoint interval.
pub fn integrate<F>(mut f: F, breakpoints: &[f64], tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    adaptive(&mut f, breakpoints, tol).map(|(_, est)| est)
}

/// Running integral `L -> int_lo^L f` on a mesh refined once by the adaptive
/// scheme; each query costs one 21-point rule on a partial panel.
pub struct Cumulative<F> {
    f: F,
    edges: Vec<f64>,
    running: Vec<f64>,
}

impl<F> Cumulative<F>
where
    F: FnMut(f64) -> Result<f64>,
{
    pub fn build(mut f: F, breakpoints: &[f64], tol: Tolerance) -> Result<Self> {
        let (mut panels, _) = adaptive(&mut f, breakpoints, tol)?;
        panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut edges = Vec::with_capacity(panels.len() + 1);
        let mut running = Vec::with_capacity(panels.len() + 1);
        let mut acc = 0.0;
        edges.push(panels[0].lo);
        running.push(0.0);
        for p in &panels {
            acc += p.value;
            edges.push(p.hi);
            running.push(acc);
        }
        Ok(Cumulative { f, edges, running })
    }

    pub fn total(&self) -> f64 {
        *self.running.last().unwrap()
    }

    /// `int_lo^x f`, clamped to the tabulated range.
    pub fn at(&mut self, x: f64) -> Result<f64> {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        if x <= lo {
            return Ok(0.0);
        }
        if x >= hi {
            return Ok(self.total());
        }
        let i = self.edges.partition_point(|&e| e <= x) - 1;
        if x == self.edges[i] {
            return Ok(self.running[i]);
        }
        let partial = kronrod21(&mut self.f, self.edges[i], x)?;
        Ok(self.running[i] + partial.value)
    }
}

/// Breakpoints `0, 1, 2, 4, ...` up to `upper`, optionally preceded by a
/// uniform grid of width `panel` on `[0, 1]`.
pub fn geometric_breakpoints(upper: f64, panel: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let first = upper.min(1.0);
    let n = (first / panel.max(1e-300)).ceil().clamp(1.0, 1e4) as usize;
    for i in 1..=n {
        pts.push(first * i as f64 / n as f64);
    }
    let mut x = 2.0;
    while x < upper {
        pts.push(x);
        x *= 2.0;
    }
    if *pts.last().unwrap() < upper {
        pts.push(upper);
    }
    pts
}

/// Geometric breakpoints refined at both ends of `[0, upper]`, for
/// convolution integrands with a transient at each end.
pub fn two_sided_breakpoints(upper: f64, panel: f64) -> Vec<f64> {
    let half = geometric_breakpoints(0.5 * upper, panel);
    let mut pts = half.clone();
    pts.extend(half.iter().rev().map(|&x| upper - x));
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * upper);
    pts
}

/// Uniform breakpoints on `[lo, hi]` with panels no wider than `width`.
pub fn uniform_breakpoints(lo: f64, hi: f64, width: f64) -> Vec<f64> {
    let n = ((hi - lo) / width.max(1e-300)).ceil().clamp(1.0, 1e5) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sided_mesh_is_symmetric() {
        let pts = two_sided_breakpoints(100.0, 0.25);
        assert_eq!(pts[0], 0.0);
        assert_eq!(*pts.last().unwrap(), 100.0);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        for (a, b) in pts.iter().zip(pts.iter().rev()) {
            assert!((a + b - 100.0).abs() < 1e-12);
        }
        assert!(pts.iter().any(|&x| (x - 99.75).abs() < 1e-12));
    }

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| Ok(x * x * x - 2.0 * x), &[0.0, 2.0], Tolerance::relative(1e-14).with_abs(1e-12)).unwrap();
        assert!((est.value - 0.0).abs() < 1e-13);
        let est = integrate(|x| Ok(x.powi(6)), &[-1.0, 1.0], Tolerance::relative(1e-14)).unwrap();
        assert!((est.value - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_damped_integrand() {
        // int_0^10 e^{-u} cos(sqrt(3) u) du
        let phi = 3f64.sqrt();
        let est = integrate(
            |u| Ok((-u).exp() * (phi * u).cos()),
            &uniform_breakpoints(0.0, 10.0, 0.5),
            Tolerance::relative(1e-13),
        )
        .unwrap();
        let exact = (1.0 - (-10.0f64).exp() * ((10.0 * phi).cos() - phi * (10.0 * phi).sin())) / 4.0;
        assert!((est.value - exact).abs() < 1e-13);
    }

    #[test]
    fn sharp_feature_on_long_range() {
        let est = integrate(
            |u| Ok((-u).exp()),
            &geometric_breakpoints(5e5, 1.0),
            Tolerance::relative(1e-12),
        )
        .unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_convergence_reports_achieved_error() {
        let err = integrate(
            |u| Ok((1.0 / u).sin() / u.sqrt()),
            &[1e-12, 1.0],
            Tolerance::relative(1e-14).with_max_panels(8),
        )
        .unwrap_err();
        assert!(matches!(err, QjsError::QuadratureNonConvergence { .. }));
    }

    #[test]
    fn cumulative_matches_antiderivative() {
        let mut cum = Cumulative::build(|u| Ok((-u).exp()), &geometric_breakpoints(100.0, 1.0), Tolerance::relative(1e-12)).unwrap();
        for &x in &[0.0f64, 0.3, 1.0, 2.5, 17.0, 99.0, 100.0, 250.0] {
            let exact = 1.0 - (-x.min(100.0f64)).exp();
            assert!((cum.at(x).unwrap() - exact).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn integrand_error_propagates() {
        let err = integrate(|_| Err(QjsError::BiasOff), &[0.0, 1.0], Tolerance::relative(1e-6)).unwrap_err();
        assert_eq!(err, QjsError::BiasOff);
    }
}
