//! Brute-force references for the closed forms: the propagator on a
//! truncated sensor ⊗ Fock space, and direct quadrature of the averaged
//! click-rate integrals.
//!
//! The integrands here are built from plain complex `cos`/`sin` rather than
//! the overflow-safe helpers of [`crate::propagator`], so they fail
//! independently. They are meant for moderate `tau` and `b`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QjsError, Result};
use crate::field_state::FockDistribution;
use crate::ode;
use crate::params::{spectral_root, DetectorParams};
use crate::propagator::damped_cos_sin;
use crate::quad::{self, Cumulative, Tolerance};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense operator on `{|g,0>..|g,N>, |e,0>..|e,N>}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub n_max: usize,
    pub entries: DMatrix<Complex64>,
}

impl TruncatedOperator {
    fn zeros(n_max: usize) -> Self {
        let dim = 2 * (n_max + 1);
        TruncatedOperator {
            n_max,
            entries: DMatrix::from_element(dim, dim, ZERO),
        }
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    pub fn ground(&self, n: usize) -> usize {
        n
    }

    pub fn excited(&self, n: usize) -> usize {
        self.n_max + 1 + n
    }

    pub fn identity(n_max: usize) -> Self {
        let dim = 2 * (n_max + 1);
        TruncatedOperator {
            n_max,
            entries: DMatrix::identity(dim, dim),
        }
    }

    /// `|e><g|` on every photon number.
    pub fn sigma_plus(n_max: usize) -> Self {
        let mut op = Self::zeros(n_max);
        for n in 0..=n_max {
            let (e, g) = (op.excited(n), op.ground(n));
            op.entries[(e, g)] = ONE;
        }
        op
    }

    pub fn sigma_minus(n_max: usize) -> Self {
        let mut op = Self::sigma_plus(n_max);
        op.entries = op.entries.adjoint();
        op
    }

    /// `|e><e| - |g><g|`.
    pub fn sigma_z(n_max: usize) -> Self {
        let mut op = Self::zeros(n_max);
        for n in 0..=n_max {
            let (e, g) = (op.excited(n), op.ground(n));
            op.entries[(e, e)] = ONE;
            op.entries[(g, g)] = -ONE;
        }
        op
    }

    /// Field annihilation operator, truncated at `n_max`.
    pub fn annihilation(n_max: usize) -> Self {
        let mut op = Self::zeros(n_max);
        for n in 1..=n_max {
            let s = Complex64::from((n as f64).sqrt());
            let (g_lo, g_hi) = (op.ground(n - 1), op.ground(n));
            let (e_lo, e_hi) = (op.excited(n - 1), op.excited(n));
            op.entries[(g_lo, g_hi)] = s;
            op.entries[(e_lo, e_hi)] = s;
        }
        op
    }

    pub fn number(n_max: usize) -> Self {
        let mut op = Self::zeros(n_max);
        for n in 0..=n_max {
            let (e, g) = (op.excited(n), op.ground(n));
            op.entries[(e, e)] = Complex64::from(n as f64);
            op.entries[(g, g)] = Complex64::from(n as f64);
        }
        op
    }

    /// `H_e = (w0 - i gamma)/2 sigma_z + w n + a sigma_+ + a^dag sigma_- - i gamma (nbar + 1/2)`
    /// in units of `g`.
    pub fn effective_hamiltonian(n_max: usize, params: &DetectorParams) -> Self {
        let b = params.b();
        let w = params.carrier();
        let w0 = params.sensor_frequency();
        let a = Self::annihilation(n_max).entries;
        let sp = Self::sigma_plus(n_max).entries;
        let sm = Self::sigma_minus(n_max).entries;
        let coupling = &a * &sp + a.adjoint() * &sm;
        let dim = 2 * (n_max + 1);
        let shift = -I * b * (params.nbar() + 0.5);
        let entries = Self::sigma_z(n_max).entries * Complex64::new(0.5 * w0, -0.5 * b)
            + Self::number(n_max).entries * Complex64::from(w)
            + coupling
            + DMatrix::identity(dim, dim) * shift;
        TruncatedOperator { n_max, entries }
    }

    /// Sensor decay `R rho = 2 gamma (nbar + 1) sigma_- rho sigma_+`, units of `g`.
    pub fn apply_decay(&self, params: &DetectorParams) -> Self {
        let sm = Self::sigma_minus(self.n_max).entries;
        let sp = Self::sigma_plus(self.n_max).entries;
        let scale = Complex64::from(2.0 * params.b() * (params.nbar() + 1.0));
        TruncatedOperator {
            n_max: self.n_max,
            entries: &sm * &self.entries * &sp * scale,
        }
    }

    /// Restriction to the first `n_max + 1` photon numbers.
    pub fn restrict(&self, n_max: usize) -> Result<Self> {
        if n_max > self.n_max {
            return Err(QjsError::Domain(format!("cannot restrict {} levels to {n_max}", self.n_max)));
        }
        let mut out = Self::zeros(n_max);
        for i in 0..out.dim() {
            for j in 0..out.dim() {
                out.entries[(i, j)] = self.entries[(self.lift(i, n_max), self.lift(j, n_max))];
            }
        }
        Ok(out)
    }

    fn lift(&self, index: usize, n_max: usize) -> usize {
        if index <= n_max {
            self.ground(index)
        } else {
            self.excited(index - n_max - 1)
        }
    }

    pub fn max_abs_diff(&self, other: &TruncatedOperator) -> f64 {
        assert_eq!(self.n_max, other.n_max, "operators on different truncations");
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Closed-form `X_t = exp(-i H_e t)` (time in `1/g`) on the truncated basis.
///
/// The state `|e,N>` has its partner `|g,N+1>` outside the basis and evolves
/// on its own, exactly as the truncated generator dictates.
pub fn xt_closed(t: f64, n_max: usize, params: &DetectorParams) -> Result<TruncatedOperator> {
    if n_max < 1 {
        return Err(QjsError::Domain("n_max must be >= 1".into()));
    }
    let delta = params.delta();
    let w = params.carrier();
    let damping = params.b() * (params.nbar() + 0.5) * t;
    let mut x = TruncatedOperator::zeros(n_max);

    // |g,0>: uncoupled, diagonal energy -(w0 - i gamma)/2
    let g0 = x.ground(0);
    x.entries[(g0, g0)] = (I * (delta + 0.5 * w) * t).exp() * (-damping).exp();

    // blocks {|e,n-1>, |g,n>}
    for n in 1..=n_max {
        let root = spectral_root(n, delta);
        let (c, s) = damped_cos_sin(root, t, damping);
        let phase = (-I * w * (n as f64 - 0.5) * t).exp();
        let (e, g) = (x.excited(n - 1), x.ground(n));
        let off = -I * (n as f64).sqrt() * s * phase;
        x.entries[(e, e)] = phase * (c - I * delta * s);
        x.entries[(g, g)] = phase * (c + I * delta * s);
        x.entries[(e, g)] = off;
        x.entries[(g, e)] = off;
    }

    // |e,N>: edge of the truncation
    let top = x.excited(n_max);
    let diag = Complex64::new(0.5 * params.sensor_frequency(), -0.5 * params.b()) + w * n_max as f64;
    x.entries[(top, top)] = (-I * diag * t).exp() * (-damping).exp();
    Ok(x)
}

/// `X_t` by integrating `dX/dt = -i H_e X` from the identity.
pub fn xt_ode(t: f64, n_max: usize, params: &DetectorParams, tol: f64) -> Result<TruncatedOperator> {
    if n_max < 1 {
        return Err(QjsError::Domain("n_max must be >= 1".into()));
    }
    let h = TruncatedOperator::effective_hamiltonian(n_max, params).entries * (-I);
    let start = TruncatedOperator::identity(n_max).entries;
    let sol = ode::dopri5(|_, x| &h * x, 0.0, start, t, tol)?;
    Ok(TruncatedOperator {
        n_max,
        entries: sol.state,
    })
}

/// Largest change of `X_t` on the states `|g,0..N>` and `|e,0..N-1>` when the
/// basis is padded from `N` to `N + 2` photons, both computed by the ODE.
pub fn truncation_drift(t: f64, n_max: usize, params: &DetectorParams, tol: f64) -> Result<f64> {
    let small = xt_ode(t, n_max, params, tol)?;
    let padded = xt_ode(t, n_max + 2, params, tol)?.restrict(n_max)?;
    let edge = small.excited(n_max);
    let mut worst: f64 = 0.0;
    for i in 0..small.dim() {
        for j in 0..small.dim() {
            if i == edge || j == edge {
                continue;
            }
            worst = worst.max((small.entries[(i, j)] - padded.entries[(i, j)]).norm());
        }
    }
    Ok(worst)
}

/// Plain-arithmetic block amplitudes in dimensionless time `u`.
struct Block {
    root: Complex64,
    delta: Complex64,
    inv_b: f64,
}

impl Block {
    fn new(n: usize, params: &DetectorParams) -> Result<Self> {
        if params.b() == 0.0 {
            return Err(QjsError::BiasOff);
        }
        Ok(Block {
            root: spectral_root(n, params.delta()),
            delta: params.delta(),
            inv_b: 1.0 / params.b(),
        })
    }

    /// `S_n(t)` at `t = u / b`.
    fn s(&self, u: f64) -> Complex64 {
        let t = u * self.inv_b;
        if self.root.norm() * t.abs().max(1.0) < 1e-9 {
            Complex64::from(t)
        } else {
            (self.root * t).sin() / self.root
        }
    }

    /// `chi_n(t)` without the carrier phase, which drops out of every modulus.
    fn chi(&self, u: f64) -> Complex64 {
        (self.root * u * self.inv_b).cos() - I * self.delta * self.s(u)
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(QjsError::Domain(format!("tolerance must be in (0, 1), got {tol}")))
    }
}

/// Panel width for a set of blocks: one unit of `u` or one oscillation.
fn panel_width(blocks: &[&Block]) -> f64 {
    let mut fastest: f64 = 1.0;
    for blk in blocks {
        let rate = 2.0 * blk.root.re.abs().max(blk.root.im.abs()) * blk.inv_b;
        fastest = fastest.max(rate);
    }
    1.0 / fastest
}

fn mesh(tau: f64, width: f64) -> Vec<f64> {
    if tau / width <= 2000.0 {
        quad::uniform_breakpoints(0.0, tau, width)
    } else {
        quad::geometric_breakpoints(tau, width)
    }
}

/// `(2b(1+nbar)/tau) int_0^tau exp(-a u) |S_n(u)|^2 du`.
pub fn bright_quad(n: usize, params: &DetectorParams, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    let blk = Block::new(n, params)?;
    let (b, tau, nbar, a) = (params.b(), params.tau(), params.nbar(), params.window_decay());
    let est = quad::integrate(
        |u| Ok((-a * u).exp() * blk.s(u).norm_sqr()),
        &mesh(tau, panel_width(&[&blk])),
        Tolerance::relative(tol).with_max_panels(20_000),
    )?;
    Ok(2.0 * b * (1.0 + nbar) / tau * est.value)
}

/// `(4 b nbar (1+nbar)/tau) int_0^tau du int_0^u du1 exp(-a u) |chi_{n+1}(u-u1)|^2 |chi_n(-u1)|^2`,
/// reduced to one outer integral against the running integral of the inner factor.
pub fn dark_quad(n: usize, params: &DetectorParams, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    let (b, tau, nbar, a) = (params.b(), params.tau(), params.nbar(), params.window_decay());
    if nbar == 0.0 {
        // still reject b = 0
        Block::new(n, params)?;
        return Ok(0.0);
    }
    let lo = Block::new(n, params)?;
    let hi = Block::new(n + 1, params)?;
    let grid = mesh(tau, panel_width(&[&lo, &hi]));
    let panel_tol = Tolerance::relative(0.1 * tol).with_max_panels(20_000);
    let mut late = Cumulative::build(|s| Ok((-a * s).exp() * hi.chi(s).norm_sqr()), &grid, panel_tol)?;
    let est = quad::integrate(
        |u1| Ok((-a * u1).exp() * lo.chi(-u1).norm_sqr() * late.at(tau - u1)?),
        &grid,
        Tolerance::relative(tol).with_max_panels(20_000),
    )?;
    Ok(4.0 * b * nbar * (1.0 + nbar) / tau * est.value)
}

/// Click probability density `Tr[Xi(u) rho]` at dimensionless time `u`, in
/// units of `g`, keeping the expansion terms up to order `l_max` in `nbar`.
pub fn transition_probability(u: f64, rho: &FockDistribution, params: &DetectorParams, l_max: usize) -> Result<f64> {
    if l_max > 2 {
        return Err(QjsError::Unsupported(format!(
            "expansion order {l_max}; only orders 0..=2 are implemented"
        )));
    }
    if !(u >= 0.0 && u.is_finite()) {
        return Err(QjsError::Domain(format!("time must be finite and >= 0, got {u}")));
    }
    let (b, nbar, a) = (params.b(), params.nbar(), params.window_decay());
    let decay = (-a * u).exp();
    let tol = Tolerance::relative(1e-10).with_abs(1e-300).with_max_panels(20_000);
    let mut total = 0.0;
    for (n, &p) in rho.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let mut rate = 0.0;
        if n > 0 {
            rate += n as f64 * decay * Block::new(n, params)?.s(u).norm_sqr();
        }
        if l_max >= 1 && nbar > 0.0 && u > 0.0 {
            let (lo, hi) = (Block::new(n, params)?, Block::new(n + 1, params)?);
            let grid = quad::uniform_breakpoints(0.0, u, panel_width(&[&lo, &hi]));
            let inner = quad::integrate(|u1| Ok(hi.chi(u - u1).norm_sqr() * lo.chi(-u1).norm_sqr()), &grid, tol)?;
            rate += 2.0 * nbar * decay * inner.value;
        }
        if l_max >= 2 && nbar > 0.0 && u > 0.0 {
            let (lo, mid, hi) = (Block::new(n, params)?, Block::new(n + 1, params)?, Block::new(n + 2, params)?);
            let width = panel_width(&[&lo, &mid, &hi]);
            let grid = quad::uniform_breakpoints(0.0, u, width);
            let inner = quad::integrate(
                |u1| {
                    if u1 <= 0.0 {
                        return Ok(0.0);
                    }
                    let pts = quad::uniform_breakpoints(0.0, u1, width);
                    let deep = quad::integrate(|u2| Ok(mid.s(u1 - u2).norm_sqr() * lo.chi(-u2).norm_sqr()), &pts, tol)?;
                    Ok(hi.chi(u - u1).norm_sqr() * deep.value)
                },
                &grid,
                tol,
            )?;
            rate += (n + 1) as f64 * (2.0 * nbar).powi(2) * decay * inner.value;
        }
        total += p * rate;
    }
    Ok(2.0 * b * (1.0 + nbar) * total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mild() -> DetectorParams {
        DetectorParams::from_detuning(1.0, 0.5, 10.0, 0.1).unwrap().with_carrier(3.0)
    }

    #[test]
    fn closed_form_at_zero_is_identity() {
        let x = xt_closed(0.0, 6, &mild()).unwrap();
        assert!(x.max_abs_diff(&TruncatedOperator::identity(6)) < 1e-15);
    }

    #[test]
    fn closed_form_matches_ode() {
        let p = mild();
        for &t in &[0.3, 1.7, 5.0] {
            let closed = xt_closed(t, 10, &p).unwrap();
            let ode = xt_ode(t, 10, &p, 1e-12).unwrap();
            let diff = closed.max_abs_diff(&ode);
            assert!(diff < 1e-8, "t = {t}: {diff:e}");
        }
    }

    #[test]
    fn degenerate_block_is_finite() {
        // q = 0, b = 2 makes B_1 = 0
        let p = DetectorParams::from_detuning(0.0, 2.0, 10.0, 0.0).unwrap();
        let closed = xt_closed(1.3, 4, &p).unwrap();
        assert!(closed.is_finite());
        let ode = xt_ode(1.3, 4, &p, 1e-12).unwrap();
        assert!(closed.max_abs_diff(&ode) < 1e-8);
    }

    #[test]
    fn undamped_propagator_is_unitary() {
        let p = DetectorParams::from_detuning(0.7, 0.0, 1.0, 0.0).unwrap();
        let x = xt_ode(4.0, 5, &p, 1e-12).unwrap();
        let prod = x.entries.adjoint() * &x.entries;
        let id = TruncatedOperator::identity(5).entries;
        let err = (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err:e}");
    }

    #[test]
    fn padding_does_not_move_interior_blocks() {
        let drift = truncation_drift(2.0, 6, &mild(), 1e-13).unwrap();
        assert!(drift < 1e-10, "{drift:e}");
    }

    #[test]
    fn decay_moves_excited_to_ground() {
        let p = mild();
        let mut rho = TruncatedOperator::zeros(3);
        let e1 = rho.excited(1);
        rho.entries[(e1, e1)] = ONE;
        let out = rho.apply_decay(&p);
        let g1 = out.ground(1);
        assert!((out.entries[(g1, g1)].re - 2.0 * 0.5 * 1.1).abs() < 1e-15);
    }

    #[test]
    fn bright_reference_value() {
        let p = DetectorParams::from_detuning(0.0, 1.0, 10.0, 0.0).unwrap();
        let v = bright_quad(1, &p, 1e-12).unwrap();
        assert!((v - 0.1).abs() < 1e-4, "{v}");
    }

    #[test]
    fn dark_vanishes_without_excitations() {
        let p = DetectorParams::from_detuning(1.0, 1.0, 10.0, 0.0).unwrap();
        assert_eq!(dark_quad(2, &p, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn transition_probability_edges() {
        let p = mild();
        let one = FockDistribution::fock(1, 3).unwrap();
        assert_eq!(transition_probability(0.0, &one, &p, 2).unwrap(), 0.0);
        let quiet = DetectorParams::from_detuning(1.0, 0.5, 10.0, 0.0).unwrap();
        let vac = FockDistribution::vacuum(3);
        for &u in &[0.5, 3.0] {
            assert_eq!(transition_probability(u, &vac, &quiet, 2).unwrap(), 0.0);
        }
        assert!(matches!(
            transition_probability(1.0, &one, &p, 3),
            Err(QjsError::Unsupported(_))
        ));
    }
}
