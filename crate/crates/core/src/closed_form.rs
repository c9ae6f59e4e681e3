//! Analytic quantities for Brownian motion with drift `W_t = B_t + mu t`.
//!
//! Throughout, `T_c` is the first time the drawdown `sup_{s<=t} W_s - W_t`
//! reaches `c`. Expressions of the form `(e^x - 1 - x) / x^2` are evaluated
//! through power series near `x = 0` where the direct form cancels.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{check_positive, param, Error, Result};
use crate::path::ModelParams;
use crate::quad::integrate;
use crate::roots::bisect;
use crate::sum::NeumaierSum;

/// Below this `|mu c|` the expected drawdown time uses its series.
pub const SERIES_SWITCH: f64 = 1e-4;

/// `(e^x - 1 - x) / x^2` for any `x`.
fn expm1_quadratic(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let mut term = 0.5;
        let mut sum = 0.0;
        for k in 2..40 {
            sum += term;
            term *= x / (k + 1) as f64;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

/// `(e^x - 1) / x`, equal to 1 at the origin.
fn expm1_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

fn check_c(c: f64) -> Result<()> {
    check_positive("c", c)
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() {
        Ok(())
    } else {
        Err(param(format!("drift must be finite, got {mu}")))
    }
}

/// `E T_c = (e^{2 mu c} - 1 - 2 mu c) / (2 mu^2)`, which is `c^2` without drift.
pub fn expected_tc(mu: f64, c: f64) -> Result<f64> {
    check_mu(mu)?;
    check_c(c)?;
    let x = 2.0 * mu * c;
    let v = if (mu * c).abs() < SERIES_SWITCH {
        // c^2 * 2 * sum_{k>=2} x^{k-2} / k!
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 2..12 {
            sum += term;
            term *= x / (k + 1) as f64;
        }
        c * c * sum
    } else {
        (x.exp_m1() - x) / (2.0 * mu * mu)
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Numeric(format!(
            "E T_c overflows for mu = {mu}, c = {c}"
        )))
    }
}

/// The ratio `(E T_c)^2 / E T_c^2`, in terms of `x = 2 mu c`:
/// `(1/2) (e^x - 1 - x)^2 / (e^{2x} - 3x e^x + e^x + x^2/2 - 2)`.
///
/// Near zero both sides vanish to fourth order; the denominator has the
/// series `sum_{k>=4} (2^k + 1 - 3k) x^k / k!`, so the ratio tends to 3/5.
pub fn tc_moment_ratio(mu: f64, c: f64) -> Result<f64> {
    check_mu(mu)?;
    check_c(c)?;
    let x = 2.0 * mu * c;
    let r = if x.abs() <= 1.0 {
        let num = expm1_quadratic(x);
        let mut den = 0.0;
        let mut fact = 24.0;
        let mut pow = 1.0;
        for k in 4..60 {
            let kf = k as f64;
            den += (2f64.powi(k) + 1.0 - 3.0 * kf) / fact * pow;
            fact *= kf + 1.0;
            pow *= x;
        }
        0.5 * num * num / den
    } else if x > 0.0 {
        let e = (-x).exp();
        let num = 1.0 - (1.0 + x) * e;
        let den = 1.0 - 3.0 * x * e + e + (0.5 * x * x - 2.0) * e * e;
        0.5 * num * num / den
    } else {
        let num = x.exp_m1() - x;
        let den = (2.0 * x).exp() - 3.0 * x * x.exp() + x.exp() + 0.5 * x * x - 2.0;
        0.5 * num * num / den
    };
    Ok(r)
}

/// `(e^x - x - 1) / (e^x + e^{-x} - 2)`, the probability that a drawup of
/// size `c` precedes a drawdown of size `c`, with `x = 2 mu c`.
fn drawup_first_probability(x: f64) -> f64 {
    if x.abs() < 1.0 {
        let h = 0.5 * x;
        let s = if h == 0.0 { 1.0 } else { h.sinh() / h };
        expm1_quadratic(x) / (s * s)
    } else if x > 0.0 {
        let e = (-x).exp();
        (1.0 - (1.0 + x) * e) / ((1.0 - e) * (1.0 - e))
    } else {
        let e = x.exp();
        e * (e - x - 1.0) / ((1.0 - e) * (1.0 - e))
    }
}

/// `P(sup_{0<=t<=s<=T_c} (W_s - W_t) >= y)` for `y > c`.
pub fn hv_tail(mu: f64, c: f64, y: f64) -> Result<f64> {
    check_mu(mu)?;
    check_c(c)?;
    if !(y > c) {
        return Err(Error::Domain(format!(
            "drawup tail needs y > c, got y = {y}, c = {c}"
        )));
    }
    let x = 2.0 * mu * c;
    let rate = 1.0 / (c * expm1_ratio(x));
    Ok(drawup_first_probability(x) * (-rate * (y - c)).exp())
}

/// `E sup_{0<=t<=s<=T_c} (W_s - W_t - c)_+`.
pub fn hv_mean(mu: f64, c: f64) -> Result<f64> {
    check_mu(mu)?;
    check_c(c)?;
    let x = 2.0 * mu * c;
    let v = drawup_first_probability(x) * c * expm1_ratio(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!(
            "drawup mean overflows for mu = {mu}, c = {c}"
        )))
    }
}

/// Positive roots of `b sin θ + θ cos θ = 0` (equivalently
/// `tan θ = -θ / b`) in increasing order.
///
/// For `b >= 0` and `b <= -1` there is exactly one root in each
/// `((k - 1/2)π, (k + 1/2)π)`. For `-1 < b < 0` an extra root sits in
/// `(0, π/2)` and comes first.
#[derive(Clone, Debug)]
pub struct ThetaRoots {
    b: f64,
    next_bracket: u64,
    extra_pending: bool,
}

impl ThetaRoots {
    pub fn new(mu_y: f64) -> Self {
        Self {
            b: mu_y,
            next_bracket: 1,
            extra_pending: mu_y > -1.0 && mu_y < 0.0,
        }
    }
}

fn theta_residual(b: f64, theta: f64) -> f64 {
    b * theta.sin() + theta * theta.cos()
}

impl Iterator for ThetaRoots {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let b = self.b;
        if self.extra_pending {
            self.extra_pending = false;
            // b sinθ/θ + cosθ, which is b + 1 > 0 at the origin and b < 0 at π/2
            let h = |t: f64| {
                if t == 0.0 {
                    b + 1.0
                } else {
                    b * t.sin() / t + t.cos()
                }
            };
            return bisect(h, 0.0, FRAC_PI_2).ok();
        }
        let k = self.next_bracket as f64;
        self.next_bracket += 1;
        if b == 0.0 {
            return Some((k - 0.5) * PI);
        }
        bisect(|t| theta_residual(b, t), (k - 0.5) * PI, (k + 0.5) * PI).ok()
    }
}

/// The first `n` roots θ_n.
pub fn eigenroots_theta(mu_y: f64, n: usize) -> Result<Vec<f64>> {
    if !mu_y.is_finite() {
        return Err(param(format!("mu*y must be finite, got {mu_y}")));
    }
    if n == 0 {
        return Err(param("need at least one root"));
    }
    let roots: Vec<f64> = ThetaRoots::new(mu_y).take(n).collect();
    if roots.len() < n {
        return Err(Error::Numeric(format!(
            "root bracketing failed for mu*y = {mu_y}"
        )));
    }
    Ok(roots)
}

/// The positive root of `b sinh η + η cosh η = 0`, present only for `b < -1`.
pub fn eigenroot_eta(mu_y: f64) -> Option<f64> {
    if !(mu_y < -1.0) || !mu_y.is_finite() {
        return None;
    }
    let b = mu_y;
    let hi = -b;
    // 2 e^{-η} (b sinh η + η cosh η), free of overflow
    let h = |e: f64| -b * (-2.0 * e).exp_m1() + e * (1.0 + (-2.0 * e).exp());
    if h(hi) <= 0.0 {
        return Some(hi);
    }
    bisect(h, hi * 1e-12, hi).ok()
}

/// All roots needed by the drawup series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRoots {
    pub theta: Vec<f64>,
    pub eta: Option<f64>,
    pub mu_y: f64,
}

pub fn eigen_roots(mu_y: f64, n: usize) -> Result<EigenRoots> {
    Ok(EigenRoots {
        theta: eigenroots_theta(mu_y, n)?,
        eta: eigenroot_eta(mu_y),
        mu_y,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub max_terms: usize,
    pub term_tolerance: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            max_terms: 10_000,
            term_tolerance: 1e-12,
        }
    }
}

/// A series evaluation with its diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Number of θ-terms summed.
    pub terms: usize,
    /// Bound on the first omitted term.
    pub residual: f64,
}

/// Which drift enters the drawup formula. The formula is written for the
/// maximum drawdown of a process with the opposite drift, so one sign had to
/// be fixed against simulation; see [`DRAWUP_CONVENTION`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftConvention {
    /// `mu` is the drift of `W` itself.
    AsGiven,
    /// `mu` is replaced by `-mu` before evaluation.
    Reversed,
}

/// Calibrated against a 10^5-path simulation at `mu = 0.5, T = 1, y = 1`
/// (see `drawup_sign_calibration` in the tests): `AsGiven` agrees to 0.01,
/// `Reversed` is off by about 0.3.
pub const DRAWUP_CONVENTION: DriftConvention = DriftConvention::AsGiven;

/// `P(sup_{0<=t<=s<=T} (W_s - W_t) >= y)` from the eigenfunction expansion
///
/// ```text
/// G(y) = 2 e^{b} { L + sum_n θ_n sin θ_n / (θ_n² + b² + b) (1 - e^{-λ_n T}) },
/// b = mu y,  λ_n = θ_n² / (2y²) + mu² / 2,
/// ```
///
/// with `L = η sinh η / (η² - b² - b) (1 - e^{-λ_0 T})`, `λ_0 = mu²/2 - η²/(2y²)`
/// when `b < -1`, `L = 3/2 (1 - e^{-mu² T / 2})` when `b = -1` and `L = 0`
/// otherwise. The coefficients of the `1` parts add up to one, so the sum
/// is evaluated as `1 - 2 e^b { L_0 e^{-λ_0 T} + sum_n a_n e^{-λ_n T} }`,
/// whose terms decay like `e^{-θ_n² T / 2y²}` instead of `1 / θ_n`.
///
/// The terms carry the factor `e^{mu y}`, so for large positive `mu y` the
/// absolute accuracy is roughly `1e-16 e^{mu y}`.
pub fn drawup_cdf_complement(
    y: f64,
    mu: f64,
    horizon: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    drawup_cdf_complement_with(DRAWUP_CONVENTION, y, mu, horizon, cfg)
}

pub fn drawup_cdf_complement_with(
    convention: DriftConvention,
    y: f64,
    mu: f64,
    horizon: f64,
    cfg: &SeriesConfig,
) -> Result<SeriesValue> {
    check_positive("y", y)?;
    check_positive("T", horizon)?;
    check_mu(mu)?;
    if cfg.max_terms == 0 || !(cfg.term_tolerance > 0.0) {
        return Err(param(
            "series config needs max_terms >= 1 and term_tolerance > 0",
        ));
    }
    let mu = match convention {
        DriftConvention::AsGiven => mu,
        DriftConvention::Reversed => -mu,
    };
    let b = mu * y;
    let t = horizon;
    let drift_decay = 0.5 * mu * mu * t;
    let scale = 2.0 * b.exp();

    let mut survival = NeumaierSum::new();
    if let Some(eta) = eigenroot_eta(b) {
        // e^b sinh η without overflow
        let eb_sinh = 0.5 * ((b + eta).exp() - (b - eta).exp());
        let decay = eta * eta * t / (2.0 * y * y) - drift_decay;
        survival.add(2.0 * eta * eb_sinh / (eta * eta - b * b - b) * decay.exp());
    } else if b == -1.0 {
        survival.add(scale * 1.5 * (-drift_decay).exp());
    }

    let mut terms = 0;
    let mut bound = f64::INFINITY;
    for theta in ThetaRoots::new(b) {
        terms += 1;
        let den = theta * theta + b * b + b;
        let decay = (-(theta * theta * t) / (2.0 * y * y) - drift_decay).exp();
        survival.add(scale * theta * theta.sin() / den * decay);
        bound = (scale * theta / den.abs() * decay).abs();
        if bound < cfg.term_tolerance {
            break;
        }
        if terms >= cfg.max_terms {
            return Err(Error::SeriesTruncation {
                partial_sum: 1.0 - survival.value(),
                terms,
                last_term: bound,
            });
        }
    }
    let raw = 1.0 - survival.value();
    if !raw.is_finite() {
        return Err(Error::Numeric(format!(
            "drawup series not finite at y = {y}, mu = {mu}, T = {t}"
        )));
    }
    Ok(SeriesValue {
        value: raw.clamp(0.0, 1.0),
        terms,
        residual: bound,
    })
}

/// `E sup_{0<=t<=s<=T} (W_s - W_t - c)_+ = ∫_c^∞ G(y) dy` with `G` from
/// [`drawup_cdf_complement`].
pub fn expected_drawup_excess(mu: f64, c: f64, horizon: f64) -> Result<f64> {
    check_c(c)?;
    check_positive("T", horizon)?;
    check_mu(mu)?;
    let cfg = SeriesConfig::default();
    let sd = horizon.sqrt();
    let reach = mu.max(0.0) * horizon;
    let mut err = None;
    let mut g = |y: f64| match drawup_cdf_complement(y, mu, horizon, &cfg) {
        Ok(v) => v.value,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    // beyond 9 sd the tail is below 1e-18 and the series is dominated by round-off
    let cuts = [
        c,
        c + 0.5 * sd,
        c + reach + 2.0 * sd,
        c + reach + 5.0 * sd,
        c + reach + 9.0 * sd,
    ];
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            total += integrate(&mut g, w[0], w[1], 1e-9, 1e-8)?;
        }
    }
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(sup_{0<=t<=T} W_t >= x)` for `x >= 0` (reflection principle).
pub fn sup_bm_tail(x: f64, mu: f64, horizon: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let sd = horizon.sqrt();
    let first = normal_cdf((mu * horizon - x) / sd);
    let phi = normal_cdf((-x - mu * horizon) / sd);
    let second = if phi == 0.0 {
        0.0
    } else {
        (2.0 * mu * x + phi.ln()).exp()
    };
    (first + second).min(1.0)
}

/// `E exp(alpha sup_{0<=t<=T} W_t)`, as `1 + ∫_0^∞ alpha e^{alpha x} P(sup >= x) dx`.
pub fn sup_bm_mgf(alpha: f64, mu: f64, horizon: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("T", horizon)?;
    check_mu(mu)?;
    let sd = horizon.sqrt();
    let peak = ((mu + alpha) * horizon).max(0.0);
    let upper = peak + 14.0 * sd;
    let f = |x: f64| alpha * (alpha * x).exp() * sup_bm_tail(x, mu, horizon);
    // split at the peak so both flanks are smooth
    let mut total = 0.0;
    let cuts = [
        0.0,
        0.5 * peak,
        peak,
        peak + 2.0 * sd,
        peak + 6.0 * sd,
        upper,
    ];
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            total += integrate(f, w[0], w[1], 1e-15, 1e-13)?;
        }
    }
    let v = 1.0 + total;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!(
            "mgf of the supremum overflows at alpha = {alpha}"
        )))
    }
}

/// Iterated bound on `E exp(alpha TV^c[0,T])`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentBound {
    pub value: f64,
    pub delta: f64,
    /// Number of factors, `ceil(T / delta)`.
    pub factors: usize,
    /// `E exp(alpha sup_{[0,T]} W + alpha c)`.
    pub sup_factor: f64,
    /// `P(T_c < delta)`.
    pub p_early: f64,
    /// `1 - sup_factor * p_early`, positive at the returned delta.
    pub denominator: f64,
}

/// Bound `(K P(T_c >= δ) / (1 - K P(T_c < δ)))^{ceil(T/δ)}` with
/// `K = E exp(alpha sup_{[0,T]} W + alpha c)`.
///
/// `δ` is the largest admissible value of the form `T / n`: the smallest
/// number of factors for which the denominator is positive.
pub fn exp_moment_upper_bound(alpha: f64, params: &ModelParams) -> Result<ExpMomentBound> {
    params.validate()?;
    check_positive("alpha", alpha)?;
    let (mu, c, t) = (params.mu, params.c, params.horizon);
    let sup_factor = sup_bm_mgf(alpha, mu, t)? * (alpha * c).exp();
    let cfg = SeriesConfig::default();
    // T_c < δ for W is a drawup of size c within δ for -W
    let p_early = |delta: f64| drawup_cdf_complement(c, -mu, delta, &cfg).map(|s| s.value);
    let admissible = |delta: f64| -> Result<bool> { Ok(1.0 - sup_factor * p_early(delta)? > 0.0) };

    let delta_min = t * 1e-6;
    let factors = if admissible(t)? {
        1
    } else {
        if !admissible(delta_min)? {
            return Err(Error::Infeasible {
                delta_min,
                reason: format!("E exp(alpha sup + alpha c) = {sup_factor} is too large"),
            });
        }
        let (mut lo, mut hi) = (delta_min, t);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if admissible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut n = (t / lo).ceil().max(1.0) as usize;
        while n > 1 && admissible(t / (n - 1) as f64)? {
            n -= 1;
        }
        while !admissible(t / n as f64)? {
            n += 1;
        }
        n
    };
    let delta = t / factors as f64;
    let p = p_early(delta)?;
    let denominator = 1.0 - sup_factor * p;
    let base = sup_factor * (1.0 - p) / denominator;
    let value = base.powi(factors as i32);
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "bound overflows with {factors} factors of {base}"
        )));
    }
    Ok(ExpMomentBound {
        value,
        delta,
        factors,
        sup_factor,
        p_early: p,
        denominator,
    })
}
