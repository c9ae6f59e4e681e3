//! Seeded Monte Carlo estimators for functionals of `W_t = B_t + mu t`.
//!
//! Path `i` of a run always uses the random stream `(seed, i)`, and results
//! are collected in path order before any reduction, so an estimate is the
//! same bit for bit whatever the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{expected_tc, hv_mean};
use crate::error::{check_positive, param, Error, Result};
use crate::path::{generate_bm_path, BrownianIncrements, ModelParams, Path, SimConfig};
use crate::sum::NeumaierSum;
use crate::variation::{tv_linear, utv_linear, DrawupOnline, TvOnline, UtvOnline};

/// Hitting-time windows are extended at most this many times.
pub const MAX_CHUNKS: usize = 50;

/// Above this fraction of capped paths an estimate is marked unreliable.
pub const MAX_CAP_FRACTION: f64 = 0.01;

/// `-ζ(1/2) / √(2π)`: the mean overshoot of a Gaussian random walk over a
/// level, in units of the step standard deviation.
pub const OVERSHOOT_CONST: f64 = 0.582_597_157_939_010_6;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Paths whose window ended before the stopping time was seen.
    pub capped: usize,
    pub reliable: bool,
}

impl EstimateCI {
    pub fn from_samples(samples: &[f64], n_steps: usize, seed: u64) -> Result<Self> {
        let (mean, std_error) = mean_and_se(samples)?;
        Ok(Self {
            mean,
            std_error,
            n_paths: samples.len(),
            n_steps,
            seed,
            capped: 0,
            reliable: true,
        })
    }

    fn with_caps(mut self, capped: usize) -> Self {
        self.capped = capped;
        self.reliable = self.cap_fraction() <= MAX_CAP_FRACTION;
        self
    }

    pub fn cap_fraction(&self) -> f64 {
        self.capped as f64 / self.n_paths as f64
    }

    /// `mean ± k std_error`.
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (
            self.mean - k * self.std_error,
            self.mean + k * self.std_error,
        )
    }
}

/// Sample mean and standard error (sample standard deviation over `√n`),
/// both from compensated sums.
pub fn mean_and_se(samples: &[f64]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(param(format!(
            "an estimate needs at least 2 samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = samples.iter().copied().collect::<NeumaierSum>().value() / nf;
    let ss = samples
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<NeumaierSum>()
        .value();
    let se = (ss / (nf - 1.0) / nf).sqrt();
    if !(mean.is_finite() && se.is_finite()) {
        return Err(Error::Numeric("sample mean is not finite".into()));
    }
    Ok((mean, se))
}

/// Runs `f` on every path index in parallel and returns results in index order.
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n_paths as u64).into_par_iter().map(f).collect()
}

/// Stopping rule for the drawup functional `sup_{t<=s} (W_s - W_t - c)_+`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupWindow {
    /// `[0, T]`.
    FixedT,
    /// `[0, T_c]`, simulated in windows of length `E T_c`.
    UntilTc,
    /// `[0, T_c ∧ T]`.
    TcAndT,
}

/// One path run until its first drawdown of size `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitSample {
    /// Hitting time, or the cap if `capped`.
    pub tc: f64,
    pub capped: bool,
    /// Largest drawup seen up to `tc`.
    pub max_drawup: f64,
}

/// Steps `W` on a grid of width `dt` until the drawdown reaches `c` or
/// `max_steps` steps have been taken.
pub fn simulate_until_drawdown(
    mu: f64,
    c: f64,
    dt: f64,
    max_steps: usize,
    seed: u64,
    path_index: u64,
) -> HitSample {
    let mut inc = BrownianIncrements::new(dt, seed, path_index);
    let drift = mu * dt;
    let (mut w, mut peak) = (0.0f64, 0.0f64);
    let mut drawup = DrawupOnline::default();
    drawup.push(0.0);
    for k in 1..=max_steps {
        w += inc.next_increment() + drift;
        drawup.push(w);
        peak = peak.max(w);
        if peak - w >= c {
            return HitSample {
                tc: k as f64 * dt,
                capped: false,
                max_drawup: drawup.value(),
            };
        }
    }
    HitSample {
        tc: max_steps as f64 * dt,
        capped: true,
        max_drawup: drawup.value(),
    }
}

/// Grid for hitting-time runs: `n_steps` steps per window of length `E T_c`,
/// at most [`MAX_CHUNKS`] windows.
pub fn hitting_grid(params: &ModelParams, n_steps: usize) -> Result<(f64, usize)> {
    let chunk = expected_tc(params.mu, params.c)?;
    Ok((chunk / n_steps as f64, n_steps * MAX_CHUNKS))
}

pub fn hitting_samples(params: &ModelParams, sim: &SimConfig) -> Result<Vec<HitSample>> {
    params.validate()?;
    sim.validate()?;
    let (dt, max_steps) = hitting_grid(params, sim.n_steps)?;
    let (mu, c, seed) = (params.mu, params.c, sim.seed);
    map_paths(sim.n_paths, |i| {
        Ok(simulate_until_drawdown(mu, c, dt, max_steps, seed, i))
    })
}

/// Mean of the first drawdown time `T_c`. `sim.n_steps` is the number of
/// steps per window of length `E T_c`.
pub fn estimate_expected_tc(params: &ModelParams, sim: &SimConfig) -> Result<EstimateCI> {
    let hits = hitting_samples(params, sim)?;
    let t: Vec<f64> = hits.iter().map(|h| h.tc).collect();
    let capped = hits.iter().filter(|h| h.capped).count();
    Ok(EstimateCI::from_samples(&t, sim.n_steps, sim.seed)?.with_caps(capped))
}

/// Mean of `UTV^c[0, T]` over simulated paths.
pub fn estimate_expected_utv(params: &ModelParams, sim: &SimConfig) -> Result<EstimateCI> {
    params.validate()?;
    sim.validate()?;
    let samples = map_paths(sim.n_paths, |i| {
        let p = generate_bm_path(params, sim.n_steps, sim.seed, i)?;
        utv_linear(p.values(), params.c)
    })?;
    EstimateCI::from_samples(&samples, sim.n_steps, sim.seed)
}

/// `(sup drawup - c)_+` of the prefix of `values` ending at the first
/// drawdown of size `c` (or the whole slice).
pub fn drawup_excess_until_drawdown(values: &[f64], c: f64) -> f64 {
    let mut drawup = DrawupOnline::default();
    let mut peak = f64::NEG_INFINITY;
    for &v in values {
        drawup.push(v);
        peak = peak.max(v);
        if peak - v >= c {
            break;
        }
    }
    (drawup.value() - c).max(0.0)
}

/// Mean of `sup (W_s - W_t - c)_+` over the chosen window.
///
/// For [`SupWindow::UntilTc`] `sim.n_steps` counts steps per window of
/// length `E T_c`, as in [`estimate_expected_tc`]; otherwise it is the
/// number of steps on `[0, T]`.
pub fn estimate_sup_functional(
    params: &ModelParams,
    sim: &SimConfig,
    window: SupWindow,
) -> Result<EstimateCI> {
    params.validate()?;
    sim.validate()?;
    let c = params.c;
    match window {
        SupWindow::UntilTc => {
            let hits = hitting_samples(params, sim)?;
            let s: Vec<f64> = hits.iter().map(|h| (h.max_drawup - c).max(0.0)).collect();
            let capped = hits.iter().filter(|h| h.capped).count();
            Ok(EstimateCI::from_samples(&s, sim.n_steps, sim.seed)?.with_caps(capped))
        }
        SupWindow::FixedT | SupWindow::TcAndT => {
            let samples = map_paths(sim.n_paths, |i| {
                let p = generate_bm_path(params, sim.n_steps, sim.seed, i)?;
                Ok(match window {
                    SupWindow::FixedT => (crate::variation::max_drawup(p.values()) - c).max(0.0),
                    _ => drawup_excess_until_drawdown(p.values(), c),
                })
            })?;
            EstimateCI::from_samples(&samples, sim.n_steps, sim.seed)
        }
    }
}

/// `E exp(alpha (TV^c[0,T] ∧ M))` at the truncation `M` and at `M / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentEstimate {
    pub truncation: f64,
    pub at_truncation: EstimateCI,
    pub at_half_truncation: EstimateCI,
    /// Mean of the per-path difference between the two, and its standard error.
    pub truncation_gap: f64,
    pub truncation_gap_se: f64,
}

pub fn estimate_exp_moment(
    alpha: f64,
    params: &ModelParams,
    sim: &SimConfig,
    truncation: f64,
) -> Result<ExpMomentEstimate> {
    check_positive("alpha", alpha)?;
    check_positive("truncation", truncation)?;
    params.validate()?;
    sim.validate()?;
    let tv = map_paths(sim.n_paths, |i| {
        let p = generate_bm_path(params, sim.n_steps, sim.seed, i)?;
        tv_linear(p.values(), params.c)
    })?;
    let moment = |m: f64| -> Result<EstimateCI> {
        let s: Vec<f64> = tv.iter().map(|v| (alpha * v.min(m)).exp()).collect();
        EstimateCI::from_samples(&s, sim.n_steps, sim.seed)
    };
    let gaps: Vec<f64> = tv
        .iter()
        .map(|v| (alpha * v.min(truncation)).exp() - (alpha * v.min(0.5 * truncation)).exp())
        .collect();
    let (truncation_gap, truncation_gap_se) = mean_and_se(&gaps)?;
    Ok(ExpMomentEstimate {
        truncation,
        truncation_gap,
        truncation_gap_se,
        at_truncation: moment(truncation)?,
        at_half_truncation: moment(0.5 * truncation)?,
    })
}

/// Fraction of `samples` at or above each query point.
pub fn empirical_ccdf(samples: &[f64], query: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(param("empirical ccdf needs at least one sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(param("samples contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(query
        .iter()
        .map(|&q| {
            let below = sorted.partition_point(|&x| x < q);
            (sorted.len() - below) as f64 / n
        })
        .collect())
}

/// Empirical quantile (lower order statistic) of already sorted samples.
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// First-order discretization allowance for a functional `f` of the level
/// `c` under monitoring on a grid of width `dt`: `|f(c + 2 β √dt) - f(c)|`
/// with `β` = [`OVERSHOOT_CONST`]. Both the running extremum and the
/// crossing are monitored discretely, hence the factor 2.
pub fn grid_bias_allowance(f: impl Fn(f64) -> Result<f64>, c: f64, dt: f64) -> Result<f64> {
    check_positive("dt", dt)?;
    let shift = 2.0 * OVERSHOOT_CONST * dt.sqrt();
    Ok((f(c + shift)? - f(c)?).abs())
}

pub fn tc_bias_allowance(mu: f64, c: f64, dt: f64) -> Result<f64> {
    grid_bias_allowance(|l| expected_tc(mu, l), c, dt)
}

pub fn hv_bias_allowance(mu: f64, c: f64, dt: f64) -> Result<f64> {
    grid_bias_allowance(|l| hv_mean(mu, l), c, dt)
}

/// Coarse/fine comparison of an estimate: the fine grid has `n_steps`
/// steps and the coarse grid every second point of the same paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub coarse_steps: usize,
    pub fine_steps: usize,
    pub coarse_mean: f64,
    pub fine_mean: f64,
    /// Mean of fine minus coarse, paired per path.
    pub difference: f64,
    pub difference_se: f64,
}

impl Refinement {
    pub fn from_pairs(coarse: &[f64], fine: &[f64], fine_steps: usize) -> Result<Self> {
        if coarse.len() != fine.len() {
            return Err(param("refinement samples differ in length"));
        }
        let d: Vec<f64> = fine.iter().zip(coarse).map(|(f, c)| f - c).collect();
        let (difference, difference_se) = mean_and_se(&d)?;
        Ok(Self {
            coarse_steps: fine_steps / 2,
            fine_steps,
            coarse_mean: mean_and_se(coarse)?.0,
            fine_mean: mean_and_se(fine)?.0,
            difference,
            difference_se,
        })
    }
}

/// Every second sample, always keeping the last one.
pub fn coarsen(p: &Path) -> Path {
    let n = p.len();
    let keep = |i: usize| i.is_multiple_of(2) || i + 1 == n;
    let times = p
        .times()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, t)| *t)
        .collect();
    let values = p
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, v)| *v)
        .collect();
    Path::new(times, values).expect("subsequence of a valid path")
}

/// Streaming UTV and TV of one path, without storing it.
pub fn streamed_variations(
    params: &ModelParams,
    n_steps: usize,
    seed: u64,
    path_index: u64,
) -> (f64, f64) {
    let dt = params.horizon / n_steps as f64;
    let mut inc = BrownianIncrements::new(dt, seed, path_index);
    let mut utv = UtvOnline::new(params.c);
    let mut tv = TvOnline::new(params.c);
    utv.push(0.0);
    tv.push(0.0);
    // times are T i / n, matching generate_bm_path exactly
    let mut b = 0.0;
    for i in 1..=n_steps {
        b += inc.next_increment();
        let w = b + params.mu * (params.horizon * i as f64 / n_steps as f64);
        utv.push(w);
        tv.push(w);
    }
    (utv.value(), tv.value())
}

/// Streaming largest drawup of one path on `[0, T]`, without storing it.
pub fn streamed_max_drawup(
    params: &ModelParams,
    n_steps: usize,
    seed: u64,
    path_index: u64,
) -> f64 {
    let dt = params.horizon / n_steps as f64;
    let mut inc = BrownianIncrements::new(dt, seed, path_index);
    let mut drawup = DrawupOnline::default();
    drawup.push(0.0);
    let mut b = 0.0;
    for i in 1..=n_steps {
        b += inc.next_increment();
        drawup.push(b + params.mu * (params.horizon * i as f64 / n_steps as f64));
    }
    drawup.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(n_steps: usize, n_paths: usize, seed: u64) -> SimConfig {
        SimConfig::new(n_steps, n_paths, seed).unwrap()
    }

    #[test]
    fn estimate_ci_arithmetic() {
        let e = EstimateCI::from_samples(&[1.0, 2.0, 3.0, 4.0], 10, 5).unwrap();
        assert_eq!(e.mean, 2.5);
        // sample sd = sqrt(5/3), se = sd / 2
        assert!((e.std_error - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert!(EstimateCI::from_samples(&[1.0], 10, 5).is_err());
        let e = e.with_caps(1);
        assert!(!e.reliable);
        assert_eq!(e.cap_fraction(), 0.25);
    }

    #[test]
    fn ccdf_examples() {
        let s = [1.0, 2.0, 3.0];
        let q = empirical_ccdf(&s, &[0.0, 2.0, 3.5, 3.0]).unwrap();
        assert_eq!(q, vec![1.0, 2.0 / 3.0, 0.0, 1.0 / 3.0]);
        assert!(empirical_ccdf(&[], &[1.0]).is_err());
        let many: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let grid: Vec<f64> = (0..120).map(|i| i as f64 - 10.0).collect();
        let c = empirical_ccdf(&many, &grid).unwrap();
        assert!(c.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(sorted_quantile(&s, 0.0), 1.0);
        assert_eq!(sorted_quantile(&s, 0.5), 2.0);
        assert_eq!(sorted_quantile(&s, 0.51), 3.0);
        assert_eq!(sorted_quantile(&s, 1.0), 4.0);
    }

    #[test]
    fn estimators_are_deterministic() {
        let p = ModelParams::bm(0.5, 1.0, 1.0).unwrap();
        let s = sim(100, 200, 3);
        assert_eq!(
            estimate_expected_utv(&p, &s).unwrap(),
            estimate_expected_utv(&p, &s).unwrap()
        );
        assert_eq!(
            estimate_expected_tc(&p, &s).unwrap(),
            estimate_expected_tc(&p, &s).unwrap()
        );
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let threaded = pool.install(|| estimate_expected_tc(&p, &s).unwrap());
        assert_eq!(threaded, estimate_expected_tc(&p, &s).unwrap());
    }

    #[test]
    fn streamed_matches_stored() {
        let p = ModelParams::bm(-0.3, 0.4, 2.0).unwrap();
        for i in 0..5 {
            let path = generate_bm_path(&p, 300, 9, i).unwrap();
            let (u, t) = streamed_variations(&p, 300, 9, i);
            assert_eq!(u, utv_linear(path.values(), 0.4).unwrap());
            assert_eq!(t, tv_linear(path.values(), 0.4).unwrap());
            assert_eq!(
                streamed_max_drawup(&p, 300, 9, i),
                crate::variation::max_drawup(path.values())
            );
        }
    }

    #[test]
    fn hitting_run_agrees_with_stored_path() {
        // the hitting simulator and a stored path share increments
        let p = ModelParams::bm(0.0, 0.5, 1.0).unwrap();
        let (dt, _) = hitting_grid(&p, 200).unwrap();
        for i in 0..20 {
            let h = simulate_until_drawdown(0.0, 0.5, dt, 200 * MAX_CHUNKS, 4, i);
            let long = ModelParams::bm(0.0, 0.5, dt * (200 * MAX_CHUNKS) as f64).unwrap();
            let path = generate_bm_path(&long, 200 * MAX_CHUNKS, 4, i).unwrap();
            let k = crate::variation::first_drawdown_time(path.values(), 0.5, 0);
            match k {
                Some(k) => {
                    assert!(!h.capped);
                    assert!((h.tc - path.times()[k]).abs() < 1e-9);
                    let d = crate::variation::max_drawup(&path.values()[..=k]);
                    assert!((h.max_drawup - d).abs() < 1e-9);
                }
                None => assert!(h.capped),
            }
        }
    }

    #[test]
    fn large_level_is_flagged() {
        // a window that is far too short caps nearly every path
        let h = simulate_until_drawdown(0.0, 5.0, 1e-3, 10, 1, 0);
        assert!(h.capped);
        let e = EstimateCI::from_samples(&[1.0, 2.0, 3.0], 1, 0)
            .unwrap()
            .with_caps(2);
        assert!(!e.reliable);
    }

    #[test]
    fn exp_moment_near_zero_alpha() {
        let p = ModelParams::bm(0.0, 1.0, 1.0).unwrap();
        let e = estimate_exp_moment(1e-9, &p, &sim(100, 50, 1), 10.0).unwrap();
        assert!((e.at_truncation.mean - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_window_small_horizon_vanishes() {
        let p = ModelParams::bm(0.0, 1.0, 1e-6).unwrap();
        let e = estimate_sup_functional(&p, &sim(50, 100, 2), SupWindow::FixedT).unwrap();
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn coarsen_keeps_ends() {
        let p = Path::from_values(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(coarsen(&p).values(), &[0.0, 2.0, 4.0, 5.0]);
        let q = Path::from_values(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(coarsen(&q).values(), &[0.0, 2.0]);
    }

    #[test]
    fn allowance_is_small_and_positive() {
        let a = tc_bias_allowance(0.0, 1.0, 1e-4).unwrap();
        // d/dc c^2 = 2, shift 2 β 1e-2
        assert!((a - ((1.0 + 0.02 * OVERSHOOT_CONST).powi(2) - 1.0)).abs() < 1e-12);
        assert!(hv_bias_allowance(1.0, 1.0, 1e-4).unwrap() > 0.0);
    }
}
