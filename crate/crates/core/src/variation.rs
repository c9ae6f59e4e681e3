//! Truncated variation functionals of a sampled path.
//!
//! All suprema run over sample indices. With `f(i)` the best value using
//! pairs that end at or before index `i`, the upward functional satisfies
//!
//! ```text
//! f(i) = max( f(i-1), max_{j<i} (f(j) - x_j) + x_i - c )
//! ```
//!
//! so carrying the running maximum of `f(j) - x_j` gives a single O(n) pass.
//! The two-sided functional carries `f(j) + x_j` as well. Letting a new pair
//! start where the previous one ended never helps when `c >= 0` (merging the
//! two pairs gains `c`), so these recursions agree with the strictly
//! interleaved definitions.

use serde::{Deserialize, Serialize};

use crate::error::{check_level, check_positive, Result};
use crate::path::Path;
use crate::sum::NeumaierSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariationKind {
    Tv,
    Utv,
    Dtv,
}

impl VariationKind {
    pub const ALL: [VariationKind; 3] = [VariationKind::Tv, VariationKind::Utv, VariationKind::Dtv];
}

/// Streaming form of the upward recursion.
#[derive(Clone, Copy, Debug)]
pub struct UtvOnline {
    c: f64,
    best: f64,
    carry: f64,
    started: bool,
}

impl UtvOnline {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            best: 0.0,
            carry: f64::NEG_INFINITY,
            started: false,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if self.started {
            let cand = self.carry + x - self.c;
            if cand > self.best {
                self.best = cand;
            }
        }
        self.started = true;
        let next = self.best - x;
        if next > self.carry {
            self.carry = next;
        }
    }

    pub fn value(&self) -> f64 {
        self.best
    }
}

/// Streaming form of the two-sided recursion.
#[derive(Clone, Copy, Debug)]
pub struct TvOnline {
    c: f64,
    best: f64,
    carry_minus: f64,
    carry_plus: f64,
    started: bool,
}

impl TvOnline {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            best: 0.0,
            carry_minus: f64::NEG_INFINITY,
            carry_plus: f64::NEG_INFINITY,
            started: false,
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        if self.started {
            let up = self.carry_minus + x - self.c;
            let down = self.carry_plus - x - self.c;
            self.best = self.best.max(up).max(down);
        }
        self.started = true;
        self.carry_minus = self.carry_minus.max(self.best - x);
        self.carry_plus = self.carry_plus.max(self.best + x);
    }

    pub fn value(&self) -> f64 {
        self.best
    }
}

/// Running maximum of `x_s - x_t` over `t <= s`.
#[derive(Clone, Copy, Debug)]
pub struct DrawupOnline {
    min: f64,
    max_drawup: f64,
}

impl Default for DrawupOnline {
    fn default() -> Self {
        Self {
            min: f64::INFINITY,
            max_drawup: 0.0,
        }
    }
}

impl DrawupOnline {
    #[inline]
    pub fn push(&mut self, x: f64) {
        if x < self.min {
            self.min = x;
        }
        let d = x - self.min;
        if d > self.max_drawup {
            self.max_drawup = d;
        }
    }

    pub fn value(&self) -> f64 {
        self.max_drawup
    }
}

/// Largest `x_s - x_t` with `t <= s`, zero for paths shorter than two.
pub fn max_drawup(values: &[f64]) -> f64 {
    let mut d = DrawupOnline::default();
    values.iter().for_each(|&x| d.push(x));
    d.value()
}

/// Upward truncated variation in linear time.
pub fn utv_linear(values: &[f64], c: f64) -> Result<f64> {
    check_level(c)?;
    let mut acc = UtvOnline::new(c);
    values.iter().for_each(|&x| acc.push(x));
    Ok(acc.value())
}

/// Downward truncated variation, computed as the upward one of `-x`.
pub fn dtv_linear(values: &[f64], c: f64) -> Result<f64> {
    check_level(c)?;
    let mut acc = UtvOnline::new(c);
    values.iter().for_each(|&x| acc.push(-x));
    Ok(acc.value())
}

/// Truncated variation in linear time.
pub fn tv_linear(values: &[f64], c: f64) -> Result<f64> {
    check_level(c)?;
    let mut acc = TvOnline::new(c);
    values.iter().for_each(|&x| acc.push(x));
    Ok(acc.value())
}

pub fn variation(values: &[f64], c: f64, kind: VariationKind) -> Result<f64> {
    match kind {
        VariationKind::Tv => tv_linear(values, c),
        VariationKind::Utv => utv_linear(values, c),
        VariationKind::Dtv => dtv_linear(values, c),
    }
}

/// Ordered buy/sell style index pairs `t_1 < s_1 < t_2 < s_2 < ...`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub pairs: Vec<(usize, usize)>,
}

impl Partition {
    pub fn is_interleaved(&self) -> bool {
        self.pairs.iter().all(|&(t, s)| t < s) && self.pairs.windows(2).all(|w| w[0].1 < w[1].0)
    }

    /// `sum (x_s - x_t - c)_+` over the pairs.
    pub fn upward_gain(&self, values: &[f64], c: f64) -> f64 {
        self.pairs
            .iter()
            .map(|&(t, s)| (values[s] - values[t] - c).max(0.0))
            .collect::<NeumaierSum>()
            .value()
    }
}

/// Realizing partition of [`utv_linear`], earliest indices on ties. Only
/// pairs with a strictly positive contribution are returned.
pub fn utv_argmax_partition(values: &[f64], c: f64) -> Result<Partition> {
    check_level(c)?;
    let n = values.len();
    if n < 2 {
        return Ok(Partition::default());
    }
    let mut f = vec![0.0; n];
    let mut start_of = vec![None; n];
    let mut carry = -values[0];
    let mut carry_at = 0;
    for i in 1..n {
        let cand = carry + values[i] - c;
        if cand > f[i - 1] {
            f[i] = cand;
            start_of[i] = Some(carry_at);
        } else {
            f[i] = f[i - 1];
        }
        if f[i] - values[i] > carry {
            carry = f[i] - values[i];
            carry_at = i;
        }
    }
    let mut pairs = Vec::new();
    let mut i = n - 1;
    while i > 0 {
        match start_of[i] {
            Some(j) => {
                pairs.push((j, i));
                i = j;
            }
            None => i -= 1,
        }
    }
    pairs.reverse();
    Ok(Partition { pairs })
}

/// One segment between consecutive drawdown times of size `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub start_index: usize,
    /// First index where the running maximum exceeds the value by `c`.
    pub tc_index: Option<usize>,
    /// Last index attaining the running maximum before `tc_index`.
    pub argmax_index: usize,
    /// Minimum of the segment up to `argmax_index`.
    pub argmin_index: usize,
    pub max_drawup: f64,
}

/// Upward truncated variation via drawdown segmentation.
///
/// Cuts the path at successive drawdown times of size `c` and adds
/// `(max_drawup - c)_+` of every segment, the final partial one included.
pub fn utv_greedy_segments(values: &[f64], c: f64) -> Result<(f64, Vec<SegmentStats>)> {
    check_level(c)?;
    let mut segments = Vec::new();
    let Some(&x0) = values.first() else {
        return Ok((0.0, segments));
    };
    let fresh = |i: usize, x: f64| {
        (
            SegmentStats {
                start_index: i,
                tc_index: None,
                argmax_index: i,
                argmin_index: i,
                max_drawup: 0.0,
            },
            x,
            x,
            i,
        )
    };
    // (stats, running max, running min, index of running min)
    let (mut seg, mut run_max, mut run_min, mut min_at) = fresh(0, x0);
    let mut total = 0.0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x < run_min {
            run_min = x;
            min_at = i;
        }
        if x >= run_max {
            run_max = x;
            seg.argmax_index = i;
            seg.argmin_index = min_at;
        }
        seg.max_drawup = seg.max_drawup.max(x - run_min);
        if run_max - x >= c {
            seg.tc_index = Some(i);
            total += (seg.max_drawup - c).max(0.0);
            segments.push(seg);
            (seg, run_max, run_min, min_at) = fresh(i, x);
        }
    }
    total += (seg.max_drawup - c).max(0.0);
    segments.push(seg);
    Ok((total, segments))
}

fn scan_drawdown(values: &[f64], c: f64, from: usize, first: usize) -> Option<usize> {
    let mut run_max = *values.get(from)?;
    for (i, &x) in values.iter().enumerate().skip(from) {
        run_max = run_max.max(x);
        if i >= first && run_max - x >= c {
            return Some(i);
        }
    }
    None
}

/// Smallest `i >= from` with `max(x_from..=x_i) - x_i >= c`.
pub fn first_drawdown_time(values: &[f64], c: f64, from: usize) -> Option<usize> {
    scan_drawdown(values, c, from, from)
}

/// The discounted sum
/// `sum_i exp(-tau_{i-1}/T) sup_{tau_{i-1} <= t < s <= tau_i ∧ (tau_{i-1}+T)} (x_s - x_t - c)_+`
/// over successive drawdown times `tau_i` (with `tau_0 = 0`), truncated at
/// the end of the path. Times are taken from the path.
pub fn discounted_utv(path: &Path, c: f64, horizon: f64) -> Result<f64> {
    check_level(c)?;
    check_positive("horizon", horizon)?;
    let (times, values) = (path.times(), path.values());
    if values.is_empty() {
        return Ok(0.0);
    }
    let t0 = times[0];
    let mut total = NeumaierSum::new();
    let mut start = 0;
    loop {
        let tau = times[start] - t0;
        let next = scan_drawdown(values, c, start, start + 1);
        let limit = times[start] + horizon;
        let last = next.unwrap_or(values.len() - 1);
        let end = start + times[start..=last].partition_point(|&t| t <= limit);
        let sup = (max_drawup(&values[start..end]) - c).max(0.0);
        if sup > 0.0 {
            total.add((-tau / horizon).exp() * sup);
        }
        match next {
            Some(i) => start = i,
            None => break,
        }
    }
    Ok(total.value())
}
