//! Executable checks of the bounds on `E UTV^c[0, T]` and the pathwise
//! relations they rest on.
//!
//! Pathwise claims must hold on every simulated path up to
//! [`PATHWISE_TOL`]. Distributional claims pass when the margin (right side
//! minus left side) is at least `-3` standard errors of the margin, with the
//! error computed from per-path differences when both sides come from the
//! same paths.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::closed_form::{
    exp_moment_upper_bound, expected_drawup_excess, expected_tc, hv_mean, tc_moment_ratio,
};
use crate::error::{param, Error, Result};
use crate::montecarlo::{
    coarsen, drawup_excess_until_drawdown, empirical_ccdf, estimate_exp_moment,
    grid_bias_allowance, hitting_samples, hv_bias_allowance, map_paths, mean_and_se,
    simulate_until_drawdown, sorted_quantile, tc_bias_allowance, EstimateCI, Refinement,
};
use crate::path::{
    generate_bm_path, negate_path, slice_path, uniform_grid, ModelParams, Path, SimConfig,
};
use crate::variation::{
    discounted_utv, dtv_linear, max_drawup, tv_linear, utv_greedy_segments, utv_linear,
};

/// Standard errors of slack granted to statistical claims.
pub const SLACK_SE: f64 = 3.0;

/// Tolerance of pathwise claims.
pub const PATHWISE_TOL: f64 = 1e-9;

/// Below this many paths a report is marked low-power.
pub const LOW_POWER_PATHS: usize = 100;

/// Below this many nonzero samples a rare-event estimate is marked
/// low-power, since its standard error carries no information.
pub const LOW_POWER_EVENTS: usize = 10;

pub const LONG_LOWER_CONST: f64 = 0.3;
pub const LONG_UPPER_CONST: f64 = 27.0;
pub const LONG_WINDOW_CONST: f64 = 3.0;
pub const SHORT_UPPER_PROOF_CONST: f64 = 4.5;
pub const SHORT_UPPER_CONST: f64 = 5.0;
pub const EARLY_FRACTION: f64 = 1.0 / 3.0;
pub const EARLY_PROBABILITY: f64 = 7.0 / 9.0;

/// Every claim the harness can check, with a one-line statement.
pub const CLAIMS: &[(&str, &str)] = &[
    (
        "LONG_LOWER",
        "0.3 T/E T_c E sup_{T_c ∧ T} (W_s - W_t - c)_+ <= E UTV[0,T] for T >= E T_c/3",
    ),
    (
        "LONG_UPPER",
        "E UTV[0,T] <= 27 T/E T_c E sup_{T_c ∧ T} (W_s - W_t - c)_+ for T >= E T_c/3",
    ),
    (
        "LONG_WINDOW_LOWER",
        "3 T/E T_c E sup_{[0, E T_c/3]} (W_s - W_t - c)_+ <= E UTV[0,T]",
    ),
    (
        "LONG_CLOSED_UPPER",
        "E UTV[0,T] <= 27 T/E T_c E sup_{[0, T_c]} (W_s - W_t - c)_+ (closed form)",
    ),
    (
        "SHORT_LOWER",
        "E sup_{[0,T]} (W_s - W_t - c)_+ <= E UTV[0,T] for T < E T_c/3",
    ),
    (
        "SHORT_UPPER_PROOF",
        "E UTV[0,T] <= 9/2 E sup_{[0,T]} (W_s - W_t - c)_+ for T < E T_c/3",
    ),
    (
        "SHORT_UPPER",
        "E UTV[0,T] <= 5 E sup_{[0,T]} (W_s - W_t - c)_+ for T < E T_c/3",
    ),
    (
        "SHORT_SUP_CLOSED_FORM",
        "simulated E sup_{[0,T]} (W_s - W_t - c)_+ matches the drawup series",
    ),
    (
        "DISCOUNT_PATHWISE",
        "UTV[0,T] <= e * discounted UTV, on every path",
    ),
    (
        "DISCOUNT_DOMINATION",
        "UTV[0,T] stochastically dominates (1 - 1/e)/2 * discounted UTV",
    ),
    ("EARLY_DRAWDOWN", "P(T_c < E T_c/3) <= 7/9"),
    ("MOMENT_RATIO", "(E T_c)^2 / E T_c^2 >= 1/2"),
    ("TC_MEAN", "simulated E T_c matches the closed form"),
    (
        "DRAWUP_MEAN_UNTIL_TC",
        "simulated E sup_{[0,T_c]} (W_s - W_t - c)_+ matches the closed form",
    ),
    ("REL_TV_GE_UTV", "TV >= UTV on every path"),
    ("REL_TV_GE_DTV", "TV >= DTV on every path"),
    ("REL_TV_LE_SUM", "TV <= UTV + DTV on every path"),
    ("REL_DUALITY", "UTV(-x) = DTV(x) on every path"),
    (
        "REL_GREEDY",
        "drawdown segmentation reproduces UTV on every path",
    ),
    (
        "SUPERADDITIVITY",
        "sum of TV, UTV, DTV over consecutive pieces <= value on the whole path",
    ),
    (
        "SHIFT_INVARIANCE",
        "UTV over [0,T] and [T/2, 3T/2] have the same law",
    ),
    ("EXP_MOMENT", "E exp(alpha (TV[0,T] ∧ M)) <= iterated bound"),
    (
        "EXP_MOMENT_TRUNCATION",
        "E exp(alpha (TV ∧ M)) and E exp(alpha (TV ∧ M/2)) agree",
    ),
];

/// One side of a claim.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Exact(f64),
    Estimate(EstimateCI),
}

impl Quantity {
    pub fn value(&self) -> f64 {
        match self {
            Quantity::Exact(v) => *v,
            Quantity::Estimate(e) => e.mean,
        }
    }
}

/// Parameters needed to rerun a report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub params: Option<ModelParams>,
    pub sim: Option<SimConfig>,
    pub extra: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub claim_id: String,
    pub description: String,
    pub constants: Vec<f64>,
    pub lhs: Quantity,
    pub rhs: Quantity,
    /// `rhs - lhs`; for two-sided checks the signed difference.
    pub margin: f64,
    pub margin_se: f64,
    /// Discretization allowance added to the statistical slack.
    pub allowance: f64,
    pub two_sided: bool,
    pub passed: bool,
    /// Pathwise or pointwise checks: failures and total checked.
    pub violations: Option<usize>,
    pub checked: Option<usize>,
    pub low_power: bool,
    pub flags: Vec<String>,
    pub refinement: Option<Refinement>,
    pub config: ReportConfig,
}

fn description(id: &str) -> String {
    CLAIMS
        .iter()
        .find(|(c, _)| *c == id)
        .map(|(_, d)| d.to_string())
        .unwrap_or_default()
}

impl BoundReport {
    fn base(id: &str, lhs: Quantity, rhs: Quantity, config: ReportConfig) -> Self {
        let low_power = config.sim.is_some_and(|s| s.n_paths < LOW_POWER_PATHS);
        Self {
            claim_id: id.to_string(),
            description: description(id),
            constants: Vec::new(),
            lhs,
            rhs,
            margin: rhs.value() - lhs.value(),
            margin_se: 0.0,
            allowance: 0.0,
            two_sided: false,
            passed: false,
            violations: None,
            checked: None,
            low_power,
            flags: Vec::new(),
            refinement: None,
            config,
        }
    }

    /// One-sided statistical claim `lhs <= rhs`.
    fn statistical(
        id: &str,
        lhs: Quantity,
        rhs: Quantity,
        margin_se: f64,
        config: ReportConfig,
    ) -> Self {
        let mut r = Self::base(id, lhs, rhs, config);
        r.margin_se = margin_se;
        r.passed = r.margin >= -SLACK_SE * margin_se;
        r.flag_unreliable();
        r
    }

    /// Two-sided agreement within `3 SE + allowance`.
    fn agreement(
        id: &str,
        estimate: Quantity,
        exact: Quantity,
        margin_se: f64,
        allowance: f64,
        config: ReportConfig,
    ) -> Self {
        let mut r = Self::base(id, estimate, exact, config);
        r.two_sided = true;
        r.margin_se = margin_se;
        r.allowance = allowance;
        r.passed = r.margin.abs() <= SLACK_SE * margin_se + allowance;
        r.flag_unreliable();
        r
    }

    /// Claim checked item by item with no slack.
    fn counted(
        id: &str,
        lhs: Quantity,
        rhs: Quantity,
        violations: usize,
        checked: usize,
        config: ReportConfig,
    ) -> Self {
        let mut r = Self::base(id, lhs, rhs, config);
        r.violations = Some(violations);
        r.checked = Some(checked);
        r.passed = violations == 0;
        r
    }

    fn with_constants(mut self, constants: &[f64]) -> Self {
        self.constants = constants.to_vec();
        self
    }

    fn with_refinement(mut self, refinement: Refinement) -> Self {
        self.refinement = Some(refinement);
        self
    }

    fn with_event_count(mut self, events: usize) -> Self {
        if events < LOW_POWER_EVENTS {
            self.low_power = true;
            self.flags
                .push(format!("rare event: {events} nonzero samples"));
        }
        self
    }

    fn flag_unreliable(&mut self) {
        for q in [self.lhs, self.rhs] {
            if let Quantity::Estimate(e) = q {
                if !e.reliable {
                    self.flags.push(format!(
                        "unreliable: {} of {} paths capped",
                        e.capped, e.n_paths
                    ));
                }
            }
        }
    }

    /// Slack actually granted.
    pub fn slack(&self) -> f64 {
        SLACK_SE * self.margin_se + self.allowance
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Long,
    Short,
}

/// Parameters tagged with their regime; long iff `T >= E T_c / 3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub params: ModelParams,
    pub regime: Regime,
    pub expected_tc: f64,
}

impl RegimeParams {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let etc = expected_tc(params.mu, params.c)?;
        let regime = if params.horizon >= etc / 3.0 {
            Regime::Long
        } else {
            Regime::Short
        };
        Ok(Self {
            params,
            regime,
            expected_tc: etc,
        })
    }

    /// `T = 3 E T_c`.
    pub fn long(mu: f64, c: f64) -> Result<Self> {
        Self::new(ModelParams::bm(mu, c, 3.0 * expected_tc(mu, c)?)?)
    }

    /// `T = E T_c / 10`.
    pub fn short(mu: f64, c: f64) -> Result<Self> {
        Self::new(ModelParams::bm(mu, c, 0.1 * expected_tc(mu, c)?)?)
    }
}

fn config(params: &ModelParams, sim: &SimConfig, extra: &[(&str, f64)]) -> ReportConfig {
    ReportConfig {
        params: Some(*params),
        sim: Some(*sim),
        extra: extra.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

fn estimate(samples: &[f64], sim: &SimConfig) -> Result<EstimateCI> {
    EstimateCI::from_samples(samples, sim.n_steps, sim.seed)
}

/// `k * samples` as an estimate.
fn scaled(samples: &[f64], k: f64, sim: &SimConfig) -> Result<EstimateCI> {
    let s: Vec<f64> = samples.iter().map(|x| k * x).collect();
    estimate(&s, sim)
}

/// Standard error of the mean of `b - a`, paired per path.
fn paired_se(a: &[f64], b: &[f64]) -> Result<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    Ok(mean_and_se(&d)?.1)
}

/// Index of the last grid time not beyond `t` (with a relative guard for
/// round-off).
fn last_index_at(times: &[f64], t: f64) -> usize {
    let guard = t * (1.0 + 1e-12);
    times.partition_point(|&s| s <= guard).saturating_sub(1)
}

/// The four long-regime reports.
pub fn verify_long_regime(rp: &RegimeParams, sim: &SimConfig) -> Result<Vec<BoundReport>> {
    if rp.regime != Regime::Long {
        return Err(Error::Regime(format!(
            "T = {} is below E T_c / 3 = {}",
            rp.params.horizon,
            rp.expected_tc / 3.0
        )));
    }
    sim.validate()?;
    let p = rp.params;
    let etc = rp.expected_tc;
    let ratio = p.horizon / etc;
    let third = uniform_grid(p.horizon, sim.n_steps);
    let k3 = last_index_at(&third, etc / 3.0);
    let rows = map_paths(sim.n_paths, |i| {
        let path = generate_bm_path(&p, sim.n_steps, sim.seed, i)?;
        let v = path.values();
        let u = utv_linear(v, p.c)?;
        let u_coarse = utv_linear(coarsen(&path).values(), p.c)?;
        let s_stop = drawup_excess_until_drawdown(v, p.c);
        let s_third = (max_drawup(&v[..=k3]) - p.c).max(0.0);
        Ok([u, u_coarse, s_stop, s_third])
    })?;
    let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let (u, u_coarse, s_stop, s_third) = (col(0), col(1), col(2), col(3));
    let refinement = Refinement::from_pairs(&u_coarse, &u, sim.n_steps)?;
    let cfg = config(
        &p,
        sim,
        &[
            ("expected_tc", etc),
            ("window", etc / 3.0),
            ("window_time", third[k3]),
        ],
    );
    let eu = Quantity::Estimate(estimate(&u, sim)?);

    let k_lo = LONG_LOWER_CONST * ratio;
    let lo: Vec<f64> = s_stop.iter().map(|s| k_lo * s).collect();
    let lower = BoundReport::statistical(
        "LONG_LOWER",
        Quantity::Estimate(estimate(&lo, sim)?),
        eu,
        paired_se(&lo, &u)?,
        cfg.clone(),
    )
    .with_constants(&[LONG_LOWER_CONST])
    .with_refinement(refinement);

    let k_hi = LONG_UPPER_CONST * ratio;
    let hi: Vec<f64> = s_stop.iter().map(|s| k_hi * s).collect();
    let upper = BoundReport::statistical(
        "LONG_UPPER",
        eu,
        Quantity::Estimate(estimate(&hi, sim)?),
        paired_se(&u, &hi)?,
        cfg.clone(),
    )
    .with_constants(&[LONG_UPPER_CONST])
    .with_refinement(refinement);

    let k_w = LONG_WINDOW_CONST * ratio;
    let w: Vec<f64> = s_third.iter().map(|s| k_w * s).collect();
    let window = BoundReport::statistical(
        "LONG_WINDOW_LOWER",
        Quantity::Estimate(estimate(&w, sim)?),
        eu,
        paired_se(&w, &u)?,
        cfg.clone(),
    )
    .with_constants(&[LONG_WINDOW_CONST])
    .with_refinement(refinement);

    let closed = LONG_UPPER_CONST * ratio * hv_mean(p.mu, p.c)?;
    let se_u = mean_and_se(&u)?.1;
    let closed_upper =
        BoundReport::statistical("LONG_CLOSED_UPPER", eu, Quantity::Exact(closed), se_u, cfg)
            .with_constants(&[LONG_UPPER_CONST])
            .with_refinement(refinement);

    Ok(vec![lower, upper, window, closed_upper])
}

/// The three short-regime reports plus a cross-check of the simulated
/// supremum against the drawup series.
pub fn verify_short_regime(rp: &RegimeParams, sim: &SimConfig) -> Result<Vec<BoundReport>> {
    if rp.regime != Regime::Short {
        return Err(Error::Regime(format!(
            "T = {} is not below E T_c / 3 = {}",
            rp.params.horizon,
            rp.expected_tc / 3.0
        )));
    }
    sim.validate()?;
    let p = rp.params;
    let rows = map_paths(sim.n_paths, |i| {
        let path = generate_bm_path(&p, sim.n_steps, sim.seed, i)?;
        let v = path.values();
        let coarse = coarsen(&path);
        Ok([
            utv_linear(v, p.c)?,
            utv_linear(coarse.values(), p.c)?,
            (max_drawup(v) - p.c).max(0.0),
            (max_drawup(coarse.values()) - p.c).max(0.0),
        ])
    })?;
    let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let (u, u_coarse, s, s_coarse) = (col(0), col(1), col(2), col(3));
    let refinement = Refinement::from_pairs(&u_coarse, &u, sim.n_steps)?;
    let cfg = config(&p, sim, &[("expected_tc", rp.expected_tc)]);
    let eu = Quantity::Estimate(estimate(&u, sim)?);
    let es = estimate(&s, sim)?;
    let events = s.iter().filter(|x| **x > 0.0).count();

    let mut out = vec![BoundReport::statistical(
        "SHORT_LOWER",
        Quantity::Estimate(es),
        eu,
        paired_se(&s, &u)?,
        cfg.clone(),
    )
    .with_constants(&[1.0])
    .with_refinement(refinement)
    .with_event_count(events)];
    for (id, k) in [
        ("SHORT_UPPER_PROOF", SHORT_UPPER_PROOF_CONST),
        ("SHORT_UPPER", SHORT_UPPER_CONST),
    ] {
        let ks: Vec<f64> = s.iter().map(|x| k * x).collect();
        out.push(
            BoundReport::statistical(
                id,
                eu,
                Quantity::Estimate(scaled(&s, k, sim)?),
                paired_se(&u, &ks)?,
                cfg.clone(),
            )
            .with_constants(&[k])
            .with_refinement(refinement)
            .with_event_count(events),
        );
    }

    let exact = expected_drawup_excess(p.mu, p.c, p.horizon)?;
    let dt = p.horizon / sim.n_steps as f64;
    let allowance = grid_bias_allowance(|l| expected_drawup_excess(p.mu, l, p.horizon), p.c, dt)?;
    out.push(
        BoundReport::agreement(
            "SHORT_SUP_CLOSED_FORM",
            Quantity::Estimate(es),
            Quantity::Exact(exact),
            es.std_error,
            allowance,
            cfg,
        )
        .with_refinement(Refinement::from_pairs(&s_coarse, &s, sim.n_steps)?)
        .with_event_count(events),
    );
    Ok(out)
}

/// Pathwise and distributional comparison of `UTV[0,T]` with the
/// discounted sum over drawdown segments. Paths run to `8T` so that the
/// discounted sum is essentially complete.
pub fn verify_discounted(params: &ModelParams, sim: &SimConfig) -> Result<Vec<BoundReport>> {
    params.validate()?;
    sim.validate()?;
    const EXTENT: usize = 8;
    let t = params.horizon;
    let long = params.with_horizon(EXTENT as f64 * t)?;
    let steps = EXTENT * sim.n_steps;
    let rows = map_paths(sim.n_paths, |i| {
        let path = generate_bm_path(&long, steps, sim.seed, i)?;
        let u = utv_linear(&path.values()[..=sim.n_steps], params.c)?;
        let d = discounted_utv(&path, params.c, t)?;
        Ok((u, d))
    })?;
    let u: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let cfg = config(params, sim, &[("extent", EXTENT as f64)]);

    let ed: Vec<f64> = d.iter().map(|x| E * x).collect();
    let violations = u
        .iter()
        .zip(&ed)
        .filter(|(a, b)| **a > **b + PATHWISE_TOL)
        .count();
    let worst = u
        .iter()
        .zip(&ed)
        .enumerate()
        .max_by(|a, b| (a.1 .0 - a.1 .1).total_cmp(&(b.1 .0 - b.1 .1)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut pathwise = BoundReport::counted(
        "DISCOUNT_PATHWISE",
        Quantity::Exact(u[worst]),
        Quantity::Exact(ed[worst]),
        violations,
        u.len(),
        cfg.clone(),
    )
    .with_constants(&[E]);
    pathwise
        .config
        .extra
        .insert("worst_path".into(), worst as f64);

    let k = (1.0 - (-1.0f64).exp()) / 2.0;
    let r: Vec<f64> = d.iter().map(|x| k * x).collect();
    let domination = ccdf_domination("DISCOUNT_DOMINATION", &u, &r, 50, cfg)?.with_constants(&[k]);
    Ok(vec![pathwise, domination])
}

/// Checks `P(upper >= q) >= P(lower >= q) - 3 SE` at `points` quantiles of
/// `lower`, with the binomial standard error of the difference.
fn ccdf_domination(
    id: &str,
    upper: &[f64],
    lower: &[f64],
    points: usize,
    cfg: ReportConfig,
) -> Result<BoundReport> {
    let mut sorted = lower.to_vec();
    sorted.sort_by(f64::total_cmp);
    let query: Vec<f64> = (1..=points)
        .map(|k| sorted_quantile(&sorted, k as f64 / (points + 1) as f64))
        .collect();
    let pu = empirical_ccdf(upper, &query)?;
    let pl = empirical_ccdf(lower, &query)?;
    let (nu, nl) = (upper.len() as f64, lower.len() as f64);
    let mut violations = 0;
    let mut worst = (f64::INFINITY, 0.0, 0usize);
    for (k, (a, b)) in pu.iter().zip(&pl).enumerate() {
        let se = (a * (1.0 - a) / nu + b * (1.0 - b) / nl).sqrt();
        let margin = a - b;
        if margin < -SLACK_SE * se {
            violations += 1;
        }
        // worst point in units of its own slack
        let score = margin + SLACK_SE * se;
        if score < worst.0 {
            worst = (score, se, k);
        }
    }
    let k = worst.2;
    let mut r = BoundReport::counted(
        id,
        Quantity::Exact(pl[k]),
        Quantity::Exact(pu[k]),
        violations,
        points,
        cfg,
    );
    r.margin_se = worst.1;
    r.config.extra.insert("worst_query".into(), query[k]);
    Ok(r)
}

/// Frequency of `T_c < E T_c / 3` against `7/9`.
pub fn verify_early_drawdown(params: &ModelParams, sim: &SimConfig) -> Result<BoundReport> {
    params.validate()?;
    sim.validate()?;
    let etc = expected_tc(params.mu, params.c)?;
    let window = EARLY_FRACTION * etc;
    let dt = window / sim.n_steps as f64;
    let (mu, c) = (params.mu, params.c);
    let hits = map_paths(sim.n_paths, |i| {
        let h = simulate_until_drawdown(mu, c, dt, sim.n_steps, sim.seed, i);
        // a hit on the last grid point is at time E T_c / 3, not before it
        Ok(if !h.capped && h.tc < window * (1.0 - 1e-12) {
            1.0
        } else {
            0.0
        })
    })?;
    let freq = estimate(&hits, sim)?;
    let p = freq.mean;
    let binomial_se = (p * (1.0 - p) / hits.len() as f64).sqrt();
    let cfg = config(params, sim, &[("expected_tc", etc), ("window", window)]);
    Ok(BoundReport::statistical(
        "EARLY_DRAWDOWN",
        Quantity::Estimate(freq),
        Quantity::Exact(EARLY_PROBABILITY),
        binomial_se,
        cfg,
    )
    .with_constants(&[EARLY_FRACTION, EARLY_PROBABILITY]))
}

/// `tc_moment_ratio >= 1/2` on a `side × side` grid of `x = 2 mu c` in
/// `[-x_max, x_max]` and `c` in `[0.25, 2.5]`.
pub fn verify_moment_ratio(side: usize, x_max: f64) -> Result<BoundReport> {
    if side < 2 {
        return Err(param("grid needs at least 2 points per side"));
    }
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for i in 0..side {
        for j in 0..side {
            let c = 0.25 + 2.25 * j as f64 / (side - 1) as f64;
            let x = -x_max + 2.0 * x_max * i as f64 / (side - 1) as f64;
            let r = tc_moment_ratio(x / (2.0 * c), c)?;
            if r < 0.5 {
                violations += 1;
            }
            worst = worst.min(r);
        }
    }
    let mut cfg = ReportConfig::default();
    cfg.extra.insert("side".into(), side as f64);
    cfg.extra.insert("x_max".into(), x_max);
    Ok(BoundReport::counted(
        "MOMENT_RATIO",
        Quantity::Exact(0.5),
        Quantity::Exact(worst),
        violations,
        side * side,
        cfg,
    )
    .with_constants(&[0.5]))
}

/// Simulated `E T_c` and `E sup_{[0,T_c]} (W_s - W_t - c)_+` against their
/// closed forms, within `3 SE` plus the grid allowance. `sim.n_steps`
/// counts steps per window of length `E T_c`.
pub fn verify_closed_forms(params: &ModelParams, sim: &SimConfig) -> Result<Vec<BoundReport>> {
    let hits = hitting_samples(params, sim)?;
    let (mu, c) = (params.mu, params.c);
    let etc = expected_tc(mu, c)?;
    let dt = etc / sim.n_steps as f64;
    let capped = hits.iter().filter(|h| h.capped).count();
    let mut tc = estimate(&hits.iter().map(|h| h.tc).collect::<Vec<_>>(), sim)?;
    let mut hv = estimate(
        &hits
            .iter()
            .map(|h| (h.max_drawup - c).max(0.0))
            .collect::<Vec<_>>(),
        sim,
    )?;
    for e in [&mut tc, &mut hv] {
        e.capped = capped;
        e.reliable = e.cap_fraction() <= crate::montecarlo::MAX_CAP_FRACTION;
    }
    let cfg = config(params, sim, &[("dt", dt)]);
    Ok(vec![
        BoundReport::agreement(
            "TC_MEAN",
            Quantity::Estimate(tc),
            Quantity::Exact(etc),
            tc.std_error,
            tc_bias_allowance(mu, c, dt)?,
            cfg.clone(),
        ),
        BoundReport::agreement(
            "DRAWUP_MEAN_UNTIL_TC",
            Quantity::Estimate(hv),
            Quantity::Exact(hv_mean(mu, c)?),
            hv.std_error,
            hv_bias_allowance(mu, c, dt)?,
            cfg,
        ),
    ])
}

/// Per-relation counters over one or many paths.
#[derive(Clone, Copy, Debug, Default)]
struct RelationTally {
    violations: usize,
    checked: usize,
    /// (margin, lhs, rhs) of the path with the smallest margin.
    worst: Option<(f64, f64, f64)>,
}

impl RelationTally {
    /// Records `lhs <= rhs`, or `lhs == rhs` when `equality`.
    fn record(&mut self, lhs: f64, rhs: f64, equality: bool) {
        self.checked += 1;
        let tol = PATHWISE_TOL * (1.0 + lhs.abs().max(rhs.abs()));
        let margin = if equality {
            -(lhs - rhs).abs()
        } else {
            rhs - lhs
        };
        if margin < -tol {
            self.violations += 1;
        }
        self.keep_worst((margin, lhs, rhs));
    }

    fn keep_worst(&mut self, w: (f64, f64, f64)) {
        if self.worst.is_none_or(|cur| w.0 < cur.0) {
            self.worst = Some(w);
        }
    }

    fn merge(&mut self, o: &RelationTally) {
        self.violations += o.violations;
        self.checked += o.checked;
        if let Some(w) = o.worst {
            self.keep_worst(w);
        }
    }
}

const RELATIONS: [&str; 6] = [
    "REL_TV_GE_UTV",
    "REL_TV_GE_DTV",
    "REL_TV_LE_SUM",
    "REL_DUALITY",
    "REL_GREEDY",
    "SUPERADDITIVITY",
];

fn relation_tallies(p: &Path, c: f64, split_points: &[f64]) -> Result<[RelationTally; 6]> {
    let v = p.values();
    let mut t = [RelationTally::default(); 6];
    let (tv, utv, dtv) = (tv_linear(v, c)?, utv_linear(v, c)?, dtv_linear(v, c)?);
    t[0].record(utv, tv, false);
    t[1].record(dtv, tv, false);
    t[2].record(tv, utv + dtv, false);
    t[3].record(utv_linear(negate_path(p).values(), c)?, dtv, true);
    t[4].record(utv_greedy_segments(v, c)?.0, utv, true);

    let Some((&first, &last)) = p.times().first().zip(p.times().last()) else {
        return Ok(t);
    };
    let mut cuts = vec![first];
    for &s in split_points {
        if !(s >= first && s <= last) {
            return Err(param(format!("split point {s} outside [{first}, {last}]")));
        }
        cuts.push(s);
    }
    cuts.push(last);
    cuts.sort_by(f64::total_cmp);
    let pieces: Vec<Path> = cuts.windows(2).map(|w| slice_path(p, w[0], w[1])).collect();
    for f in [tv_linear, utv_linear, dtv_linear] {
        let mut parts = 0.0;
        for piece in &pieces {
            parts += f(piece.values(), c)?;
        }
        t[5].record(parts, f(v, c)?, false);
    }
    Ok(t)
}

fn relation_reports(tallies: &[RelationTally; 6], cfg: ReportConfig) -> Vec<BoundReport> {
    RELATIONS
        .iter()
        .zip(tallies)
        .map(|(id, t)| {
            let (_, l, r) = t.worst.unwrap_or((0.0, 0.0, 0.0));
            BoundReport::counted(
                id,
                Quantity::Exact(l),
                Quantity::Exact(r),
                t.violations,
                t.checked,
                cfg.clone(),
            )
        })
        .collect()
}

/// Exact pathwise relations on one path; one report per relation.
pub fn verify_path_relations(p: &Path, c: f64, split_points: &[f64]) -> Result<Vec<BoundReport>> {
    crate::error::check_level(c)?;
    let t = relation_tallies(p, c, split_points)?;
    let mut cfg = ReportConfig::default();
    cfg.extra.insert("c".into(), c);
    cfg.extra.insert("len".into(), p.len() as f64);
    Ok(relation_reports(&t, cfg))
}

/// The same relations on every simulated path, split at three grid times
/// drawn from the path's own index.
pub fn verify_relations_simulated(
    params: &ModelParams,
    sim: &SimConfig,
) -> Result<Vec<BoundReport>> {
    params.validate()?;
    sim.validate()?;
    let per_path = map_paths(sim.n_paths, |i| {
        let path = generate_bm_path(params, sim.n_steps, sim.seed, i)?;
        let times = path.times();
        let n = times.len() as u64;
        // three deterministic pseudo-random grid points
        let mut h = i.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ sim.seed;
        let mut splits = Vec::with_capacity(3);
        for _ in 0..3 {
            h ^= h >> 31;
            h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
            splits.push(times[(h % n) as usize]);
        }
        relation_tallies(&path, params.c, &splits)
    })?;
    let mut total = [RelationTally::default(); 6];
    for t in &per_path {
        for (a, b) in total.iter_mut().zip(t) {
            a.merge(b);
        }
    }
    Ok(relation_reports(&total, config(params, sim, &[])))
}

/// Two-sided comparison of the laws of `UTV[0,T]` and `UTV[T/2, 3T/2]`,
/// each from its own set of paths, at 20 pooled quantiles.
pub fn verify_shift_invariance(params: &ModelParams, sim: &SimConfig) -> Result<BoundReport> {
    params.validate()?;
    sim.validate()?;
    let n = sim.n_steps;
    let half = n.div_ceil(2);
    let shift = params.horizon * half as f64 / n as f64;
    let long = params.with_horizon(params.horizon + shift)?;
    let first = map_paths(sim.n_paths, |i| {
        let p = generate_bm_path(params, n, sim.seed, i)?;
        utv_linear(p.values(), params.c)
    })?;
    let offset = sim.n_paths as u64;
    let second = map_paths(sim.n_paths, |i| {
        let p = generate_bm_path(&long, n + half, sim.seed, offset + i)?;
        utv_linear(&p.values()[half..], params.c)
    })?;
    let mut pooled: Vec<f64> = first.iter().chain(&second).copied().collect();
    pooled.sort_by(f64::total_cmp);
    const POINTS: usize = 20;
    let query: Vec<f64> = (1..=POINTS)
        .map(|k| sorted_quantile(&pooled, k as f64 / (POINTS + 1) as f64))
        .collect();
    let a = empirical_ccdf(&first, &query)?;
    let b = empirical_ccdf(&second, &query)?;
    let m = first.len() as f64;
    let mut violations = 0;
    let mut worst = (f64::NEG_INFINITY, 0usize, 0.0);
    for k in 0..POINTS {
        let se = (a[k] * (1.0 - a[k]) / m + b[k] * (1.0 - b[k]) / m).sqrt();
        let gap = (a[k] - b[k]).abs();
        if gap > SLACK_SE * se {
            violations += 1;
        }
        let score = gap - SLACK_SE * se;
        if score > worst.0 {
            worst = (score, k, se);
        }
    }
    let k = worst.1;
    let mut r = BoundReport::counted(
        "SHIFT_INVARIANCE",
        Quantity::Exact(a[k]),
        Quantity::Exact(b[k]),
        violations,
        POINTS,
        config(params, sim, &[("shift", shift)]),
    );
    r.two_sided = true;
    r.margin_se = worst.2;
    r.config.extra.insert("worst_query".into(), query[k]);
    Ok(r)
}

/// Simulated truncated exponential moment of TV against the iterated bound,
/// and stability of the estimate when the truncation is halved.
pub fn verify_exp_moment(
    alpha: f64,
    params: &ModelParams,
    sim: &SimConfig,
    truncation: f64,
) -> Result<Vec<BoundReport>> {
    let bound = exp_moment_upper_bound(alpha, params)?;
    let est = estimate_exp_moment(alpha, params, sim, truncation)?;
    let cfg = config(
        params,
        sim,
        &[
            ("alpha", alpha),
            ("truncation", truncation),
            ("delta", bound.delta),
            ("factors", bound.factors as f64),
        ],
    );
    let upper = BoundReport::statistical(
        "EXP_MOMENT",
        Quantity::Estimate(est.at_truncation),
        Quantity::Exact(bound.value),
        est.at_truncation.std_error,
        cfg.clone(),
    );
    let stable = BoundReport::agreement(
        "EXP_MOMENT_TRUNCATION",
        Quantity::Estimate(est.at_truncation),
        Quantity::Estimate(est.at_half_truncation),
        est.truncation_gap_se,
        0.0,
        cfg,
    );
    Ok(vec![upper, stable])
}

/// Settings of a full verification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub sim: SimConfig,
    pub mus: Vec<f64>,
    pub cs: Vec<f64>,
    /// Horizon of the relation, discount and shift checks.
    pub horizon: f64,
    /// Steps per window of length `E T_c` for the closed-form cross-checks.
    pub hitting_steps: usize,
    pub exp_alpha: f64,
    pub exp_params: ModelParams,
    pub exp_truncation: f64,
}

impl HarnessConfig {
    pub fn default_grid(sim: SimConfig) -> Self {
        Self {
            sim,
            mus: vec![-1.0, 0.0, 1.0],
            cs: vec![0.5, 1.0],
            horizon: 1.0,
            hitting_steps: sim.n_steps,
            exp_alpha: 0.5,
            exp_params: ModelParams {
                mu: 0.0,
                sigma: 1.0,
                c: 1.0,
                horizon: 1.0,
            },
            exp_truncation: 20.0,
        }
    }
}

fn wants(filter: Option<&str>, ids: &[&str]) -> bool {
    filter.is_none_or(|f| ids.iter().any(|id| id.starts_with(f)))
}

/// Runs every check over the grid. With a filter, only claims whose id
/// starts with it are computed and returned.
pub fn run_grid(cfg: &HarnessConfig, filter: Option<&str>) -> Result<Vec<BoundReport>> {
    let sim = cfg.sim;
    sim.validate()?;
    let mut out = Vec::new();
    if wants(filter, &["MOMENT_RATIO"]) {
        out.push(verify_moment_ratio(10, 6.0)?);
    }
    for &mu in &cfg.mus {
        for &c in &cfg.cs {
            let params = ModelParams::bm(mu, c, cfg.horizon)?;
            if wants(
                filter,
                &[
                    "LONG_LOWER",
                    "LONG_UPPER",
                    "LONG_WINDOW_LOWER",
                    "LONG_CLOSED_UPPER",
                ],
            ) {
                out.extend(verify_long_regime(&RegimeParams::long(mu, c)?, &sim)?);
            }
            if wants(
                filter,
                &[
                    "SHORT_LOWER",
                    "SHORT_UPPER_PROOF",
                    "SHORT_UPPER",
                    "SHORT_SUP_CLOSED_FORM",
                ],
            ) {
                out.extend(verify_short_regime(&RegimeParams::short(mu, c)?, &sim)?);
            }
            if wants(filter, &["DISCOUNT_PATHWISE", "DISCOUNT_DOMINATION"]) {
                out.extend(verify_discounted(&params, &sim)?);
            }
            if wants(filter, &["EARLY_DRAWDOWN"]) {
                out.push(verify_early_drawdown(&params, &sim)?);
            }
            if wants(filter, &["TC_MEAN", "DRAWUP_MEAN_UNTIL_TC"]) {
                let hit = SimConfig {
                    n_steps: cfg.hitting_steps,
                    ..sim
                };
                out.extend(verify_closed_forms(&params, &hit)?);
            }
            if wants(filter, &RELATIONS) {
                out.extend(verify_relations_simulated(&params, &sim)?);
            }
            if wants(filter, &["SHIFT_INVARIANCE"]) {
                out.push(verify_shift_invariance(&params, &sim)?);
            }
        }
    }
    if wants(filter, &["EXP_MOMENT", "EXP_MOMENT_TRUNCATION"]) {
        out.extend(verify_exp_moment(
            cfg.exp_alpha,
            &cfg.exp_params,
            &sim,
            cfg.exp_truncation,
        )?);
    }
    if let Some(f) = filter {
        out.retain(|r| r.claim_id.starts_with(f));
    }
    Ok(out)
}
