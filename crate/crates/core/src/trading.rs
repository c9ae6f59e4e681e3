//! Long-only buy/sell schedules under a flat proportional commission.
//!
//! Buying at `P_t` costs `(1 + γ) P_t` and selling at `P_s` returns
//! `(1 - γ) P_s`, so a round trip multiplies wealth by
//! `P_s / P_t · (1 - γ) / (1 + γ)`. In log prices this is `x_s - x_t - c`
//! with `c = ln((1 + γ) / (1 - γ))`, and the best schedule realizes
//! `exp(UTV^c) - 1` of the log-price path.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::path::Path;
use crate::sum::NeumaierSum;
use crate::variation::{utv_argmax_partition, utv_linear};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradePlan {
    /// `(buy_index, sell_index)` pairs, strictly interleaved.
    pub trades: Vec<(usize, usize)>,
    pub gamma: f64,
}

impl TradePlan {
    pub fn new(trades: Vec<(usize, usize)>, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let ordered =
            trades.iter().all(|&(b, s)| b < s) && trades.windows(2).all(|w| w[0].1 < w[1].0);
        if !ordered {
            return Err(param("trades must satisfy buy_i < sell_i < buy_{i+1}"));
        }
        Ok(Self { trades, gamma })
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(param(format!(
            "commission ratio must lie in [0, 1), got {gamma}"
        )))
    }
}

/// `ln((1 + γ) / (1 - γ))`.
pub fn commission_threshold(gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(gamma.ln_1p() - (-gamma).ln_1p())
}

fn log_prices(prices: &Path) -> Result<Vec<f64>> {
    if let Some(i) = prices.values().iter().position(|&p| !(p > 0.0)) {
        return Err(param(format!("price at index {i} is not positive")));
    }
    Ok(prices.values().iter().map(|p| p.ln()).collect())
}

/// The schedule with the largest realized return on the sample grid.
pub fn optimal_trades(prices: &Path, gamma: f64) -> Result<TradePlan> {
    let c = commission_threshold(gamma)?;
    let logs = log_prices(prices)?;
    let partition = utv_argmax_partition(&logs, c)?;
    TradePlan::new(partition.pairs, gamma)
}

/// `Π (P_sell / P_buy) (1 - γ) / (1 + γ) - 1`, accumulated in logs.
pub fn realized_return(prices: &Path, plan: &TradePlan) -> Result<f64> {
    let plan = TradePlan::new(plan.trades.clone(), plan.gamma)?;
    let logs = log_prices(prices)?;
    if let Some(&(_, s)) = plan.trades.last() {
        if s >= logs.len() {
            return Err(param(format!(
                "sell index {s} outside a path of {} prices",
                logs.len()
            )));
        }
    }
    let c = commission_threshold(plan.gamma)?;
    let growth: NeumaierSum = plan
        .trades
        .iter()
        .map(|&(b, s)| logs[s] - logs[b] - c)
        .collect();
    Ok(growth.value().exp_m1())
}

/// `exp(UTV^c(ln P)) - 1`, the least upper bound of the realized return.
pub fn max_return_bound(prices: &Path, gamma: f64) -> Result<f64> {
    let c = commission_threshold(gamma)?;
    let logs = log_prices(prices)?;
    Ok(utv_linear(&logs, c)?.exp_m1())
}

/// UTV of the log prices at the commission threshold.
pub fn log_price_utv(prices: &Path, gamma: f64) -> Result<f64> {
    utv_linear(&log_prices(prices)?, commission_threshold(gamma)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prices(v: &[f64]) -> Path {
        Path::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn thresholds() {
        assert_eq!(commission_threshold(0.0).unwrap(), 0.0);
        assert!((commission_threshold(0.01).unwrap() - (1.01f64 / 0.99).ln()).abs() < 1e-15);
        assert!((commission_threshold(0.01).unwrap() - 0.0200007).abs() < 1e-7);
        assert!((commission_threshold(0.5).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!(commission_threshold(1.0).is_err());
        assert!(commission_threshold(-0.1).is_err());
    }

    #[test]
    fn two_price_fixture() {
        let p = prices(&[1.0, 2.0]);
        let plan = optimal_trades(&p, 0.01).unwrap();
        assert_eq!(plan.trades, vec![(0, 1)]);
        let r = realized_return(&p, &plan).unwrap();
        assert!((r - (2.0 * 0.99 / 1.01 - 1.0)).abs() < 1e-15);
        assert!((r - 0.96040).abs() < 1e-5);
        assert!((max_return_bound(&p, 0.01).unwrap() - r).abs() < 1e-15);
        let free = TradePlan::new(vec![(0, 1)], 0.0).unwrap();
        assert!((realized_return(&p, &free).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unprofitable_and_empty() {
        let p = prices(&[1.0, 1.5, 1.2, 1.6]);
        let plan = optimal_trades(&p, 0.9).unwrap();
        assert!(plan.trades.is_empty());
        assert_eq!(realized_return(&p, &plan).unwrap(), 0.0);
        assert_eq!(max_return_bound(&prices(&[2.0; 5]), 0.01).unwrap(), 0.0);
    }

    #[test]
    fn partition_fixture() {
        let p = prices(&[0f64, 3.0, 1.0, 4.0].map(f64::exp));
        // γ with threshold exactly 1: γ = tanh(1/2)
        let gamma = 0.5f64.tanh();
        assert!((commission_threshold(gamma).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            optimal_trades(&p, gamma).unwrap().trades,
            vec![(0, 1), (2, 3)]
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(optimal_trades(&prices(&[1.0, 0.0]), 0.01).is_err());
        assert!(optimal_trades(&prices(&[1.0, -2.0]), 0.01).is_err());
        assert!(TradePlan::new(vec![(1, 1)], 0.01).is_err());
        assert!(TradePlan::new(vec![(0, 2), (2, 3)], 0.01).is_err());
        let plan = TradePlan::new(vec![(0, 5)], 0.01).unwrap();
        assert!(realized_return(&prices(&[1.0, 2.0]), &plan).is_err());
    }

    proptest! {
        #[test]
        fn identity_and_dominance(
            steps in prop::collection::vec(-0.2f64..0.2, 1..60),
            gamma in 0.0f64..0.2,
            picks in prop::collection::vec(any::<prop::sample::Index>(), 0..10),
        ) {
            let mut lp = vec![0.0];
            for s in &steps { lp.push(lp.last().unwrap() + s); }
            let p = prices(&lp.iter().map(|x| x.exp()).collect::<Vec<_>>());
            let best = max_return_bound(&p, gamma).unwrap();
            let plan = optimal_trades(&p, gamma).unwrap();
            let realized = realized_return(&p, &plan).unwrap();
            prop_assert!((realized - best).abs() <= 1e-12 * (1.0 + best.abs()));
            // any sorted distinct index set paired up is a valid plan
            let mut idx: Vec<usize> = picks.iter().map(|i| i.index(lp.len())).collect();
            idx.sort_unstable();
            idx.dedup();
            if idx.len() % 2 == 1 { idx.pop(); }
            let trades = idx.chunks(2).map(|w| (w[0], w[1])).collect();
            let other = TradePlan::new(trades, gamma).unwrap();
            prop_assert!(realized_return(&p, &other).unwrap() <= best + 1e-12 * (1.0 + best.abs()));
        }

        #[test]
        fn bound_non_increasing_in_gamma(
            steps in prop::collection::vec(-0.2f64..0.2, 1..60),
            g1 in 0.0f64..0.5,
            g2 in 0.0f64..0.5,
        ) {
            let mut lp = vec![0.0];
            for s in &steps { lp.push(lp.last().unwrap() + s); }
            let p = prices(&lp.iter().map(|x| x.exp()).collect::<Vec<_>>());
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            prop_assert!(max_return_bound(&p, hi).unwrap() <= max_return_bound(&p, lo).unwrap());
        }
    }
}
