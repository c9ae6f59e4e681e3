//! Property tests of the public variation and trading API.

use proptest::prelude::*;
use truncvar::harness::verify_path_relations;
use truncvar::oracle::quadratic_oracle;
use truncvar::trading::{max_return_bound, optimal_trades, realized_return};
use truncvar::variation::{
    discounted_utv, dtv_linear, tv_linear, utv_argmax_partition, utv_linear,
};
use truncvar::{Path, VariationKind};

fn values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..max_len).prop_map(|steps| {
        let mut x = 0.0;
        steps
            .into_iter()
            .map(|d| {
                x += d;
                x
            })
            .collect()
    })
}

fn tol(x: f64) -> f64 {
    1e-9 * (1.0 + x.abs())
}

proptest! {
    #[test]
    fn scaling_path_and_level_scales_variation(v in values(80), c in 0.0f64..2.0, k in 0.1f64..10.0) {
        let scaled: Vec<f64> = v.iter().map(|x| k * x).collect();
        let (a, b) = (utv_linear(&scaled, k * c).unwrap(), k * utv_linear(&v, c).unwrap());
        prop_assert!((a - b).abs() <= tol(b) * 10.0);
    }

    #[test]
    fn adding_a_constant_changes_nothing(v in values(80), c in 0.0f64..2.0, s in -100.0f64..100.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + s).collect();
        let u = utv_linear(&v, c).unwrap();
        prop_assert!((utv_linear(&shifted, c).unwrap() - u).abs() <= 1e-7 * (1.0 + u));
        let t = tv_linear(&v, c).unwrap();
        prop_assert!((tv_linear(&shifted, c).unwrap() - t).abs() <= 1e-7 * (1.0 + t));
    }

    #[test]
    fn reversal_in_time_swaps_up_and_down(v in values(80), c in 0.0f64..2.0) {
        let rev: Vec<f64> = v.iter().rev().copied().collect();
        let d = dtv_linear(&v, c).unwrap();
        prop_assert!((utv_linear(&rev, c).unwrap() - d).abs() <= tol(d));
    }

    #[test]
    fn argmax_partition_realizes_the_value(v in values(120), c in 0.0f64..2.0) {
        let p = utv_argmax_partition(&v, c).unwrap();
        let u = utv_linear(&v, c).unwrap();
        prop_assert!(p.is_interleaved());
        prop_assert!((p.upward_gain(&v, c) - u).abs() <= tol(u));
        prop_assert!((quadratic_oracle(&v, c, VariationKind::Utv).unwrap() - u).abs() <= tol(u));
    }

    #[test]
    fn relation_reports_pass_on_arbitrary_paths(v in values(120), c in 0.0f64..2.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let n = v.len();
        let path = Path::from_values(v).unwrap();
        let end = path.times()[n - 1];
        for r in verify_path_relations(&path, c, &[a * end, b * end]).unwrap() {
            prop_assert!(r.passed, "{} failed", r.claim_id);
        }
    }

    #[test]
    fn discount_is_bounded_by_the_plain_sum(v in values(120), c in 0.01f64..2.0, h in 0.5f64..50.0) {
        // every discount weight is at most one
        let path = Path::from_values(v.clone()).unwrap();
        let d = discounted_utv(&path, c, h).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(d <= utv_linear(&v, c).unwrap() + tol(d));
    }

    #[test]
    fn optimal_schedule_attains_the_bound(v in values(120), gamma in 0.0f64..0.5) {
        let prices = Path::from_values(v.iter().map(|x| (0.1 * x).exp()).collect()).unwrap();
        let bound = max_return_bound(&prices, gamma).unwrap();
        let got = realized_return(&prices, &optimal_trades(&prices, gamma).unwrap()).unwrap();
        prop_assert!((got - bound).abs() <= tol(bound));
    }
}
