//! Statistical checks of the simulators and estimators against known laws.

use truncvar::closed_form::{
    drawup_cdf_complement_with, hv_mean, DriftConvention, SeriesConfig, DRAWUP_CONVENTION,
};
use truncvar::harness::{verify_long_regime, BoundReport, RegimeParams};
use truncvar::montecarlo::{
    empirical_ccdf, estimate_sup_functional, map_paths, mean_and_se, streamed_max_drawup, SupWindow,
};
use truncvar::path::{generate_bm_path, generate_gbm_price_path};
use truncvar::{ModelParams, SimConfig};

fn sim(n_steps: usize, n_paths: usize, seed: u64) -> SimConfig {
    SimConfig::new(n_steps, n_paths, seed).unwrap()
}

#[test]
fn terminal_value_has_the_drift_as_mean() {
    let p = ModelParams::bm(1.0, 1.0, 1.0).unwrap();
    let end = map_paths(10_000, |i| {
        Ok(*generate_bm_path(&p, 1000, 3, i)?.values().last().unwrap())
    })
    .unwrap();
    let (mean, se) = mean_and_se(&end).unwrap();
    assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    // unit variance per unit time
    assert!((se * 100.0 - 1.0).abs() < 0.05, "sd {}", se * 100.0);
}

#[test]
fn log_price_has_the_drift_as_mean() {
    let p = ModelParams::new(0.2, 0.4, 1.0, 2.0).unwrap();
    let logs = map_paths(10_000, |i| {
        Ok(generate_gbm_price_path(&p, 200, 4, i)?
            .values()
            .last()
            .unwrap()
            .ln())
    })
    .unwrap();
    let (mean, se) = mean_and_se(&logs).unwrap();
    assert!((mean - 0.4).abs() < 3.0 * se, "mean {mean} se {se}");
    // sd of sigma B_T is 0.4 sqrt 2
    assert!((se * 100.0 - 0.4 * 2f64.sqrt()).abs() < 0.03);
}

#[test]
fn standard_error_halves_with_four_times_the_paths() {
    let p = ModelParams::bm(0.0, 0.5, 1.0).unwrap();
    let small = estimate_sup_functional(&p, &sim(200, 2_000, 5), SupWindow::FixedT).unwrap();
    let large = estimate_sup_functional(&p, &sim(200, 8_000, 5), SupWindow::FixedT).unwrap();
    let ratio = small.std_error / large.std_error;
    assert!((ratio - 2.0).abs() < 0.25, "ratio {ratio}");
}

#[test]
fn long_window_approaches_the_until_drawdown_functional() {
    // with T far beyond E T_c the window [0, T_c ∧ T] is [0, T_c]
    let p = ModelParams::bm(0.0, 0.5, 20.0).unwrap();
    let capped = estimate_sup_functional(&p, &sim(20_000, 4_000, 6), SupWindow::TcAndT).unwrap();
    let exact = hv_mean(0.0, 0.5).unwrap();
    // grid of 1e-3 undershoots the continuous supremum by a few percent
    assert!(
        (capped.mean - exact).abs() < 3.0 * capped.std_error + 0.05 * exact,
        "{} vs {exact}",
        capped.mean
    );
    let short = estimate_sup_functional(
        &p.with_horizon(0.05).unwrap(),
        &sim(50, 4_000, 6),
        SupWindow::TcAndT,
    )
    .unwrap();
    assert!(short.mean < capped.mean);
}

#[test]
fn drawup_series_drift_convention_matches_simulation() {
    let (mu, y) = (0.5, 1.0);
    let p = ModelParams::bm(mu, 1.0, 1.0).unwrap();
    let draws = map_paths(20_000, |i| Ok(streamed_max_drawup(&p, 2_000, 7, i))).unwrap();
    let empirical = empirical_ccdf(&draws, &[y]).unwrap()[0];
    let cfg = SeriesConfig::default();
    let given = drawup_cdf_complement_with(DriftConvention::AsGiven, y, mu, 1.0, &cfg)
        .unwrap()
        .value;
    let reversed = drawup_cdf_complement_with(DriftConvention::Reversed, y, mu, 1.0, &cfg)
        .unwrap()
        .value;
    assert_eq!(DRAWUP_CONVENTION, DriftConvention::AsGiven);
    // binomial se is under 0.004; the coarse grid undershoots by about 0.01
    assert!(
        (given - empirical).abs() < 0.03,
        "as given {given} vs {empirical}"
    );
    assert!(
        (reversed - empirical).abs() > 0.1,
        "reversed {reversed} vs {empirical}"
    );
}

#[test]
fn reports_survive_a_json_round_trip() {
    let reports =
        verify_long_regime(&RegimeParams::long(0.5, 1.0).unwrap(), &sim(100, 200, 8)).unwrap();
    let text = serde_json::to_string(&reports).unwrap();
    let back: Vec<BoundReport> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, reports);
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}
