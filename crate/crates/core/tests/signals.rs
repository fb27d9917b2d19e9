use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsxai_core::analytics::{
    aggregate_exposure, classify_regimes, drift_analysis, exit_signals, rolling_quantile, Side, Trigger,
};
use tsxai_core::backtest::{buy_and_hold, exposure_strategy, long_short_strategy, sign_rule, SignRuleOptions};

/// Sorts the window before `t` from scratch and picks rank `ceil(q W)`.
fn naive_quantile(series: &[f64], window: usize, q: f64, t: usize) -> f64 {
    let mut w: Vec<f64> = series[t - window..t].to_vec();
    w.sort_by(f64::total_cmp);
    let x = q * window as f64;
    let rank = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() } as usize;
    w[rank.clamp(1, window) - 1]
}

fn uniform(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random::<f64>()).collect()
}

proptest! {
    #[test]
    fn rolling_quantile_matches_resorting(
        series in prop::collection::vec(-5.0f64..5.0, 12..80),
        window in 2usize..10,
        q in 0.01f64..0.99,
    ) {
        let got = rolling_quantile(&series, window, q).unwrap();
        for t in window..series.len() {
            prop_assert_eq!(got[t], Some(naive_quantile(&series, window, q, t)));
        }
    }

    #[test]
    fn rolling_quantile_is_prefix_stable(
        series in prop::collection::vec(-1.0f64..1.0, 20..60),
        cut in 12usize..20,
    ) {
        let full = rolling_quantile(&series, 10, 0.2).unwrap();
        let prefix = rolling_quantile(&series[..cut], 10, 0.2).unwrap();
        prop_assert_eq!(&full[..cut], &prefix[..]);
    }

    #[test]
    fn exposure_is_the_fraction_of_active_columns(
        seed in any::<u64>(),
        m in 1usize..6,
    ) {
        let cols: Vec<Vec<f64>> = (0..m).map(|c| uniform(60, seed.wrapping_add(c as u64))).collect();
        let s = aggregate_exposure(&cols, 10, 0.3).unwrap();
        for t in 10..60 {
            let active = (0..m)
                .filter(|&c| cols[c][t] > naive_quantile(&cols[c], 10, 0.3, t))
                .count();
            prop_assert_eq!(s.active[t], active);
            prop_assert_eq!(s.exposure[t], active as f64 / m as f64);
        }
    }
}

#[test]
fn exceedance_frequency_matches_the_quantile_level() {
    for (k, &q) in [1.0 / 20.0, 1.0 / 7.0, 0.05].iter().enumerate() {
        for &w in &[100usize, 200] {
            let series = uniform(10_000, 1000 + k as u64 * 10 + w as u64);
            let s = exit_signals(&series, w, q, Side::Below, false).unwrap();
            let defined = s.defined.iter().filter(|d| **d).count();
            let hits = s.triggers.iter().filter(|t| **t == Trigger::Below).count();
            let freq = hits as f64 / defined as f64;
            assert!((freq - q).abs() < 0.02, "q {q}, W {w}: {freq}");
        }
    }
}

#[test]
fn regimes_partition_the_defined_points() {
    let col = uniform(500, 9);
    let returns: Vec<f64> = uniform(500, 10).iter().map(|u| u - 0.5).collect();
    let regimes = classify_regimes(&col, 50, 0.1, true).unwrap();
    let report = drift_analysis(&regimes, &returns).unwrap();
    let parts: usize = ["critical", "neutral", "auspicious"]
        .iter()
        .map(|r| report.row(r).unwrap().count)
        .sum();
    let all = report.row("all").unwrap().count;
    assert_eq!(parts, all);
    assert_eq!(all, regimes[..499].iter().filter(|r| r.is_some()).count());
}

fn day_loop(positions: &[f64], returns: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut curve = vec![0.0];
    for day in 1..returns.len() {
        acc += positions[day - 1] * returns[day];
        curve.push(acc);
    }
    curve
}

fn assert_curves_close(a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn strategies_match_a_day_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let returns: Vec<f64> = (0..1000).map(|_| rng.random_range(-0.05..0.05)).collect();
    let forecasts: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();

    let sign = sign_rule(&forecasts, &returns, &SignRuleOptions::default()).unwrap();
    let pos: Vec<f64> = forecasts.iter().map(|f| if *f < 0.0 { -1.0 } else { 1.0 }).collect();
    assert_curves_close(&sign.cumulative, &day_loop(&pos, &returns));

    let col: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let signals = exit_signals(&col, 100, 1.0 / 7.0, Side::Below, true).unwrap();
    let held: Vec<f64> = (0..1000)
        .map(|t| if signals.triggers[t] == Trigger::None { 1.0 } else { 0.0 })
        .collect();
    let exp = exposure_strategy(&signals, &returns).unwrap();
    assert_curves_close(&exp.cumulative, &day_loop(&held, &returns));

    let ls = long_short_strategy(&signals, &returns).unwrap();
    let flipped: Vec<f64> = held.iter().map(|h| 2.0 * h - 1.0).collect();
    assert_curves_close(&ls.cumulative, &day_loop(&flipped, &returns));
}

#[test]
fn full_exposure_is_buy_and_hold() {
    let returns: Vec<f64> = uniform(300, 3).iter().map(|u| (u - 0.5) / 10.0).collect();
    let increasing: Vec<f64> = (0..300).map(f64::from).collect();
    let signals = exit_signals(&increasing, 50, 0.1, Side::Below, false).unwrap();
    assert!(signals.exposure.iter().all(|e| *e == 1.0));
    let a = exposure_strategy(&signals, &returns).unwrap();
    let b = buy_and_hold(&returns).unwrap();
    assert_eq!(a.cumulative, b.cumulative);
    assert_eq!(a.period_returns, b.period_returns);
}
