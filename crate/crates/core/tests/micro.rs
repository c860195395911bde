mod common;

use proptest::prelude::*;

use snapflow::column::is_missing;
use snapflow::micro::{
    accumulated_imbalance, accumulated_spread, order_flow_features, rolling_mean, type_percentages,
};
use snapflow::preprocess::SnapshotType;

use common::sessions;

proptest! {
    #[test]
    fn rolling_mean_matches_naive(series in prop::collection::vec(-10_000i64..10_000, 1..200), window in 1usize..40) {
        let got = rolling_mean(&series, window);
        for t in 0..series.len() {
            if t + 1 < window {
                prop_assert!(is_missing(got[t]));
            } else {
                let sum: i64 = series[t + 1 - window..=t].iter().sum();
                prop_assert_eq!(got[t], sum as f64 / window as f64);
            }
        }
    }

    #[test]
    fn type_shares_partition_the_window(seed in 0u64..40, window in 1usize..300, min_volume in 0u64..15) {
        let (_, d) = sessions(seed, 1, 900).remove(0);
        let plain = type_percentages(&d, window, None);
        let filtered = type_percentages(&d, window, Some(min_volume));
        for t in window - 1..d.len() {
            let w = &d[t + 1 - window..=t];
            let neutral = w.iter().filter(|r| r.snapshot_type == SnapshotType::Neutral).count() as f64 / window as f64;
            let tagged: f64 = plain.shares.iter().map(|s| s[t]).sum();
            prop_assert!((tagged + neutral - 1.0).abs() < 1e-12);
            for s in plain.shares.iter().chain(filtered.shares.iter()) {
                prop_assert!((0.0..=1.0).contains(&s[t]));
            }
            let kept: Vec<_> = w.iter().filter(|r| r.volume_chg >= min_volume).collect();
            prop_assert_eq!(filtered.empty[t], kept.is_empty());
            for (k, ty) in SnapshotType::TAGGED.iter().enumerate() {
                let expected = if kept.is_empty() {
                    0.0
                } else {
                    kept.iter().filter(|r| r.snapshot_type == *ty).count() as f64 / kept.len() as f64
                };
                prop_assert_eq!(filtered.shares[k][t], expected);
            }
        }
    }
}

#[test]
fn level_sums_grow_with_depth_on_valid_books() {
    for (s, _) in sessions(6, 1, 3_000) {
        for x in &s.snapshots {
            assert!(x.validate().is_ok());
            let mut prev = 0;
            for k in 1..=5 {
                let sp = accumulated_spread(x, k);
                assert!(sp.value >= prev);
                prev = sp.value;
                let direct: i64 = (0..k)
                    .map(|n| x.asks[n].map_or(0, |l| l.size as i64) - x.bids[n].map_or(0, |l| l.size as i64))
                    .sum();
                assert_eq!(accumulated_imbalance(x, k).value, direct);
            }
        }
    }
}

#[test]
fn order_flow_ratios_match_window_sums() {
    let (s, d) = sessions(13, 1, 2_000).remove(0);
    let window = 600;
    let (ratio, oi) = order_flow_features(&s, &d, window);
    for t in 0..s.len() {
        if t + 1 < window {
            assert!(is_missing(ratio[t]) && is_missing(oi[t]));
            continue;
        }
        let w = &d[t + 1 - window..=t];
        let open: f64 = w.iter().map(|r| r.open_contracts.as_f64()).sum();
        let close: f64 = w.iter().map(|r| r.close_contracts.as_f64()).sum();
        if close > 0.0 {
            assert!((ratio[t] - open / close).abs() <= 1e-12 * (open / close));
        }
        if t >= window {
            let expected = s.snapshots[t].open_interest as f64 / s.snapshots[t - window].open_interest as f64;
            assert_eq!(oi[t], expected);
        } else {
            assert!(is_missing(oi[t]));
        }
    }
}
