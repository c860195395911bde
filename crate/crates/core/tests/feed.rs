mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use rust_decimal::Decimal;

use snapflow::feed::{
    generate_synthetic_feed, parse_snapshot_reader, write_snapshot_csv, ColumnMap, InputFormat, Level, Session,
    SessionRule, Snapshot, SynthParams, TickSize, BOOK_DEPTH,
};
use snapflow::labeling::{label_distribution, label_session, LabelConfig};
use snapflow::preprocess::{derive_deltas, read_derived_csv, write_derived_csv};

use common::unit_tick;

fn reparse(sessions: &[Session], tick: TickSize) -> (Vec<Session>, snapflow::feed::ParseReport) {
    let mut buf = Vec::new();
    write_snapshot_csv(&mut buf, sessions, tick).unwrap();
    parse_snapshot_reader(&buf[..], InputFormat::Csv, &ColumnMap::default(), tick, &SessionRule::default(), 0.01).unwrap()
}

#[test]
fn synthetic_feed_round_trips_through_csv() {
    let params = SynthParams {
        session_len: 700,
        absent_level_prob: 0.05,
        ..Default::default()
    };
    let sessions = generate_synthetic_feed(7, 2_100, params);
    let (back, report) = reparse(&sessions, unit_tick());
    assert_eq!(report.accepted, 2_100);
    assert_eq!(back, sessions);
}

#[test]
fn fractional_tick_round_trips() {
    let tick = TickSize::new(Decimal::new(5, 1)).unwrap();
    let sessions = generate_synthetic_feed(3, 500, SynthParams::default());
    let (back, _) = reparse(&sessions, tick);
    assert_eq!(back, sessions);
}

#[test]
fn derived_file_round_trips() {
    let sessions = generate_synthetic_feed(4, 1_500, SynthParams { session_len: 500, ..Default::default() });
    let pairs: Vec<_> = sessions.into_iter().map(|s| { let d = derive_deltas(&s); (s, d) }).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("derived.csv");
    write_derived_csv(std::fs::File::create(&path).unwrap(), &pairs, unit_tick()).unwrap();
    let back = read_derived_csv(&path, unit_tick(), &SessionRule::default()).unwrap();
    assert_eq!(back, pairs);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let write = || {
        let mut buf = Vec::new();
        write_snapshot_csv(&mut buf, &generate_synthetic_feed(7, 1_000, SynthParams::default()), unit_tick()).unwrap();
        buf
    };
    assert_eq!(write(), write());
}

#[test]
fn planted_drift_sets_majority_label() {
    for (drift, up_wins) in [(0.2, true), (-0.2, false)] {
        let params = SynthParams {
            session_len: 8_000,
            drift,
            move_prob: 0.3,
            ..Default::default()
        };
        let mut labels = Vec::new();
        for s in generate_synthetic_feed(21, 24_000, params) {
            let d = derive_deltas(&s);
            labels.extend(label_session(&s, &d, &LabelConfig::default(), unit_tick()).unwrap());
        }
        let dist = label_distribution(&labels);
        assert_eq!(dist.up > dist.down, up_wins, "drift {drift}: {dist:?}");
    }
}

fn level_strategy() -> impl Strategy<Value = Option<(i64, u64)>> {
    prop::option::weighted(0.9, (0i64..8, 1u64..50))
}

prop_compose! {
    /// Books built from random offsets, so some are crossed or out of order.
    fn fuzzed_snapshot()(
        bids in prop::array::uniform5(level_strategy()),
        asks in prop::array::uniform5(level_strategy()),
        jitter in prop::bool::weighted(0.2),
    ) -> Snapshot {
        let mut bid_levels = [None; BOOK_DEPTH];
        let mut ask_levels = [None; BOOK_DEPTH];
        let (mut b, mut a) = (1000i64, 1001i64);
        for n in 0..BOOK_DEPTH {
            if let Some((off, size)) = bids[n] {
                b -= if jitter { off - 3 } else { off + 1 };
                bid_levels[n] = Some(Level { price: b, size });
            }
            if let Some((off, size)) = asks[n] {
                a += if jitter { off - 3 } else { off + 1 };
                ask_levels[n] = Some(Level { price: a, size });
            }
        }
        Snapshot { timestamp_ms: 0, price: 1000, volume: 0, open_interest: 100, bids: bid_levels, asks: ask_levels }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accepted_rows_satisfy_book_invariants(mut snaps in prop::collection::vec(fuzzed_snapshot(), 1..60)) {
        for (i, s) in snaps.iter_mut().enumerate() {
            s.timestamp_ms = 1_630_458_000_000 + 500 * i as i64;
            s.volume = i as u64;
        }
        let session = Session::new("ag", snaps.clone(), SessionRule::default().utc_offset);
        let (back, report) = {
            let mut buf = Vec::new();
            write_snapshot_csv(&mut buf, &[session], unit_tick()).unwrap();
            parse_snapshot_reader(&buf[..], InputFormat::Csv, &ColumnMap::default(), unit_tick(), &SessionRule::default(), 1.0).unwrap()
        };
        let accepted: Vec<&Snapshot> = back.iter().flat_map(|s| &s.snapshots).collect();
        for s in &accepted {
            prop_assert!(s.validate().is_ok());
        }
        let valid = snaps.iter().filter(|s| s.validate().is_ok()).count();
        prop_assert_eq!(accepted.len(), valid);
        prop_assert_eq!(report.crossed + report.bad_ladder, snaps.len() - valid);
    }

    #[test]
    fn sessions_partition_accepted_rows(gaps in prop::collection::vec(prop_oneof![4 => Just(500i64), 1 => 1_000_000i64..5_000_000], 1..200)) {
        let mut t = 1_630_458_000_000i64;
        let mut snaps = Vec::new();
        for (i, g) in gaps.iter().enumerate() {
            t += g;
            snaps.push(Snapshot {
                timestamp_ms: t,
                price: 1000,
                volume: i as u64,
                open_interest: 10,
                bids: [Some(Level { price: 999, size: 1 }), None, None, None, None],
                asks: [Some(Level { price: 1001, size: 1 }), None, None, None, None],
            });
        }
        let rule = SessionRule::default();
        let whole = Session::new("ag", snaps.clone(), rule.utc_offset);
        let mut buf = Vec::new();
        write_snapshot_csv(&mut buf, &[whole], unit_tick()).unwrap();
        let (sessions, _) = parse_snapshot_reader(&buf[..], InputFormat::Csv, &ColumnMap::default(), unit_tick(), &rule, 0.0).unwrap();
        let mut seen = HashSet::new();
        for s in &sessions {
            prop_assert!(s.snapshots.windows(2).all(|w| w[1].timestamp_ms > w[0].timestamp_ms));
            prop_assert!(s.snapshots.windows(2).all(|w| w[1].timestamp_ms - w[0].timestamp_ms <= rule.gap_ms));
            for x in &s.snapshots {
                prop_assert!(seen.insert(x.timestamp_ms));
            }
        }
        for w in sessions.windows(2) {
            prop_assert!(w[1].start_ms() - w[0].end_ms() > rule.gap_ms);
        }
        prop_assert_eq!(seen.len(), snaps.len());
    }
}
