//! Fixtures shared by the integration suites.

#![allow(dead_code)]

use rust_decimal::Decimal;

use snapflow::dataset::FeatureBlock;
use snapflow::features::{compute_session_features, FeatureConfig};
use snapflow::feed::{Session, SynthParams, SyntheticFeed, TickSize};
use snapflow::preprocess::{derive_deltas, DerivedSnapshot};

pub fn unit_tick() -> TickSize {
    TickSize::new(Decimal::ONE).unwrap()
}

pub fn params(session_len: usize) -> SynthParams {
    SynthParams {
        session_len,
        ..Default::default()
    }
}

/// `n_sessions` synthetic sessions of `session_len` snapshots with their deltas.
pub fn sessions(seed: u64, n_sessions: usize, session_len: usize) -> Vec<(Session, Vec<DerivedSnapshot>)> {
    SyntheticFeed::new(seed, n_sessions * session_len, params(session_len))
        .map(|s| {
            let d = derive_deltas(&s.session);
            (s.session, d)
        })
        .collect()
}

pub fn feature_blocks(data: &[(Session, Vec<DerivedSnapshot>)], cfg: &FeatureConfig) -> Vec<FeatureBlock> {
    data.iter()
        .map(|(s, d)| {
            let f = compute_session_features(s, d, cfg, unit_tick());
            FeatureBlock {
                session_id: s.id.clone(),
                trading_day: s.trading_day,
                timestamps: s.snapshots.iter().map(|x| x.timestamp_ms).collect(),
                columns: f.columns,
                flags: f.flags,
            }
        })
        .collect()
}

/// Bit-level equality that treats two missing markers as equal.
pub fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}
