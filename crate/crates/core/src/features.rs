//! Per-session feature frame: bar indicators aligned to snapshots followed by
//! the microstructure block, with one quality word per snapshot.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::column::Column;
use crate::feed::{Session, TickSize};
use crate::micro::{compute_micro_features, micro_feature_specs, MicroConfig};
use crate::preprocess::{build_bars, DerivedSnapshot};
use crate::quality::Quality;
use crate::ta::{align_to_snapshots, compute_indicators, indicator_specs, BarInput, IndicatorSpec, TaParams};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub ta: TaParams,
    pub micro: MicroConfig,
}

/// Every feature column in output order.
pub fn feature_registry(cfg: &FeatureConfig) -> Vec<IndicatorSpec> {
    let mut specs = indicator_specs(&cfg.ta);
    specs.extend(micro_feature_specs(&cfg.micro));
    specs
}

/// One line per feature: `name<TAB>family<TAB>k=v,k=v`.
pub fn registry_text(specs: &[IndicatorSpec]) -> String {
    let mut out = String::new();
    for s in specs {
        let params: Vec<String> = s.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "{}\t{}\t{}", s.name, s.family, params.join(","));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SessionFeatures {
    pub columns: Vec<Column>,
    pub flags: Vec<Quality>,
}

impl SessionFeatures {
    /// True when no column carries a missing marker at `row`.
    pub fn is_complete(&self, row: usize) -> bool {
        self.columns.iter().all(|c| !c.values[row].is_nan())
    }
}

pub fn compute_session_features(
    session: &Session,
    derived: &[DerivedSnapshot],
    cfg: &FeatureConfig,
    tick: TickSize,
) -> SessionFeatures {
    let bars = build_bars(session, derived);
    let inputs: Vec<BarInput> = bars.iter().map(|b| BarInput::from_bar(b, tick)).collect();
    let frame = compute_indicators(&inputs, &cfg.ta);
    let aligned = align_to_snapshots(&frame, &bars, session.len());
    let micro = compute_micro_features(session, derived, &cfg.micro, tick);
    let mut columns = aligned.columns;
    columns.extend(micro.columns);
    let flags = aligned.flags.iter().zip(&micro.flags).map(|(a, b)| *a | *b).collect();
    SessionFeatures { columns, flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feed::{generate_synthetic_feed, SynthParams};
    use crate::preprocess::derive_deltas;

    #[test]
    fn names_match_registry() {
        let cfg = FeatureConfig::default();
        let specs = feature_registry(&cfg);
        assert_eq!(specs.len(), 29 + 80);
        let params = SynthParams {
            session_len: 600,
            ..SynthParams::default()
        };
        let session = generate_synthetic_feed(1, 1, params).remove(0);
        let derived = derive_deltas(&session);
        let f = compute_session_features(&session, &derived, &cfg, TickSize::default());
        let names: Vec<&str> = f.columns.iter().map(|c| c.name.as_str()).collect();
        let expected: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, expected);
        assert!(f.columns.iter().all(|c| c.len() == session.len()));
        assert_eq!(registry_text(&specs).lines().count(), specs.len());
    }
}
