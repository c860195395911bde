//! Snapshot-level microstructure features over trailing windows of
//! 5, 10, 15 and 30 minutes: accumulated spread and size imbalance over the
//! top k levels, snapshot-type shares (plain and large-trade filtered), the
//! open/close contract ratio and the open-interest ratio.
//!
//! All window sums run on exact integer prefix sums. Each output is a single
//! division of two exact integers, so streaming results are bit-identical to
//! a direct recount of the window.

use serde::{Deserialize, Serialize};

use crate::column::{Column, MISSING};
use crate::error::{Error, Result};
use crate::feed::{Session, Snapshot, TickSize, BOOK_DEPTH, SNAPSHOTS_PER_MINUTE};
use crate::preprocess::{DerivedSnapshot, SnapshotType};
use crate::quality::Quality;
use crate::ta::{Family, IndicatorSpec};

pub const DEFAULT_WINDOW_MINUTES: [u32; 4] = [5, 10, 15, 30];

/// A trailing window of `120 × minutes` snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct WindowSpec {
    minutes: u32,
}

impl WindowSpec {
    pub fn new(minutes: u32) -> Result<Self> {
        if minutes == 0 {
            return Err(Error::Config("window minutes must be positive".into()));
        }
        Ok(Self { minutes })
    }

    pub fn minutes(self) -> u32 {
        self.minutes
    }

    pub fn snapshots(self) -> usize {
        SNAPSHOTS_PER_MINUTE * self.minutes as usize
    }
}

impl TryFrom<u32> for WindowSpec {
    type Error = Error;
    fn try_from(m: u32) -> Result<Self> {
        Self::new(m)
    }
}

impl From<WindowSpec> for u32 {
    fn from(w: WindowSpec) -> u32 {
        w.minutes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MicroConfig {
    pub windows: Vec<WindowSpec>,
    /// Frames trading fewer contracts than this are left out of the filtered shares.
    pub min_volume_filter: u64,
}

impl Default for MicroConfig {
    fn default() -> Self {
        Self {
            windows: DEFAULT_WINDOW_MINUTES.iter().map(|&m| WindowSpec { minutes: m }).collect(),
            min_volume_filter: 10,
        }
    }
}

impl MicroConfig {
    pub fn max_window(&self) -> usize {
        self.windows.iter().map(|w| w.snapshots()).max().unwrap_or(0)
    }
}

/// Sum over the top `k` levels plus whether any of them was unquoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelSum {
    pub value: i64,
    pub absent: bool,
}

/// Σ (ask_n − bid_n) in ticks over levels 1..=k. A level missing either
/// side contributes 0.
pub fn accumulated_spread(s: &Snapshot, k: usize) -> LevelSum {
    let mut value = 0;
    let mut absent = false;
    for n in 0..k.min(BOOK_DEPTH) {
        match (s.asks[n], s.bids[n]) {
            (Some(a), Some(b)) => value += a.price - b.price,
            _ => absent = true,
        }
    }
    LevelSum { value, absent }
}

/// Σ (ask_size_n − bid_size_n) over levels 1..=k; missing sizes count as 0.
pub fn accumulated_imbalance(s: &Snapshot, k: usize) -> LevelSum {
    let mut value = 0i64;
    let mut absent = false;
    for n in 0..k.min(BOOK_DEPTH) {
        let ask = s.asks[n].map(|l| l.size as i64);
        let bid = s.bids[n].map(|l| l.size as i64);
        absent |= ask.is_none() || bid.is_none();
        value += ask.unwrap_or(0) - bid.unwrap_or(0);
    }
    LevelSum { value, absent }
}

fn prefix(values: impl Iterator<Item = i64>, n: usize) -> Vec<i64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(0);
    let mut acc = 0i64;
    for v in values {
        acc += v;
        p.push(acc);
    }
    p
}

#[inline]
fn window_sum(p: &[i64], i: usize, w: usize) -> i64 {
    p[i + 1] - p[i + 1 - w]
}

/// Trailing mean over exactly `window` values ending at each index.
pub fn rolling_mean(series: &[i64], window: usize) -> Vec<f64> {
    assert!(window > 0);
    let p = prefix(series.iter().copied(), series.len());
    (0..series.len())
        .map(|i| {
            if i + 1 < window {
                MISSING
            } else {
                window_sum(&p, i, window) as f64 / window as f64
            }
        })
        .collect()
}

/// Four type-share series plus a flag for windows whose filtered set was empty.
#[derive(Debug, Clone)]
pub struct TypeShares {
    pub shares: [Vec<f64>; 4],
    pub empty: Vec<bool>,
}

/// Share of each tagged type in the trailing window. Without a filter the
/// denominator is the full window (Neutral frames included); with one, only
/// frames with `volume_chg >= min_volume` are counted on both sides.
pub fn type_percentages(derived: &[DerivedSnapshot], window: usize, min_volume: Option<u64>) -> TypeShares {
    let n = derived.len();
    let keep = |d: &DerivedSnapshot| min_volume.is_none_or(|m| d.volume_chg >= m);
    let counts: Vec<Vec<i64>> = SnapshotType::TAGGED
        .iter()
        .map(|&t| prefix(derived.iter().map(|d| i64::from(d.snapshot_type == t && keep(d))), n))
        .collect();
    let kept = prefix(derived.iter().map(|d| i64::from(keep(d))), n);
    let mut shares: [Vec<f64>; 4] = std::array::from_fn(|_| vec![MISSING; n]);
    let mut empty = vec![false; n];
    for i in window.saturating_sub(1)..n {
        let denom = window_sum(&kept, i, window);
        if denom == 0 {
            empty[i] = true;
            for s in shares.iter_mut() {
                s[i] = 0.0;
            }
            continue;
        }
        for (s, c) in shares.iter_mut().zip(&counts) {
            s[i] = window_sum(c, i, window) as f64 / denom as f64;
        }
    }
    TypeShares { shares, empty }
}

/// Σopen/Σclose over the window and OI_i / OI_{i−window}. Zero denominators
/// produce missing values.
pub fn order_flow_features(session: &Session, derived: &[DerivedSnapshot], window: usize) -> (Vec<f64>, Vec<f64>) {
    let n = derived.len();
    let open = prefix(derived.iter().map(|d| d.open_contracts.halves()), n);
    let close = prefix(derived.iter().map(|d| d.close_contracts.halves()), n);
    let mut ratio = vec![MISSING; n];
    let mut oi = vec![MISSING; n];
    for i in window.saturating_sub(1)..n {
        let c = window_sum(&close, i, window);
        if c != 0 {
            ratio[i] = window_sum(&open, i, window) as f64 / c as f64;
        }
        if i >= window {
            let base = session.snapshots[i - window].open_interest;
            if base != 0 {
                oi[i] = session.snapshots[i].open_interest as f64 / base as f64;
            }
        }
    }
    (ratio, oi)
}

/// Registry entries in the column order of [`compute_micro_features`].
pub fn micro_feature_specs(cfg: &MicroConfig) -> Vec<IndicatorSpec> {
    let mut specs = Vec::new();
    let wp = |w: &WindowSpec| ("minutes", w.minutes.to_string());
    for k in 1..=BOOK_DEPTH {
        for w in &cfg.windows {
            specs.push(IndicatorSpec::new(
                format!("acc_spread_k{k}_m{}", w.minutes),
                Family::Spread,
                &[("levels", k.to_string()), wp(w)],
            ));
        }
    }
    for k in 1..=BOOK_DEPTH {
        for w in &cfg.windows {
            specs.push(IndicatorSpec::new(
                format!("acc_imb_k{k}_m{}", w.minutes),
                Family::Imbalance,
                &[("levels", k.to_string()), wp(w)],
            ));
        }
    }
    for t in 1..=4 {
        for w in &cfg.windows {
            specs.push(IndicatorSpec::new(format!("type{t}_pct_m{}", w.minutes), Family::SnapshotType, &[wp(w)]));
        }
    }
    for t in 1..=4 {
        for w in &cfg.windows {
            specs.push(IndicatorSpec::new(
                format!("type{t}_pctf_m{}", w.minutes),
                Family::SnapshotType,
                &[wp(w), ("min_volume", cfg.min_volume_filter.to_string())],
            ));
        }
    }
    for w in &cfg.windows {
        specs.push(IndicatorSpec::new(format!("open_close_pct_m{}", w.minutes), Family::OrderFlow, &[wp(w)]));
    }
    for w in &cfg.windows {
        specs.push(IndicatorSpec::new(format!("oi_ratio_m{}", w.minutes), Family::OrderFlow, &[wp(w)]));
    }
    specs
}

#[derive(Debug, Clone)]
pub struct MicroFrame {
    pub columns: Vec<Column>,
    pub flags: Vec<Quality>,
}

pub fn compute_micro_features(
    session: &Session,
    derived: &[DerivedSnapshot],
    cfg: &MicroConfig,
    tick: TickSize,
) -> MicroFrame {
    let n = session.len();
    assert_eq!(derived.len(), n, "derived rows must align with snapshots");
    let tick = tick.as_f64();
    let mut columns = Vec::with_capacity(micro_feature_specs(cfg).len());

    let mut spread = vec![[0i64; BOOK_DEPTH]; n];
    let mut imb = vec![[0i64; BOOK_DEPTH]; n];
    for (i, s) in session.snapshots.iter().enumerate() {
        // Cumulative over levels: level k adds to k-1.
        let (mut sp, mut im) = (0i64, 0i64);
        for n in 0..BOOK_DEPTH {
            if let (Some(a), Some(b)) = (s.asks[n], s.bids[n]) {
                sp += a.price - b.price;
            }
            im += s.asks[n].map_or(0, |l| l.size as i64) - s.bids[n].map_or(0, |l| l.size as i64);
            spread[i][n] = sp;
            imb[i][n] = im;
        }
    }
    let spread_prefix: Vec<Vec<i64>> = (0..BOOK_DEPTH).map(|k| prefix(spread.iter().map(|r| r[k]), n)).collect();
    let imb_prefix: Vec<Vec<i64>> = (0..BOOK_DEPTH).map(|k| prefix(imb.iter().map(|r| r[k]), n)).collect();
    let mean_from = |p: &[i64], w: usize, scale: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if i + 1 < w {
                    MISSING
                } else {
                    window_sum(p, i, w) as f64 / w as f64 * scale
                }
            })
            .collect()
    };
    for (k, p) in spread_prefix.iter().enumerate() {
        for w in &cfg.windows {
            columns.push(Column::new(
                format!("acc_spread_k{}_m{}", k + 1, w.minutes),
                mean_from(p, w.snapshots(), tick),
            ));
        }
    }
    for (k, p) in imb_prefix.iter().enumerate() {
        for w in &cfg.windows {
            columns.push(Column::new(
                format!("acc_imb_k{}_m{}", k + 1, w.minutes),
                mean_from(p, w.snapshots(), 1.0),
            ));
        }
    }

    let mut flags: Vec<Quality> = vec![Quality::empty(); n];
    let plain: Vec<TypeShares> = cfg.windows.iter().map(|w| type_percentages(derived, w.snapshots(), None)).collect();
    let filtered: Vec<TypeShares> = cfg
        .windows
        .iter()
        .map(|w| type_percentages(derived, w.snapshots(), Some(cfg.min_volume_filter)))
        .collect();
    for (shares, label) in [(&plain, "pct"), (&filtered, "pctf")] {
        for t in 0..4 {
            for (w, s) in cfg.windows.iter().zip(shares.iter()) {
                columns.push(Column::new(format!("type{}_{label}_m{}", t + 1, w.minutes), s.shares[t].clone()));
            }
        }
    }
    for s in &filtered {
        for (f, &e) in flags.iter_mut().zip(&s.empty) {
            if e {
                *f |= Quality::DEGENERATE;
            }
        }
    }

    let flows: Vec<(Vec<f64>, Vec<f64>)> = cfg
        .windows
        .iter()
        .map(|w| order_flow_features(session, derived, w.snapshots()))
        .collect();
    for (w, (ratio, _)) in cfg.windows.iter().zip(&flows) {
        columns.push(Column::new(format!("open_close_pct_m{}", w.minutes), ratio.clone()));
    }
    for (w, (_, oi)) in cfg.windows.iter().zip(flows) {
        columns.push(Column::new(format!("oi_ratio_m{}", w.minutes), oi));
    }

    // Row flags: any absent level or integrity problem inside the longest window.
    let span = cfg.max_window().max(1);
    let absent = prefix(derived.iter().map(|d| i64::from(d.flags.contains(Quality::ABSENT_LEVEL))), n);
    let inconsistent = prefix(derived.iter().map(|d| i64::from(d.flags.contains(Quality::INCONSISTENT_FRAME))), n);
    let regressed = prefix(derived.iter().map(|d| i64::from(d.flags.contains(Quality::VOLUME_REGRESSION))), n);
    for (i, f) in flags.iter_mut().enumerate() {
        let w = span.min(i + 1);
        if window_sum(&absent, i, w) > 0 {
            *f |= Quality::ABSENT_LEVEL;
        }
        if window_sum(&inconsistent, i, w) > 0 {
            *f |= Quality::INCONSISTENT_FRAME;
        }
        if window_sum(&regressed, i, w) > 0 {
            *f |= Quality::VOLUME_REGRESSION;
        }
    }
    MicroFrame { columns, flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feed::Level;
    use crate::preprocess::{HalfContracts, SnapshotType::*};

    fn snap(bids: &[(i64, u64)], asks: &[(i64, u64)]) -> Snapshot {
        let mut s = Snapshot {
            timestamp_ms: 0,
            price: 100,
            volume: 0,
            open_interest: 0,
            bids: [None; BOOK_DEPTH],
            asks: [None; BOOK_DEPTH],
        };
        for (i, &(price, size)) in bids.iter().enumerate() {
            s.bids[i] = Some(Level { price, size });
        }
        for (i, &(price, size)) in asks.iter().enumerate() {
            s.asks[i] = Some(Level { price, size });
        }
        s
    }

    fn derived(t: SnapshotType, volume_chg: u64) -> DerivedSnapshot {
        DerivedSnapshot {
            volume_chg,
            oi_chg: 0,
            price_chg: 0,
            open_contracts: HalfContracts::ZERO,
            close_contracts: HalfContracts::ZERO,
            snapshot_type: t,
            flags: Quality::empty(),
        }
    }

    #[test]
    fn spread_examples() {
        let s = snap(&[(100, 2), (99, 1)], &[(101, 5), (102, 3)]);
        assert_eq!(accumulated_spread(&s, 2), LevelSum { value: 4, absent: false });
        let tight = snap(&[(20000, 1)], &[(20001, 1)]);
        assert_eq!(accumulated_spread(&tight, 1).value, 1);
        let four = snap(&[(100, 1), (99, 1), (98, 1), (97, 1)], &[(101, 1), (102, 1), (103, 1), (104, 1)]);
        let r = accumulated_spread(&four, 5);
        assert_eq!(r.value, 1 + 3 + 5 + 7);
        assert!(r.absent);
    }

    #[test]
    fn imbalance_examples() {
        let s = snap(&[(100, 2), (99, 1)], &[(101, 5), (102, 3)]);
        assert_eq!(accumulated_imbalance(&s, 2).value, 5);
        let sym = snap(&[(100, 4), (99, 6)], &[(101, 4), (102, 6)]);
        assert_eq!(accumulated_imbalance(&sym, 2).value, 0);
        let one = snap(&[(100, 25)], &[(101, 10)]);
        assert_eq!(accumulated_imbalance(&one, 1).value, -15);
    }

    #[test]
    fn rolling_mean_examples() {
        let m = rolling_mean(&[1, 2, 3, 4], 2);
        assert!(m[0].is_nan());
        assert_eq!(&m[1..], &[1.5, 2.5, 3.5]);
        assert!(rolling_mean(&[7; 10], 3)[2..].iter().all(|&v| v == 7.0));
    }

    #[test]
    fn type_share_examples() {
        let d = [derived(Type1, 12), derived(Type1, 5), derived(Type2, 20), derived(Type3, 11)];
        let plain = type_percentages(&d, 4, None);
        assert_eq!(plain.shares[0][3], 0.5);
        let f = type_percentages(&d, 4, Some(10));
        assert_eq!(f.shares[0][3], 1.0 / 3.0);
        let neutral = [derived(Neutral, 50); 4];
        let p = type_percentages(&neutral, 4, None);
        assert!(p.shares.iter().all(|s| s[3] == 0.0));
        let f = type_percentages(&[derived(Type1, 1); 4], 4, Some(10));
        assert!(f.empty[3]);
        assert_eq!(f.shares[0][3], 0.0);
    }

    #[test]
    fn feature_count() {
        let specs = micro_feature_specs(&MicroConfig::default());
        let count = |fam| specs.iter().filter(|s| s.family == fam).count();
        assert_eq!(count(Family::Spread), 20);
        assert_eq!(count(Family::Imbalance), 20);
        assert_eq!(count(Family::SnapshotType), 32);
        assert_eq!(count(Family::OrderFlow), 8);
    }
}
