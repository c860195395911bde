//! Per-frame deltas, open/close contract decomposition, snapshot type tags
//! and fixed-count OHLCV bars.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::feed::{parse_snapshot_file, ColumnMap, Session, SessionRule, TickSize, SNAPSHOTS_PER_MINUTE, SNAPSHOT_HEADER};
use crate::quality::Quality;

/// Contract count held in half-contract units, so odd `volume ± oi` splits stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfContracts(i64);

impl HalfContracts {
    pub const ZERO: HalfContracts = HalfContracts(0);

    pub fn from_halves(halves: i64) -> Self {
        Self(halves)
    }

    pub fn from_contracts(contracts: i64) -> Self {
        Self(contracts * 2)
    }

    pub fn halves(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for HalfContracts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            let sign = if self.0 < 0 { "-" } else { "" };
            write!(f, "{sign}{}.5", (self.0 / 2).abs())
        }
    }
}

impl FromStr for HalfContracts {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if let Some(whole) = s.strip_suffix(".5") {
            let negative = whole.starts_with('-');
            let w: i64 = whole.parse().map_err(|_| format!("bad contract count `{s}`"))?;
            Ok(Self(w * 2 + if negative { -1 } else { 1 }))
        } else {
            s.parse::<i64>()
                .map(Self::from_contracts)
                .map_err(|_| format!("bad contract count `{s}`"))
        }
    }
}

/// Quadrant of (price change, open-interest change).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SnapshotType {
    /// Price up, OI up: longs adding.
    Type1,
    /// Price down, OI up: shorts adding.
    Type2,
    /// Price up, OI down: shorts covering.
    Type3,
    /// Price down, OI down: longs liquidating.
    Type4,
    Neutral,
}

impl SnapshotType {
    pub const TAGGED: [SnapshotType; 4] = [Self::Type1, Self::Type2, Self::Type3, Self::Type4];

    /// 0..4 for the tagged types, `None` for Neutral.
    pub fn index(self) -> Option<usize> {
        match self {
            Self::Type1 => Some(0),
            Self::Type2 => Some(1),
            Self::Type3 => Some(2),
            Self::Type4 => Some(3),
            Self::Neutral => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Type1 => "type1",
            Self::Type2 => "type2",
            Self::Type3 => "type3",
            Self::Type4 => "type4",
            Self::Neutral => "neutral",
        }
    }
}

impl FromStr for SnapshotType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "type1" => Self::Type1,
            "type2" => Self::Type2,
            "type3" => Self::Type3,
            "type4" => Self::Type4,
            "neutral" => Self::Neutral,
            other => return Err(format!("unknown snapshot type `{other}`")),
        })
    }
}

pub fn classify_snapshot(price_chg: i64, oi_chg: i64) -> SnapshotType {
    use std::cmp::Ordering::*;
    match (price_chg.cmp(&0), oi_chg.cmp(&0)) {
        (Greater, Greater) => SnapshotType::Type1,
        (Less, Greater) => SnapshotType::Type2,
        (Greater, Less) => SnapshotType::Type3,
        (Less, Less) => SnapshotType::Type4,
        _ => SnapshotType::Neutral,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenClose {
    pub open: HalfContracts,
    pub close: HalfContracts,
    /// False when |oi_chg| > volume_chg and the solution was clamped.
    pub consistent: bool,
}

/// Solves `open + close = volume_chg`, `open - close = oi_chg`.
pub fn solve_open_close(volume_chg: u64, oi_chg: i64) -> OpenClose {
    let v = volume_chg as i64;
    let open = v + oi_chg;
    let close = v - oi_chg;
    let consistent = oi_chg.unsigned_abs() <= volume_chg;
    let clamp = |halves: i64| halves.clamp(0, 2 * v);
    OpenClose {
        open: HalfContracts(clamp(open)),
        close: HalfContracts(clamp(close)),
        consistent,
    }
}

/// Per-frame derived quantities, index-aligned with the session's snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedSnapshot {
    pub volume_chg: u64,
    pub oi_chg: i64,
    /// Last-price change in ticks.
    pub price_chg: i64,
    pub open_contracts: HalfContracts,
    pub close_contracts: HalfContracts,
    pub snapshot_type: SnapshotType,
    pub flags: Quality,
}

/// The first frame of a session restarts the cumulative count: its
/// `volume_chg` is the raw volume and its OI and price changes are zero.
pub fn derive_deltas(session: &Session) -> Vec<DerivedSnapshot> {
    let mut out = Vec::with_capacity(session.len());
    let mut prev: Option<&crate::feed::Snapshot> = None;
    for snap in &session.snapshots {
        let mut flags = Quality::empty();
        if snap.has_absent_level() {
            flags |= Quality::ABSENT_LEVEL;
        }
        let (volume_chg, oi_chg, price_chg) = match prev {
            None => (snap.volume, 0, 0),
            Some(p) => {
                let dv = if snap.volume < p.volume {
                    flags |= Quality::VOLUME_REGRESSION;
                    0
                } else {
                    snap.volume - p.volume
                };
                (
                    dv,
                    snap.open_interest as i64 - p.open_interest as i64,
                    snap.price - p.price,
                )
            }
        };
        let oc = solve_open_close(volume_chg, oi_chg);
        if !oc.consistent {
            flags |= Quality::INCONSISTENT_FRAME;
        }
        out.push(DerivedSnapshot {
            volume_chg,
            oi_chg,
            price_chg,
            open_contracts: oc.open,
            close_contracts: oc.close,
            snapshot_type: classify_snapshot(price_chg, oi_chg),
            flags,
        });
        prev = Some(snap);
    }
    out
}

/// OHLC in ticks over a fixed run of snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OhlcvBar {
    pub bar_start_ms: i64,
    pub bar_end_ms: i64,
    pub first_index: usize,
    pub len: usize,
    pub open: i64,
    pub high: i64,
    pub low: i64,
    pub close: i64,
    pub volume: u64,
    pub short: bool,
}

impl OhlcvBar {
    pub fn last_index(&self) -> usize {
        self.first_index + self.len - 1
    }
}

/// Groups a session into consecutive 120-snapshot bars anchored at the
/// session's first snapshot. A trailing partial bar is kept and marked short.
pub fn build_bars(session: &Session, derived: &[DerivedSnapshot]) -> Vec<OhlcvBar> {
    build_bars_with(session, derived, SNAPSHOTS_PER_MINUTE)
}

pub fn build_bars_with(session: &Session, derived: &[DerivedSnapshot], bar_len: usize) -> Vec<OhlcvBar> {
    assert_eq!(session.len(), derived.len(), "derived rows must align with snapshots");
    session
        .snapshots
        .chunks(bar_len)
        .zip(derived.chunks(bar_len))
        .enumerate()
        .map(|(b, (snaps, deltas))| {
            let prices = snaps.iter().map(|s| s.price);
            OhlcvBar {
                bar_start_ms: snaps[0].timestamp_ms,
                bar_end_ms: snaps[snaps.len() - 1].timestamp_ms,
                first_index: b * bar_len,
                len: snaps.len(),
                open: snaps[0].price,
                high: prices.clone().max().unwrap(),
                low: prices.min().unwrap(),
                close: snaps[snaps.len() - 1].price,
                volume: deltas.iter().map(|d| d.volume_chg).sum(),
                short: snaps.len() < bar_len,
            }
        })
        .collect()
}

pub const DERIVED_COLUMNS: &str = "volume_chg,oi_chg,open_contracts,close_contracts,snapshot_type,flags";

/// Canonical snapshot columns followed by the derived columns.
pub fn write_derived_csv<W: Write>(
    out: W,
    sessions: &[(Session, Vec<DerivedSnapshot>)],
    tick: TickSize,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let header: Vec<&str> = SNAPSHOT_HEADER.split(',').chain(DERIVED_COLUMNS.split(',')).collect();
    w.write_record(&header).map_err(|e| Error::csv("<output>", e))?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (session, derived) in sessions {
        for (s, d) in session.snapshots.iter().zip(derived) {
            record.clear();
            record.push(s.timestamp_ms.to_string());
            record.push(session.instrument.clone());
            record.push(tick.format_ticks(s.price));
            record.push(s.volume.to_string());
            record.push(s.open_interest.to_string());
            for side in [&s.bids, &s.asks] {
                for level in side.iter() {
                    record.push(level.map(|l| tick.format_ticks(l.price)).unwrap_or_default());
                }
                for level in side.iter() {
                    record.push(level.map(|l| l.size.to_string()).unwrap_or_default());
                }
            }
            record.push(d.volume_chg.to_string());
            record.push(d.oi_chg.to_string());
            record.push(d.open_contracts.to_string());
            record.push(d.close_contracts.to_string());
            record.push(d.snapshot_type.as_str().to_string());
            record.push(d.flags.bits().to_string());
            w.write_record(&record).map_err(|e| Error::csv("<output>", e))?;
        }
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Reads a file written by [`write_derived_csv`] back into sessions with
/// their derived rows. Any row that fails to parse is an integrity error.
pub fn read_derived_csv(path: &Path, tick: TickSize, rule: &SessionRule) -> Result<Vec<(Session, Vec<DerivedSnapshot>)>> {
    let (sessions, report) = parse_snapshot_file(path, &ColumnMap::default(), tick, rule, 0.0)?;
    if report.accepted != report.rows_read {
        return Err(Error::DataIntegrity(format!(
            "{}: {} of {} rows rejected on reload",
            path.display(),
            report.rows_read - report.accepted,
            report.rows_read
        )));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ts_col = col("timestamp_ms")?;
    let inst_col = col("instrument")?;
    let idx: Vec<usize> = DERIVED_COLUMNS.split(',').map(col).collect::<Result<_>>()?;
    let bad = |line: usize, what: &str| Error::DataIntegrity(format!("{} line {line}: bad {what}", path.display()));
    let mut rows: HashMap<(String, i64), DerivedSnapshot> = HashMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = n + 2;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let ts: i64 = f(ts_col).parse().map_err(|_| bad(line, "timestamp"))?;
        let d = DerivedSnapshot {
            volume_chg: f(idx[0]).parse().map_err(|_| bad(line, "volume_chg"))?,
            oi_chg: f(idx[1]).parse().map_err(|_| bad(line, "oi_chg"))?,
            price_chg: 0,
            open_contracts: f(idx[2]).parse().map_err(|_| bad(line, "open_contracts"))?,
            close_contracts: f(idx[3]).parse().map_err(|_| bad(line, "close_contracts"))?,
            snapshot_type: f(idx[4]).parse().map_err(|_| bad(line, "snapshot_type"))?,
            flags: f(idx[5])
                .parse::<u16>()
                .ok()
                .and_then(Quality::from_bits)
                .ok_or_else(|| bad(line, "flags"))?,
        };
        rows.insert((f(inst_col).to_string(), ts), d);
    }
    sessions
        .into_iter()
        .map(|session| {
            let mut prev = None;
            let derived = session
                .snapshots
                .iter()
                .map(|s| {
                    let mut d = rows
                        .remove(&(session.instrument.clone(), s.timestamp_ms))
                        .ok_or_else(|| Error::DataIntegrity(format!("no derived row for {} {}", session.id, s.timestamp_ms)))?;
                    d.price_chg = prev.map_or(0, |p| s.price - p);
                    prev = Some(s.price);
                    Ok(d)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((session, derived))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feed::{Snapshot, BOOK_DEPTH};
    use chrono::FixedOffset;

    fn session(rows: &[(i64, u64, u64)]) -> Session {
        let snaps = rows
            .iter()
            .enumerate()
            .map(|(i, &(price, volume, oi))| Snapshot {
                timestamp_ms: i as i64 * 500,
                price,
                volume,
                open_interest: oi,
                bids: [None; BOOK_DEPTH],
                asks: [None; BOOK_DEPTH],
            })
            .collect();
        Session::new("ag", snaps, FixedOffset::east_opt(0).unwrap())
    }

    #[test]
    fn deltas() {
        let d = derive_deltas(&session(&[(100, 100, 50), (101, 110, 54), (101, 110, 54), (100, 100, 54)]));
        assert_eq!((d[0].volume_chg, d[0].oi_chg), (100, 0));
        assert_eq!((d[1].volume_chg, d[1].oi_chg), (10, 4));
        assert_eq!((d[2].volume_chg, d[2].oi_chg), (0, 0));
        assert!(d[3].flags.contains(Quality::VOLUME_REGRESSION));
        assert!(!d[1].flags.contains(Quality::VOLUME_REGRESSION));
    }

    #[test]
    fn open_close_solution() {
        let oc = solve_open_close(10, 4);
        assert_eq!((oc.open.as_f64(), oc.close.as_f64()), (7.0, 3.0));
        assert!(oc.consistent);
        let oc = solve_open_close(6, -6);
        assert_eq!((oc.open.as_f64(), oc.close.as_f64()), (0.0, 6.0));
        let oc = solve_open_close(4, 6);
        assert!(!oc.consistent);
        assert_eq!((oc.open.as_f64(), oc.close.as_f64()), (4.0, 0.0));
        let oc = solve_open_close(5, 2);
        assert_eq!((oc.open.to_string(), oc.close.to_string()), ("3.5".into(), "1.5".into()));
    }

    #[test]
    fn inconsistent_frame_flagged() {
        let d = derive_deltas(&session(&[(100, 0, 50), (100, 4, 56)]));
        assert!(d[1].flags.contains(Quality::INCONSISTENT_FRAME));
        assert!(d[1].flags.is_rejectable());
    }

    #[test]
    fn classification_quadrants() {
        assert_eq!(classify_snapshot(1, 5), SnapshotType::Type1);
        assert_eq!(classify_snapshot(-1, 5), SnapshotType::Type2);
        assert_eq!(classify_snapshot(1, -5), SnapshotType::Type3);
        assert_eq!(classify_snapshot(-1, -5), SnapshotType::Type4);
        assert_eq!(classify_snapshot(0, 5), SnapshotType::Neutral);
        assert_eq!(classify_snapshot(3, 0), SnapshotType::Neutral);
    }

    #[test]
    fn bars() {
        let rows: Vec<(i64, u64, u64)> = (0..300).map(|i| (5000 + (i % 7) as i64, i as u64, 10)).collect();
        let s = session(&rows);
        let d = derive_deltas(&s);
        let bars = build_bars(&s, &d);
        assert_eq!(bars.len(), 3);
        assert!(!bars[0].short && !bars[1].short);
        assert!(bars[2].short);
        assert_eq!(bars[2].len, 60);

        let s = session(&[(5000, 0, 1), (5010, 1, 1), (4990, 2, 1), (5005, 3, 1)]);
        let d = derive_deltas(&s);
        let bar = build_bars_with(&s, &d, 4)[0];
        assert_eq!((bar.open, bar.high, bar.low, bar.close), (5000, 5010, 4990, 5005));
        assert_eq!(bar.volume, 3);
    }

    #[test]
    fn exact_division_two_bars() {
        let rows: Vec<(i64, u64, u64)> = (0..240).map(|_| (5000, 0, 10)).collect();
        let s = session(&rows);
        assert_eq!(build_bars(&s, &derive_deltas(&s)).len(), 2);
    }

    #[test]
    fn half_contract_text() {
        for h in [-7, -2, -1, 0, 1, 2, 7] {
            let v = HalfContracts::from_halves(h);
            assert_eq!(v.to_string().parse::<HalfContracts>().unwrap(), v);
        }
    }
}
