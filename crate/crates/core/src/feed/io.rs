use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use super::{group_sessions, Level, Session, SessionRule, Snapshot, TickSize, BOOK_DEPTH};
use crate::error::{Error, Result};

/// Canonical snapshot CSV header.
pub const SNAPSHOT_HEADER: &str = "timestamp_ms,instrument,price,volume,open_interest,\
bid_price_1,bid_price_2,bid_price_3,bid_price_4,bid_price_5,\
bid_size_1,bid_size_2,bid_size_3,bid_size_4,bid_size_5,\
ask_price_1,ask_price_2,ask_price_3,ask_price_4,ask_price_5,\
ask_size_1,ask_size_2,ask_size_3,ask_size_4,ask_size_5";

const MANDATORY: [&str; 9] = [
    "timestamp_ms",
    "instrument",
    "price",
    "volume",
    "open_interest",
    "bid_price_1",
    "bid_size_1",
    "ask_price_1",
    "ask_size_1",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Ndjson,
}

impl InputFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ndjson") | Some("jsonl") => InputFormat::Ndjson,
            _ => InputFormat::Csv,
        }
    }
}

/// Maps canonical field names to the names used by a particular file.
/// Fields not mentioned are looked up under their canonical name.
#[derive(Debug, Clone, Default)]
pub struct ColumnMap {
    renames: HashMap<String, String>,
}

impl ColumnMap {
    pub fn with(mut self, canonical: &str, source: &str) -> Self {
        self.renames.insert(canonical.to_string(), source.to_string());
        self
    }

    fn source_name<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.renames.get(canonical).map_or(canonical, String::as_str)
    }
}

/// Counts of what happened to each input row.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub rows_read: usize,
    pub accepted: usize,
    pub malformed: usize,
    pub crossed: usize,
    pub bad_ladder: usize,
    pub duplicates: usize,
    pub out_of_schedule: usize,
    pub sessions: usize,
}

impl ParseReport {
    /// Rows dropped for violating a book invariant or arriving twice.
    pub fn warnings(&self) -> usize {
        self.crossed + self.bad_ladder + self.duplicates + self.out_of_schedule
    }
}

fn canonical_fields() -> Vec<String> {
    SNAPSHOT_HEADER.split(',').map(str::to_string).collect()
}

pub fn parse_snapshot_file(
    path: &Path,
    columns: &ColumnMap,
    tick: TickSize,
    rule: &SessionRule,
    max_malformed_fraction: f64,
) -> Result<(Vec<Session>, ParseReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot_reader(
        BufReader::new(file),
        InputFormat::from_path(path),
        columns,
        tick,
        rule,
        max_malformed_fraction,
    )
    .map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Csv { source, .. } => Error::csv(path, source),
        other => other,
    })
}

pub fn parse_snapshot_reader<R: Read>(
    reader: R,
    format: InputFormat,
    columns: &ColumnMap,
    tick: TickSize,
    rule: &SessionRule,
    max_malformed_fraction: f64,
) -> Result<(Vec<Session>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut rows: Vec<(String, Snapshot)> = Vec::new();
    let mut on_row = |parsed: std::result::Result<(String, Snapshot), String>, line: usize| {
        report.rows_read += 1;
        match parsed {
            Ok(row) => rows.push(row),
            Err(msg) => {
                report.malformed += 1;
                if report.malformed <= 5 {
                    warn!("row {line}: {msg}");
                }
            }
        }
    };

    match format {
        InputFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
            let headers = rdr.headers().map_err(|e| Error::csv("<input>", e))?.clone();
            let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
            let fields = canonical_fields();
            let mut positions: Vec<Option<usize>> = Vec::with_capacity(fields.len());
            for field in &fields {
                let pos = index.get(columns.source_name(field)).copied();
                if pos.is_none() && MANDATORY.contains(&field.as_str()) {
                    return Err(Error::MissingColumn(columns.source_name(field).to_string()));
                }
                positions.push(pos);
            }
            let mut record = csv::StringRecord::new();
            let mut line = 1;
            loop {
                match rdr.read_record(&mut record) {
                    Ok(false) => break,
                    Ok(true) => {
                        line += 1;
                        let get = |i: usize| -> Option<Cow<'_, str>> {
                            positions[i].and_then(|p| record.get(p)).map(Cow::Borrowed)
                        };
                        on_row(parse_row(&get, tick), line);
                    }
                    Err(e) if e.is_io_error() => return Err(Error::csv("<input>", e)),
                    Err(e) => {
                        line += 1;
                        on_row(Err(e.to_string()), line);
                    }
                }
            }
        }
        InputFormat::Ndjson => {
            let fields = canonical_fields();
            for (n, text) in BufReader::new(reader).lines().enumerate() {
                let text = text.map_err(|e| Error::io("<input>", e))?;
                if text.trim().is_empty() {
                    continue;
                }
                let parsed = match serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&text) {
                    Ok(obj) => {
                        if n == 0 {
                            if let Some(missing) = MANDATORY.iter().find(|f| !obj.contains_key(columns.source_name(f))) {
                                return Err(Error::MissingColumn(columns.source_name(missing).to_string()));
                            }
                        }
                        let get = |i: usize| -> Option<Cow<'_, str>> {
                            match obj.get(columns.source_name(&fields[i]))? {
                                serde_json::Value::Null => Some(Cow::Borrowed("")),
                                serde_json::Value::String(s) => Some(Cow::Borrowed(s.as_str())),
                                other => Some(Cow::Owned(other.to_string())),
                            }
                        };
                        parse_row(&get, tick)
                    }
                    Err(e) => Err(e.to_string()),
                };
                on_row(parsed, n + 1);
            }
        }
    }

    if report.rows_read > 0 {
        let fraction = report.malformed as f64 / report.rows_read as f64;
        if fraction > max_malformed_fraction {
            return Err(Error::TooManyMalformed {
                malformed: report.malformed,
                total: report.rows_read,
                limit_pct: max_malformed_fraction * 100.0,
            });
        }
    }

    let mut by_instrument: BTreeMap<String, Vec<Snapshot>> = BTreeMap::new();
    for (instrument, snap) in rows {
        match snap.validate() {
            Ok(()) => {}
            Err(super::BookViolation::Crossed) => {
                report.crossed += 1;
                continue;
            }
            Err(_) => {
                report.bad_ladder += 1;
                continue;
            }
        }
        if rule.window_of(snap.timestamp_ms).is_none() {
            report.out_of_schedule += 1;
            continue;
        }
        by_instrument.entry(instrument).or_default().push(snap);
    }

    let mut sessions = Vec::new();
    for (instrument, mut snaps) in by_instrument {
        snaps.sort_by_key(|s| s.timestamp_ms);
        let before = snaps.len();
        snaps.dedup_by_key(|s| s.timestamp_ms);
        report.duplicates += before - snaps.len();
        report.accepted += snaps.len();
        sessions.extend(group_sessions(&instrument, snaps, rule));
    }
    report.sessions = sessions.len();
    if report.warnings() > 0 {
        warn!(
            "rejected rows: {} crossed, {} bad ladder, {} duplicate, {} out of schedule",
            report.crossed, report.bad_ladder, report.duplicates, report.out_of_schedule
        );
    }
    Ok((sessions, report))
}

type FieldGetter<'a> = dyn Fn(usize) -> Option<Cow<'a, str>> + 'a;

fn parse_row(get: &FieldGetter<'_>, tick: TickSize) -> std::result::Result<(String, Snapshot), String> {
    let required = |i: usize, name: &str| -> std::result::Result<Cow<'_, str>, String> {
        match get(i) {
            Some(v) if !v.trim().is_empty() => Ok(v),
            _ => Err(format!("empty `{name}`")),
        }
    };
    let timestamp_ms = required(0, "timestamp_ms")?
        .trim()
        .parse::<i64>()
        .map_err(|e| format!("timestamp_ms: {e}"))?;
    let instrument = required(1, "instrument")?.trim().to_string();
    let price = tick.parse_ticks(&required(2, "price")?)?;
    let volume = parse_count(&required(3, "volume")?)?;
    let open_interest = parse_count(&required(4, "open_interest")?)?;

    let mut bids = [None; BOOK_DEPTH];
    let mut asks = [None; BOOK_DEPTH];
    for n in 0..BOOK_DEPTH {
        bids[n] = parse_level(get(5 + n), get(10 + n), tick, n + 1)?;
        asks[n] = parse_level(get(15 + n), get(20 + n), tick, n + 1)?;
    }
    Ok((
        instrument,
        Snapshot {
            timestamp_ms,
            price,
            volume,
            open_interest,
            bids,
            asks,
        },
    ))
}

fn parse_level(
    price: Option<Cow<'_, str>>,
    size: Option<Cow<'_, str>>,
    tick: TickSize,
    level: usize,
) -> std::result::Result<Option<Level>, String> {
    let price = price.filter(|p| !p.trim().is_empty());
    let size = size.filter(|s| !s.trim().is_empty());
    match (price, size) {
        (None, None) => Ok(None),
        (Some(p), Some(s)) => Ok(Some(Level {
            price: tick.parse_ticks(&p)?,
            size: parse_count(&s)?,
        })),
        _ => Err(format!("level {level} has price without size or size without price")),
    }
}

fn parse_count(text: &str) -> std::result::Result<u64, String> {
    let text = text.trim();
    if let Ok(v) = text.parse::<u64>() {
        return Ok(v);
    }
    let d: Decimal = text.parse().map_err(|_| format!("bad count `{text}`"))?;
    if !d.fract().is_zero() || d.is_sign_negative() {
        return Err(format!("count `{text}` is not a non-negative integer"));
    }
    d.to_u64().ok_or_else(|| format!("count `{text}` out of range"))
}

/// Writes sessions in the canonical CSV layout. Absent levels become empty fields.
pub fn write_snapshot_csv<W: Write>(out: W, sessions: &[Session], tick: TickSize) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let header: Vec<&str> = SNAPSHOT_HEADER.split(',').collect();
    w.write_record(&header).map_err(|e| Error::csv("<output>", e))?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for session in sessions {
        for s in &session.snapshots {
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
            w.write_record(&record).map_err(|e| Error::csv("<output>", e))?;
        }
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ts: i64, bid1: &str, ask1: &str) -> String {
        format!("{ts},ag2112,5000,{},100,{bid1},,,,,5,,,,,{ask1},,,,,7,,,,", ts / 500)
    }

    fn parse(text: &str) -> Result<(Vec<Session>, ParseReport)> {
        parse_snapshot_reader(
            text.as_bytes(),
            InputFormat::Csv,
            &ColumnMap::default(),
            TickSize::default(),
            &SessionRule::default(),
            0.01,
        )
    }

    #[test]
    fn three_rows_one_session() {
        let text = format!(
            "{SNAPSHOT_HEADER}\n{}\n{}\n{}\n",
            row(0, "4999", "5001"),
            row(500, "4999", "5001"),
            row(1000, "4999", "5001")
        );
        let (sessions, report) = parse(&text).unwrap();
        assert_eq!(sessions.len(), 1);
        assert_eq!(sessions[0].len(), 3);
        assert_eq!(report.accepted, 3);
        assert_eq!(report.warnings(), 0);
        assert_eq!(sessions[0].snapshots[1].bids[0], Some(Level { price: 4999, size: 5 }));
        assert_eq!(sessions[0].snapshots[1].bids[1], None);
    }

    #[test]
    fn crossed_row_rejected_with_warning() {
        let text = format!(
            "{SNAPSHOT_HEADER}\n{}\n{}\n{}\n",
            row(0, "4999", "5001"),
            row(500, "5002", "5001"),
            row(1000, "4999", "5001")
        );
        let (sessions, report) = parse(&text).unwrap();
        assert_eq!(report.crossed, 1);
        assert_eq!(report.warnings(), 1);
        assert_eq!(sessions[0].len(), 2);
    }

    #[test]
    fn missing_column_is_hard_error() {
        let text = "timestamp_ms,instrument,price\n0,ag,1\n";
        assert!(matches!(parse(text), Err(Error::MissingColumn(c)) if c == "volume"));
    }

    #[test]
    fn malformed_fraction_limit() {
        let mut text = format!("{SNAPSHOT_HEADER}\n");
        for i in 0..99 {
            text.push_str(&row(i * 500, "4999", "5001"));
            text.push('\n');
        }
        text.push_str("oops,ag,5000,1,1,,,,,,,,,,,,,,,,,,,,\n");
        let (_, report) = parse(&text).unwrap();
        assert_eq!(report.malformed, 1);
        text.push_str("oops,ag,5000,1,1,,,,,,,,,,,,,,,,,,,,\n");
        assert!(matches!(parse(&text), Err(Error::TooManyMalformed { malformed: 2, .. })));
    }

    #[test]
    fn duplicates_and_unsorted_input() {
        let text = format!(
            "{SNAPSHOT_HEADER}\n{}\n{}\n{}\n",
            row(1000, "4999", "5001"),
            row(0, "4999", "5001"),
            row(1000, "4998", "5001")
        );
        let (sessions, report) = parse(&text).unwrap();
        assert_eq!(report.duplicates, 1);
        let ts: Vec<i64> = sessions[0].snapshots.iter().map(|s| s.timestamp_ms).collect();
        assert_eq!(ts, vec![0, 1000]);
    }

    #[test]
    fn ndjson_matches_csv() {
        let line = r#"{"timestamp_ms":0,"instrument":"ag","price":"5000","volume":1,"open_interest":100,
            "bid_price_1":4999,"bid_size_1":5,"ask_price_1":"5001","ask_size_1":7,"bid_price_2":null,"bid_size_2":null}"#
            .replace('\n', "");
        let (sessions, report) = parse_snapshot_reader(
            line.as_bytes(),
            InputFormat::Ndjson,
            &ColumnMap::default(),
            TickSize::default(),
            &SessionRule::default(),
            0.01,
        )
        .unwrap();
        assert_eq!(report.accepted, 1);
        let s = &sessions[0].snapshots[0];
        assert_eq!(s.asks[0], Some(Level { price: 5001, size: 7 }));
        assert_eq!(s.bids[1], None);
    }

    #[test]
    fn column_map_renames() {
        let text = format!(
            "{}\n{}\n",
            SNAPSHOT_HEADER.replace("timestamp_ms", "ts"),
            row(0, "4999", "5001")
        );
        let map = ColumnMap::default().with("timestamp_ms", "ts");
        let (sessions, _) = parse_snapshot_reader(
            text.as_bytes(),
            InputFormat::Csv,
            &map,
            TickSize::default(),
            &SessionRule::default(),
            0.01,
        )
        .unwrap();
        assert_eq!(sessions.len(), 1);
    }
}
