//! Text formats of the intermediate files that are read back by later stages.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::column::Column;
use crate::dataset::{FeatureBlock, FoldSpec, HoldoutSplit, LabelBlock};
use crate::error::{Error, Result};
use crate::features::SessionFeatures;
use crate::feed::Session;
use crate::labeling::Target;
use crate::quality::Quality;

pub const SNAPSHOTS: &str = "snapshots.csv";
pub const INGEST_REPORT: &str = "ingest.txt";
pub const DERIVED: &str = "derived.csv";
pub const FEATURES: &str = "features.csv";
pub const REGISTRY: &str = "registry.txt";
pub const LABELS: &str = "labels.csv";
pub const MATRIX: &str = "matrix.csv";
pub const RETENTION: &str = "retention.txt";
pub const FOLDS: &str = "folds.txt";
pub const TRAIN_REPORT: &str = "train.txt";
pub const PREDICTIONS: &str = "predictions.ndjson";
pub const ENSEMBLE: &str = "ensemble.csv";
pub const TRADES: &str = "trades.csv";
pub const EQUITY: &str = "equity.csv";
pub const BACKTEST_REPORT: &str = "backtest.txt";
pub const REPORT: &str = "report.txt";
pub const REPORT_SVG: &str = "report.svg";

pub fn model_file(fold: usize) -> String {
    format!("model_fold{fold}.json")
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(|f| BufWriter::with_capacity(1 << 20, f))
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|e| Error::io(path, e))
}

fn integrity(path: &Path, line: usize, what: &str) -> Error {
    Error::DataIntegrity(format!("{} line {line}: {what}", path.display()))
}

/// Writes only rows with every feature present:
/// `session_id,timestamp_ms,group,flags,<features>`.
pub fn write_features<W: Write>(out: &mut W, names: &[String], sessions: &[(&Session, &SessionFeatures)]) -> Result<()> {
    let io = |e| Error::io(FEATURES, e);
    writeln!(out, "session_id,timestamp_ms,group,flags,{}", names.join(",")).map_err(io)?;
    let mut line = String::with_capacity(4096);
    for (session, f) in sessions {
        for (i, snap) in session.snapshots.iter().enumerate() {
            if !f.is_complete(i) {
                continue;
            }
            line.clear();
            let _ = write!(
                line,
                "{},{},{},{}",
                session.id,
                snap.timestamp_ms,
                session.trading_day,
                f.flags[i].bits()
            );
            for c in &f.columns {
                let _ = write!(line, ",{}", c.values[i]);
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_features(path: &Path) -> Result<(Vec<String>, Vec<FeatureBlock>)> {
    let mut lines = open(path)?.lines();
    let header = lines
        .next()
        .ok_or_else(|| integrity(path, 1, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 5 || fields[..4] != ["session_id", "timestamp_ms", "group", "flags"] {
        return Err(integrity(path, 1, "unexpected header"));
    }
    let names: Vec<String> = fields[4..].iter().map(|s| s.to_string()).collect();
    let k = names.len();
    let mut blocks: Vec<FeatureBlock> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); k];
    let flush = |blocks: &mut Vec<FeatureBlock>, values: &mut Vec<Vec<f64>>| {
        if let Some(b) = blocks.last_mut() {
            b.columns = names
                .iter()
                .zip(values.iter_mut())
                .map(|(n, v)| Column::new(n.clone(), std::mem::take(v)))
                .collect();
        }
    };
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 2;
        let mut parts = line.split(',');
        let mut next = || parts.next().ok_or_else(|| integrity(path, lineno, "short row"));
        let sid = next()?;
        let ts: i64 = next()?.parse().map_err(|_| integrity(path, lineno, "bad timestamp"))?;
        let day: NaiveDate = next()?.parse().map_err(|_| integrity(path, lineno, "bad group"))?;
        let flags = next()?
            .parse::<u16>()
            .ok()
            .and_then(Quality::from_bits)
            .ok_or_else(|| integrity(path, lineno, "bad flags"))?;
        if blocks.last().is_none_or(|b| b.session_id != sid) {
            flush(&mut blocks, &mut values);
            blocks.push(FeatureBlock {
                session_id: sid.to_string(),
                trading_day: day,
                timestamps: Vec::new(),
                columns: Vec::new(),
                flags: Vec::new(),
            });
        }
        let b = blocks.last_mut().expect("block pushed");
        b.timestamps.push(ts);
        b.flags.push(flags);
        for v in values.iter_mut() {
            v.push(next()?.parse().map_err(|_| integrity(path, lineno, "bad value"))?);
        }
        if parts.next().is_some() {
            return Err(integrity(path, lineno, "long row"));
        }
    }
    flush(&mut blocks, &mut values);
    Ok((names, blocks))
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelBlock>> {
    let mut lines = open(path)?.lines();
    let header = lines
        .next()
        .ok_or_else(|| integrity(path, 1, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    if header != crate::labeling::LABEL_HEADER {
        return Err(integrity(path, 1, "unexpected header"));
    }
    let mut blocks: Vec<LabelBlock> = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(integrity(path, lineno, "wrong field count"));
        }
        let ts: i64 = parts[1].parse().map_err(|_| integrity(path, lineno, "bad timestamp"))?;
        let target = match parts[4] {
            "1" => Target::Up,
            "0" => Target::Down,
            "" => Target::Dropped,
            _ => return Err(integrity(path, lineno, "bad target")),
        };
        if blocks.last().is_none_or(|b| b.session_id != parts[0]) {
            blocks.push(LabelBlock {
                session_id: parts[0].to_string(),
                timestamps: Vec::new(),
                targets: Vec::new(),
            });
        }
        let b = blocks.last_mut().expect("block pushed");
        b.timestamps.push(ts);
        b.targets.push(target);
    }
    Ok(blocks)
}

fn dates(text: &str) -> Result<Vec<NaiveDate>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|d| d.parse().map_err(|_| Error::DataIntegrity(format!("bad day `{d}` in fold file"))))
        .collect()
}

fn join(days: &[NaiveDate]) -> String {
    days.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

/// Fold lines followed by one `holdout cv=... purged=... holdout=...` line.
pub fn folds_text(folds: &[FoldSpec<NaiveDate>], holdout: &HoldoutSplit<NaiveDate>) -> String {
    let mut out = crate::dataset::fold_manifest(folds);
    let _ = writeln!(
        out,
        "holdout cv={} purged={} holdout={}",
        join(&holdout.cv_groups),
        join(&holdout.purged_groups),
        join(&holdout.holdout_groups)
    );
    out
}

pub fn parse_folds(text: &str) -> Result<(Vec<FoldSpec<NaiveDate>>, HoldoutSplit<NaiveDate>)> {
    let mut folds = Vec::new();
    let mut holdout = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let fields: HashMap<&str, &str> = line.split(' ').filter_map(|kv| kv.split_once('=')).collect();
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::DataIntegrity(format!("fold file line `{line}` lacks `{k}`")))
        };
        if line.starts_with("holdout ") {
            holdout = Some(HoldoutSplit {
                cv_groups: dates(get("cv")?)?,
                purged_groups: dates(get("purged")?)?,
                holdout_groups: dates(get("holdout")?)?,
            });
        } else {
            folds.push(FoldSpec {
                fold_index: get("fold")?
                    .parse()
                    .map_err(|_| Error::DataIntegrity(format!("bad fold index in `{line}`")))?,
                train_groups: dates(get("train")?)?,
                purged_groups: dates(get("purged")?)?,
                validation_groups: dates(get("validation")?)?,
            });
        }
    }
    let holdout = holdout.ok_or_else(|| Error::DataIntegrity("fold file has no holdout line".into()))?;
    Ok((folds, holdout))
}

/// One ensemble row: key, trimmed-mean probability and the label if known.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    pub session_id: String,
    pub timestamp_ms: i64,
    pub prob: f64,
    pub label: Option<u8>,
}

pub const ENSEMBLE_HEADER: &str = "session_id,timestamp_ms,prob,label";

pub fn write_ensemble<W: Write>(out: &mut W, rows: &[EnsembleRow]) -> Result<()> {
    let io = |e| Error::io(ENSEMBLE, e);
    writeln!(out, "{ENSEMBLE_HEADER}").map_err(io)?;
    for r in rows {
        let label = r.label.map(|l| l.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{label}", r.session_id, r.timestamp_ms, r.prob).map_err(io)?;
    }
    Ok(())
}

pub fn read_ensemble(path: &Path) -> Result<Vec<EnsembleRow>> {
    let mut lines = open(path)?.lines();
    match lines.next() {
        Some(Ok(h)) if h == ENSEMBLE_HEADER => {}
        _ => return Err(integrity(path, 1, "unexpected header")),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(integrity(path, lineno, "wrong field count"));
        }
        rows.push(EnsembleRow {
            session_id: parts[0].to_string(),
            timestamp_ms: parts[1].parse().map_err(|_| integrity(path, lineno, "bad timestamp"))?,
            prob: parts[2].parse().map_err(|_| integrity(path, lineno, "bad probability"))?,
            label: match parts[3] {
                "" => None,
                l => Some(l.parse().map_err(|_| integrity(path, lineno, "bad label"))?),
            },
        });
    }
    Ok(rows)
}

/// `key value` lines, in insertion order.
pub fn write_kv(entries: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{k} {v}");
    }
    out
}

pub fn read_kv(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(' '))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
