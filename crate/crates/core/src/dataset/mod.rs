//! Labeled feature matrices: keyed inner join of feature blocks and labels,
//! screening statistics, and walk-forward group splits with a purge gap.

mod planted;
mod split;
mod stats;

pub use planted::{noise_labels, plant_logistic_labels};
pub use split::{fold_manifest, holdout_split, purged_group_split, FoldSpec, HoldoutSplit};
pub use stats::{correlation_report, pearson, quantile, CorrelationReport, CorrelationSummary};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use chrono::NaiveDate;

use crate::column::Column;
use crate::error::{Error, Result};
use crate::labeling::Target;
use crate::quality::Quality;

const RESERVED: [&str; 4] = ["session_id", "timestamp_ms", "group", "label"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub session_id: Arc<str>,
    pub timestamp_ms: i64,
}

/// Dense row-major matrix with per-row key, group and optional label.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    data: Vec<f64>,
    keys: Vec<RowKey>,
    groups: Vec<NaiveDate>,
    labels: Option<Vec<u8>>,
}

impl FeatureMatrix {
    pub fn new(
        columns: Vec<String>,
        data: Vec<f64>,
        keys: Vec<RowKey>,
        groups: Vec<NaiveDate>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let n = keys.len();
        if data.len() != n * columns.len() || groups.len() != n || labels.as_ref().is_some_and(|l| l.len() != n) {
            return Err(Error::InvalidInput("matrix parts have inconsistent lengths".into()));
        }
        if let Some(v) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in column {} of row {}",
                columns[v % columns.len()],
                v / columns.len()
            )));
        }
        if let Some(l) = labels.as_ref().and_then(|l| l.iter().find(|&&l| l > 1)) {
            return Err(Error::InvalidInput(format!("label {l} is not binary")));
        }
        if let Some(w) = keys.windows(2).find(|w| w[1].timestamp_ms <= w[0].timestamp_ms) {
            return Err(Error::InvalidInput(format!(
                "rows out of time order at {} {}",
                w[1].session_id, w[1].timestamp_ms
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if RESERVED.contains(&c.as_str()) || !seen.insert(c.as_str()) {
                return Err(Error::ColumnCollision(c.clone()));
            }
        }
        Ok(Self {
            columns,
            data,
            keys,
            groups,
            labels,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn groups(&self) -> &[NaiveDate] {
        &self.groups
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.n_rows() || labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidInput("labels must be binary and one per row".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Distinct groups in ascending order.
    pub fn distinct_groups(&self) -> Vec<NaiveDate> {
        self.groups.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn rows_in_groups(&self, groups: &[NaiveDate]) -> Vec<usize> {
        let set: HashSet<&NaiveDate> = groups.iter().collect();
        (0..self.n_rows()).filter(|&i| set.contains(&self.groups[i])).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            data,
            keys: rows.iter().map(|&i| self.keys[i].clone()).collect(),
            groups: rows.iter().map(|&i| self.groups[i]).collect(),
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect()),
        }
    }

    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::MissingFeature(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(self.n_rows() * idx.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(FeatureMatrix {
            columns: names.to_vec(),
            data,
            keys: self.keys.clone(),
            groups: self.groups.clone(),
            labels: self.labels.clone(),
        })
    }

    /// CSV with header `session_id,timestamp_ms,<columns>,group,label`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<matrix>", e);
        writeln!(out, "session_id,timestamp_ms,{},group,label", self.columns.join(",")).map_err(io)?;
        let mut line = String::new();
        for i in 0..self.n_rows() {
            use std::fmt::Write as _;
            line.clear();
            let k = &self.keys[i];
            let _ = write!(line, "{},{}", k.session_id, k.timestamp_ms);
            for v in self.row(i) {
                let _ = write!(line, ",{v}");
            }
            let _ = write!(line, ",{},", self.groups[i]);
            if let Some(l) = &self.labels {
                let _ = write!(line, "{}", l[i]);
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<FeatureMatrix> {
        let bad = |line: usize, what: &str| Error::InvalidInput(format!("matrix line {line}: {what}"));
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad(1, "empty file"))?
            .map_err(|e| Error::io("<matrix>", e))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() < 4
            || fields[..2] != ["session_id", "timestamp_ms"]
            || fields[fields.len() - 2..] != ["group", "label"]
        {
            return Err(bad(1, "unexpected header"));
        }
        let columns: Vec<String> = fields[2..fields.len() - 2].iter().map(|s| s.to_string()).collect();
        let c = columns.len();
        let mut data = Vec::new();
        let mut keys = Vec::new();
        let mut groups = Vec::new();
        let mut labels = Vec::new();
        let mut sessions: HashMap<String, Arc<str>> = HashMap::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<matrix>", e))?;
            let lineno = n + 2;
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != c + 4 {
                return Err(bad(lineno, "wrong field count"));
            }
            let sid = sessions
                .entry(parts[0].to_string())
                .or_insert_with(|| Arc::from(parts[0]))
                .clone();
            let ts = parts[1].parse().map_err(|_| bad(lineno, "bad timestamp"))?;
            keys.push(RowKey {
                session_id: sid,
                timestamp_ms: ts,
            });
            for p in &parts[2..c + 2] {
                data.push(p.parse::<f64>().map_err(|_| bad(lineno, "bad value"))?);
            }
            groups.push(parts[c + 2].parse().map_err(|_| bad(lineno, "bad group"))?);
            labels.push(match parts[c + 3] {
                "" => None,
                l => Some(l.parse::<u8>().map_err(|_| bad(lineno, "bad label"))?),
            });
        }
        let labels = if labels.iter().all(Option::is_some) && !labels.is_empty() {
            Some(labels.into_iter().flatten().collect())
        } else if labels.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::InvalidInput("matrix mixes labeled and unlabeled rows".into()));
        };
        FeatureMatrix::new(columns, data, keys, groups, labels)
    }
}

/// Feature columns for one session, keyed by snapshot timestamp.
#[derive(Debug, Clone)]
pub struct FeatureBlock {
    pub session_id: String,
    pub trading_day: NaiveDate,
    pub timestamps: Vec<i64>,
    pub columns: Vec<Column>,
    pub flags: Vec<Quality>,
}

#[derive(Debug, Clone)]
pub struct LabelBlock {
    pub session_id: String,
    pub timestamps: Vec<i64>,
    pub targets: Vec<Target>,
}

/// Row counts through the join. Each dropped row is counted once, under the
/// first reason that applies in field order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RetentionReport {
    pub candidates: usize,
    pub unmatched: usize,
    pub missing_feature: usize,
    pub rejected_quality: usize,
    pub dropped_label: usize,
    pub retained: usize,
}

/// Inner join of feature sources (and labels, when given) on
/// (session, timestamp). The first source drives row order.
pub fn assemble(sources: &[Vec<FeatureBlock>], labels: Option<&[LabelBlock]>) -> Result<(FeatureMatrix, RetentionReport)> {
    let driver = sources.first().ok_or(Error::EmptyMatrix)?;
    let mut columns: Vec<String> = Vec::new();
    for src in sources {
        if let Some(b) = src.first() {
            columns.extend(b.columns.iter().map(|c| c.name.clone()));
        }
    }
    let mut seen = HashSet::new();
    for c in &columns {
        if RESERVED.contains(&c.as_str()) || !seen.insert(c.as_str()) {
            return Err(Error::ColumnCollision(c.clone()));
        }
    }
    let index: Vec<HashMap<&str, &FeatureBlock>> = sources
        .iter()
        .map(|s| s.iter().map(|b| (b.session_id.as_str(), b)).collect())
        .collect();
    let label_index: Option<HashMap<&str, &LabelBlock>> =
        labels.map(|ls| ls.iter().map(|b| (b.session_id.as_str(), b)).collect());

    let mut report = RetentionReport::default();
    let (mut data, mut keys, mut groups, mut out_labels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for block in driver {
        let sid: Arc<str> = Arc::from(block.session_id.as_str());
        let parts: Vec<Option<&FeatureBlock>> = index.iter().map(|m| m.get(block.session_id.as_str()).copied()).collect();
        let lab = label_index.as_ref().map(|m| m.get(block.session_id.as_str()).copied());
        for (r, &ts) in block.timestamps.iter().enumerate() {
            report.candidates += 1;
            let rows: Option<Vec<(&FeatureBlock, usize)>> = parts
                .iter()
                .map(|p| p.and_then(|b| b.timestamps.binary_search(&ts).ok().map(|i| (b, i))))
                .collect();
            let target = match lab {
                None => Some(None),
                Some(l) => l.and_then(|l| l.timestamps.binary_search(&ts).ok().map(|i| Some(l.targets[i]))),
            };
            let (Some(rows), Some(target)) = (rows, target) else {
                report.unmatched += 1;
                continue;
            };
            debug_assert_eq!(rows[0].1, r);
            if rows.iter().any(|(b, i)| b.columns.iter().any(|c| c.values[*i].is_nan())) {
                report.missing_feature += 1;
                continue;
            }
            if rows.iter().any(|(b, i)| b.flags[*i].is_rejectable()) {
                report.rejected_quality += 1;
                continue;
            }
            let label = match target.map(Target::as_label) {
                Some(None) => {
                    report.dropped_label += 1;
                    continue;
                }
                Some(Some(l)) => Some(l),
                None => None,
            };
            for (b, i) in &rows {
                data.extend(b.columns.iter().map(|c| c.values[*i]));
            }
            keys.push(RowKey {
                session_id: sid.clone(),
                timestamp_ms: ts,
            });
            groups.push(block.trading_day);
            out_labels.extend(label);
            report.retained += 1;
        }
    }
    if report.retained == 0 {
        return Err(Error::EmptyMatrix);
    }
    let labels = labels.is_some().then_some(out_labels);
    Ok((FeatureMatrix::new(columns, data, keys, groups, labels)?, report))
}
