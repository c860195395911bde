//! Classifier boundary. The in-repo baseline is an L2-regularised logistic
//! model; the external kind reads per-fold probabilities produced elsewhere.
//! Fold outputs are combined with a trimmed mean and scored with AUC, a
//! confusion matrix and probability/label correlation.

mod logistic;
mod metrics;

pub use logistic::{fit_logistic, loss_and_gradient, sigmoid, Design, FitTrace, LogisticConfig};
pub use metrics::{auc_roc, classification_report, ensemble, ClassificationReport, ConfusionMatrix};

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

/// Serialises `f64` vectors as shortest round-trip decimal strings.
mod decimal_text {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|t| t.parse::<f64>().map_err(D::Error::custom))
            .collect()
    }
}

/// Per-feature mean and population standard deviation from training rows.
/// Constant features keep a unit scale and standardise to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    #[serde(with = "decimal_text")]
    pub means: Vec<f64>,
    #[serde(with = "decimal_text")]
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(matrix: &FeatureMatrix) -> Self {
        let n = matrix.n_rows() as f64;
        let k = matrix.n_cols();
        let mut means = vec![0.0; k];
        for i in 0..matrix.n_rows() {
            for (m, v) in means.iter_mut().zip(matrix.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; k];
        for i in 0..matrix.n_rows() {
            for ((s, v), m) in var.iter_mut().zip(matrix.row(i)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let scales = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, scales }
    }

    /// Row-major standardized copy of the matrix.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(matrix.n_rows() * matrix.n_cols());
        for i in 0..matrix.n_rows() {
            out.extend(
                matrix
                    .row(i)
                    .iter()
                    .zip(&self.means)
                    .zip(&self.scales)
                    .map(|((v, m), s)| (v - m) / s),
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Baseline,
    External,
}

/// Hyperparameters carried through for an external attentive tabular trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalModelConfig {
    /// Width of the decision prediction layer.
    pub n_d: u32,
    /// Width of the attention embedding.
    pub n_a: u32,
    pub n_steps: u32,
}

impl Default for ExternalModelConfig {
    fn default() -> Self {
        Self {
            n_d: 32,
            n_a: 32,
            n_steps: 5,
        }
    }
}

/// Everything needed to reproduce a fold model's predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHandle {
    pub kind: ModelKind,
    pub fold: usize,
    pub columns: Vec<String>,
    pub standardizer: Standardizer,
    /// Bias first, then one weight per column.
    #[serde(with = "decimal_text")]
    pub params: Vec<f64>,
    pub seed: u64,
    pub predictions_file: Option<PathBuf>,
    pub external: Option<ExternalModelConfig>,
}

impl ClassifierHandle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("handle serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("model manifest: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// A handle whose predictions come from `path`, keyed by row and fold.
    pub fn external(fold: usize, columns: Vec<String>, path: PathBuf, cfg: ExternalModelConfig) -> Self {
        let k = columns.len();
        Self {
            kind: ModelKind::External,
            fold,
            columns,
            standardizer: Standardizer {
                means: vec![0.0; k],
                scales: vec![1.0; k],
            },
            params: Vec::new(),
            seed: 0,
            predictions_file: Some(path),
            external: Some(cfg),
        }
    }
}

/// Fits the baseline on a labeled training matrix.
pub fn fit_baseline(train: &FeatureMatrix, fold: usize, cfg: &LogisticConfig) -> Result<(ClassifierHandle, FitTrace)> {
    let labels = train
        .labels()
        .ok_or_else(|| Error::InvalidInput("training matrix has no labels".into()))?;
    let standardizer = Standardizer::fit(train);
    let x = standardizer.transform(train);
    let design = Design {
        x: &x,
        y: labels,
        n_features: train.n_cols(),
    };
    let (params, trace) = fit_logistic(&design, cfg)?;
    let handle = ClassifierHandle {
        kind: ModelKind::Baseline,
        fold,
        columns: train.columns().to_vec(),
        standardizer,
        params,
        seed: cfg.seed,
        predictions_file: None,
        external: None,
    };
    Ok((handle, trace))
}

/// One line of an external predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPrediction {
    pub session_id: String,
    pub timestamp_ms: i64,
    pub fold: usize,
    pub prob: f64,
}

pub fn read_external_predictions(path: &Path) -> Result<Vec<ExternalPrediction>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: ExternalPrediction = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("{} line {}: {e}", path.display(), n + 1)))?;
        if !(0.0..=1.0).contains(&p.prob) {
            return Err(Error::InvalidInput(format!(
                "{} line {}: probability {} outside [0, 1]",
                path.display(),
                n + 1,
                p.prob
            )));
        }
        out.push(p);
    }
    Ok(out)
}

/// Probabilities for every row of `rows`.
pub fn predict(handle: &ClassifierHandle, rows: &FeatureMatrix) -> Result<Vec<f64>> {
    match handle.kind {
        ModelKind::Baseline => {
            let m = rows.select_columns(&handle.columns)?;
            if handle.params.len() != m.n_cols() + 1 {
                return Err(Error::Config(format!(
                    "model has {} parameters for {} columns",
                    handle.params.len(),
                    m.n_cols()
                )));
            }
            let x = handle.standardizer.transform(&m);
            Ok(x.chunks_exact(m.n_cols().max(1))
                .take(m.n_rows())
                .map(|row| {
                    let z = handle.params[0] + row.iter().zip(&handle.params[1..]).map(|(a, b)| a * b).sum::<f64>();
                    sigmoid(z)
                })
                .collect())
        }
        ModelKind::External => {
            let path = handle
                .predictions_file
                .as_deref()
                .ok_or_else(|| Error::Config("external model without a predictions file".into()))?;
            let preds = read_external_predictions(path)?;
            let table: HashMap<(&str, i64), f64> = preds
                .iter()
                .filter(|p| p.fold == handle.fold)
                .map(|p| ((p.session_id.as_str(), p.timestamp_ms), p.prob))
                .collect();
            rows.keys()
                .iter()
                .map(|k| {
                    table
                        .get(&(&*k.session_id, k.timestamp_ms))
                        .copied()
                        .ok_or_else(|| Error::UnmatchedKey {
                            fold: handle.fold,
                            session_id: k.session_id.to_string(),
                            timestamp_ms: k.timestamp_ms,
                        })
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RowKey;
    use chrono::NaiveDate;
    use std::sync::Arc;

    fn matrix() -> FeatureMatrix {
        let day = NaiveDate::from_ymd_opt(2021, 9, 1).unwrap();
        let keys = (0..4)
            .map(|t| RowKey {
                session_id: Arc::from("s"),
                timestamp_ms: t,
            })
            .collect();
        FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0, 3.0, 1.0, 0.0, 0.5, 2.0, 2.0],
            keys,
            vec![day; 4],
            Some(vec![1, 0, 0, 1]),
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_half() {
        let m = matrix();
        let handle = ClassifierHandle {
            kind: ModelKind::Baseline,
            fold: 1,
            columns: m.columns().to_vec(),
            standardizer: Standardizer::fit(&m),
            params: vec![0.0; 3],
            seed: 0,
            predictions_file: None,
            external: None,
        };
        assert!(predict(&handle, &m).unwrap().iter().all(|&p| p == 0.5));
        let back = ClassifierHandle::from_json(&handle.to_json()).unwrap();
        assert_eq!(back, handle);
    }

    #[test]
    fn external_pass_through_and_missing_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.ndjson");
        let lines: Vec<String> = (0..3)
            .map(|t| format!(r#"{{"session_id":"s","timestamp_ms":{t},"fold":2,"prob":0.{t}5}}"#))
            .collect();
        std::fs::write(&path, lines.join("\n")).unwrap();
        let m = matrix();
        let h = ClassifierHandle::external(2, m.columns().to_vec(), path, ExternalModelConfig::default());
        let first = m.select_rows(&[0, 1, 2]);
        assert_eq!(predict(&h, &first).unwrap(), vec![0.05, 0.15, 0.25]);
        match predict(&h, &m) {
            Err(Error::UnmatchedKey { timestamp_ms, .. }) => assert_eq!(timestamp_ms, 3),
            other => panic!("expected unmatched key, got {other:?}"),
        }
    }
}
