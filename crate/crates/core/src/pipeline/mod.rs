//! Resumable file-based pipeline. Each stage reads its upstream artifacts
//! from the work directory, writes its own, and records a manifest holding
//! content digests of both plus a digest of the settings it ran with.
//! Downstream stages refuse to run on stale or tampered upstream output.

pub mod artifacts;
mod config;
mod manifest;
mod report;
mod stages;

pub use config::{PipelineConfig, SynthSection};
pub use manifest::{file_digest, sha256_hex, Manifest};
pub use report::render_svg;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde_json::json;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Preprocess,
    Features,
    Label,
    Dataset,
    Split,
    Train,
    Predict,
    Ensemble,
    Backtest,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Preprocess,
        Stage::Features,
        Stage::Label,
        Stage::Dataset,
        Stage::Split,
        Stage::Train,
        Stage::Predict,
        Stage::Ensemble,
        Stage::Backtest,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Features => "features",
            Stage::Label => "label",
            Stage::Dataset => "dataset",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Ensemble => "ensemble",
            Stage::Backtest => "backtest",
            Stage::Report => "report",
        }
    }

    /// Stages whose artifacts this stage reads.
    pub fn upstream(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Ingest => &[],
            Preprocess => &[Ingest],
            Features => &[Preprocess],
            Label => &[Preprocess],
            Dataset => &[Features, Label],
            Split => &[Dataset],
            Train => &[Dataset, Split],
            Predict => &[Features, Split, Train],
            Ensemble => &[Predict, Dataset],
            Backtest => &[Ingest, Ensemble],
            Report => &[Ingest, Label, Dataset, Train, Ensemble, Backtest],
        }
    }

    pub fn manifest_file(self) -> String {
        format!("{}.manifest", self.as_str())
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .iter()
            .copied()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Settings that influence a stage's own output.
fn own_settings(stage: Stage, cfg: &PipelineConfig) -> serde_json::Value {
    match stage {
        Stage::Ingest => json!({
            "raw_path": cfg.raw_path,
            "synth": if cfg.raw_path.is_none() { Some(&cfg.synth) } else { None },
            "seed": if cfg.raw_path.is_none() { Some(cfg.seed) } else { None },
            "tick_size": cfg.tick_size,
            "session_gap_minutes": cfg.session_gap_minutes,
            "utc_offset_hours": cfg.utc_offset_hours,
            "session_schedule": cfg.session_schedule,
            "max_malformed_fraction": cfg.max_malformed_fraction,
        }),
        Stage::Features => json!({
            "ta": cfg.ta,
            "window_minutes": cfg.window_minutes,
            "min_volume_filter": cfg.min_volume_filter,
        }),
        Stage::Label => json!({
            "theta": cfg.theta,
            "horizon_snapshots": cfg.horizon_snapshots,
            "vwap_window": cfg.vwap_window,
            "keep_dropped": cfg.keep_dropped,
        }),
        Stage::Split => json!({
            "n_folds": cfg.n_folds,
            "gap_groups": cfg.gap_groups,
            "holdout_fraction": cfg.holdout_fraction,
        }),
        Stage::Train => json!({
            "model_kind": cfg.model_kind,
            "learning_rate": cfg.learning_rate,
            "epochs": cfg.epochs,
            "l2": cfg.l2,
            "seed": cfg.seed,
            "external_predictions": cfg.external_predictions,
            "n_d": cfg.n_d,
            "n_a": cfg.n_a,
            "n_steps": cfg.n_steps,
        }),
        Stage::Backtest => json!({
            "gamma": cfg.gamma,
            "margin_ratio": cfg.margin_ratio,
            "initial_equity": cfg.initial_equity,
            "fee_rate": cfg.fee_rate,
            "slippage_ticks": cfg.slippage_ticks,
            "decision_interval_minutes": cfg.decision_interval_minutes,
        }),
        Stage::Preprocess | Stage::Dataset | Stage::Predict | Stage::Ensemble | Stage::Report => json!({}),
    }
}

/// Digest of a stage's settings chained with those of everything upstream.
pub fn config_digest(stage: Stage, cfg: &PipelineConfig) -> String {
    let upstream: Vec<String> = stage.upstream().iter().map(|&s| config_digest(s, cfg)).collect();
    let doc = json!({
        "stage": stage.as_str(),
        "settings": own_settings(stage, cfg),
        "upstream": upstream,
    });
    sha256_hex(doc.to_string().as_bytes())
}

/// A work directory bound to one configuration.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub cfg: PipelineConfig,
    pub dir: PathBuf,
}

impl Workspace {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let dir = cfg.work_dir.clone();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { cfg, dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn manifest(&self, stage: Stage) -> Result<Manifest> {
        let path = self.path(&stage.manifest_file());
        if !path.exists() {
            return Err(Error::MissingArtifact {
                stage: stage.to_string(),
                path,
            });
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Manifest::parse(&text)
    }

    /// Confirms a finished stage's artifacts are present, unmodified and
    /// produced under the current settings.
    pub fn verify(&self, stage: Stage) -> Result<Manifest> {
        let m = self.manifest(stage)?;
        let expected = config_digest(stage, &self.cfg);
        if m.config_digest != expected {
            return Err(Error::DigestMismatch {
                stage: stage.to_string(),
                detail: "settings changed since the stage ran; rerun it or pass --from-raw".into(),
            });
        }
        for (name, digest) in &m.outputs {
            let path = self.path(name);
            if !path.exists() {
                return Err(Error::MissingArtifact {
                    stage: stage.to_string(),
                    path,
                });
            }
            if &file_digest(&path)? != digest {
                return Err(Error::DigestMismatch {
                    stage: stage.to_string(),
                    detail: format!("{name} was modified after the stage ran"),
                });
            }
        }
        Ok(m)
    }

    /// Runs one stage. With `from_raw`, every upstream stage is rerun first;
    /// otherwise upstream manifests must verify.
    pub fn run(&self, stage: Stage, from_raw: bool) -> Result<Manifest> {
        if from_raw {
            for s in upstream_closure(stage) {
                self.execute(s)?;
            }
        } else {
            for &s in stage.upstream() {
                self.verify(s)?;
            }
        }
        self.execute(stage)
    }

    /// Runs every stage in order.
    pub fn run_all(&self) -> Result<Vec<Manifest>> {
        Stage::ALL.iter().map(|&s| self.execute(s)).collect()
    }

    fn execute(&self, stage: Stage) -> Result<Manifest> {
        let manifest_path = self.path(&stage.manifest_file());
        if manifest_path.exists() {
            std::fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        }
        info!("stage {stage}: start");
        let outputs = stages::run(self, stage)?;
        let mut inputs = Vec::new();
        for &up in stage.upstream() {
            let m = self.manifest(up)?;
            inputs.extend(m.outputs);
        }
        if stage == Stage::Ingest {
            if let Some(raw) = &self.cfg.raw_path {
                inputs.push((raw.display().to_string(), file_digest(raw)?));
            }
        }
        let mut out = Vec::with_capacity(outputs.len());
        for name in outputs {
            let digest = file_digest(&self.path(&name))?;
            out.push((name, digest));
        }
        let m = Manifest {
            stage: stage.to_string(),
            config_digest: config_digest(stage, &self.cfg),
            inputs,
            outputs: out,
        };
        std::fs::write(&manifest_path, m.to_text()).map_err(|e| Error::io(&manifest_path, e))?;
        info!("stage {stage}: done");
        Ok(m)
    }
}

/// All stages `stage` depends on, transitively, in run order.
pub fn upstream_closure(stage: Stage) -> Vec<Stage> {
    fn visit(s: Stage, seen: &mut Vec<Stage>) {
        for &u in s.upstream() {
            visit(u, seen);
            if !seen.contains(&u) {
                seen.push(u);
            }
        }
    }
    let mut seen = Vec::new();
    visit(stage, &mut seen);
    seen.sort();
    seen
}

/// Exit status for a pipeline error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::DigestMismatch { .. } => 2,
        Error::DataIntegrity(_)
        | Error::TooManyMalformed { .. }
        | Error::MissingColumn(_)
        | Error::Csv { .. }
        | Error::EmptyMatrix
        | Error::TooFewGroups { .. }
        | Error::SingleClass(_)
        | Error::UnmatchedKey { .. }
        | Error::MissingFeature(_)
        | Error::ColumnCollision(_) => 3,
        Error::MissingArtifact { .. } => 4,
        _ => 1,
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
