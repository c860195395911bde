use std::path::{Path, PathBuf};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::backtest::BacktestConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::feed::{utc_offset, ScheduleWindow, SessionRule, SynthParams, TickSize};
use crate::labeling::LabelConfig;
use crate::micro::{MicroConfig, WindowSpec};
use crate::model::{ExternalModelConfig, LogisticConfig, ModelKind};
use crate::ta::TaParams;

/// Synthetic source used when no raw file is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub sessions: usize,
    #[serde(flatten)]
    pub params: SynthParams,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            sessions: 20,
            params: SynthParams::default(),
        }
    }
}

/// Flat pipeline configuration. Every field has a default, so an empty file
/// runs the synthetic demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Raw snapshot file (CSV or NDJSON). Absent means synthetic input.
    pub raw_path: Option<PathBuf>,
    pub work_dir: PathBuf,
    pub tick_size: String,
    pub session_gap_minutes: i64,
    pub utc_offset_hours: i32,
    pub session_schedule: Vec<String>,
    pub max_malformed_fraction: f64,

    pub window_minutes: Vec<u32>,
    pub min_volume_filter: u64,

    pub theta: f64,
    pub horizon_snapshots: usize,
    pub vwap_window: usize,
    pub keep_dropped: bool,

    pub n_folds: usize,
    pub gap_groups: usize,
    pub holdout_fraction: f64,

    pub model_kind: ModelKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub external_predictions: Option<PathBuf>,
    pub n_d: u32,
    pub n_a: u32,
    pub n_steps: u32,

    pub gamma: f64,
    pub margin_ratio: f64,
    pub initial_equity: f64,
    pub fee_rate: f64,
    pub slippage_ticks: i64,
    pub decision_interval_minutes: i64,

    pub seed: u64,
    pub ta: TaParams,
    pub synth: SynthSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let label = LabelConfig::default();
        let bt = BacktestConfig::default();
        let lr = LogisticConfig::default();
        let ext = ExternalModelConfig::default();
        Self {
            raw_path: None,
            work_dir: PathBuf::from("work"),
            tick_size: "1".into(),
            session_gap_minutes: 30,
            utc_offset_hours: 8,
            session_schedule: Vec::new(),
            max_malformed_fraction: 0.01,
            window_minutes: crate::micro::DEFAULT_WINDOW_MINUTES.to_vec(),
            min_volume_filter: MicroConfig::default().min_volume_filter,
            theta: label.theta,
            horizon_snapshots: label.horizon_snapshots,
            vwap_window: label.window,
            keep_dropped: false,
            n_folds: 5,
            gap_groups: 1,
            holdout_fraction: 0.2,
            model_kind: ModelKind::Baseline,
            learning_rate: lr.learning_rate,
            epochs: lr.epochs,
            l2: lr.l2,
            external_predictions: None,
            n_d: ext.n_d,
            n_a: ext.n_a,
            n_steps: ext.n_steps,
            gamma: bt.gamma,
            margin_ratio: bt.margin_ratio,
            initial_equity: bt.initial_equity,
            fee_rate: bt.fee_rate,
            slippage_ticks: bt.slippage_ticks,
            decision_interval_minutes: 15,
            seed: 42,
            ta: TaParams::default(),
            synth: SynthSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.tick()?;
        self.session_rule()?;
        self.micro()?;
        self.ta.validate().map_err(Error::Config)?;
        if !(0.0..=1.0).contains(&self.max_malformed_fraction) {
            return bad(format!("max_malformed_fraction {} outside [0, 1]", self.max_malformed_fraction));
        }
        if !(self.theta >= 0.0) || self.horizon_snapshots == 0 || self.vwap_window == 0 {
            return bad("label theta must be >= 0 and horizon/window positive".into());
        }
        if self.n_folds < 3 {
            return bad(format!("n_folds {} below 3; the trimmed mean needs three models", self.n_folds));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad(format!("holdout_fraction {} outside (0, 1)", self.holdout_fraction));
        }
        if !(self.learning_rate > 0.0) || self.epochs == 0 || !(self.l2 >= 0.0) {
            return bad("learning_rate and epochs must be positive, l2 non-negative".into());
        }
        if self.model_kind == ModelKind::External && self.external_predictions.is_none() {
            return bad("model_kind = \"external\" needs external_predictions".into());
        }
        if self.decision_interval_minutes <= 0 {
            return bad("decision_interval_minutes must be positive".into());
        }
        if self.raw_path.is_none() && self.synth.sessions == 0 {
            return bad("synth.sessions must be positive without raw_path".into());
        }
        self.backtest().validate()
    }

    pub fn tick(&self) -> Result<TickSize> {
        let d: Decimal = self
            .tick_size
            .parse()
            .map_err(|e| Error::Config(format!("tick_size `{}`: {e}", self.tick_size)))?;
        TickSize::new(d)
    }

    pub fn session_rule(&self) -> Result<SessionRule> {
        if self.session_gap_minutes <= 0 {
            return Err(Error::Config("session_gap_minutes must be positive".into()));
        }
        let schedule = self
            .session_schedule
            .iter()
            .map(|s| s.parse::<ScheduleWindow>().map_err(|e| Error::Config(format!("schedule `{s}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(SessionRule {
            gap_ms: self.session_gap_minutes * 60_000,
            schedule,
            utc_offset: utc_offset(self.utc_offset_hours)?,
        })
    }

    pub fn micro(&self) -> Result<MicroConfig> {
        if self.window_minutes.is_empty() {
            return Err(Error::Config("window_minutes is empty".into()));
        }
        Ok(MicroConfig {
            windows: self
                .window_minutes
                .iter()
                .map(|&m| WindowSpec::new(m))
                .collect::<Result<_>>()?,
            min_volume_filter: self.min_volume_filter,
        })
    }

    pub fn features(&self) -> Result<FeatureConfig> {
        Ok(FeatureConfig {
            ta: self.ta.clone(),
            micro: self.micro()?,
        })
    }

    pub fn labels(&self) -> LabelConfig {
        LabelConfig {
            horizon_snapshots: self.horizon_snapshots,
            window: self.vwap_window,
            theta: self.theta,
        }
    }

    pub fn logistic(&self) -> LogisticConfig {
        LogisticConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2: self.l2,
            seed: self.seed,
        }
    }

    pub fn external_model(&self) -> ExternalModelConfig {
        ExternalModelConfig {
            n_d: self.n_d,
            n_a: self.n_a,
            n_steps: self.n_steps,
        }
    }

    pub fn backtest(&self) -> BacktestConfig {
        BacktestConfig {
            gamma: self.gamma,
            margin_ratio: self.margin_ratio,
            initial_equity: self.initial_equity,
            fee_rate: self.fee_rate,
            slippage_ticks: self.slippage_ticks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = PipelineConfig {
            session_schedule: vec!["09:00-11:30".into(), "21:00-02:30".into()],
            raw_path: Some("raw.csv".into()),
            ..Default::default()
        };
        cfg.synth.params.drift = 0.01;
        cfg.ta.macd_fast = 10;
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(PipelineConfig::from_toml("gamma = 0.6"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::from_toml("tick_size = \"abc\""), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::from_toml("unknown = 1"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::from_toml("n_folds = 2"), Err(Error::Config(_))));
    }
}
