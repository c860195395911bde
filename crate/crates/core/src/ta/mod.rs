//! Technical indicators over 1-minute bars, mapped back onto snapshots.
//!
//! Indicators follow the usual textbook recurrences. EMAs are seeded with the
//! simple mean of their first window. Every column starts with a run of
//! missing values while its window warms up.

pub mod rolling;
mod trend;
mod volatility;
mod volume;

pub use trend::{compute_momentum, compute_trend, rsi};
pub use volatility::compute_volatility_indicators;
pub use volume::compute_volume_indicators;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::column::{Column, MISSING};
use crate::feed::TickSize;
use crate::preprocess::OhlcvBar;
use crate::quality::Quality;

/// A bar in price units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarInput {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl BarInput {
    pub fn from_bar(bar: &OhlcvBar, tick: TickSize) -> Self {
        let t = tick.as_f64();
        Self {
            open: bar.open as f64 * t,
            high: bar.high as f64 * t,
            low: bar.low as f64 * t,
            close: bar.close as f64 * t,
            volume: bar.volume as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaParams {
    pub cmf_window: usize,
    pub force_index_window: usize,
    pub eom_window: usize,
    pub vpt_window: usize,
    pub bollinger_window: usize,
    pub bollinger_dev: f64,
    pub keltner_window: usize,
    pub donchian_window: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub macd_signal: usize,
    pub sma_fast: usize,
    pub sma_slow: usize,
    pub rsi_window: usize,
    pub stoch_window: usize,
    pub stoch_k: usize,
    pub stoch_d: usize,
}

impl Default for TaParams {
    fn default() -> Self {
        Self {
            cmf_window: 20,
            force_index_window: 13,
            eom_window: 14,
            vpt_window: 14,
            bollinger_window: 20,
            bollinger_dev: 2.0,
            keltner_window: 10,
            donchian_window: 20,
            macd_fast: 12,
            macd_slow: 26,
            macd_signal: 9,
            sma_fast: 16,
            sma_slow: 32,
            rsi_window: 14,
            stoch_window: 14,
            stoch_k: 3,
            stoch_d: 3,
        }
    }
}

impl TaParams {
    pub fn validate(&self) -> Result<(), String> {
        let windows = [
            self.cmf_window,
            self.force_index_window,
            self.eom_window,
            self.vpt_window,
            self.bollinger_window,
            self.keltner_window,
            self.donchian_window,
            self.macd_fast,
            self.macd_slow,
            self.macd_signal,
            self.sma_fast,
            self.sma_slow,
            self.rsi_window,
            self.stoch_window,
            self.stoch_k,
            self.stoch_d,
        ];
        if windows.contains(&0) {
            return Err("indicator windows must be positive".into());
        }
        if !(self.bollinger_dev.is_finite() && self.bollinger_dev > 0.0) {
            return Err("bollinger_dev must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Volume,
    Volatility,
    Trend,
    Momentum,
    Spread,
    Imbalance,
    SnapshotType,
    OrderFlow,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Registry entry: column name, family and the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub name: String,
    pub family: Family,
    pub params: Vec<(String, String)>,
}

impl IndicatorSpec {
    pub fn new(name: impl Into<String>, family: Family, params: &[(&str, String)]) -> Self {
        Self {
            name: name.into(),
            family,
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }
}

/// Indicator specs in the column order produced by [`compute_indicators`].
pub fn indicator_specs(p: &TaParams) -> Vec<IndicatorSpec> {
    use Family::*;
    let w = |v: usize| v.to_string();
    let mut specs = vec![
        IndicatorSpec::new("adi", Volume, &[]),
        IndicatorSpec::new("obv", Volume, &[]),
        IndicatorSpec::new("cmf", Volume, &[("window", w(p.cmf_window))]),
        IndicatorSpec::new("force_index", Volume, &[("window", w(p.force_index_window))]),
        IndicatorSpec::new("eom", Volume, &[("window", w(p.eom_window))]),
        IndicatorSpec::new("vpt", Volume, &[("window", w(p.vpt_window))]),
    ];
    let bands = ["hband", "mband", "lband", "wband", "pband"];
    let bb = [("window", w(p.bollinger_window)), ("window_dev", p.bollinger_dev.to_string())];
    specs.extend(bands.iter().map(|b| IndicatorSpec::new(format!("bb_{b}"), Volatility, &bb)));
    let kc = [("window", w(p.keltner_window))];
    specs.extend(
        ["hband", "cband", "lband", "wband", "pband"]
            .iter()
            .map(|b| IndicatorSpec::new(format!("kc_{b}"), Volatility, &kc)),
    );
    let dc = [("window", w(p.donchian_window))];
    specs.extend(bands.iter().map(|b| IndicatorSpec::new(format!("dc_{b}"), Volatility, &dc)));
    let macd = [
        ("window_slow", w(p.macd_slow)),
        ("window_fast", w(p.macd_fast)),
        ("window_sign", w(p.macd_signal)),
    ];
    specs.extend(["macd", "macd_signal", "macd_diff"].iter().map(|n| IndicatorSpec::new(*n, Trend, &macd)));
    specs.push(IndicatorSpec::new("sma_fast", Trend, &[("window", w(p.sma_fast))]));
    specs.push(IndicatorSpec::new("sma_slow", Trend, &[("window", w(p.sma_slow))]));
    let stoch = [
        ("window", w(p.stoch_window)),
        ("rsi_window", w(p.rsi_window)),
        ("smooth1", w(p.stoch_k)),
        ("smooth2", w(p.stoch_d)),
    ];
    specs.extend(
        ["stochrsi", "stochrsi_k", "stochrsi_d"]
            .iter()
            .map(|n| IndicatorSpec::new(*n, Momentum, &stoch)),
    );
    specs
}

/// Indicator columns aligned to bars, plus per-bar degenerate-value flags.
#[derive(Debug, Clone)]
pub struct BarSeriesFrame {
    pub columns: Vec<Column>,
    pub flags: Vec<Quality>,
}

pub fn compute_indicators(bars: &[BarInput], p: &TaParams) -> BarSeriesFrame {
    let mut flags = vec![Quality::empty(); bars.len()];
    let mut columns = compute_volume_indicators(bars, p, &mut flags);
    columns.extend(compute_volatility_indicators(bars, p, &mut flags));
    columns.extend(compute_trend(bars, p));
    columns.extend(compute_momentum(bars, p, &mut flags));
    BarSeriesFrame { columns, flags }
}

/// Per-snapshot view of bar indicators.
#[derive(Debug, Clone)]
pub struct AlignedColumns {
    pub columns: Vec<Column>,
    pub flags: Vec<Quality>,
    /// Index of the bar feeding each snapshot, if any.
    pub source_bar: Vec<Option<usize>>,
}

/// Snapshot `i` sees the most recent bar that finished strictly before it,
/// so a bar's own last snapshot never sees that bar.
pub fn align_to_snapshots(frame: &BarSeriesFrame, bars: &[OhlcvBar], n_snapshots: usize) -> AlignedColumns {
    let mut source_bar = Vec::with_capacity(n_snapshots);
    let mut next = 0usize;
    let mut current: Option<usize> = None;
    for i in 0..n_snapshots {
        while next < bars.len() && !bars[next].short && bars[next].last_index() < i {
            current = Some(next);
            next += 1;
        }
        source_bar.push(current);
    }
    let columns = frame
        .columns
        .iter()
        .map(|c| {
            Column::new(
                c.name.clone(),
                source_bar.iter().map(|b| b.map_or(MISSING, |b| c.values[b])).collect(),
            )
        })
        .collect();
    let flags = source_bar
        .iter()
        .map(|b| b.map_or(Quality::empty(), |b| frame.flags[b]))
        .collect();
    AlignedColumns {
        columns,
        flags,
        source_bar,
    }
}
