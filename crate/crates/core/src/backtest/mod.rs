//! Threshold strategy over ensemble probabilities on a 15-minute grid with
//! margin-levered, full-equity positions.
//!
//! Prices stay in integer ticks so the leverage arithmetic sees exact price
//! differences.

mod metrics;

pub use metrics::{annualized_sharpe, daily_returns, max_drawdown, performance_metrics, PerformanceMetrics};

use std::fmt;
use std::io::Write;

use chrono::{FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feed::{Session, TickSize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Position {
    Flat,
    Long,
    Short,
}

impl Position {
    fn direction(self) -> f64 {
        match self {
            Position::Flat => 0.0,
            Position::Long => 1.0,
            Position::Short => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Position::Flat => "flat",
            Position::Long => "long",
            Position::Short => "short",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    OpenLong,
    OpenShort,
    Close,
    Hold,
}

/// One step of the threshold machine. Opens need confidence beyond `gamma`
/// from one half; closes need only a reversal past one half.
pub fn decision_step(position: Position, y_hat: f64, gamma: f64) -> (Position, Action) {
    match position {
        Position::Flat if y_hat >= 0.5 + gamma => (Position::Long, Action::OpenLong),
        Position::Flat if y_hat <= 0.5 - gamma => (Position::Short, Action::OpenShort),
        Position::Long if y_hat <= 0.5 => (Position::Flat, Action::Close),
        Position::Short if y_hat >= 0.5 => (Position::Flat, Action::Close),
        p => (p, Action::Hold),
    }
}

/// Equity after holding a full-equity position from `entry` to `exit` ticks.
pub fn leveraged_equity(equity: f64, position: Position, entry: i64, exit: i64, margin_ratio: f64) -> f64 {
    let move_ = (exit - entry) as f64 / (entry as f64 * margin_ratio);
    equity * (1.0 + position.direction() * move_)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    pub gamma: f64,
    pub margin_ratio: f64,
    pub initial_equity: f64,
    /// Fraction of notional charged per fill.
    pub fee_rate: f64,
    /// Adverse ticks applied to every fill.
    pub slippage_ticks: i64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            margin_ratio: 0.10,
            initial_equity: 1_000_000.0,
            fee_rate: 0.0,
            slippage_ticks: 0,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} must lie in [0, 0.5)", self.gamma)));
        }
        if !(self.margin_ratio > 0.0 && self.margin_ratio <= 1.0) {
            return Err(Error::Config(format!("margin ratio {} must lie in (0, 1]", self.margin_ratio)));
        }
        if !(self.initial_equity > 0.0 && self.initial_equity.is_finite()) {
            return Err(Error::Config("initial equity must be positive".into()));
        }
        if !(self.fee_rate >= 0.0 && self.fee_rate < 1.0) || self.slippage_ticks < 0 {
            return Err(Error::Config("fees and slippage must be non-negative".into()));
        }
        Ok(())
    }
}

/// Ensemble probability and last traded price at one decision time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionPoint {
    pub timestamp_ms: i64,
    pub trading_day: NaiveDate,
    pub prob: f64,
    pub price: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeAction {
    Open,
    Close,
    /// Closed at the last decision point of the run.
    ForceClose,
    Liquidation,
}

impl TradeAction {
    pub fn as_str(self) -> &'static str {
        match self {
            TradeAction::Open => "open",
            TradeAction::Close => "close",
            TradeAction::ForceClose => "force_close",
            TradeAction::Liquidation => "liquidation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRecord {
    pub timestamp_ms: i64,
    pub action: TradeAction,
    pub side: Position,
    pub price: i64,
    pub equity_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquityPoint {
    pub timestamp_ms: i64,
    pub trading_day: NaiveDate,
    /// Realised equity, or marked equity while a position is open.
    pub equity: f64,
    pub position: Position,
    pub mark_price: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub curve: Vec<EquityPoint>,
    pub trades: Vec<TradeRecord>,
    pub liquidated_at: Option<i64>,
}

pub fn run_backtest(points: &[DecisionPoint], cfg: &BacktestConfig) -> Result<BacktestResult> {
    cfg.validate()?;
    if let Some(w) = points.windows(2).find(|w| w[1].timestamp_ms <= w[0].timestamp_ms) {
        return Err(Error::InvalidInput(format!("decision times not increasing at {}", w[1].timestamp_ms)));
    }
    if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(&p.prob) || p.price <= 0) {
        return Err(Error::InvalidInput(format!("bad decision input at {}", p.timestamp_ms)));
    }
    let fee = |equity: f64| equity * (1.0 - cfg.fee_rate / cfg.margin_ratio);
    let slip = |price: i64, side: Position, opening: bool| {
        // Buying pays up, selling gives up.
        let buying = (side == Position::Long) == opening;
        if buying {
            price + cfg.slippage_ticks
        } else {
            price - cfg.slippage_ticks
        }
    };

    let mut position = Position::Flat;
    let mut entry = 0i64;
    let mut equity = cfg.initial_equity;
    let mut curve = Vec::with_capacity(points.len());
    let mut trades = Vec::new();
    let mut liquidated_at = None;
    for (k, pt) in points.iter().enumerate() {
        let last = k + 1 == points.len();
        let marked = if position == Position::Flat {
            equity
        } else {
            leveraged_equity(equity, position, entry, pt.price, cfg.margin_ratio)
        };
        if marked <= 0.0 {
            equity = 0.0;
            trades.push(TradeRecord {
                timestamp_ms: pt.timestamp_ms,
                action: TradeAction::Liquidation,
                side: position,
                price: pt.price,
                equity_after: 0.0,
            });
            curve.push(EquityPoint {
                timestamp_ms: pt.timestamp_ms,
                trading_day: pt.trading_day,
                equity,
                position: Position::Flat,
                mark_price: pt.price,
            });
            liquidated_at = Some(pt.timestamp_ms);
            break;
        }
        let (next, action) = decision_step(position, pt.prob, cfg.gamma);
        match action {
            Action::Close => {
                let fill = slip(pt.price, position, false);
                equity = fee(leveraged_equity(equity, position, entry, fill, cfg.margin_ratio)).max(0.0);
                trades.push(TradeRecord {
                    timestamp_ms: pt.timestamp_ms,
                    action: TradeAction::Close,
                    side: position,
                    price: fill,
                    equity_after: equity,
                });
                position = next;
            }
            Action::OpenLong | Action::OpenShort if !last => {
                entry = slip(pt.price, next, true);
                equity = fee(equity);
                position = next;
                trades.push(TradeRecord {
                    timestamp_ms: pt.timestamp_ms,
                    action: TradeAction::Open,
                    side: position,
                    price: entry,
                    equity_after: equity,
                });
            }
            Action::Hold if last && position != Position::Flat => {
                let fill = slip(pt.price, position, false);
                equity = fee(leveraged_equity(equity, position, entry, fill, cfg.margin_ratio)).max(0.0);
                trades.push(TradeRecord {
                    timestamp_ms: pt.timestamp_ms,
                    action: TradeAction::ForceClose,
                    side: position,
                    price: fill,
                    equity_after: equity,
                });
                position = Position::Flat;
            }
            _ => {}
        }
        let shown = if position == Position::Flat {
            equity
        } else {
            leveraged_equity(equity, position, entry, pt.price, cfg.margin_ratio)
        };
        curve.push(EquityPoint {
            timestamp_ms: pt.timestamp_ms,
            trading_day: pt.trading_day,
            equity: shown,
            position,
            mark_price: pt.price,
        });
    }
    Ok(BacktestResult {
        curve,
        trades,
        liquidated_at,
    })
}

/// Clock-aligned decision marks inside a session. Each mark takes the last
/// traded price and the latest prediction at or before it; marks with no
/// prediction yet are skipped. `predictions` must be sorted by time.
pub fn decision_grid(
    session: &Session,
    predictions: &[(i64, f64)],
    interval_ms: i64,
    offset: FixedOffset,
) -> Vec<DecisionPoint> {
    assert!(interval_ms > 0);
    let Some(first) = session.snapshots.first() else {
        return Vec::new();
    };
    let shift = i64::from(offset.local_minus_utc()) * 1000;
    let local_start = first.timestamp_ms + shift;
    let mut mark = local_start.div_euclid(interval_ms) * interval_ms - shift;
    if mark < first.timestamp_ms {
        mark += interval_ms;
    }
    let end = session.end_ms();
    let lo = predictions.partition_point(|p| p.0 < first.timestamp_ms);
    let (mut si, mut pi) = (0usize, lo);
    let mut out = Vec::new();
    while mark <= end {
        while si + 1 < session.snapshots.len() && session.snapshots[si + 1].timestamp_ms <= mark {
            si += 1;
        }
        while pi < predictions.len() && predictions[pi].0 <= mark {
            pi += 1;
        }
        if pi > lo {
            out.push(DecisionPoint {
                timestamp_ms: mark,
                trading_day: session.trading_day,
                prob: predictions[pi - 1].1,
                price: session.snapshots[si].price,
            });
        }
        mark += interval_ms;
    }
    out
}

pub const TRADE_LOG_HEADER: &str = "timestamp_ms,action,side,price,equity_after";
pub const EQUITY_HEADER: &str = "timestamp_ms,equity,position,mark_price";

pub fn write_trade_log<W: Write>(mut out: W, trades: &[TradeRecord], tick: TickSize) -> Result<()> {
    let io = |e| Error::io("<trades>", e);
    writeln!(out, "{TRADE_LOG_HEADER}").map_err(io)?;
    for t in trades {
        writeln!(
            out,
            "{},{},{},{},{}",
            t.timestamp_ms,
            t.action.as_str(),
            t.side,
            tick.format_ticks(t.price),
            t.equity_after
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn write_equity_curve<W: Write>(mut out: W, curve: &[EquityPoint], tick: TickSize) -> Result<()> {
    let io = |e| Error::io("<equity>", e);
    writeln!(out, "{EQUITY_HEADER}").map_err(io)?;
    for p in curve {
        writeln!(
            out,
            "{},{},{},{}",
            p.timestamp_ms,
            p.equity,
            p.position,
            tick.format_ticks(p.mark_price)
        )
        .map_err(io)?;
    }
    Ok(())
}
