//! Raw 500 ms snapshot records: types, validation, session grouping,
//! CSV/NDJSON interchange and a deterministic synthetic generator.
//!
//! Prices are integer tick counts; [`TickSize`] converts to and from the
//! decimal text used on the wire.

mod io;
mod session;
mod synth;

pub use io::{
    parse_snapshot_file, parse_snapshot_reader, write_snapshot_csv, ColumnMap, InputFormat,
    ParseReport, SNAPSHOT_HEADER,
};
pub use session::{group_sessions, ScheduleWindow, SessionRule};
pub use synth::{generate_synthetic_feed, SynthParams, SyntheticFeed, SyntheticSession};

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, NaiveDate, TimeZone};
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOOK_DEPTH: usize = 5;

/// Snapshots per minute at the 500 ms feed cadence.
pub const SNAPSHOTS_PER_MINUTE: usize = 120;

/// Feed cadence in milliseconds.
pub const SNAPSHOT_INTERVAL_MS: i64 = 500;

/// Minimum price increment. Prices are stored as integer multiples of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TickSize(Decimal);

impl TickSize {
    pub fn new(value: Decimal) -> Result<Self> {
        if value <= Decimal::ZERO {
            return Err(Error::Config(format!("tick size must be positive, got {value}")));
        }
        Ok(Self(value.normalize()))
    }

    pub fn value(self) -> Decimal {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts decimal price text to ticks. Off-grid prices are rejected.
    pub fn parse_ticks(self, text: &str) -> std::result::Result<i64, String> {
        let price = Decimal::from_str(text.trim()).map_err(|e| format!("bad price `{text}`: {e}"))?;
        let ticks = price
            .checked_div(self.0)
            .ok_or_else(|| format!("price `{text}` overflows"))?;
        if !ticks.fract().is_zero() {
            return Err(format!("price `{text}` is not a multiple of tick {}", self.0));
        }
        ticks
            .to_i64()
            .ok_or_else(|| format!("price `{text}` out of range"))
    }

    pub fn format_ticks(self, ticks: i64) -> String {
        (Decimal::from(ticks) * self.0).normalize().to_string()
    }

    pub fn to_price(self, ticks: f64) -> f64 {
        ticks * self.as_f64()
    }
}

impl Default for TickSize {
    fn default() -> Self {
        Self(Decimal::ONE)
    }
}

impl fmt::Display for TickSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One quoted book level. Price in ticks, size in contracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub price: i64,
    pub size: u64,
}

/// One 500 ms feed frame. The instrument lives on the owning [`Session`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub timestamp_ms: i64,
    /// Last traded price in ticks.
    pub price: i64,
    /// Session-cumulative traded contracts.
    pub volume: u64,
    pub open_interest: u64,
    pub bids: [Option<Level>; BOOK_DEPTH],
    pub asks: [Option<Level>; BOOK_DEPTH],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BookViolation {
    Crossed,
    BidLadder,
    AskLadder,
}

impl fmt::Display for BookViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BookViolation::Crossed => "crossed book (bid1 > ask1)",
            BookViolation::BidLadder => "bid levels not strictly decreasing",
            BookViolation::AskLadder => "ask levels not strictly increasing",
        })
    }
}

impl Snapshot {
    pub fn validate(&self) -> std::result::Result<(), BookViolation> {
        if let (Some(bid), Some(ask)) = (self.bids[0], self.asks[0]) {
            if bid.price > ask.price {
                return Err(BookViolation::Crossed);
            }
        }
        if !strictly_monotone(&self.bids, |prev, next| next < prev) {
            return Err(BookViolation::BidLadder);
        }
        if !strictly_monotone(&self.asks, |prev, next| next > prev) {
            return Err(BookViolation::AskLadder);
        }
        Ok(())
    }

    pub fn has_absent_level(&self) -> bool {
        self.bids.iter().chain(self.asks.iter()).any(Option::is_none)
    }
}

fn strictly_monotone(levels: &[Option<Level>], ordered: impl Fn(i64, i64) -> bool) -> bool {
    let mut prev: Option<i64> = None;
    for level in levels.iter().flatten() {
        if let Some(p) = prev {
            if !ordered(p, level.price) {
                return false;
            }
        }
        prev = Some(level.price);
    }
    true
}

/// A contiguous run of snapshots with no gap or schedule break.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    pub instrument: String,
    /// Exchange-local calendar date of the first snapshot. Used as the CV group.
    pub trading_day: NaiveDate,
    pub snapshots: Vec<Snapshot>,
}

impl Session {
    pub fn new(instrument: &str, snapshots: Vec<Snapshot>, utc_offset: FixedOffset) -> Self {
        let first = snapshots.first().map(|s| s.timestamp_ms).unwrap_or(0);
        let local = local_time(first, utc_offset);
        Self {
            id: format!("{}-{}", instrument, local.format("%Y%m%dT%H%M%S")),
            instrument: instrument.to_string(),
            trading_day: local.date_naive(),
            snapshots,
        }
    }

    pub fn start_ms(&self) -> i64 {
        self.snapshots.first().map_or(0, |s| s.timestamp_ms)
    }

    pub fn end_ms(&self) -> i64 {
        self.snapshots.last().map_or(0, |s| s.timestamp_ms)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

pub fn utc_offset(hours: i32) -> Result<FixedOffset> {
    FixedOffset::east_opt(hours * 3600)
        .ok_or_else(|| Error::Config(format!("utc offset {hours}h out of range")))
}

pub fn local_time(timestamp_ms: i64, offset: FixedOffset) -> DateTime<FixedOffset> {
    offset
        .timestamp_millis_opt(timestamp_ms)
        .single()
        .unwrap_or_else(|| offset.timestamp_millis_opt(0).unwrap())
}
