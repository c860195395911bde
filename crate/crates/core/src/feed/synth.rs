//! Deterministic synthetic snapshot feed.
//!
//! Price follows a bounded random walk on the tick grid. Each frame draws a
//! number of opening and closing contracts; cumulative volume and open
//! interest are built from those draws, so the open/close decomposition of
//! every frame after a session's first is recoverable exactly. A slowly
//! mean-reverting latent regime tilts both the up/down move probability and
//! the bid/ask size balance, which gives book features genuine (weak)
//! predictive content.

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use log::warn;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{utc_offset, Level, Session, Snapshot, BOOK_DEPTH, SNAPSHOT_INTERVAL_MS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub instrument: String,
    pub start_date: NaiveDate,
    /// Local wall-clock start of every session, minutes after midnight.
    pub session_start_minute: u32,
    pub utc_offset_hours: i32,
    /// Snapshots per session (one session per calendar day).
    pub session_len: usize,
    pub initial_price: i64,
    /// The walk is confined to `initial_price ± price_band` ticks.
    pub price_band: i64,
    /// Probability that the last price moves one tick in a frame.
    pub move_prob: f64,
    /// Added to the 0.5 up-move probability; planted trend.
    pub drift: f64,
    /// Strength of the latent regime's influence, in [0, 1].
    pub regime_strength: f64,
    /// Mean contracts traded per frame.
    pub arrival_rate: f64,
    pub initial_open_interest: u64,
    /// Per-frame probability of dropping the deepest book level(s).
    pub absent_level_prob: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            instrument: "ag".to_string(),
            start_date: NaiveDate::from_ymd_opt(2021, 9, 1).unwrap(),
            session_start_minute: 9 * 60,
            utc_offset_hours: 8,
            session_len: 10_000,
            initial_price: 5_000,
            price_band: 1_500,
            move_prob: 0.1,
            drift: 0.0,
            regime_strength: 0.3,
            arrival_rate: 6.0,
            initial_open_interest: 300_000,
            absent_level_prob: 0.0,
        }
    }
}

impl SynthParams {
    fn sanitized(mut self) -> Self {
        fn clamp(name: &str, v: &mut f64, lo: f64, hi: f64) {
            if !(lo..=hi).contains(v) || v.is_nan() {
                let c = if v.is_nan() { lo } else { v.clamp(lo, hi) };
                warn!("synthetic param {name}={v} clamped to {c}");
                *v = c;
            }
        }
        clamp("move_prob", &mut self.move_prob, 0.0, 1.0);
        clamp("drift", &mut self.drift, -0.45, 0.45);
        clamp("regime_strength", &mut self.regime_strength, 0.0, 1.0);
        clamp("arrival_rate", &mut self.arrival_rate, 0.01, 1.0e4);
        clamp("absent_level_prob", &mut self.absent_level_prob, 0.0, 1.0);
        if self.session_len == 0 {
            warn!("synthetic param session_len=0 raised to 1");
            self.session_len = 1;
        }
        if self.initial_price < 20 {
            warn!("synthetic param initial_price={} raised to 20", self.initial_price);
            self.initial_price = 20;
        }
        let max_band = self.initial_price - 2 * BOOK_DEPTH as i64 - 4;
        if self.price_band < 1 || self.price_band > max_band {
            let c = self.price_band.clamp(1, max_band);
            warn!("synthetic param price_band={} clamped to {c}", self.price_band);
            self.price_band = c;
        }
        if utc_offset(self.utc_offset_hours).is_err() {
            warn!("synthetic param utc_offset_hours={} reset to 0", self.utc_offset_hours);
            self.utc_offset_hours = 0;
        }
        if self.session_start_minute >= 24 * 60 {
            self.session_start_minute %= 24 * 60;
        }
        self
    }
}

/// A generated session plus the open/close contract counts that built it.
#[derive(Debug, Clone)]
pub struct SyntheticSession {
    pub session: Session,
    /// `(opened, closed)` per snapshot; the first frame is always `(0, 0)`.
    pub planted: Vec<(u64, u64)>,
}

/// Streaming generator; yields one session at a time so very long feeds
/// never need to be resident at once.
pub struct SyntheticFeed {
    rng: ChaCha8Rng,
    params: SynthParams,
    remaining: usize,
    session_index: i64,
    price: i64,
    open_interest: u64,
    regime: f64,
    flow: Poisson<f64>,
    noise: Normal<f64>,
}

const REGIME_PERSISTENCE: f64 = 0.999;

impl SyntheticFeed {
    pub fn new(seed: u64, n_snapshots: usize, params: SynthParams) -> Self {
        let params = params.sanitized();
        let n_snapshots = if n_snapshots == 0 {
            warn!("synthetic feed length 0 raised to 1");
            1
        } else {
            n_snapshots
        };
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            remaining: n_snapshots,
            session_index: 0,
            price: params.initial_price,
            open_interest: params.initial_open_interest,
            regime: 0.0,
            flow: Poisson::new(params.arrival_rate / 2.0).expect("positive rate"),
            noise: Normal::new(0.0, (1.0 - REGIME_PERSISTENCE * REGIME_PERSISTENCE).sqrt()).unwrap(),
            params,
        }
    }

    pub fn params(&self) -> &SynthParams {
        &self.params
    }

    fn session_start_ms(&self) -> i64 {
        let p = &self.params;
        let date = p.start_date + Duration::days(self.session_index);
        let time = NaiveTime::from_num_seconds_from_midnight_opt(p.session_start_minute * 60, 0).unwrap();
        let local = NaiveDateTime::new(date, time);
        local.and_utc().timestamp_millis() - i64::from(p.utc_offset_hours) * 3_600_000
    }

    fn step_price(&mut self) {
        let p = &self.params;
        if self.rng.random::<f64>() >= p.move_prob {
            return;
        }
        let up_prob = (0.5 + p.drift + 0.5 * p.regime_strength * self.regime.tanh()).clamp(0.02, 0.98);
        let mut step = if self.rng.random::<f64>() < up_prob { 1 } else { -1 };
        let lo = p.initial_price - p.price_band;
        let hi = p.initial_price + p.price_band;
        if self.price + step > hi || self.price + step < lo {
            step = -step;
        }
        self.price += step;
    }

    fn book(&mut self) -> ([Option<Level>; BOOK_DEPTH], [Option<Level>; BOOK_DEPTH]) {
        let spread = if self.rng.random::<f64>() < 0.75 { 1 } else { 2 };
        let bid1 = self.price - self.rng.random_range(0..=spread);
        let ask1 = bid1 + spread;
        let tilt = 0.6 * self.params.regime_strength * self.regime.tanh();
        let mut bids = [None; BOOK_DEPTH];
        let mut asks = [None; BOOK_DEPTH];
        let (mut bp, mut ap) = (bid1, ask1);
        for n in 0..BOOK_DEPTH {
            if n > 0 {
                bp -= 1 + i64::from(self.rng.random::<f64>() < 0.1);
                ap += 1 + i64::from(self.rng.random::<f64>() < 0.1);
            }
            let base_b = self.rng.random_range(5..40) as f64;
            let base_a = self.rng.random_range(5..40) as f64;
            bids[n] = Some(Level {
                price: bp,
                size: (base_b * (1.0 + tilt)).round().max(1.0) as u64,
            });
            asks[n] = Some(Level {
                price: ap,
                size: (base_a * (1.0 - tilt)).round().max(1.0) as u64,
            });
        }
        if self.rng.random::<f64>() < self.params.absent_level_prob {
            let side = if self.rng.random::<bool>() { &mut bids } else { &mut asks };
            side[BOOK_DEPTH - 1] = None;
            if self.rng.random::<f64>() < 0.5 {
                side[BOOK_DEPTH - 2] = None;
            }
        }
        (bids, asks)
    }
}

impl Iterator for SyntheticFeed {
    type Item = SyntheticSession;

    fn next(&mut self) -> Option<SyntheticSession> {
        if self.remaining == 0 {
            return None;
        }
        let len = self.params.session_len.min(self.remaining);
        self.remaining -= len;
        let start_ms = self.session_start_ms();
        let mut snapshots = Vec::with_capacity(len);
        let mut planted = Vec::with_capacity(len);
        let mut volume = 0u64;
        for i in 0..len {
            let (opened, closed) = if i == 0 {
                (0, 0)
            } else {
                self.regime = REGIME_PERSISTENCE * self.regime + self.noise.sample(&mut self.rng);
                self.step_price();
                let opened = self.flow.sample(&mut self.rng) as u64;
                let closed = (self.flow.sample(&mut self.rng) as u64).min(self.open_interest);
                (opened, closed)
            };
            volume += opened + closed;
            self.open_interest = self.open_interest + opened - closed;
            let (bids, asks) = self.book();
            snapshots.push(Snapshot {
                timestamp_ms: start_ms + i as i64 * SNAPSHOT_INTERVAL_MS,
                price: self.price,
                volume,
                open_interest: self.open_interest,
                bids,
                asks,
            });
            planted.push((opened, closed));
        }
        self.session_index += 1;
        let offset = utc_offset(self.params.utc_offset_hours).expect("sanitized offset");
        Some(SyntheticSession {
            session: Session::new(&self.params.instrument, snapshots, offset),
            planted,
        })
    }
}

/// Collects a whole synthetic feed. Deterministic for a fixed seed.
pub fn generate_synthetic_feed(seed: u64, n_snapshots: usize, params: SynthParams) -> Vec<Session> {
    SyntheticFeed::new(seed, n_snapshots, params).map(|s| s.session).collect()
}
