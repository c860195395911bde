//! VWAP-smoothed price, forward log return and the binary direction target.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feed::{Session, TickSize};
use crate::preprocess::DerivedSnapshot;

/// Volume-weighted mean of a window, in ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vwap {
    pub value: f64,
    /// The window traded nothing; `value` is the plain price mean.
    pub zero_volume: bool,
}

/// VWAP over `(price_ticks, volume_chg)` pairs. Sums are exact integers;
/// the single division is the only rounding step.
pub fn vwap(window: &[(i64, u64)]) -> Result<Vwap> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let (pv, v, p) = window.iter().fold((0i128, 0u128, 0i128), |(pv, v, p), &(price, vol)| {
        (pv + price as i128 * vol as i128, v + vol as u128, p + price as i128)
    });
    Ok(vwap_from_sums(pv, v, p, window.len()))
}

fn vwap_from_sums(pv: i128, v: u128, p: i128, n: usize) -> Vwap {
    if v == 0 {
        Vwap {
            value: p as f64 / n as f64,
            zero_volume: true,
        }
    } else {
        Vwap {
            value: pv as f64 / v as f64,
            zero_volume: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Up,
    Down,
    Dropped,
}

impl Target {
    pub fn as_label(self) -> Option<u8> {
        match self {
            Target::Up => Some(1),
            Target::Down => Some(0),
            Target::Dropped => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    pub horizon_snapshots: usize,
    pub window: usize,
    pub theta: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            horizon_snapshots: 1800,
            window: 120,
            theta: 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRecord {
    pub snapshot_index: usize,
    pub timestamp_ms: i64,
    /// Trailing VWAP in price units; `None` before the first full window.
    pub smoothed_price: Option<f64>,
    pub log_return: Option<f64>,
    pub target: Target,
    pub zero_volume: bool,
}

/// Applies the θ filter. |r| exactly equal to θ is labeled, not dropped.
pub fn target_for(log_return: f64, theta: f64) -> Target {
    if log_return >= theta {
        Target::Up
    } else if log_return <= -theta {
        Target::Down
    } else {
        Target::Dropped
    }
}

/// Labels every snapshot of a session. The smoothed price at `t` is the VWAP
/// of the `window` snapshots ending at `t`; the return compares it with the
/// smoothed price `horizon` snapshots later in the same session.
pub fn label_session(
    session: &Session,
    derived: &[DerivedSnapshot],
    cfg: &LabelConfig,
    tick: TickSize,
) -> Result<Vec<LabelRecord>> {
    if cfg.window == 0 || cfg.horizon_snapshots == 0 {
        return Err(Error::InvalidInput("label window and horizon must be positive".into()));
    }
    if derived.len() != session.len() {
        return Err(Error::InvalidInput("derived rows must align with snapshots".into()));
    }
    let n = session.len();
    // Prefix sums of p·v, v and p, all exact integers.
    let mut pv = vec![0i128; n + 1];
    let mut vol = vec![0u128; n + 1];
    let mut px = vec![0i128; n + 1];
    for (i, (s, d)) in session.snapshots.iter().zip(derived).enumerate() {
        pv[i + 1] = pv[i] + s.price as i128 * d.volume_chg as i128;
        vol[i + 1] = vol[i] + d.volume_chg as u128;
        px[i + 1] = px[i] + s.price as i128;
    }
    let smoothed = |t: usize| -> Option<Vwap> {
        (t + 1 >= cfg.window).then(|| {
            let a = t + 1 - cfg.window;
            vwap_from_sums(pv[t + 1] - pv[a], vol[t + 1] - vol[a], px[t + 1] - px[a], cfg.window)
        })
    };

    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let now = smoothed(t);
        if let Some(w) = now {
            if w.value <= 0.0 {
                return Err(Error::DataIntegrity(format!(
                    "non-positive smoothed price at {} index {t}",
                    session.id
                )));
            }
        }
        let later = (t + cfg.horizon_snapshots < n)
            .then(|| smoothed(t + cfg.horizon_snapshots))
            .flatten();
        let log_return = match (now, later) {
            (Some(a), Some(b)) => Some((b.value / a.value).ln()),
            _ => None,
        };
        out.push(LabelRecord {
            snapshot_index: t,
            timestamp_ms: session.snapshots[t].timestamp_ms,
            smoothed_price: now.map(|w| tick.to_price(w.value)),
            log_return,
            target: log_return.map_or(Target::Dropped, |r| target_for(r, cfg.theta)),
            zero_volume: now.is_some_and(|w| w.zero_volume) || later.is_some_and(|w| w.zero_volume),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelDistribution {
    pub up: usize,
    pub down: usize,
    /// `None` when no record is labeled.
    pub pct_up: Option<f64>,
    pub pct_down: Option<f64>,
}

impl LabelDistribution {
    pub fn is_empty(&self) -> bool {
        self.up + self.down == 0
    }
}

pub fn label_distribution<'a>(labels: impl IntoIterator<Item = &'a LabelRecord>) -> LabelDistribution {
    let (up, down) = labels.into_iter().fold((0, 0), |(u, d), r| match r.target {
        Target::Up => (u + 1, d),
        Target::Down => (u, d + 1),
        Target::Dropped => (u, d),
    });
    let total = up + down;
    let pct = |c: usize| (total > 0).then(|| 100.0 * c as f64 / total as f64);
    LabelDistribution {
        up,
        down,
        pct_up: pct(up),
        pct_down: pct(down),
    }
}

pub const LABEL_HEADER: &str = "session_id,timestamp_ms,smoothed_price,log_return,target";

/// Dropped rows are omitted unless `keep_dropped`; their target field is empty.
pub fn write_label_csv<'a, W: Write>(
    mut out: W,
    sessions: impl IntoIterator<Item = (&'a str, &'a [LabelRecord])>,
    keep_dropped: bool,
) -> Result<()> {
    let io = |e| Error::io("<output>", e);
    writeln!(out, "{LABEL_HEADER}").map_err(io)?;
    for (session_id, labels) in sessions {
        for r in labels {
            let target = r.target.as_label();
            if target.is_none() && !keep_dropped {
                continue;
            }
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{session_id},{},{},{},{}",
                r.timestamp_ms,
                opt(r.smoothed_price),
                opt(r.log_return),
                target.map(|t| t.to_string()).unwrap_or_default()
            )
            .map_err(io)?;
        }
    }
    Ok(())
}
