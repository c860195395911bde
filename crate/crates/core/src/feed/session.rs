use std::fmt;
use std::str::FromStr;

use chrono::{FixedOffset, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{local_time, Session, Snapshot};

/// A local-time trading window, e.g. `09:00-11:30` or the overnight `21:00-02:30`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ScheduleWindow {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl ScheduleWindow {
    pub fn contains(&self, t: NaiveTime) -> bool {
        if self.start <= self.end {
            t >= self.start && t <= self.end
        } else {
            t >= self.start || t <= self.end
        }
    }
}

impl FromStr for ScheduleWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| format!("schedule entry `{s}` is not HH:MM-HH:MM"))?;
        let parse = |t: &str| {
            NaiveTime::parse_from_str(t.trim(), "%H:%M")
                .map_err(|e| format!("schedule entry `{s}`: {e}"))
        };
        Ok(Self {
            start: parse(a)?,
            end: parse(b)?,
        })
    }
}

impl TryFrom<String> for ScheduleWindow {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ScheduleWindow> for String {
    fn from(w: ScheduleWindow) -> String {
        w.to_string()
    }
}

impl fmt::Display for ScheduleWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start.format("%H:%M"), self.end.format("%H:%M"))
    }
}

/// Decides where one session ends and the next begins.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRule {
    pub gap_ms: i64,
    pub schedule: Vec<ScheduleWindow>,
    pub utc_offset: FixedOffset,
}

impl Default for SessionRule {
    fn default() -> Self {
        Self {
            gap_ms: 30 * 60 * 1000,
            schedule: Vec::new(),
            utc_offset: FixedOffset::east_opt(8 * 3600).unwrap(),
        }
    }
}

impl SessionRule {
    /// Schedule window holding `timestamp_ms`; `Some(0)` when no schedule is configured.
    pub fn window_of(&self, timestamp_ms: i64) -> Option<usize> {
        if self.schedule.is_empty() {
            return Some(0);
        }
        let local = local_time(timestamp_ms, self.utc_offset);
        let t = NaiveTime::from_num_seconds_from_midnight_opt(local.num_seconds_from_midnight(), 0)?;
        self.schedule.iter().position(|w| w.contains(t))
    }

    pub fn is_boundary(&self, prev_ms: i64, next_ms: i64) -> bool {
        next_ms - prev_ms > self.gap_ms || self.window_of(prev_ms) != self.window_of(next_ms)
    }
}

/// Splits a timestamp-sorted, duplicate-free snapshot run into sessions.
pub fn group_sessions(instrument: &str, snapshots: Vec<Snapshot>, rule: &SessionRule) -> Vec<Session> {
    let mut sessions = Vec::new();
    let mut current: Vec<Snapshot> = Vec::new();
    for snap in snapshots {
        if let Some(last) = current.last() {
            if rule.is_boundary(last.timestamp_ms, snap.timestamp_ms) {
                sessions.push(Session::new(instrument, std::mem::take(&mut current), rule.utc_offset));
            }
        }
        current.push(snap);
    }
    if !current.is_empty() {
        sessions.push(Session::new(instrument, current, rule.utc_offset));
    }
    sessions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feed::BOOK_DEPTH;

    fn snap(ts: i64) -> Snapshot {
        Snapshot {
            timestamp_ms: ts,
            price: 1,
            volume: 0,
            open_interest: 0,
            bids: [None; BOOK_DEPTH],
            asks: [None; BOOK_DEPTH],
        }
    }

    #[test]
    fn gap_splits_sessions() {
        let rule = SessionRule::default();
        // 0, 0.5 s, 1 s, then two hours of silence, then two more frames
        let two_h = 2 * 3600 * 1000;
        let ts = [0, 500, 1000, 1000 + two_h, 1500 + two_h];
        let sessions = group_sessions("ag", ts.iter().map(|&t| snap(t)).collect(), &rule);
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].len(), 3);
        assert_eq!(sessions[1].len(), 2);
    }

    #[test]
    fn gap_at_threshold_does_not_split() {
        let rule = SessionRule::default();
        let sessions = group_sessions("ag", vec![snap(0), snap(rule.gap_ms)], &rule);
        assert_eq!(sessions.len(), 1);
    }

    #[test]
    fn schedule_window_change_splits() {
        let rule = SessionRule {
            gap_ms: i64::MAX / 2,
            schedule: vec!["09:00-11:30".parse().unwrap(), "13:30-15:00".parse().unwrap()],
            utc_offset: FixedOffset::east_opt(0).unwrap(),
        };
        let h = 3600 * 1000;
        let ts = [9 * h, 11 * h, 14 * h];
        let sessions = group_sessions("ag", ts.iter().map(|&t| snap(t)).collect(), &rule);
        assert_eq!(sessions.len(), 2);
    }

    #[test]
    fn overnight_window_wraps() {
        let w: ScheduleWindow = "21:00-02:30".parse().unwrap();
        assert!(w.contains(NaiveTime::from_hms_opt(23, 0, 0).unwrap()));
        assert!(w.contains(NaiveTime::from_hms_opt(1, 0, 0).unwrap()));
        assert!(!w.contains(NaiveTime::from_hms_opt(12, 0, 0).unwrap()));
        assert_eq!(w.to_string(), "21:00-02:30");
    }
}
