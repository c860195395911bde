//! Window primitives over bar series. Inputs may start with a run of
//! missing values; outputs are missing until a full window of present
//! values is available.

use std::collections::VecDeque;

use crate::column::{is_missing, MISSING};

/// Simple moving average by direct window summation.
pub fn sma(series: &[f64], window: usize) -> Vec<f64> {
    windowed(series, window, |w| w.iter().sum::<f64>() / window as f64)
}

/// Population standard deviation over the trailing window (two-pass).
pub fn rolling_std(series: &[f64], window: usize) -> Vec<f64> {
    windowed(series, window, |w| {
        let mean = w.iter().sum::<f64>() / window as f64;
        (w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / window as f64).sqrt()
    })
}

/// Applies `f` to every full trailing window free of missing values.
pub fn windowed(series: &[f64], window: usize, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    assert!(window > 0);
    let mut out = vec![MISSING; series.len()];
    let mut run = 0usize;
    for (t, &x) in series.iter().enumerate() {
        run = if is_missing(x) { 0 } else { run + 1 };
        if run >= window {
            out[t] = f(&series[t + 1 - window..=t]);
        }
    }
    out
}

/// Exponential moving average with smoothing `alpha`, seeded by the simple
/// mean of the first `window` present values.
pub fn ema_with_alpha(series: &[f64], window: usize, alpha: f64) -> Vec<f64> {
    assert!(window > 0);
    let mut out = vec![MISSING; series.len()];
    let mut run = 0usize;
    let mut seed_sum = 0.0;
    let mut prev = MISSING;
    for (t, &x) in series.iter().enumerate() {
        if is_missing(x) {
            run = 0;
            seed_sum = 0.0;
            continue;
        }
        run += 1;
        if run < window {
            seed_sum += x;
        } else if run == window {
            seed_sum += x;
            prev = seed_sum / window as f64;
            out[t] = prev;
        } else {
            prev = alpha * x + (1.0 - alpha) * prev;
            out[t] = prev;
        }
    }
    out
}

/// EMA with span `window` (`alpha = 2 / (window + 1)`).
pub fn ema(series: &[f64], window: usize) -> Vec<f64> {
    ema_with_alpha(series, window, 2.0 / (window as f64 + 1.0))
}

/// Wilder smoothing (`alpha = 1 / window`).
pub fn wilder(series: &[f64], window: usize) -> Vec<f64> {
    ema_with_alpha(series, window, 1.0 / window as f64)
}

/// Trailing max (`want_max`) or min via a monotone deque of indices.
/// Input must have no missing values.
pub fn rolling_extreme(series: &[f64], window: usize, want_max: bool) -> Vec<f64> {
    assert!(window > 0);
    let dominates = |a: f64, b: f64| if want_max { a >= b } else { a <= b };
    let mut out = vec![MISSING; series.len()];
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(window + 1);
    for (t, &x) in series.iter().enumerate() {
        while deque.back().is_some_and(|&j| dominates(x, series[j])) {
            deque.pop_back();
        }
        deque.push_back(t);
        if deque.front().is_some_and(|&j| j + window <= t) {
            deque.pop_front();
        }
        if t + 1 >= window {
            out[t] = series[*deque.front().unwrap()];
        }
    }
    out
}
