use super::rolling::{ema, rolling_extreme, sma, wilder};
use super::{BarInput, TaParams};
use crate::column::{is_missing, Column, MISSING};
use crate::quality::Quality;

/// MACD family and the two simple moving averages.
pub fn compute_trend(bars: &[BarInput], p: &TaParams) -> Vec<Column> {
    let close: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let fast = ema(&close, p.macd_fast);
    let slow = ema(&close, p.macd_slow);
    let macd: Vec<f64> = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
    let signal = ema(&macd, p.macd_signal);
    let diff: Vec<f64> = macd.iter().zip(&signal).map(|(m, s)| m - s).collect();
    vec![
        Column::new("macd", macd),
        Column::new("macd_signal", signal),
        Column::new("macd_diff", diff),
        Column::new("sma_fast", sma(&close, p.sma_fast)),
        Column::new("sma_slow", sma(&close, p.sma_slow)),
    ]
}

/// Wilder RSI on closes, 0..100. Flat windows (no gains, no losses) give 50.
pub fn rsi(close: &[f64], window: usize) -> Vec<f64> {
    let n = close.len();
    let mut gains = vec![MISSING; n];
    let mut losses = vec![MISSING; n];
    for t in 1..n {
        let d = close[t] - close[t - 1];
        gains[t] = d.max(0.0);
        losses[t] = (-d).max(0.0);
    }
    let g = wilder(&gains, window);
    let l = wilder(&losses, window);
    g.iter()
        .zip(&l)
        .map(|(&g, &l)| {
            if is_missing(g) || is_missing(l) {
                MISSING
            } else if l == 0.0 {
                if g == 0.0 {
                    50.0
                } else {
                    100.0
                }
            } else {
                100.0 - 100.0 / (1.0 + g / l)
            }
        })
        .collect()
}

/// Stochastic RSI in [0, 1] with its K and D smoothings.
pub fn compute_momentum(bars: &[BarInput], p: &TaParams, flags: &mut [Quality]) -> Vec<Column> {
    let close: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let r = rsi(&close, p.rsi_window);
    // rolling_extreme needs a gap-free input; the RSI warm-up is a prefix.
    let start = r.iter().position(|v| !is_missing(*v)).unwrap_or(r.len());
    let mut stoch = vec![MISSING; r.len()];
    let hi = rolling_extreme(&r[start..], p.stoch_window, true);
    let lo = rolling_extreme(&r[start..], p.stoch_window, false);
    for (k, (h, l)) in hi.iter().zip(&lo).enumerate() {
        if is_missing(*h) {
            continue;
        }
        let t = start + k;
        stoch[t] = if h == l {
            flags[t] |= Quality::DEGENERATE;
            0.5
        } else {
            (r[t] - l) / (h - l)
        };
    }
    let k = sma(&stoch, p.stoch_k);
    let d = sma(&k, p.stoch_d);
    vec![
        Column::new("stochrsi", stoch),
        Column::new("stochrsi_k", k),
        Column::new("stochrsi_d", d),
    ]
}
