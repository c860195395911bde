use super::rolling::{rolling_extreme, rolling_std, sma};
use super::{BarInput, TaParams};
use crate::column::{is_missing, Column, MISSING};
use crate::quality::Quality;

/// Width as percent of the centre line and position of the close inside the
/// band. A collapsed band puts the close at 0.5 and flags the bar.
fn width_and_position(
    high: &[f64],
    low: &[f64],
    centre: &[f64],
    close: &[f64],
    flags: &mut [Quality],
) -> (Vec<f64>, Vec<f64>) {
    let n = close.len();
    let mut width = vec![MISSING; n];
    let mut pos = vec![MISSING; n];
    for t in 0..n {
        if is_missing(high[t]) || is_missing(low[t]) || is_missing(centre[t]) {
            continue;
        }
        let range = high[t] - low[t];
        width[t] = if centre[t] == 0.0 {
            flags[t] |= Quality::DEGENERATE;
            0.0
        } else {
            range / centre[t] * 100.0
        };
        pos[t] = if range == 0.0 {
            flags[t] |= Quality::DEGENERATE;
            0.5
        } else {
            (close[t] - low[t]) / range
        };
    }
    (width, pos)
}

/// Bollinger, Keltner and Donchian bands, five columns each.
pub fn compute_volatility_indicators(bars: &[BarInput], p: &TaParams, flags: &mut [Quality]) -> Vec<Column> {
    let close: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let high: Vec<f64> = bars.iter().map(|b| b.high).collect();
    let low: Vec<f64> = bars.iter().map(|b| b.low).collect();
    let mut cols = Vec::with_capacity(15);

    let mid = sma(&close, p.bollinger_window);
    let sd = rolling_std(&close, p.bollinger_window);
    let bb_h: Vec<f64> = mid.iter().zip(&sd).map(|(m, s)| m + p.bollinger_dev * s).collect();
    let bb_l: Vec<f64> = mid.iter().zip(&sd).map(|(m, s)| m - p.bollinger_dev * s).collect();
    let (bb_w, bb_p) = width_and_position(&bb_h, &bb_l, &mid, &close, flags);
    cols.extend([
        Column::new("bb_hband", bb_h),
        Column::new("bb_mband", mid),
        Column::new("bb_lband", bb_l),
        Column::new("bb_wband", bb_w),
        Column::new("bb_pband", bb_p),
    ]);

    let typical: Vec<f64> = bars.iter().map(|b| (b.high + b.low + b.close) / 3.0).collect();
    let upper: Vec<f64> = bars.iter().map(|b| (4.0 * b.high - 2.0 * b.low + b.close) / 3.0).collect();
    let lower: Vec<f64> = bars.iter().map(|b| (-2.0 * b.high + 4.0 * b.low + b.close) / 3.0).collect();
    let kc_c = sma(&typical, p.keltner_window);
    let kc_h = sma(&upper, p.keltner_window);
    let kc_l = sma(&lower, p.keltner_window);
    let (kc_w, kc_p) = width_and_position(&kc_h, &kc_l, &kc_c, &close, flags);
    cols.extend([
        Column::new("kc_hband", kc_h),
        Column::new("kc_cband", kc_c),
        Column::new("kc_lband", kc_l),
        Column::new("kc_wband", kc_w),
        Column::new("kc_pband", kc_p),
    ]);

    let dc_h = rolling_extreme(&high, p.donchian_window, true);
    let dc_l = rolling_extreme(&low, p.donchian_window, false);
    let dc_m: Vec<f64> = dc_h.iter().zip(&dc_l).map(|(h, l)| (h + l) / 2.0).collect();
    let (dc_w, dc_p) = width_and_position(&dc_h, &dc_l, &dc_m, &close, flags);
    cols.extend([
        Column::new("dc_hband", dc_h),
        Column::new("dc_mband", dc_m),
        Column::new("dc_lband", dc_l),
        Column::new("dc_wband", dc_w),
        Column::new("dc_pband", dc_p),
    ]);
    cols
}
