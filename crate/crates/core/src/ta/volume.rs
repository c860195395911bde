use super::rolling::{ema, sma};
use super::{BarInput, TaParams};
use crate::column::{Column, MISSING};
use crate::quality::Quality;

/// Close location value; 0 when the bar has no range.
pub(super) fn clv(bar: &BarInput) -> f64 {
    let range = bar.high - bar.low;
    if range == 0.0 {
        0.0
    } else {
        ((bar.close - bar.low) - (bar.high - bar.close)) / range
    }
}

/// ADI, OBV, CMF, force index, ease of movement and VPT.
pub fn compute_volume_indicators(bars: &[BarInput], p: &TaParams, flags: &mut [Quality]) -> Vec<Column> {
    let n = bars.len();
    let mut adi = Vec::with_capacity(n);
    let mut obv = Vec::with_capacity(n);
    let mut vpt = Vec::with_capacity(n);
    let mut money_flow = Vec::with_capacity(n);
    let mut force_raw = vec![MISSING; n];
    let mut eom_raw = vec![MISSING; n];

    let (mut acc_adi, mut acc_obv, mut acc_vpt) = (0.0, 0.0, 0.0);
    for (t, bar) in bars.iter().enumerate() {
        if bar.high == bar.low {
            flags[t] |= Quality::DEGENERATE;
        }
        let mf = clv(bar) * bar.volume;
        money_flow.push(mf);
        acc_adi += mf;
        adi.push(acc_adi);
        if t > 0 {
            let prev = &bars[t - 1];
            let dc = bar.close - prev.close;
            if dc > 0.0 {
                acc_obv += bar.volume;
            } else if dc < 0.0 {
                acc_obv -= bar.volume;
            }
            if prev.close != 0.0 {
                acc_vpt += bar.volume * dc / prev.close;
            }
            force_raw[t] = dc * bar.volume;
            let distance = (bar.high + bar.low) / 2.0 - (prev.high + prev.low) / 2.0;
            eom_raw[t] = if bar.volume == 0.0 {
                flags[t] |= Quality::DEGENERATE;
                0.0
            } else {
                distance * (bar.high - bar.low) / bar.volume
            };
        }
        obv.push(acc_obv);
        vpt.push(acc_vpt);
    }

    let w = p.cmf_window;
    let mut cmf = vec![MISSING; n];
    for t in w.saturating_sub(1)..n {
        let a = t + 1 - w;
        let mf: f64 = money_flow[a..=t].iter().sum();
        let vol: f64 = bars[a..=t].iter().map(|b| b.volume).sum();
        cmf[t] = if vol == 0.0 {
            flags[t] |= Quality::DEGENERATE;
            0.0
        } else {
            mf / vol
        };
    }

    vec![
        Column::new("adi", adi),
        Column::new("obv", obv),
        Column::new("cmf", cmf),
        Column::new("force_index", ema(&force_raw, p.force_index_window)),
        Column::new("eom", sma(&eom_raw, p.eom_window)),
        Column::new("vpt", sma(&vpt, p.vpt_window)),
    ]
}
