use chrono::{Days, NaiveDate};
use proptest::prelude::*;

use snapflow::backtest::{
    decision_step, leveraged_equity, performance_metrics, run_backtest, Action, BacktestConfig, DecisionPoint, Position,
    TradeAction,
};

fn points(probs: &[f64], prices: &[i64]) -> Vec<DecisionPoint> {
    let start = NaiveDate::from_ymd_opt(2021, 9, 1).unwrap();
    probs
        .iter()
        .zip(prices)
        .enumerate()
        .map(|(k, (&prob, &price))| DecisionPoint {
            timestamp_ms: 1_630_458_000_000 + 60_000 * k as i64,
            trading_day: start.checked_add_days(Days::new(k as u64 / 20)).unwrap(),
            prob,
            price,
        })
        .collect()
}

fn path() -> impl Strategy<Value = (Vec<f64>, Vec<i64>)> {
    prop::collection::vec((0u32..=64, -20i64..=20), 2..150).prop_map(|v| {
        let mut price = 5_000i64;
        v.into_iter()
            .map(|(k, step)| {
                price = (price + step).max(100);
                (k as f64 / 64.0, price)
            })
            .unzip()
    })
}

proptest! {
    #[test]
    fn machine_never_reverses_in_one_step(y in 0.0f64..=1.0, gamma in 0.0f64..0.5) {
        for pos in [Position::Flat, Position::Long, Position::Short] {
            let (next, action) = decision_step(pos, y, gamma);
            prop_assert!(!(pos == Position::Long && next == Position::Short));
            prop_assert!(!(pos == Position::Short && next == Position::Long));
            match action {
                Action::OpenLong => prop_assert!(pos == Position::Flat && y >= 0.5 + gamma),
                Action::OpenShort => prop_assert!(pos == Position::Flat && y <= 0.5 - gamma),
                Action::Close => prop_assert!(pos != Position::Flat && next == Position::Flat),
                Action::Hold => prop_assert_eq!(next, pos),
            }
        }
    }

    #[test]
    fn trade_log_alternates_and_ends_flat((probs, prices) in path(), gamma in prop::sample::select(vec![0.0, 0.125, 0.25, 0.375])) {
        let cfg = BacktestConfig { gamma, ..Default::default() };
        let pts = points(&probs, &prices);
        let r = run_backtest(&pts, &cfg).unwrap();
        let mut open = false;
        for t in &r.trades {
            match t.action {
                TradeAction::Open => { prop_assert!(!open); open = true; }
                _ => { prop_assert!(open); open = false; }
            }
            prop_assert!(t.equity_after >= 0.0);
        }
        prop_assert!(!open);
        prop_assert!(r.trades.iter().all(|t| t.action != TradeAction::Open || t.timestamp_ms != pts.last().unwrap().timestamp_ms));
        if r.liquidated_at.is_none() {
            prop_assert_eq!(r.curve.len(), pts.len());
            prop_assert_eq!(r.curve.last().unwrap().position, Position::Flat);
        }
    }

    #[test]
    fn reflected_signal_mirrors_the_trade_log((probs, prices) in path()) {
        let cfg = BacktestConfig { margin_ratio: 1.0, ..Default::default() };
        let flipped: Vec<f64> = probs.iter().map(|p| 1.0 - p).collect();
        let a = run_backtest(&points(&probs, &prices), &cfg).unwrap();
        let b = run_backtest(&points(&flipped, &prices), &cfg).unwrap();
        prop_assert_eq!(a.trades.len(), b.trades.len());
        for (x, y) in a.trades.iter().zip(&b.trades) {
            prop_assert_eq!(x.timestamp_ms, y.timestamp_ms);
            prop_assert_eq!(x.action, y.action);
            let opposite = match x.side {
                Position::Long => Position::Short,
                Position::Short => Position::Long,
                Position::Flat => Position::Flat,
            };
            prop_assert_eq!(y.side, opposite);
        }
    }

    #[test]
    fn open_positions_are_marked_to_market((probs, prices) in path()) {
        let cfg = BacktestConfig::default();
        let pts = points(&probs, &prices);
        let r = run_backtest(&pts, &cfg).unwrap();
        let mut realised = cfg.initial_equity;
        let mut entry = None;
        let mut trades = r.trades.iter().peekable();
        for (pt, c) in pts.iter().zip(&r.curve) {
            while let Some(t) = trades.peek().filter(|t| t.timestamp_ms == pt.timestamp_ms) {
                realised = t.equity_after;
                entry = (t.action == TradeAction::Open).then_some((t.side, t.price));
                trades.next();
            }
            match entry {
                Some((side, px)) => {
                    prop_assert_eq!(c.position, side);
                    let expected = leveraged_equity(realised, side, px, pt.price, cfg.margin_ratio);
                    prop_assert!((c.equity - expected).abs() <= 1e-9 * expected.abs().max(1.0));
                }
                None => {
                    prop_assert_eq!(c.position, Position::Flat);
                    prop_assert_eq!(c.equity, realised);
                }
            }
        }
    }
}

#[test]
fn neutral_signal_never_trades() {
    let prices: Vec<i64> = (0..200).map(|k| 5_000 + (k % 17) * 3).collect();
    let r = run_backtest(&points(&[0.5; 200], &prices), &BacktestConfig::default()).unwrap();
    assert!(r.trades.is_empty());
    assert!(r.curve.iter().all(|c| c.equity == 1_000_000.0 && c.position == Position::Flat));
    let m = performance_metrics(&r.curve, 1_000_000.0).unwrap();
    assert_eq!(m.total_return, 0.0);
    assert_eq!(m.max_drawdown, 0.0);
}

#[test]
fn adverse_move_liquidates() {
    let r = run_backtest(&points(&[0.9, 0.9, 0.9], &[5_000, 4_400, 4_300]), &BacktestConfig::default()).unwrap();
    assert_eq!(r.liquidated_at, Some(1_630_458_060_000));
    assert_eq!(r.trades.last().unwrap().action, TradeAction::Liquidation);
    assert_eq!(r.curve.last().unwrap().equity, 0.0);
}

#[test]
fn costs_only_lower_equity() {
    let probs: Vec<f64> = (0..300).map(|k| if (k / 7) % 2 == 0 { 0.9 } else { 0.1 }).collect();
    let prices: Vec<i64> = (0..300).map(|k| 5_000 + ((k * 37) % 23) - 11).collect();
    let pts = points(&probs, &prices);
    let free = run_backtest(&pts, &BacktestConfig::default()).unwrap();
    let costly = run_backtest(&pts, &BacktestConfig { fee_rate: 0.0001, slippage_ticks: 1, ..Default::default() }).unwrap();
    assert_eq!(free.trades.len(), costly.trades.len());
    assert!(costly.curve.last().unwrap().equity < free.curve.last().unwrap().equity);
}
