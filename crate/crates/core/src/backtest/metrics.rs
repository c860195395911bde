use crate::error::{Error, Result};

use super::EquityPoint;

const TRADING_DAYS: f64 = 252.0;

/// Largest decline from the running peak, as a fraction of that peak.
pub fn max_drawdown(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        if peak > 0.0 {
            worst = worst.max((peak - e) / peak);
        }
    }
    worst
}

/// Return of each trading day's closing equity over the previous day's; the
/// first day is measured against `initial_equity`.
pub fn daily_returns(curve: &[EquityPoint], initial_equity: f64) -> Vec<f64> {
    let mut closes: Vec<f64> = Vec::new();
    for (i, p) in curve.iter().enumerate() {
        let day_ends = curve.get(i + 1).is_none_or(|next| next.trading_day != p.trading_day);
        if day_ends {
            closes.push(p.equity);
        }
    }
    let mut prev = initial_equity;
    closes
        .into_iter()
        .map(|c| {
            let r = c / prev - 1.0;
            prev = c;
            r
        })
        .collect()
}

/// Mean over sample standard deviation of daily returns, times √252.
pub fn annualized_sharpe(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::InvalidInput("sharpe ratio needs at least two daily returns".into()));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(mean / var.sqrt() * TRADING_DAYS.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceMetrics {
    pub total_return: f64,
    pub max_drawdown: f64,
    /// `None` when daily returns have no variance or there is one day.
    pub sharpe: Option<f64>,
    pub trading_days: usize,
}

pub fn performance_metrics(curve: &[EquityPoint], initial_equity: f64) -> Result<PerformanceMetrics> {
    if curve.is_empty() {
        return Err(Error::InvalidInput("equity curve is empty".into()));
    }
    let mut equity = Vec::with_capacity(curve.len() + 1);
    equity.push(initial_equity);
    equity.extend(curve.iter().map(|p| p.equity));
    let returns = daily_returns(curve, initial_equity);
    let sharpe = match annualized_sharpe(&returns) {
        Ok(s) => Some(s),
        Err(Error::ZeroVariance | Error::InvalidInput(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(PerformanceMetrics {
        total_return: equity[equity.len() - 1] / initial_equity - 1.0,
        max_drawdown: max_drawdown(&equity),
        sharpe,
        trading_days: returns.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drawdown_example() {
        assert_eq!(max_drawdown(&[100.0, 120.0, 90.0, 110.0]), 0.25);
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn flat_returns_have_no_sharpe() {
        assert!(matches!(annualized_sharpe(&[0.25, 0.25, 0.25]), Err(Error::ZeroVariance)));
    }
}
