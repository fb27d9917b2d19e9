//! Frictionless (optionally cost-adjusted) backtests on log-returns.
//!
//! All strategies share one convention: `positions[t]` is decided at the
//! close of period `t` and earns `returns[t + 1]`. The cumulative curve
//! therefore starts at zero and the last position is never applied.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::analytics::SignalSeries;
use crate::error::{Error, Result};
use crate::stats;

pub const CRYPTO_PERIODS_PER_YEAR: f64 = 365.0;
pub const EQUITY_PERIODS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub positions: Vec<f64>,
    /// `period_returns[0] = 0`; afterwards `positions[t-1] * returns[t]` less costs.
    pub period_returns: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Mean squared error of forecasts against the returns they forecast, when applicable.
    pub mse_out: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignRuleOptions {
    /// A zero forecast goes long when set, flat otherwise.
    pub zero_is_long: bool,
    /// Charged as `cost * |position change|` in the period the new position earns.
    pub cost_per_trade: f64,
}

impl Default for SignRuleOptions {
    fn default() -> Self {
        Self {
            zero_is_long: true,
            cost_per_trade: 0.0,
        }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            what: "returns length",
            expected: a,
            got: b,
        });
    }
    if a == 0 {
        return Err(Error::InvalidArgument("empty backtest".into()));
    }
    Ok(())
}

/// Applies `positions[t]` to `returns[t + 1]`.
pub fn run_positions(positions: Vec<f64>, returns: &[f64], cost_per_trade: f64) -> Result<BacktestResult> {
    check_lengths(positions.len(), returns.len())?;
    if positions.iter().any(|p| !(-1.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("positions must lie in [-1, 1]".into()));
    }
    let len = returns.len();
    let mut period_returns = vec![0.0; len];
    let mut cumulative = vec![0.0; len];
    let mut previous = 0.0;
    for t in 1..len {
        let pos = positions[t - 1];
        let mut r = pos * returns[t];
        if cost_per_trade > 0.0 {
            r -= cost_per_trade * (pos - previous).abs();
        }
        previous = pos;
        period_returns[t] = r;
        cumulative[t] = cumulative[t - 1] + r;
    }
    Ok(BacktestResult {
        positions,
        period_returns,
        cumulative,
        mse_out: None,
    })
}

pub fn buy_and_hold(returns: &[f64]) -> Result<BacktestResult> {
    run_positions(vec![1.0; returns.len()], returns, 0.0)
}

/// Long when the forecast of the next return is positive, short when negative.
pub fn sign_rule(forecasts: &[f64], returns: &[f64], opts: &SignRuleOptions) -> Result<BacktestResult> {
    check_lengths(forecasts.len(), returns.len())?;
    let positions = forecasts
        .iter()
        .map(|&f| {
            if f > 0.0 {
                1.0
            } else if f < 0.0 {
                -1.0
            } else if opts.zero_is_long {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut result = run_positions(positions, returns, opts.cost_per_trade)?;
    if forecasts.len() > 1 {
        let sq: f64 = (0..forecasts.len() - 1)
            .map(|t| (forecasts[t] - returns[t + 1]).powi(2))
            .sum();
        result.mse_out = Some(sq / (forecasts.len() - 1) as f64);
    }
    Ok(result)
}

/// Holds `exposure[t]` of the asset; exits earn nothing.
pub fn exposure_strategy(signals: &SignalSeries, returns: &[f64]) -> Result<BacktestResult> {
    run_positions(signals.exposure.clone(), returns, 0.0)
}

/// Short at triggered (critical) points, long otherwise.
pub fn long_short_strategy(signals: &SignalSeries, returns: &[f64]) -> Result<BacktestResult> {
    let positions = signals
        .triggered()
        .map(|hit| if hit { -1.0 } else { 1.0 })
        .collect();
    run_positions(positions, returns, 0.0)
}

/// Entrywise mean of member forecast series, in member order.
pub fn mean_forecast(members: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("no member forecasts".into()))?;
    let mut acc = vec![0.0; first.len()];
    for m in members {
        check_lengths(first.len(), m.len())?;
        for (a, v) in acc.iter_mut().zip(m) {
            *a += v;
        }
    }
    let k = members.len() as f64;
    Ok(acc.into_iter().map(|a| a / k).collect())
}

/// Writes `date,position,period_return,cumulative` rows.
pub fn write_curve_csv<W: Write>(dates: &[NaiveDate], result: &BacktestResult, mut out: W) -> Result<()> {
    check_lengths(dates.len(), result.positions.len())?;
    writeln!(out, "date,position,period_return,cumulative")?;
    for t in 0..dates.len() {
        writeln!(
            out,
            "{},{},{},{}",
            dates[t].format("%Y-%m-%d"),
            result.positions[t],
            result.period_returns[t],
            result.cumulative[t]
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Annualized; `None` when the strategy returns have zero dispersion.
    pub sharpe: Option<f64>,
    /// Largest peak-to-trough fall of the cumulative log curve.
    pub max_drawdown: f64,
    pub mse: Option<f64>,
}

pub fn max_drawdown(cumulative: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &c in cumulative {
        peak = peak.max(c);
        worst = worst.max(peak - c);
    }
    worst
}

/// Sharpe ratio of the realized period returns in excess of `risk_free`
/// (per period), using the sample standard deviation and scaled by
/// `sqrt(periods_per_year)`.
pub fn sharpe_ratio(returns: &[f64], risk_free: f64, periods_per_year: f64) -> Option<f64> {
    if returns.len() < 2 {
        return None;
    }
    let excess: Vec<f64> = returns.iter().map(|r| r - risk_free).collect();
    let sd = stats::sample_std(&excess);
    if !(sd > 0.0) {
        return None;
    }
    Some(stats::mean(&excess) / sd * periods_per_year.sqrt())
}

pub fn metrics(result: &BacktestResult, risk_free: f64, periods_per_year: f64) -> Result<Metrics> {
    if result.positions.is_empty() {
        return Err(Error::InvalidArgument("empty backtest result".into()));
    }
    Ok(Metrics {
        sharpe: sharpe_ratio(&result.period_returns[1..], risk_free, periods_per_year),
        max_drawdown: max_drawdown(&result.cumulative),
        mse: result.mse_out,
    })
}
