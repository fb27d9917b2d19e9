//! Ensemble statistics of sensitivity flows and the signals built on them.
//!
//! Rolling quantiles use only the `W` observations strictly before `t` and
//! the lower empirical order statistic at rank `ceil(q W)`; the first `W`
//! points are a warm-up with full exposure and no defined signal.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Cross-ensemble mean, standard deviation and their ratio, entrywise over `T x c` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleLpdStats {
    pub mean: Array2<f64>,
    /// Square root of the mean squared deviation (divisor `M`).
    pub sigma: Array2<f64>,
    /// `mean / sigma`; NaN where `sigma == 0`.
    pub tstat: Array2<f64>,
}

impl EnsembleLpdStats {
    pub fn tstat_defined(&self, t: usize, c: usize) -> bool {
        self.sigma[[t, c]] > 0.0
    }

    /// Index of the column with the largest absolute t-statistic at row `t`.
    pub fn tstat_argmax(&self, t: usize) -> Option<usize> {
        let row = self.tstat.row(t);
        (0..row.len())
            .filter(|&c| self.tstat_defined(t, c))
            .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()))
    }
}

fn check_aligned(members: &[Array2<f64>], min_members: usize) -> Result<()> {
    if members.len() < min_members {
        return Err(Error::InsufficientMembers {
            needed: min_members,
            got: members.len(),
        });
    }
    let dim = members[0].dim();
    for m in members {
        if m.dim() != dim {
            return Err(Error::InvalidArgument(format!(
                "member shape {:?} differs from {:?}",
                m.dim(),
                dim
            )));
        }
    }
    Ok(())
}

pub fn ensemble_lpd_stats(members: &[Array2<f64>]) -> Result<EnsembleLpdStats> {
    check_aligned(members, 2)?;
    let m = members.len() as f64;
    let mut mean = Array2::zeros(members[0].dim());
    for member in members {
        mean += member;
    }
    mean /= m;
    let mut sq = Array2::<f64>::zeros(mean.dim());
    for member in members {
        sq.zip_mut_with(&(member - &mean), |s, d| *s += d * d);
    }
    let sigma = sq.mapv(|s| (s / m).sqrt());
    let mut tstat = mean.clone();
    tstat.zip_mut_with(&sigma, |t, &s| *t = if s > 0.0 { *t / s } else { f64::NAN });
    Ok(EnsembleLpdStats { mean, sigma, tstat })
}

/// Correlation diagnostics of member sensitivity flows; `None` marks
/// zero-variance entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelations {
    pub reference: usize,
    /// Correlation over time of each mean column with the reference mean column.
    pub across_means: Vec<Option<f64>>,
    /// Per column, the average over members of corr(member column, mean column).
    pub member_vs_mean: Vec<Option<f64>>,
}

pub fn lpd_cross_correlations(members: &[Array2<f64>], reference: usize) -> Result<CrossCorrelations> {
    check_aligned(members, 1)?;
    let (rows, cols) = members[0].dim();
    if rows < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 time points, got {rows}")));
    }
    if reference >= cols {
        return Err(Error::InvalidArgument(format!("reference column {reference} out of range")));
    }
    let mut mean = Array2::<f64>::zeros((rows, cols));
    for m in members {
        mean += m;
    }
    mean /= members.len() as f64;
    let column = |a: &Array2<f64>, c: usize| a.column(c).to_vec();
    let ref_col = column(&mean, reference);
    let across_means = (0..cols)
        .map(|c| stats::pearson(&column(&mean, c), &ref_col))
        .collect();
    let member_vs_mean = (0..cols)
        .map(|c| {
            let mc = column(&mean, c);
            let cors: Vec<f64> = members
                .iter()
                .filter_map(|m| stats::pearson(&column(m, c), &mc))
                .collect();
            (!cors.is_empty()).then(|| stats::mean(&cors))
        })
        .collect();
    Ok(CrossCorrelations {
        reference,
        across_means,
        member_vs_mean,
    })
}

/// 1-based rank `ceil(q W)` clamped to `1..=W`, treating products within
/// 1e-9 of an integer as that integer.
pub fn quantile_rank(q: f64, window: usize) -> usize {
    let x = q * window as f64;
    let r = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.ceil() };
    (r as usize).clamp(1, window)
}

fn check_quantile_args(len: usize, window: usize, q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile probability {q} not in (0, 1)")));
    }
    if window < 2 {
        return Err(Error::InvalidArgument("window must be at least 2".into()));
    }
    if window >= len {
        return Err(Error::InvalidArgument(format!(
            "window {window} must be shorter than the series ({len})"
        )));
    }
    Ok(())
}

/// Empirical `q`-quantile of the `window` values strictly before each `t`;
/// `None` for the first `window` points.
pub fn rolling_quantile(series: &[f64], window: usize, q: f64) -> Result<Vec<Option<f64>>> {
    check_quantile_args(series.len(), window, q)?;
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let rank = quantile_rank(q, window);
    let mut sorted: Vec<f64> = series[..window].to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = vec![None; window];
    out.reserve(series.len() - window);
    for t in window..series.len() {
        out.push(Some(sorted[rank - 1]));
        let old = series[t - window];
        let at = sorted.partition_point(|v| v.total_cmp(&old).is_lt());
        sorted.remove(at);
        let new = series[t];
        let at = sorted.partition_point(|v| v.total_cmp(&new).is_le());
        sorted.insert(at, new);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    Above,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerKind {
    Lower,
    Upper,
    TwoSided,
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    None,
    Below,
    Above,
}

/// Per-time-point market exposure in `[0, 1]`, stored as the exact fraction
/// `active / components`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSeries {
    pub kind: TriggerKind,
    pub components: usize,
    pub active: Vec<usize>,
    pub exposure: Vec<f64>,
    /// `false` during the quantile warm-up.
    pub defined: Vec<bool>,
    pub triggers: Vec<Trigger>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl SignalSeries {
    pub fn len(&self) -> usize {
        self.exposure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exposure.is_empty()
    }

    pub fn triggered(&self) -> impl Iterator<Item = bool> + '_ {
        self.triggers.iter().map(|t| *t != Trigger::None)
    }

    /// The time points in `range`, e.g. an out-of-sample window.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            kind: self.kind,
            components: self.components,
            active: self.active[range.clone()].to_vec(),
            exposure: self.exposure[range.clone()].to_vec(),
            defined: self.defined[range.clone()].to_vec(),
            triggers: self.triggers[range.clone()].to_vec(),
            lower: self.lower[range.clone()].to_vec(),
            upper: self.upper[range].to_vec(),
        }
    }
}

/// Exit signal on one sensitivity column: exposure drops to zero when the
/// (absolute) value crosses its own rolling quantile on the chosen side.
/// The upper threshold is the `1 - q` quantile.
pub fn exit_signals(column: &[f64], window: usize, q: f64, side: Side, use_absolute: bool) -> Result<SignalSeries> {
    let values: Vec<f64> = if use_absolute {
        column.iter().map(|v| v.abs()).collect()
    } else {
        column.to_vec()
    };
    let len = values.len();
    let lower = match side {
        Side::Below | Side::TwoSided => rolling_quantile(&values, window, q)?,
        Side::Above => {
            check_quantile_args(len, window, q)?;
            vec![None; len]
        }
    };
    let upper = match side {
        Side::Above | Side::TwoSided => rolling_quantile(&values, window, 1.0 - q)?,
        Side::Below => vec![None; len],
    };
    let mut triggers = vec![Trigger::None; len];
    let mut active = vec![1; len];
    for t in window..len {
        let v = values[t];
        if lower[t].is_some_and(|lo| v < lo) {
            triggers[t] = Trigger::Below;
        } else if upper[t].is_some_and(|hi| v > hi) {
            triggers[t] = Trigger::Above;
        }
        if triggers[t] != Trigger::None {
            active[t] = 0;
        }
    }
    let kind = match side {
        Side::Below => TriggerKind::Lower,
        Side::Above => TriggerKind::Upper,
        Side::TwoSided => TriggerKind::TwoSided,
    };
    Ok(SignalSeries {
        kind,
        components: 1,
        exposure: active.iter().map(|&a| a as f64).collect(),
        active,
        defined: (0..len).map(|t| t >= window).collect(),
        triggers,
        lower,
        upper,
    })
}

/// Exposure `(1/m) sum_i 1{column_i,t > rolling q-quantile of column_i}`.
/// Points where every column is below are marked as triggered.
pub fn aggregate_exposure(columns: &[Vec<f64>], window: usize, q: f64) -> Result<SignalSeries> {
    let first = columns
        .first()
        .ok_or_else(|| Error::InvalidArgument("no columns to aggregate".into()))?;
    let len = first.len();
    let mut active = vec![columns.len(); len];
    for (c, col) in columns.iter().enumerate() {
        if col.len() != len {
            return Err(Error::DimensionMismatch {
                what: "aggregated column length",
                expected: len,
                got: col.len(),
            });
        }
        let quant = rolling_quantile(col, window, q).map_err(|e| e.at_row(c))?;
        for t in window..len {
            if !quant[t].is_some_and(|qv| col[t] > qv) {
                active[t] -= 1;
            }
        }
    }
    let m = columns.len();
    Ok(SignalSeries {
        kind: TriggerKind::Aggregate,
        components: m,
        exposure: active.iter().map(|&a| a as f64 / m as f64).collect(),
        defined: (0..len).map(|t| t >= window).collect(),
        triggers: active
            .iter()
            .map(|&a| if a == 0 { Trigger::Below } else { Trigger::None })
            .collect(),
        active,
        lower: vec![None; len],
        upper: vec![None; len],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Critical,
    Neutral,
    Auspicious,
}

/// Critical below the lower `q` quantile, auspicious above the `1 - q`
/// quantile, neutral in between; `None` during warm-up.
pub fn classify_regimes(column: &[f64], window: usize, q: f64, use_absolute: bool) -> Result<Vec<Option<Regime>>> {
    let s = exit_signals(column, window, q, Side::TwoSided, use_absolute)?;
    Ok((0..s.len())
        .map(|t| {
            s.defined[t].then_some(match s.triggers[t] {
                Trigger::Below => Regime::Critical,
                Trigger::Above => Regime::Auspicious,
                Trigger::None => Regime::Neutral,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub regime: String,
    pub count: usize,
    /// Percentage of positive next-period returns; `None` for an empty regime.
    pub proportion_positive: Option<f64>,
    /// Mean next-period return in percent; `None` for an empty regime.
    pub average_next_return: Option<f64>,
}

/// Rows for critical, neutral, auspicious and all defined time points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub rows: Vec<DriftRow>,
}

impl DriftReport {
    pub fn row(&self, regime: &str) -> Option<&DriftRow> {
        self.rows.iter().find(|r| r.regime == regime)
    }
}

/// Pairs `regimes[t]` with `returns[t + 1]`.
pub fn drift_analysis(regimes: &[Option<Regime>], returns: &[f64]) -> Result<DriftReport> {
    if regimes.len() != returns.len() {
        return Err(Error::DimensionMismatch {
            what: "returns length",
            expected: regimes.len(),
            got: returns.len(),
        });
    }
    let row = |name: &str, filter: &dyn Fn(Regime) -> bool| {
        let next: Vec<f64> = (0..regimes.len().saturating_sub(1))
            .filter(|&t| regimes[t].is_some_and(filter))
            .map(|t| returns[t + 1])
            .collect();
        let count = next.len();
        DriftRow {
            regime: name.to_string(),
            count,
            proportion_positive: (count > 0)
                .then(|| 100.0 * next.iter().filter(|r| **r > 0.0).count() as f64 / count as f64),
            average_next_return: (count > 0).then(|| 100.0 * stats::mean(&next)),
        }
    };
    Ok(DriftReport {
        rows: vec![
            row("critical", &|r| r == Regime::Critical),
            row("neutral", &|r| r == Regime::Neutral),
            row("auspicious", &|r| r == Regime::Auspicious),
            row("all", &|_| true),
        ],
    })
}

/// Time-averaged consensus linear replication: intercept and per-lag weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicSummary {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

/// Column means over time of the mean-LPD (column 0 is the intercept).
pub fn heuristic_summary(mean_lpd: &Array2<f64>) -> Result<HeuristicSummary> {
    if mean_lpd.nrows() == 0 || mean_lpd.ncols() < 2 {
        return Err(Error::InvalidArgument("empty mean-LPD".into()));
    }
    let means = mean_lpd.mean_axis(Axis(0)).unwrap();
    Ok(HeuristicSummary {
        intercept: means[0],
        weights: means.iter().skip(1).copied().collect(),
    })
}

/// Which LPD columns a signal is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnChoice {
    Intercept,
    /// 1-based lag index.
    Lag(usize),
    LastLag,
    /// Intercept and all lags through [`aggregate_exposure`].
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub q: f64,
    pub window: usize,
    pub side: Side,
    pub use_absolute: bool,
    pub column: ColumnChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalPreset {
    /// Weekly-frequency exits on weak dependence: 1/7 quantile of |LPD|, 100-day window.
    BtcRm,
    /// Two-sided 1/20 exceedances of |LPD|, one-year (250-day) window.
    Fraud,
    /// Crisis triggering: 5% quantile of the intercept, 200-day window.
    SpCrisis,
}

impl SignalPreset {
    pub fn config(self) -> SignalConfig {
        match self {
            SignalPreset::BtcRm => SignalConfig {
                q: 1.0 / 7.0,
                window: 100,
                side: Side::Below,
                use_absolute: true,
                column: ColumnChoice::LastLag,
            },
            SignalPreset::Fraud => SignalConfig {
                q: 1.0 / 20.0,
                window: 250,
                side: Side::TwoSided,
                use_absolute: true,
                column: ColumnChoice::LastLag,
            },
            SignalPreset::SpCrisis => SignalConfig {
                q: 0.05,
                window: 200,
                side: Side::Below,
                use_absolute: false,
                column: ColumnChoice::Intercept,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalPreset::BtcRm => "btc-rm",
            SignalPreset::Fraud => "fraud",
            SignalPreset::SpCrisis => "sp-crisis",
        }
    }
}

impl std::str::FromStr for SignalPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "btc-rm" => Ok(SignalPreset::BtcRm),
            "fraud" => Ok(SignalPreset::Fraud),
            "sp-crisis" => Ok(SignalPreset::SpCrisis),
            other => Err(Error::InvalidArgument(format!("unknown signal preset {other:?}"))),
        }
    }
}

impl SignalConfig {
    /// Index into the `n + 1` LPD columns, or `None` for the aggregate rule.
    pub fn column_index(&self, lags: usize) -> Result<Option<usize>> {
        match self.column {
            ColumnChoice::Intercept => Ok(Some(0)),
            ColumnChoice::LastLag => Ok(Some(lags)),
            ColumnChoice::Lag(i) if (1..=lags).contains(&i) => Ok(Some(i)),
            ColumnChoice::Lag(i) => Err(Error::InvalidArgument(format!("lag {i} outside 1..={lags}"))),
            ColumnChoice::Aggregate => Ok(None),
        }
    }

    /// Runs the configured rule on a `T x (n+1)` LPD matrix.
    pub fn signals(&self, lpd: &Array2<f64>) -> Result<SignalSeries> {
        let lags = lpd.ncols().saturating_sub(1);
        match self.column_index(lags)? {
            Some(c) => exit_signals(&lpd.column(c).to_vec(), self.window, self.q, self.side, self.use_absolute),
            None => {
                let cols: Vec<Vec<f64>> = (0..lpd.ncols()).map(|c| lpd.column(c).to_vec()).collect();
                aggregate_exposure(&cols, self.window, self.q)
            }
        }
    }

    /// Regimes of the configured column (the intercept for the aggregate rule).
    pub fn regimes(&self, lpd: &Array2<f64>) -> Result<Vec<Option<Regime>>> {
        let lags = lpd.ncols().saturating_sub(1);
        let c = self.column_index(lags)?.unwrap_or(0);
        classify_regimes(&lpd.column(c).to_vec(), self.window, self.q, self.use_absolute)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_members_have_zero_sigma_and_undefined_tstat() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let s = ensemble_lpd_stats(&[a.clone(), a.clone(), a]).unwrap();
        assert!(s.sigma.iter().all(|&v| v == 0.0));
        assert!(s.tstat.iter().all(|v| v.is_nan()));
        assert!(!s.tstat_defined(0, 0));
        assert_eq!(s.tstat_argmax(0), None);
    }

    #[test]
    fn opposite_members_average_to_zero() {
        let a = array![[1.0, -2.0], [0.5, 4.0]];
        let s = ensemble_lpd_stats(&[a.clone(), -a.clone()]).unwrap();
        assert!(s.mean.iter().all(|&v| v == 0.0));
        assert_eq!(s.sigma, a.mapv(f64::abs));
    }

    #[test]
    fn stats_reject_bad_input() {
        let a = array![[1.0, 2.0]];
        assert!(ensemble_lpd_stats(&[a.clone()]).is_err());
        assert!(ensemble_lpd_stats(&[a, array![[1.0, 2.0, 3.0]]]).is_err());
    }

    #[test]
    fn cross_correlation_reference_is_one() {
        let m1 = array![[0.1, 1.0, 3.0], [0.2, 2.0, 1.0], [0.4, 3.5, 2.0], [0.3, 2.5, 0.0]];
        let m2 = &m1 * 1.5;
        let c = lpd_cross_correlations(&[m1, m2], 1).unwrap();
        assert!((c.across_means[1].unwrap() - 1.0).abs() < 1e-12);
        for v in &c.member_vs_mean {
            assert!((v.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_correlation_flags_constant_column() {
        let m = array![[1.0, 0.5], [1.0, 0.7], [1.0, 0.1]];
        let c = lpd_cross_correlations(&[m], 1).unwrap();
        assert!(c.across_means[0].is_none());
        assert!(c.member_vs_mean[0].is_none());
        assert!(lpd_cross_correlations(&[array![[1.0], [2.0]]], 0).is_err());
    }

    #[test]
    fn quantile_rank_examples() {
        assert_eq!(quantile_rank(0.05, 100), 5);
        assert_eq!(quantile_rank(1.0 / 7.0, 100), 15);
        assert_eq!(quantile_rank(0.07, 100), 7);
        assert_eq!(quantile_rank(0.05, 200), 10);
        assert_eq!(quantile_rank(0.001, 10), 1);
    }

    #[test]
    fn rolling_quantile_constant_and_ramp() {
        let c = vec![2.5; 10];
        let q = rolling_quantile(&c, 4, 0.3).unwrap();
        assert!(q[..4].iter().all(Option::is_none));
        assert!(q[4..].iter().all(|v| *v == Some(2.5)));

        let ramp: Vec<f64> = (1..=101).map(f64::from).collect();
        let q = rolling_quantile(&ramp, 100, 0.05).unwrap();
        assert_eq!(q[100], Some(5.0));
    }

    #[test]
    fn rolling_quantile_argument_errors() {
        let s = vec![1.0, 2.0, 3.0];
        assert!(rolling_quantile(&s, 3, 0.5).is_err());
        assert!(rolling_quantile(&s, 1, 0.5).is_err());
        assert!(rolling_quantile(&s, 2, 0.0).is_err());
        assert!(rolling_quantile(&s, 2, 1.0).is_err());
    }

    #[test]
    fn increasing_series_never_triggers_below() {
        let s: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let sig = exit_signals(&s, 10, 0.2, Side::Below, true).unwrap();
        assert!(sig.triggers.iter().all(|t| *t == Trigger::None));
        assert!(sig.exposure.iter().all(|&e| e == 1.0));
        assert!(!sig.defined[9] && sig.defined[10]);
    }

    #[test]
    fn two_sided_median_triggers_everywhere_without_ties() {
        let s: Vec<f64> = (0..60).map(|i| ((i * 37) % 61) as f64 + 0.5).collect();
        let sig = exit_signals(&s, 9, 0.5, Side::TwoSided, false).unwrap();
        for t in 9..60 {
            assert_ne!(sig.triggers[t], Trigger::None, "t = {t}");
            assert_eq!(sig.exposure[t], 0.0);
        }
    }

    #[test]
    fn aggregate_counts() {
        // window 2, q 0.5: threshold is the lower of the previous two values
        let up = vec![1.0, 2.0, 3.0, 4.0];
        let down = vec![4.0, 3.0, 2.0, 1.0];
        let all_up = aggregate_exposure(&[up.clone(), up.clone()], 2, 0.5).unwrap();
        assert_eq!(&all_up.exposure[2..], &[1.0, 1.0]);
        let none = aggregate_exposure(&[down.clone(), down.clone()], 2, 0.5).unwrap();
        assert_eq!(&none.exposure[2..], &[0.0, 0.0]);
        assert_eq!(none.triggers[2], Trigger::Below);
        let cols = vec![up.clone(), up.clone(), up, down.clone(), down.clone(), down];
        let half = aggregate_exposure(&cols, 2, 0.5).unwrap();
        assert_eq!(&half.exposure[2..], &[0.5, 0.5]);
        assert_eq!(&half.exposure[..2], &[1.0, 1.0]);
    }

    #[test]
    fn drift_all_positive_returns() {
        let regimes = vec![None, Some(Regime::Critical), Some(Regime::Neutral), Some(Regime::Neutral), None];
        let returns = vec![0.01, 0.02, 0.03, 0.04, 0.05];
        let r = drift_analysis(&regimes, &returns).unwrap();
        assert_eq!(r.row("all").unwrap().count, 3);
        assert_eq!(r.row("critical").unwrap().count, 1);
        for row in &r.rows[..2] {
            assert_eq!(row.proportion_positive, Some(100.0));
        }
        assert!(r.row("auspicious").unwrap().average_next_return.is_none());
        assert!((r.row("critical").unwrap().average_next_return.unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn heuristic_summary_echoes_constants() {
        let m = Array2::from_shape_fn((5, 3), |(_, c)| [0.0015, 0.065, 0.065][c]);
        let h = heuristic_summary(&m).unwrap();
        assert!((h.intercept - 0.0015).abs() < 1e-15);
        assert!(h.weights.iter().all(|w| (w - 0.065).abs() < 1e-15));
    }

    #[test]
    fn presets_match_documented_parameters() {
        let btc = SignalPreset::BtcRm.config();
        assert_eq!((btc.q, btc.window, btc.side), (1.0 / 7.0, 100, Side::Below));
        assert!(btc.use_absolute);
        let fraud = SignalPreset::Fraud.config();
        assert_eq!((fraud.q, fraud.window, fraud.side), (0.05, 250, Side::TwoSided));
        let sp = SignalPreset::SpCrisis.config();
        assert_eq!((sp.q, sp.window, sp.column), (0.05, 200, ColumnChoice::Intercept));
        assert_eq!("sp-crisis".parse::<SignalPreset>().unwrap(), SignalPreset::SpCrisis);
        assert!("nope".parse::<SignalPreset>().is_err());
    }
}
