//! Series ingestion, log-returns, unit-interval scaling, lagged design
//! matrices and in-/out-of-sample splitting.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dated scalar observations with strictly increasing dates and finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "series values",
                expected: dates.len(),
                got: values.len(),
            });
        }
        for i in 1..dates.len() {
            if dates[i] == dates[i - 1] {
                return Err(Error::DuplicateTimestamp(dates[i]));
            }
            if dates[i] < dates[i - 1] {
                return Err(Error::Unordered(i));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { dates, values })
    }

    /// Builds a series from unordered `(date, value)` pairs, sorting by date.
    pub fn from_pairs(mut pairs: Vec<(NaiveDate, f64)>) -> Result<Self> {
        pairs.sort_by_key(|p| p.0);
        let (dates, values) = pairs.into_iter().unzip();
        Self::new(dates, values)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

const DATE_FORMAT: &str = "%Y-%m-%d";

fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).map_err(|e| Error::Parse {
        line,
        msg: format!("bad date {s:?}: {e}"),
    })
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|e| Error::Parse {
        line,
        msg: format!("bad value {s:?}: {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value {s:?}"),
        });
    }
    Ok(v)
}

/// Reads a `date,<column>` CSV. Line numbers in errors count the header as line 1.
pub fn read_csv<R: Read>(reader: R, column: &str) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("missing column {name:?}"),
        })
    };
    let date_col = find("date")?;
    let value_col = find(column)?;

    let mut pairs = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let field = |c: usize| {
            record.get(c).ok_or_else(|| Error::Parse {
                line,
                msg: "missing field".into(),
            })
        };
        let date = parse_date(field(date_col)?, line)?;
        let value = parse_value(field(value_col)?, line)?;
        pairs.push((date, value));
    }
    TimeSeries::from_pairs(pairs)
}

pub fn load_csv(path: impl AsRef<Path>, column: &str) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), column)
}

pub fn write_csv<W: Write>(series: &TimeSeries, mut out: W) -> Result<()> {
    writeln!(out, "date,value")?;
    for (d, v) in series.dates.iter().zip(&series.values) {
        writeln!(out, "{},{}", d.format(DATE_FORMAT), v)?;
    }
    Ok(())
}

/// `r_t = ln(p_t) - ln(p_{t-1})`, dated at `t`.
pub fn log_returns(prices: &TimeSeries) -> Result<TimeSeries> {
    if prices.len() < 2 {
        return Err(Error::InvalidArgument(
            "log returns need at least two prices".into(),
        ));
    }
    if let Some((index, &value)) = prices.values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositivePrice { index, value });
    }
    let values = prices
        .values
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect();
    TimeSeries::new(prices.dates[1..].to_vec(), values)
}

/// Affine map of `[min, max]` onto the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: f64,
    pub max: f64,
}

impl ScalingParams {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::InvalidArgument("scaling bounds must be finite".into()));
        }
        if max <= min {
            return Err(Error::DegenerateRange(min));
        }
        Ok(Self { min, max })
    }

    /// Fits min/max over all values.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>) -> Result<Self> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if min == f64::INFINITY {
            return Err(Error::InvalidArgument("cannot fit scaling on empty data".into()));
        }
        Self::new(min, max)
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn scale(&self, v: f64) -> f64 {
        (v - self.min) / self.range()
    }

    pub fn unscale(&self, v: f64) -> f64 {
        self.min + v * self.range()
    }
}

pub fn scale_unit(values: &[f64]) -> Result<(Vec<f64>, ScalingParams)> {
    let params = ScalingParams::fit(values)?;
    Ok((values.iter().map(|&v| params.scale(v)).collect(), params))
}

/// Lagged regression data: row `t` holds `[y_{t-1}, ..., y_{t-n}]` and target `y_t`.
///
/// Raw copies are kept next to the scaled matrices; `x`/`y` are always the
/// raw values mapped through `scaling_x`/`scaling_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDataset {
    dates: Vec<NaiveDate>,
    raw_x: Array2<f64>,
    raw_y: Array1<f64>,
    x: Array2<f64>,
    y: Array1<f64>,
    scaling_x: ScalingParams,
    scaling_y: ScalingParams,
}

impl LaggedDataset {
    /// Assembles a dataset from raw columns. Scaling is fitted on the given
    /// rows unless explicit parameters are supplied.
    pub fn from_raw(
        dates: Vec<NaiveDate>,
        raw_x: Array2<f64>,
        raw_y: Array1<f64>,
        scaling: Option<(ScalingParams, ScalingParams)>,
    ) -> Result<Self> {
        let rows = dates.len();
        if raw_x.nrows() != rows {
            return Err(Error::DimensionMismatch {
                what: "design matrix rows",
                expected: rows,
                got: raw_x.nrows(),
            });
        }
        if raw_y.len() != rows {
            return Err(Error::DimensionMismatch {
                what: "target length",
                expected: rows,
                got: raw_y.len(),
            });
        }
        if raw_x.ncols() == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one lag".into()));
        }
        if let Some(i) = raw_x.iter().chain(raw_y.iter()).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        for i in 1..rows {
            if dates[i] <= dates[i - 1] {
                return Err(Error::Unordered(i));
            }
        }
        let (scaling_x, scaling_y) = match scaling {
            Some(s) => s,
            None => (ScalingParams::fit(raw_x.iter())?, ScalingParams::fit(raw_y.iter())?),
        };
        let x = raw_x.mapv(|v| scaling_x.scale(v));
        let y = raw_y.mapv(|v| scaling_y.scale(v));
        Ok(Self {
            dates,
            raw_x,
            raw_y,
            x,
            y,
            scaling_x,
            scaling_y,
        })
    }

    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn lags(&self) -> usize {
        self.raw_x.ncols()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Scaled design matrix.
    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    /// Scaled targets.
    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn raw_x(&self) -> &Array2<f64> {
        &self.raw_x
    }

    pub fn raw_y(&self) -> &Array1<f64> {
        &self.raw_y
    }

    pub fn scaling_x(&self) -> ScalingParams {
        self.scaling_x
    }

    pub fn scaling_y(&self) -> ScalingParams {
        self.scaling_y
    }

    /// Same rows, rescaled with the given parameters.
    pub fn rescaled(&self, scaling_x: ScalingParams, scaling_y: ScalingParams) -> Self {
        Self {
            dates: self.dates.clone(),
            raw_x: self.raw_x.clone(),
            raw_y: self.raw_y.clone(),
            x: self.raw_x.mapv(|v| scaling_x.scale(v)),
            y: self.raw_y.mapv(|v| scaling_y.scale(v)),
            scaling_x,
            scaling_y,
        }
    }

    /// Raw input available after observing row `t`'s target: `[y_t, x_{t,1}, ..., x_{t,n-1}]`.
    fn following_raw_input(&self, t: usize) -> Array1<f64> {
        let n = self.lags();
        let mut next = Array1::zeros(n);
        next[0] = self.raw_y[t];
        for i in 1..n {
            next[i] = self.raw_x[[t, i - 1]];
        }
        next
    }

    /// Scaled inputs keyed by decision date: row `t` holds the lags known at
    /// the close of `dates[t]`, i.e. the input of the forecast for the
    /// following period. The last row is the input for the first unseen period.
    pub fn decision_inputs(&self) -> Array2<f64> {
        let rows = self.rows();
        let mut d = Array2::zeros((rows, self.lags()));
        for t in 0..rows {
            let raw = if t + 1 < rows {
                self.raw_x.row(t + 1).to_owned()
            } else {
                self.following_raw_input(t)
            };
            d.row_mut(t).assign(&raw.mapv(|v| self.scaling_x.scale(v)));
        }
        d
    }

    /// FNV-1a hash over dates and raw values, as 16 hex digits.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for d in &self.dates {
            feed(d.format(DATE_FORMAT).to_string().as_bytes());
        }
        for v in self.raw_x.iter().chain(self.raw_y.iter()) {
            feed(&v.to_bits().to_le_bytes());
        }
        format!("{h:016x}")
    }

    fn slice_rows(&self, range: std::ops::Range<usize>) -> (Vec<NaiveDate>, Array2<f64>, Array1<f64>) {
        (
            self.dates[range.clone()].to_vec(),
            self.raw_x.slice(ndarray::s![range.clone(), ..]).to_owned(),
            self.raw_y.slice(ndarray::s![range]).to_owned(),
        )
    }
}

/// Builds the lagged design matrix with `lags` columns. Scaling is fitted on
/// the full dataset; [`split`] refits on the in-sample part.
pub fn build_lagged(series: &TimeSeries, lags: usize) -> Result<LaggedDataset> {
    let len = series.len();
    if lags == 0 || lags >= len {
        return Err(Error::InvalidArgument(format!(
            "lag count {lags} must be in 1..{len}"
        )));
    }
    let rows = len - lags;
    let v = series.values();
    let raw_x = Array2::from_shape_fn((rows, lags), |(r, i)| v[r + lags - 1 - i]);
    let raw_y = Array1::from_iter(v[lags..].iter().copied());
    LaggedDataset::from_raw(series.dates()[lags..].to_vec(), raw_x, raw_y, None)
}

/// Splits at `boundary`: rows dated on or before it are in-sample. Scaling
/// is refitted on the in-sample rows and reused, unclipped, out of sample.
pub fn split(data: &LaggedDataset, boundary: NaiveDate) -> Result<(LaggedDataset, LaggedDataset)> {
    let dates = data.dates();
    let (first, last) = match (dates.first(), dates.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(Error::InvalidArgument("cannot split an empty dataset".into())),
    };
    if boundary < first || boundary >= last {
        return Err(Error::InvalidArgument(format!(
            "split boundary {boundary} outside [{first}, {last})"
        )));
    }
    let cut = dates.partition_point(|d| *d <= boundary);
    let (d_in, x_in, y_in) = data.slice_rows(0..cut);
    let in_sample = LaggedDataset::from_raw(d_in, x_in, y_in, None)?;
    let scaling = (in_sample.scaling_x(), in_sample.scaling_y());
    let (d_out, x_out, y_out) = data.slice_rows(cut..data.rows());
    let out_sample = LaggedDataset::from_raw(d_out, x_out, y_out, Some(scaling))?;
    Ok((in_sample, out_sample))
}

/// Writes raw rows as `date,target,lag_1..lag_n`.
pub fn write_dataset_csv<W: Write>(data: &LaggedDataset, mut out: W) -> Result<()> {
    write!(out, "date,target")?;
    for i in 1..=data.lags() {
        write!(out, ",lag_{i}")?;
    }
    writeln!(out)?;
    for t in 0..data.rows() {
        write!(out, "{},{}", data.dates[t].format(DATE_FORMAT), data.raw_y[t])?;
        for v in data.raw_x.row(t) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads a file written by [`write_dataset_csv`], applying `scaling` when given.
pub fn read_dataset_csv<R: Read>(
    reader: R,
    scaling: Option<(ScalingParams, ScalingParams)>,
) -> Result<LaggedDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("date") || headers.get(1) != Some("target") || headers.len() < 3 {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header date,target,lag_1,...".into(),
        });
    }
    let lags = headers.len() - 2;
    let mut dates = Vec::new();
    let mut flat = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        dates.push(parse_date(&record[0], line)?);
        ys.push(parse_value(&record[1], line)?);
        for c in 0..lags {
            flat.push(parse_value(&record[c + 2], line)?);
        }
    }
    let raw_x = Array2::from_shape_vec((dates.len(), lags), flat)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    LaggedDataset::from_raw(dates, raw_x, Array1::from(ys), scaling)
}
