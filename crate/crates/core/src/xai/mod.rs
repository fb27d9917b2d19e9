//! Input sensitivities of a net along the time axis.
//!
//! For each row `x_t` of a design matrix the net is replicated exactly by
//! a local linear model `o_jt = b_jt + sum_i w_ijt x_it` (the LPD). Second
//! derivatives give the QPD, derivatives of the sample MSE the IPD, and any
//! differentiable [`XFunction`] of the output can be explained the same way.

mod hessian;
mod jacobian;
mod xfunction;

pub use hessian::{intercept_gradient, qpd, qpd_raw, xf_second_order, SYMMETRY_TOLERANCE};
pub use jacobian::{
    backward_sequence, forward_sequence, layer_intercept, lpd_backward, lpd_forward,
    synthetic_intercept, LayerJacobians,
};
pub use xfunction::{
    CustomXFunction, OutputIdentity, SquaredError, SquaredOutput, WindowSharpe, XFunction,
};

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::data::ScalingParams;
use crate::error::{Error, Result};
use crate::net::FeedforwardNet;

/// One `T x (n+1)` matrix per output neuron: column 0 is the synthetic
/// intercept, columns `1..=n` the sensitivities `d o_jt / d x_it`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpdSeries {
    pub per_output: Vec<Array2<f64>>,
}

impl LpdSeries {
    pub fn rows(&self) -> usize {
        self.per_output[0].nrows()
    }

    pub fn lags(&self) -> usize {
        self.per_output[0].ncols() - 1
    }

    pub fn output(&self, j: usize) -> &Array2<f64> {
        &self.per_output[j]
    }

    /// Re-expresses the replication in original units: weights are multiplied by
    /// `range_y / range_x` and the intercept absorbs both offsets, so that
    /// `unscale_y(o) = b' + sum_i w'_i unscale_x(x_i)` holds exactly as before.
    pub fn back_transformed(&self, scaling_x: ScalingParams, scaling_y: ScalingParams) -> Self {
        let ratio = scaling_y.range() / scaling_x.range();
        let per_output = self
            .per_output
            .iter()
            .map(|m| {
                let mut out = m.clone();
                for mut row in out.rows_mut() {
                    let mut weight_sum = 0.0;
                    for i in 1..row.len() {
                        row[i] *= ratio;
                        weight_sum += row[i];
                    }
                    row[0] = scaling_y.min + scaling_y.range() * row[0] - scaling_x.min * weight_sum;
                }
                out
            })
            .collect();
        Self { per_output }
    }
}

/// How much of each per-time-point QPD matrix is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QpdStorage {
    #[default]
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpdData {
    /// `T x n` diagonal second derivatives.
    Diagonal(Array2<f64>),
    /// `T x n x n` full matrices.
    Full(Array3<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpdSeries {
    pub per_output: Vec<QpdData>,
}

/// `T x n` matrix of `d MSE / d x_it`.
#[derive(Debug, Clone, PartialEq)]
pub struct IpdSeries {
    pub values: Array2<f64>,
}

fn check_columns(net: &FeedforwardNet, x: ArrayView2<f64>) -> Result<()> {
    let n = net.architecture().inputs();
    if x.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "design matrix columns",
            expected: n,
            got: x.ncols(),
        });
    }
    Ok(())
}

/// Evaluates `f` on every row in parallel and returns the results in row order.
fn per_row<T: Send>(
    x: ArrayView2<f64>,
    f: impl Fn(ArrayView1<f64>) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..x.nrows())
        .into_par_iter()
        .map(|t| f(x.row(t)).map_err(|e| e.at_row(t)))
        .collect()
}

/// LPD of every output for every row of `x`.
pub fn lpd_series(net: &FeedforwardNet, x: ArrayView2<f64>) -> Result<LpdSeries> {
    check_columns(net, x)?;
    let n = x.ncols();
    let n_p = net.architecture().outputs();
    let rows = per_row(x, |row| {
        let acts = net.forward(row)?;
        let jac = backward_sequence(net, &acts).swap_remove(0);
        let o = acts.output();
        Ok((0..n_p)
            .map(|j| {
                let mut r = Array1::zeros(n + 1);
                r[0] = synthetic_intercept(o[j], jac.column(j), row);
                r.slice_mut(ndarray::s![1..]).assign(&jac.column(j));
                r
            })
            .collect::<Vec<_>>())
    })?;
    let per_output = (0..n_p)
        .map(|j| {
            let mut m = Array2::zeros((x.nrows(), n + 1));
            for (t, r) in rows.iter().enumerate() {
                m.row_mut(t).assign(&r[j]);
            }
            m
        })
        .collect();
    Ok(LpdSeries { per_output })
}

/// QPD of every output for every row of `x`.
pub fn qpd_series(net: &FeedforwardNet, x: ArrayView2<f64>, storage: QpdStorage) -> Result<QpdSeries> {
    check_columns(net, x)?;
    let n = x.ncols();
    let n_p = net.architecture().outputs();
    let rows = per_row(x, |row| (0..n_p).map(|j| qpd(net, row, j)).collect::<Result<Vec<_>>>())?;
    let per_output = (0..n_p)
        .map(|j| match storage {
            QpdStorage::Diagonal => {
                let mut m = Array2::zeros((x.nrows(), n));
                for (t, q) in rows.iter().enumerate() {
                    m.row_mut(t).assign(&q[j].diag());
                }
                QpdData::Diagonal(m)
            }
            QpdStorage::Full => {
                let mut m = Array3::zeros((x.nrows(), n, n));
                for (t, q) in rows.iter().enumerate() {
                    m.index_axis_mut(Axis(0), t).assign(&q[j]);
                }
                QpdData::Full(m)
            }
        })
        .collect();
    Ok(QpdSeries { per_output })
}

/// Sensitivity of `xf(o(x))` to each input: `J grad xf`, length `n`.
pub fn xf_first_order(net: &FeedforwardNet, x: ArrayView1<f64>, xf: &dyn XFunction) -> Result<Array1<f64>> {
    let acts = net.forward(x)?;
    let grad = xf.gradient(acts.output().view()).ok_or(Error::MissingDerivative("gradient"))?;
    let jac = backward_sequence(net, &acts).swap_remove(0);
    if grad.len() != jac.ncols() {
        return Err(Error::DimensionMismatch {
            what: "x-function gradient length",
            expected: jac.ncols(),
            got: grad.len(),
        });
    }
    Ok(jac.dot(&grad))
}

/// Per-output split of [`xf_first_order`]: column `j` is `dxf/do_j * d o_j / dx`.
pub fn xf_first_order_by_output(
    net: &FeedforwardNet,
    x: ArrayView1<f64>,
    xf: &dyn XFunction,
) -> Result<Array2<f64>> {
    let acts = net.forward(x)?;
    let grad = xf.gradient(acts.output().view()).ok_or(Error::MissingDerivative("gradient"))?;
    let mut jac = backward_sequence(net, &acts).swap_remove(0);
    if grad.len() != jac.ncols() {
        return Err(Error::DimensionMismatch {
            what: "x-function gradient length",
            expected: jac.ncols(),
            got: grad.len(),
        });
    }
    jacobian::scale_columns(&mut jac, &grad);
    Ok(jac)
}

/// `T x n` first-order sensitivities of a time-varying X-function; `xf_at(t)`
/// supplies the function for row `t`.
pub fn xf_series<F>(net: &FeedforwardNet, x: ArrayView2<f64>, xf_at: F) -> Result<Array2<f64>>
where
    F: Fn(usize) -> Box<dyn XFunction> + Sync,
{
    check_columns(net, x)?;
    let rows: Vec<Array1<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|t| xf_first_order(net, x.row(t), xf_at(t).as_ref()).map_err(|e| e.at_row(t)))
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((x.nrows(), x.ncols()));
    for (t, r) in rows.iter().enumerate() {
        out.row_mut(t).assign(r);
    }
    Ok(out)
}

/// `dmse_it = (2/T) (o_t - y_t) d o_t / d x_it` for output `j`, differentiating
/// with respect to the single design-matrix entry.
pub fn ipd_series(net: &FeedforwardNet, x: ArrayView2<f64>, y: ArrayView1<f64>, j: usize) -> Result<IpdSeries> {
    check_columns(net, x)?;
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if j >= net.architecture().outputs() {
        return Err(Error::InvalidArgument(format!("output index {j} out of range")));
    }
    let weight = 1.0 / x.nrows() as f64;
    let values = xf_series(net, x, |t| {
        Box::new(SquaredError {
            output: j,
            target: y[t],
            weight,
        })
    })?;
    Ok(IpdSeries { values })
}

/// One-sided difference quotient `(xf(x_it + delta) - xf(x_it)) / delta`,
/// where `xf` is evaluated on the whole design matrix. The result depends on
/// `delta` and is subject to cancellation for small steps.
pub fn discrete_proxy<F>(xf: F, x: ArrayView2<f64>, i: usize, t: usize, delta: f64) -> Result<f64>
where
    F: Fn(ArrayView2<f64>) -> f64,
{
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")));
    }
    if t >= x.nrows() || i >= x.ncols() {
        return Err(Error::InvalidArgument(format!(
            "entry ({t}, {i}) outside {:?}",
            x.dim()
        )));
    }
    let base = xf(x);
    let mut shifted = x.to_owned();
    shifted[[t, i]] += delta;
    Ok((xf(shifted.view()) - base) / delta)
}
