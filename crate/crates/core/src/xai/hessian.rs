//! Second-order input sensitivities (QPD) and their X-function extension.
//!
//! The backward sequence `dA^b(k)` is differentiated layer by layer with
//! respect to the inputs. At a hidden layer `dA^b(k) = Z1 Z2` with
//! `Z1 = W^(k+1)` row-scaled by `A^(k)(1 - A^(k))` and `Z2 = dA^b(k+1)`,
//! so its derivative splits into `Z1 dZ2` (carried down from layer `k+1`)
//! and `dZ1 Z2`, where `dZ1` brings in the second sigmoid derivative
//! `A(1 - A)(1 - 2A)` and the forward sensitivities `dA^f(k-1) W^k` of the
//! pre-activations. The input layer closes with `QPD = W^(1) ddA^(1)'`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::jacobian::{curvatures, forward_sequence, scale_columns, slopes};
use super::xfunction::XFunction;
use crate::error::{Error, Result};
use crate::net::{FeedforwardNet, LayerActivations};

/// Asymmetry above which the recursion is reported as inconsistent.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Input Hessian of the scalar `xf(o)` given `grad = dxf/do` and optionally
/// `hess = d2xf/do2` at the current output. Not symmetrized.
pub(crate) fn second_order_raw(
    net: &FeedforwardNet,
    acts: &LayerActivations,
    grad: ArrayView1<f64>,
    hess: Option<ArrayView2<f64>>,
) -> Array2<f64> {
    let p = net.depth();
    let fwd = forward_sequence(net, acts);

    // output layer: g = dxf/dz^(p), dd = d g / dx  (n x n_p)
    let s_p = slopes(net, acts, p);
    let c_p = curvatures(net, acts, p);
    let mut g: Array1<f64> = &grad * &s_p;
    let mut dd = fwd[p - 1].dot(net.weight(p));
    scale_columns(&mut dd, &(&grad * &c_p));
    if let Some(h) = hess {
        let mut cross = fwd[p].dot(&h);
        scale_columns(&mut cross, &s_p);
        dd += &cross;
    }

    for k in (1..p).rev() {
        let w_next = net.weight(k + 1);
        let s_k = slopes(net, acts, k);
        let c_k = curvatures(net, acts, k);
        let u = w_next.dot(&g);

        // Z1 dZ2
        let mut carried = dd.dot(&w_next.t());
        scale_columns(&mut carried, &s_k);
        // dZ1 Z2
        let mut fresh = fwd[k - 1].dot(net.weight(k));
        scale_columns(&mut fresh, &(&c_k * &u));

        dd = carried + fresh;
        g = &s_k * &u;
    }

    net.weight(1).dot(&dd.t())
}

fn max_asymmetry(q: &Array2<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..q.nrows() {
        for k in (i + 1)..q.ncols() {
            worst = worst.max((q[[i, k]] - q[[k, i]]).abs());
        }
    }
    worst
}

fn symmetrized(q: Array2<f64>) -> Result<Array2<f64>> {
    let asym = max_asymmetry(&q);
    if !(asym <= SYMMETRY_TOLERANCE) {
        return Err(Error::RecursionInconsistency(asym));
    }
    Ok((&q + &q.t()) * 0.5)
}

fn check_output(net: &FeedforwardNet, j: usize) -> Result<()> {
    let outputs = net.architecture().outputs();
    if j >= outputs {
        return Err(Error::InvalidArgument(format!(
            "output index {j} outside 0..{outputs}"
        )));
    }
    Ok(())
}

/// QPD of output `j` before symmetrization.
pub fn qpd_raw(net: &FeedforwardNet, x: ArrayView1<f64>, j: usize) -> Result<Array2<f64>> {
    check_output(net, j)?;
    let acts = net.forward(x)?;
    let mut e = Array1::zeros(net.architecture().outputs());
    e[j] = 1.0;
    Ok(second_order_raw(net, &acts, e.view(), None))
}

/// `(n, n)` matrix of second derivatives `d2 o_j / dx_i dx_k`.
pub fn qpd(net: &FeedforwardNet, x: ArrayView1<f64>, j: usize) -> Result<Array2<f64>> {
    symmetrized(qpd_raw(net, x, j)?)
}

/// Gradient of the synthetic intercept with respect to the inputs: `-QPD x`.
pub fn intercept_gradient(qpd: ArrayView2<f64>, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    if qpd.nrows() != x.len() || qpd.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            what: "QPD dimension",
            expected: x.len(),
            got: qpd.nrows(),
        });
    }
    Ok(-qpd.dot(&x))
}

/// `(n, n)` input Hessian of `xf(o(x))`.
pub fn xf_second_order(net: &FeedforwardNet, x: ArrayView1<f64>, xf: &dyn XFunction) -> Result<Array2<f64>> {
    let acts = net.forward(x)?;
    let o = acts.output().view();
    let grad = xf.gradient(o).ok_or(Error::MissingDerivative("gradient"))?;
    let hess = xf.hessian(o).ok_or(Error::MissingDerivative("hessian"))?;
    let n_p = net.architecture().outputs();
    if grad.len() != n_p || hess.dim() != (n_p, n_p) {
        return Err(Error::DimensionMismatch {
            what: "x-function derivative dimension",
            expected: n_p,
            got: grad.len(),
        });
    }
    symmetrized(second_order_raw(net, &acts, grad.view(), Some(hess.view())))
}
