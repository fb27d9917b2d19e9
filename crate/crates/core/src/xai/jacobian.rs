//! First-order input sensitivities: forward and backward chain-rule sequences.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::net::{FeedforwardNet, LayerActivations};

/// Per-layer input sensitivities at one time point, indexed by layer `k = 0..=p`.
///
/// `forward[k]` is `dA^f(k)`, the `(n, n_k)` matrix `dA^(k) / dx` (with
/// `forward[0]` the identity). `backward[k]` is `dA^b(k)`, the `(n_k, n_p)`
/// derivative of the outputs with respect to the pre-activations of layer `k`
/// (for `k = 0` with respect to the inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerJacobians {
    pub forward: Vec<Array2<f64>>,
    pub backward: Vec<Array2<f64>>,
}

impl LayerJacobians {
    pub fn compute(net: &FeedforwardNet, acts: &LayerActivations) -> Self {
        Self {
            forward: forward_sequence(net, acts),
            backward: backward_sequence(net, acts),
        }
    }

    /// Input-output Jacobian from the forward sequence, `(n, n_p)`.
    pub fn jacobian(&self) -> &Array2<f64> {
        self.forward.last().unwrap()
    }

    /// Largest absolute gap between the two routes to the input-output Jacobian.
    pub fn route_gap(&self) -> f64 {
        let f = self.forward.last().unwrap();
        let b = &self.backward[0];
        f.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// Scales column `m` of `a` by `v[m]`.
pub(crate) fn scale_columns(a: &mut Array2<f64>, v: &Array1<f64>) {
    for (mut col, s) in a.axis_iter_mut(Axis(1)).zip(v.iter()) {
        col *= *s;
    }
}

/// Scales row `m` of `a` by `v[m]`.
pub(crate) fn scale_rows(a: &mut Array2<f64>, v: &Array1<f64>) {
    for (mut row, s) in a.axis_iter_mut(Axis(0)).zip(v.iter()) {
        row *= *s;
    }
}

pub(crate) fn slopes(net: &FeedforwardNet, acts: &LayerActivations, k: usize) -> Array1<f64> {
    let act = net.architecture().activation(k);
    acts.layer(k).mapv(|a| act.slope(a))
}

pub(crate) fn curvatures(net: &FeedforwardNet, acts: &LayerActivations, k: usize) -> Array1<f64> {
    let act = net.architecture().activation(k);
    acts.layer(k).mapv(|a| act.curvature(a))
}

/// `dA^f(k) = dA^f(k-1) W^k` with column `m` scaled by `A^(k)_m (1 - A^(k)_m)`.
pub fn forward_sequence(net: &FeedforwardNet, acts: &LayerActivations) -> Vec<Array2<f64>> {
    let n = net.architecture().inputs();
    let mut out = Vec::with_capacity(net.depth() + 1);
    out.push(Array2::eye(n));
    for k in 1..=net.depth() {
        let mut d = if k == 1 {
            net.weight(1).clone()
        } else {
            out[k - 1].dot(net.weight(k))
        };
        scale_columns(&mut d, &slopes(net, acts, k));
        out.push(d);
    }
    out
}

/// Starts from `diag(A^(p)(1 - A^(p)))` at the output and applies
/// `dA^b(k) = (W^(k+1) row-scaled by A^(k)(1 - A^(k))) dA^b(k+1)` down to
/// `dA^b(0) = W^(1) dA^b(1)`.
pub fn backward_sequence(net: &FeedforwardNet, acts: &LayerActivations) -> Vec<Array2<f64>> {
    let p = net.depth();
    let mut out = vec![Array2::zeros((0, 0)); p + 1];
    out[p] = Array2::from_diag(&slopes(net, acts, p));
    for k in (1..p).rev() {
        let mut z1 = net.weight(k + 1).clone();
        scale_rows(&mut z1, &slopes(net, acts, k));
        out[k] = z1.dot(&out[k + 1]);
    }
    out[0] = net.weight(1).dot(&out[1]);
    out
}

/// Input-output Jacobian `(n, n_p)` via the forward sequence, with all layer terms.
pub fn lpd_forward(net: &FeedforwardNet, x: ArrayView1<f64>) -> Result<(Array2<f64>, LayerJacobians)> {
    let acts = net.forward(x)?;
    let jac = LayerJacobians::compute(net, &acts);
    Ok((jac.jacobian().clone(), jac))
}

/// Input-output Jacobian `(n, n_p)` via the backward sequence.
pub fn lpd_backward(net: &FeedforwardNet, x: ArrayView1<f64>) -> Result<Array2<f64>> {
    let acts = net.forward(x)?;
    Ok(backward_sequence(net, &acts).swap_remove(0))
}

/// `b = o - sum_i w_i x_i`.
pub fn synthetic_intercept(output: f64, sensitivities: ArrayView1<f64>, x: ArrayView1<f64>) -> f64 {
    output - sensitivities.dot(&x)
}

/// Sensitivities of the layer-`k` neurons to the inputs, `dA^f(k)` of shape `(n, n_k)`.
/// `k = p` gives the full input-output Jacobian.
pub fn layer_intercept(net: &FeedforwardNet, x: ArrayView1<f64>, k: usize) -> Result<Array2<f64>> {
    if k == 0 || k > net.depth() {
        return Err(Error::InvalidArgument(format!(
            "layer {k} outside 1..={}",
            net.depth()
        )));
    }
    let acts = net.forward(x)?;
    Ok(forward_sequence(net, &acts).swap_remove(k))
}
