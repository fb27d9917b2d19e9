//! Explainability functions of the net output.
//!
//! An X-function maps the output vector `o_t` to a scalar. Its input
//! sensitivities are the explanation: the identity gives the LPD, the
//! squared error gives the IPD.

use ndarray::{Array1, Array2, ArrayView1};

/// Scalar function of the output vector with optional first and second derivatives.
pub trait XFunction: Send + Sync {
    fn value(&self, output: ArrayView1<f64>) -> f64;

    /// Gradient with respect to the outputs; `None` for non-differentiable functions.
    fn gradient(&self, output: ArrayView1<f64>) -> Option<Array1<f64>>;

    /// Hessian with respect to the outputs.
    fn hessian(&self, _output: ArrayView1<f64>) -> Option<Array2<f64>> {
        None
    }
}

fn unit(len: usize, j: usize, scale: f64) -> Array1<f64> {
    let mut g = Array1::zeros(len);
    g[j] = scale;
    g
}

fn single_entry(len: usize, j: usize, value: f64) -> Array2<f64> {
    let mut h = Array2::zeros((len, len));
    h[[j, j]] = value;
    h
}

/// `xf(o) = o_j`.
#[derive(Debug, Clone, Copy)]
pub struct OutputIdentity {
    pub output: usize,
}

impl XFunction for OutputIdentity {
    fn value(&self, o: ArrayView1<f64>) -> f64 {
        o[self.output]
    }

    fn gradient(&self, o: ArrayView1<f64>) -> Option<Array1<f64>> {
        Some(unit(o.len(), self.output, 1.0))
    }

    fn hessian(&self, o: ArrayView1<f64>) -> Option<Array2<f64>> {
        Some(Array2::zeros((o.len(), o.len())))
    }
}

/// `xf(o) = o_j^2`.
#[derive(Debug, Clone, Copy)]
pub struct SquaredOutput {
    pub output: usize,
}

impl XFunction for SquaredOutput {
    fn value(&self, o: ArrayView1<f64>) -> f64 {
        o[self.output] * o[self.output]
    }

    fn gradient(&self, o: ArrayView1<f64>) -> Option<Array1<f64>> {
        Some(unit(o.len(), self.output, 2.0 * o[self.output]))
    }

    fn hessian(&self, o: ArrayView1<f64>) -> Option<Array2<f64>> {
        Some(single_entry(o.len(), self.output, 2.0))
    }
}

/// One time point's term of the sample MSE: `weight * (y - o_j)^2`, with
/// `weight = 1/T` for the full-sample criterion.
#[derive(Debug, Clone, Copy)]
pub struct SquaredError {
    pub output: usize,
    pub target: f64,
    pub weight: f64,
}

impl XFunction for SquaredError {
    fn value(&self, o: ArrayView1<f64>) -> f64 {
        let e = self.target - o[self.output];
        self.weight * e * e
    }

    fn gradient(&self, o: ArrayView1<f64>) -> Option<Array1<f64>> {
        let g = 2.0 * self.weight * (o[self.output] - self.target);
        Some(unit(o.len(), self.output, g))
    }

    fn hessian(&self, o: ArrayView1<f64>) -> Option<Array2<f64>> {
        Some(single_entry(o.len(), self.output, 2.0 * self.weight))
    }
}

/// Sharpe ratio (mean over population standard deviation, not annualized)
/// of a window of strategy returns whose last element depends on the
/// current output: `(offset + scale * o_j) * next_return`. The earlier
/// window returns are held fixed.
#[derive(Debug, Clone)]
pub struct WindowSharpe {
    pub output: usize,
    pub earlier_returns: Vec<f64>,
    pub next_return: f64,
    pub position_offset: f64,
    pub position_scale: f64,
}

/// Sharpe ratio with its first and second derivative in the last return.
struct SharpeParts {
    value: f64,
    d1: f64,
    d2: f64,
}

impl WindowSharpe {
    fn last_return(&self, o: ArrayView1<f64>) -> f64 {
        (self.position_offset + self.position_scale * o[self.output]) * self.next_return
    }

    fn parts(&self, u: f64) -> SharpeParts {
        let m = (self.earlier_returns.len() + 1) as f64;
        let mu = (self.earlier_returns.iter().sum::<f64>() + u) / m;
        let ss: f64 = self
            .earlier_returns
            .iter()
            .chain(std::iter::once(&u))
            .map(|r| (r - mu) * (r - mu))
            .sum();
        let var = ss / m;
        let sd = var.sqrt();
        let dmu = 1.0 / m;
        let dvar = 2.0 * (u - mu) / m;
        let d2var = 2.0 * (1.0 - 1.0 / m) / m;
        let dsd = dvar / (2.0 * sd);
        let d2sd = d2var / (2.0 * sd) - dvar * dvar / (4.0 * sd * sd * sd);
        let value = mu / sd;
        let d1 = dmu / sd - mu * dsd / (sd * sd);
        let d2 = -2.0 * dmu * dsd / (sd * sd) - mu * d2sd / (sd * sd)
            + 2.0 * mu * dsd * dsd / (sd * sd * sd);
        SharpeParts { value, d1, d2 }
    }

    fn du(&self) -> f64 {
        self.position_scale * self.next_return
    }
}

impl XFunction for WindowSharpe {
    fn value(&self, o: ArrayView1<f64>) -> f64 {
        self.parts(self.last_return(o)).value
    }

    fn gradient(&self, o: ArrayView1<f64>) -> Option<Array1<f64>> {
        let parts = self.parts(self.last_return(o));
        Some(unit(o.len(), self.output, parts.d1 * self.du()))
    }

    fn hessian(&self, o: ArrayView1<f64>) -> Option<Array2<f64>> {
        let parts = self.parts(self.last_return(o));
        let du = self.du();
        Some(single_entry(o.len(), self.output, parts.d2 * du * du))
    }
}

type ValueFn = dyn Fn(ArrayView1<f64>) -> f64 + Send + Sync;
type GradientFn = dyn Fn(ArrayView1<f64>) -> Array1<f64> + Send + Sync;
type HessianFn = dyn Fn(ArrayView1<f64>) -> Array2<f64> + Send + Sync;

/// User-supplied X-function from closures. Without a gradient it can only
/// be used through [`discrete_proxy`](super::discrete_proxy).
pub struct CustomXFunction {
    value: Box<ValueFn>,
    gradient: Option<Box<GradientFn>>,
    hessian: Option<Box<HessianFn>>,
}

impl CustomXFunction {
    pub fn new(value: impl Fn(ArrayView1<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Box::new(value),
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(ArrayView1<f64>) -> Array1<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(ArrayView1<f64>) -> Array2<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }
}

impl XFunction for CustomXFunction {
    fn value(&self, o: ArrayView1<f64>) -> f64 {
        (self.value)(o)
    }

    fn gradient(&self, o: ArrayView1<f64>) -> Option<Array1<f64>> {
        self.gradient.as_ref().map(|g| g(o))
    }

    fn hessian(&self, o: ArrayView1<f64>) -> Option<Array2<f64>> {
        self.hessian.as_ref().map(|h| h(o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fd_check(xf: &dyn XFunction, o: Array1<f64>, j: usize) {
        let h = 1e-5;
        let mut up = o.clone();
        up[j] += h;
        let mut dn = o.clone();
        dn[j] -= h;
        let fd = (xf.value(up.view()) - xf.value(dn.view())) / (2.0 * h);
        let g = xf.gradient(o.view()).unwrap()[j];
        assert!((fd - g).abs() <= 1e-6 * g.abs().max(1e-3), "grad {g} vs fd {fd}");
        let fd2 = (xf.gradient(up.view()).unwrap()[j] - xf.gradient(dn.view()).unwrap()[j]) / (2.0 * h);
        let hh = xf.hessian(o.view()).unwrap()[[j, j]];
        assert!((fd2 - hh).abs() <= 1e-5 * hh.abs().max(1e-3), "hess {hh} vs fd {fd2}");
    }

    #[test]
    fn catalog_derivatives_match_finite_differences() {
        let o = array![0.3, 0.62];
        fd_check(&SquaredOutput { output: 1 }, o.clone(), 1);
        fd_check(
            &SquaredError {
                output: 0,
                target: 0.8,
                weight: 0.01,
            },
            o.clone(),
            0,
        );
        fd_check(
            &WindowSharpe {
                output: 1,
                earlier_returns: vec![0.01, -0.02, 0.005, 0.03],
                next_return: 0.012,
                position_offset: -0.1,
                position_scale: 2.0,
            },
            o,
            1,
        );
    }

    #[test]
    fn custom_without_gradient_reports_none() {
        let xf = CustomXFunction::new(|o| o[0].abs());
        assert!(xf.gradient(array![1.0].view()).is_none());
        assert!(xf.hessian(array![1.0].view()).is_none());
        assert_eq!(xf.value(array![-2.0].view()), 2.0);
    }
}
