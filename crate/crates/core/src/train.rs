//! Full-batch steepest descent on the MSE and seed-indexed ensembles.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest;
use crate::data::LaggedDataset;
use crate::error::{Error, Result};
use crate::net::{FeedforwardNet, NetArchitecture};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the Euclidean norm of the parameter gradient falls to this value.
    pub tolerance: f64,
    /// Initialization seed; ensemble member `i` uses `seed + i`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_epochs: 5000,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be finite and >= 0".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidArgument("tolerance must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// MSE on the unit-interval scale used for optimization.
    pub final_mse_scaled: f64,
    /// MSE of back-transformed outputs against the original targets.
    pub final_mse_original: f64,
    pub epochs_run: usize,
    pub converged: bool,
}

fn check_training_shapes(net: &FeedforwardNet, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    let arch = net.architecture();
    if arch.outputs() != 1 {
        return Err(Error::InvalidArgument(format!(
            "training expects a single output neuron, net has {}",
            arch.outputs()
        )));
    }
    if x.ncols() != arch.inputs() {
        return Err(Error::DimensionMismatch {
            what: "design matrix columns",
            expected: arch.inputs(),
            got: x.ncols(),
        });
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    Ok(())
}

/// Layer outputs for a whole batch; `out[k]` is `T x n_k`.
fn batch_forward(net: &FeedforwardNet, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
    let mut layers = Vec::with_capacity(net.depth() + 1);
    layers.push(x.to_owned());
    for k in 1..=net.depth() {
        let act = net.architecture().activation(k);
        let mut z = layers[k - 1].dot(net.weight(k));
        z += net.bias(k);
        z.mapv_inplace(|v| act.apply(v));
        layers.push(z);
    }
    layers
}

/// Batch MSE on the scaled data.
pub fn mse(net: &FeedforwardNet, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    check_training_shapes(net, x, y)?;
    let out = batch_forward(net, x).pop().unwrap();
    let o = out.column(0);
    Ok(o.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// MSE and its gradient with respect to [`FeedforwardNet::parameters`],
/// by reverse-mode accumulation over the layers.
pub fn mse_gradient(net: &FeedforwardNet, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<(f64, Vec<f64>)> {
    check_training_shapes(net, x, y)?;
    let p = net.depth();
    let t = y.len() as f64;
    let layers = batch_forward(net, x);

    let out = layers[p].column(0);
    let resid: Array1<f64> = &out - &y;
    let loss = resid.dot(&resid) / t;

    let act_p = net.architecture().activation(p);
    let mut delta: Array2<f64> = (&resid * &layers[p].column(0).mapv(|a| act_p.slope(a)) * (2.0 / t))
        .insert_axis(Axis(1));

    let mut grads_w = vec![Array2::zeros((0, 0)); p];
    let mut grads_b = vec![Array1::zeros(0); p];
    for k in (1..=p).rev() {
        grads_w[k - 1] = layers[k - 1].t().dot(&delta);
        grads_b[k - 1] = delta.sum_axis(Axis(0));
        if k > 1 {
            let act = net.architecture().activation(k - 1);
            let mut prev = delta.dot(&net.weight(k).t());
            prev.zip_mut_with(&layers[k - 1], |d, &a| *d *= act.slope(a));
            delta = prev;
        }
    }
    let mut grad = Vec::with_capacity(net.architecture().parameter_count());
    for (w, b) in grads_w.iter().zip(&grads_b) {
        grad.extend(w.iter());
        grad.extend(b.iter());
    }
    Ok((loss, grad))
}

fn original_scale_mse(net: &FeedforwardNet, data: &LaggedDataset) -> f64 {
    let sy = data.scaling_y();
    let out = batch_forward(net, data.x().view()).pop().unwrap();
    out.column(0)
        .iter()
        .zip(data.raw_y())
        .map(|(o, y)| {
            let e = sy.unscale(*o) - y;
            e * e
        })
        .sum::<f64>()
        / data.rows() as f64
}

/// Steepest descent from `net` with a constant step on the scaled data.
pub fn train(net: FeedforwardNet, data: &LaggedDataset, cfg: &TrainConfig) -> Result<(FeedforwardNet, FitReport)> {
    cfg.validate()?;
    let x = data.x().view();
    let y = data.y().view();
    check_training_shapes(&net, x, y)?;

    let mut net = net;
    let mut params = net.parameters();
    let mut epochs_run = 0;
    let mut converged = false;
    for epoch in 0..cfg.max_epochs {
        let (loss, grad) = mse_gradient(&net, x, y)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                last_finite_epoch: epoch.saturating_sub(1),
            });
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm <= cfg.tolerance {
            converged = true;
            break;
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        net.set_parameters(&params);
        epochs_run = epoch + 1;
    }
    let final_mse_scaled = mse(&net, x, y)?;
    if !final_mse_scaled.is_finite() {
        return Err(Error::Diverged {
            epoch: epochs_run,
            last_finite_epoch: epochs_run.saturating_sub(1),
        });
    }
    let report = FitReport {
        final_mse_scaled,
        final_mse_original: original_scale_mse(&net, data),
        epochs_run,
        converged,
    };
    Ok((net, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub seed: u64,
    pub net: FeedforwardNet,
    pub report: FitReport,
}

/// `M` nets of one architecture trained on one dataset from seeds `base..base+M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub architecture: NetArchitecture,
    pub data_fingerprint: String,
    pub members: Vec<EnsembleMember>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.members.iter().map(|m| m.seed).collect()
    }

    pub fn nets(&self) -> impl Iterator<Item = &FeedforwardNet> {
        self.members.iter().map(|m| &m.net)
    }
}

/// Trains `members` nets in parallel; member `i` starts from
/// `init_random(arch, cfg.seed + i)`. Results are collected in seed order.
pub fn train_ensemble(
    arch: &NetArchitecture,
    data: &LaggedDataset,
    cfg: &TrainConfig,
    members: usize,
) -> Result<Ensemble> {
    if members == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one member".into()));
    }
    cfg.validate()?;
    let results: Vec<Result<EnsembleMember>> = (0..members as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed + i;
            let init = FeedforwardNet::init_random(arch.clone(), seed);
            train(init, data, cfg)
                .map(|(net, report)| EnsembleMember { seed, net, report })
                .map_err(|e| Error::Member {
                    seed,
                    source: Box::new(e),
                })
        })
        .collect();
    let members = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        architecture: arch.clone(),
        data_fingerprint: data.fingerprint(),
        members,
    })
}

/// Euclidean distance between the parameter vectors of two same-shaped nets.
pub fn parameter_distance(a: &FeedforwardNet, b: &FeedforwardNet) -> f64 {
    a.parameters()
        .iter()
        .zip(b.parameters())
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

/// Per-member forecast and trading performance on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberPerformance {
    pub mse: f64,
    pub sharpe: Option<f64>,
}

/// Back-transformed forecasts keyed by decision date (see
/// [`LaggedDataset::decision_inputs`]).
pub fn decision_forecasts(net: &FeedforwardNet, data: &LaggedDataset) -> Result<Vec<f64>> {
    let sy = data.scaling_y();
    let pred = net.predict_series(data.decision_inputs().view())?;
    Ok(pred.column(0).iter().map(|&o| sy.unscale(o)).collect())
}

/// Back-transformed MSE and annualized sign-rule Sharpe ratio on `data`.
pub fn member_performance(net: &FeedforwardNet, data: &LaggedDataset, periods_per_year: f64) -> Result<MemberPerformance> {
    let forecasts = decision_forecasts(net, data)?;
    let returns = data.raw_y().to_vec();
    let result = backtest::sign_rule(&forecasts, &returns, &backtest::SignRuleOptions::default())?;
    let m = backtest::metrics(&result, 0.0, periods_per_year)?;
    Ok(MemberPerformance {
        mse: original_scale_mse(net, data),
        sharpe: m.sharpe,
    })
}

/// Correlations across members between in-sample and out-of-sample performance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InOutCorrelations {
    pub mse_in_mse_out: f64,
    pub mse_in_sharpe_out: f64,
    pub sharpe_in_sharpe_out: f64,
}

/// Pearson correlations of `(mse_in, mse_out)`, `(mse_in, sharpe_out)` and
/// `(sharpe_in, sharpe_out)` over the ensemble members.
pub fn in_out_correlations(
    ensemble: &Ensemble,
    in_sample: &LaggedDataset,
    out_sample: &LaggedDataset,
    periods_per_year: f64,
) -> Result<InOutCorrelations> {
    let perf = |data: &LaggedDataset| -> Result<Vec<MemberPerformance>> {
        ensemble
            .nets()
            .map(|n| member_performance(n, data, periods_per_year))
            .collect()
    };
    if ensemble.len() < 3 {
        return Err(Error::InsufficientMembers {
            needed: 3,
            got: ensemble.len(),
        });
    }
    let pin = perf(in_sample)?;
    let pout = perf(out_sample)?;
    correlate_performances(&pin, &pout)
}

/// Correlation triple from precomputed per-member performances.
pub fn correlate_performances(
    in_sample: &[MemberPerformance],
    out_sample: &[MemberPerformance],
) -> Result<InOutCorrelations> {
    if in_sample.len() != out_sample.len() {
        return Err(Error::DimensionMismatch {
            what: "member performances",
            expected: in_sample.len(),
            got: out_sample.len(),
        });
    }
    if in_sample.len() < 3 {
        return Err(Error::InsufficientMembers {
            needed: 3,
            got: in_sample.len(),
        });
    }
    let sharpe = |ps: &[MemberPerformance]| -> Result<Vec<f64>> {
        ps.iter()
            .map(|p| p.sharpe.ok_or(Error::ZeroVariance("member strategy returns")))
            .collect()
    };
    let mse_in: Vec<f64> = in_sample.iter().map(|p| p.mse).collect();
    let mse_out: Vec<f64> = out_sample.iter().map(|p| p.mse).collect();
    let sh_in = sharpe(in_sample)?;
    let sh_out = sharpe(out_sample)?;
    let corr = |a: &[f64], b: &[f64]| stats::pearson(a, b).ok_or(Error::ZeroVariance("member performances"));
    Ok(InOutCorrelations {
        mse_in_mse_out: corr(&mse_in, &mse_out)?,
        mse_in_sharpe_out: corr(&mse_in, &sh_out)?,
        sharpe_in_sharpe_out: corr(&sh_in, &sh_out)?,
    })
}
