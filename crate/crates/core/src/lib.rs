//! Time-ordered explainability for feedforward sigmoid nets.
//!
//! The crate computes, for every time point of a lagged design matrix, the
//! input sensitivities of a trained net: the linear parameter data (LPD,
//! an exact local linear replication with synthetic intercept), the
//! quadratic parameter data (QPD, input Hessians), the importance parameter
//! data (IPD, derivative of the sample MSE) and sensitivities of arbitrary
//! differentiable functions of the net output. Around that sit the pieces
//! needed to use those flows in practice: data ingestion, a plain
//! steepest-descent trainer with seed-indexed ensembles, ensemble
//! statistics, rolling-quantile exit signals and a small backtester.

pub mod analytics;
pub mod backtest;
pub mod data;
pub mod error;
pub mod net;
pub mod stats;
pub mod synth;
pub mod train;
pub mod xai;

pub use error::{Error, Result};
