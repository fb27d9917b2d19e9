use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsxai_core::analytics::{ColumnChoice, Side, SignalConfig, SignalPreset};
use tsxai_core::train::TrainConfig;

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    LogReturns,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Sign,
    Exposure,
    LongShort,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Sign => "sign",
            Strategy::Exposure => "exposure",
            Strategy::LongShort => "long-short",
        }
    }
}

/// Flat pipeline configuration as read from TOML; every key is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub data: Option<PathBuf>,
    pub column: Option<String>,
    pub transform: Option<Transform>,
    pub lags: Option<usize>,
    pub split: Option<NaiveDate>,
    pub hidden: Option<Vec<usize>>,
    pub learning_rate: Option<f64>,
    pub max_epochs: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub members: Option<usize>,
    pub preset: Option<SignalPreset>,
    pub q: Option<f64>,
    pub window: Option<usize>,
    pub side: Option<Side>,
    pub signal_column: Option<String>,
    pub use_absolute: Option<bool>,
    pub strategy: Option<Strategy>,
    pub periods_per_year: Option<f64>,
    pub layer: Option<usize>,
    pub neuron: Option<usize>,
    pub xf: Option<String>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        // data paths in a config file are relative to the file
        if let (Some(data), Some(dir)) = (&cfg.data, path.parent()) {
            if data.is_relative() {
                cfg.data = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }

    /// Values set in `other` win.
    pub fn overlay(mut self, other: ConfigFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            data, column, transform, lags, split, hidden, learning_rate, max_epochs, tolerance, seed, members,
            preset, q, window, side, signal_column, use_absolute, strategy, periods_per_year, layer, neuron, xf,
            out
        );
        self
    }
}

/// Fully resolved settings of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub data: Option<PathBuf>,
    pub column: String,
    pub transform: Transform,
    pub lags: usize,
    pub split: Option<NaiveDate>,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub members: usize,
    pub preset: SignalPreset,
    pub signal: SignalConfig,
    pub strategy: Strategy,
    pub periods_per_year: f64,
    pub layer: usize,
    pub neuron: usize,
    pub xf: String,
    #[serde(skip)]
    pub out: PathBuf,
}

fn parse_column(s: &str) -> Result<ColumnChoice, Failure> {
    match s {
        "intercept" => Ok(ColumnChoice::Intercept),
        "last-lag" => Ok(ColumnChoice::LastLag),
        "aggregate" => Ok(ColumnChoice::Aggregate),
        other => other
            .strip_prefix("lag-")
            .and_then(|i| i.parse().ok())
            .map(ColumnChoice::Lag)
            .ok_or_else(|| Failure::usage(format!("unknown signal column {other:?}"))),
    }
}

impl PipelineConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self, Failure> {
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: file.learning_rate.unwrap_or(defaults.learning_rate),
            max_epochs: file.max_epochs.unwrap_or(defaults.max_epochs),
            tolerance: file.tolerance.unwrap_or(defaults.tolerance),
            seed: file.seed.unwrap_or(defaults.seed),
        };
        train.validate().map_err(|e| Failure::usage(e.to_string()))?;
        let preset = file.preset.unwrap_or(SignalPreset::BtcRm);
        let mut signal = preset.config();
        if let Some(q) = file.q {
            signal.q = q;
        }
        if let Some(w) = file.window {
            signal.window = w;
        }
        if let Some(side) = file.side {
            signal.side = side;
        }
        if let Some(abs) = file.use_absolute {
            signal.use_absolute = abs;
        }
        if let Some(c) = &file.signal_column {
            signal.column = parse_column(c)?;
        }
        let members = file.members.unwrap_or(10);
        if members == 0 {
            return Err(Failure::usage("members must be at least 1"));
        }
        let lags = file.lags.unwrap_or(6);
        if lags == 0 {
            return Err(Failure::usage("lags must be at least 1"));
        }
        let out = file
            .out
            .or_else(|| std::env::var_os("TSXAI_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("tsxai-out"));
        Ok(Self {
            data: file.data,
            column: file.column.unwrap_or_else(|| "close".into()),
            transform: file.transform.unwrap_or(Transform::LogReturns),
            lags,
            split: file.split,
            hidden: file.hidden.unwrap_or_else(|| vec![lags]),
            train,
            members,
            preset,
            signal,
            strategy: file.strategy.unwrap_or(Strategy::Sign),
            periods_per_year: file.periods_per_year.unwrap_or(365.0),
            layer: file.layer.unwrap_or(1),
            neuron: file.neuron.unwrap_or(0),
            xf: file.xf.unwrap_or_else(|| "squared-output".into()),
            out,
        })
    }

    /// Network layer sizes: inputs, hidden layers, one output.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.lags];
        dims.extend(&self.hidden);
        dims.push(1);
        dims
    }

    /// SHA-256 of the canonical JSON form; the output directory and worker
    /// count do not enter.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
