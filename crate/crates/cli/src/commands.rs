use std::ops::Range;

use chrono::NaiveDate;
use log::info;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use tsxai_core::analytics::{self, SignalPreset, SignalSeries, Trigger};
use tsxai_core::backtest::{self, BacktestResult, Metrics, SignRuleOptions};
use tsxai_core::data::{self, LaggedDataset, ScalingParams};
use tsxai_core::net::{FeedforwardNet, NetArchitecture, NetDocument, TrainingScaling};
use tsxai_core::train::{self, Ensemble, EnsembleMember, FitReport, TrainConfig};
use tsxai_core::xai::{self, OutputIdentity, QpdData, QpdStorage, SquaredOutput, XFunction};

use crate::artifacts::RunDir;
use crate::config::{PipelineConfig, Strategy, Transform};
use crate::failure::Failure;

const DATASET: &str = "dataset/dataset.csv";
const DATASET_INFO: &str = "dataset/scaling.json";
const ENSEMBLE_INFO: &str = "ensemble/ensemble.json";
const MEAN_LPD: &str = "explain/lpd/mean.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExplainKind {
    Lpd,
    Qpd,
    Ipd,
    Layer,
    Xf,
}

impl ExplainKind {
    fn name(self) -> &'static str {
        match self {
            ExplainKind::Lpd => "lpd",
            ExplainKind::Qpd => "qpd",
            ExplainKind::Ipd => "ipd",
            ExplainKind::Layer => "layer",
            ExplainKind::Xf => "xf",
        }
    }
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub dir: RunDir,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetInfo {
    column: String,
    transform: Transform,
    rows: usize,
    lags: usize,
    split: Option<NaiveDate>,
    in_sample_rows: usize,
    scaling_x: ScalingParams,
    scaling_y: ScalingParams,
    fingerprint: String,
}

struct Datasets {
    info: DatasetInfo,
    full: LaggedDataset,
    in_sample: LaggedDataset,
}

impl Datasets {
    /// Rows evaluated by backtests: out-of-sample when a split is set.
    fn evaluation_rows(&self) -> Range<usize> {
        match self.info.split {
            Some(_) => self.info.in_sample_rows..self.info.rows,
            None => 0..self.info.rows,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MemberInfo {
    seed: u64,
    file: String,
    report: FitReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleInfo {
    layer_dims: Vec<usize>,
    train: TrainConfig,
    data_fingerprint: String,
    members: Vec<MemberInfo>,
}

fn lag_header(lags: usize, intercept: bool) -> Vec<String> {
    let mut h = Vec::with_capacity(lags + 1);
    if intercept {
        h.push("intercept".to_string());
    }
    h.extend((1..=lags).map(|i| format!("lag_{i}")));
    h
}

pub fn ingest(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Failure::usage("no data file configured (set `data` or pass --data)"))?;
    let series = data::load_csv(path, &cfg.column).map_err(|e| Failure::from(e).context(path.display()))?;
    let series = match cfg.transform {
        Transform::LogReturns => data::log_returns(&series)?,
        Transform::None => series,
    };
    let full = data::build_lagged(&series, cfg.lags)?;
    let in_sample = match cfg.split {
        Some(boundary) => data::split(&full, boundary)?.0,
        None => full.clone(),
    };
    let mut csv = Vec::new();
    data::write_dataset_csv(&full, &mut csv)?;
    ctx.dir.fresh_dir("dataset")?;
    ctx.dir.write_bytes(DATASET, &csv)?;
    ctx.dir.write_json(
        DATASET_INFO,
        &DatasetInfo {
            column: cfg.column.clone(),
            transform: cfg.transform,
            rows: full.rows(),
            lags: full.lags(),
            split: cfg.split,
            in_sample_rows: in_sample.rows(),
            scaling_x: in_sample.scaling_x(),
            scaling_y: in_sample.scaling_y(),
            fingerprint: in_sample.fingerprint(),
        },
    )?;
    info!("dataset: {} rows, {} lags, {} in-sample", full.rows(), full.lags(), in_sample.rows());
    Ok(())
}

fn load_datasets(ctx: &Context) -> Result<Datasets, Failure> {
    ctx.dir.require(&[DATASET.into(), DATASET_INFO.into()])?;
    let info: DatasetInfo = ctx.dir.read_json(DATASET_INFO)?;
    let file = std::fs::File::open(ctx.dir.path(DATASET))?;
    let full = data::read_dataset_csv(std::io::BufReader::new(file), Some((info.scaling_x, info.scaling_y)))
        .map_err(|e| Failure::from(e).context(DATASET))?;
    let in_sample = match info.split {
        Some(boundary) => data::split(&full, boundary)?.0,
        None => full.clone(),
    };
    if in_sample.fingerprint() != info.fingerprint {
        return Err(Failure::data(format!("{DATASET} does not match {DATASET_INFO}; rerun ingest")));
    }
    Ok(Datasets { info, full, in_sample })
}

pub fn train(ctx: &Context) -> Result<Vec<u64>, Failure> {
    let cfg = &ctx.cfg;
    let data = load_datasets(ctx)?;
    if data.info.lags != cfg.lags {
        return Err(Failure::usage(format!(
            "dataset has {} lags but the config asks for {}; rerun ingest",
            data.info.lags, cfg.lags
        )));
    }
    let arch = NetArchitecture::sigmoid(cfg.dims())?;
    info!(
        "training {} nets {:?}: {} weights, {} biases each",
        cfg.members,
        arch.dims(),
        arch.weight_count(),
        arch.bias_count()
    );
    let ensemble = train::train_ensemble(&arch, &data.in_sample, &cfg.train, cfg.members)?;
    ctx.dir.fresh_dir("ensemble")?;
    let scaling = TrainingScaling {
        x: data.info.scaling_x,
        y: data.info.scaling_y,
    };
    let mut members = Vec::new();
    for m in &ensemble.members {
        let file = format!("member_{}.json", m.seed);
        let doc = NetDocument::from_net(&m.net, Some(m.seed), Some(scaling));
        let mut json = doc.to_json()?;
        json.push('\n');
        ctx.dir.write_bytes(&format!("ensemble/{file}"), json.as_bytes())?;
        info!(
            "seed {}: mse {:.6} (scaled {:.6}), {} epochs, converged {}",
            m.seed, m.report.final_mse_original, m.report.final_mse_scaled, m.report.epochs_run, m.report.converged
        );
        members.push(MemberInfo {
            seed: m.seed,
            file,
            report: m.report,
        });
    }
    ctx.dir.write_json(
        ENSEMBLE_INFO,
        &EnsembleInfo {
            layer_dims: arch.dims().to_vec(),
            train: cfg.train,
            data_fingerprint: ensemble.data_fingerprint.clone(),
            members,
        },
    )?;
    Ok(ensemble.seeds())
}

fn load_ensemble_info(ctx: &Context) -> Result<EnsembleInfo, Failure> {
    ctx.dir.require(&[ENSEMBLE_INFO.into()])?;
    ctx.dir.read_json(ENSEMBLE_INFO)
}

fn load_ensemble(ctx: &Context, data: &Datasets) -> Result<(EnsembleInfo, Vec<FeedforwardNet>), Failure> {
    let info = load_ensemble_info(ctx)?;
    if info.data_fingerprint != data.info.fingerprint {
        return Err(Failure::data("ensemble was trained on a different dataset; rerun train"));
    }
    let files: Vec<String> = info.members.iter().map(|m| format!("ensemble/{}", m.file)).collect();
    ctx.dir.require(&files)?;
    let nets = files
        .iter()
        .map(|f| {
            let text = std::fs::read_to_string(ctx.dir.path(f))?;
            Ok(NetDocument::from_json(&text)
                .and_then(|d| d.to_net())
                .map_err(|e| Failure::from(e).context(f))?)
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok((info, nets))
}

pub fn seeds(ctx: &Context) -> Option<Vec<u64>> {
    load_ensemble_info(ctx)
        .ok()
        .map(|i| i.members.iter().map(|m| m.seed).collect())
}

fn layer_flow(net: &FeedforwardNet, x: &Array2<f64>, k: usize, neuron: usize) -> Result<Array2<f64>, Failure> {
    let dims = net.architecture().dims();
    if k == 0 || k > net.depth() || neuron >= dims[k] {
        return Err(Failure::usage(format!(
            "layer {k} neuron {neuron} does not exist in {dims:?}"
        )));
    }
    let mut out = Array2::zeros((x.nrows(), x.ncols() + 1));
    for (t, row) in x.rows().into_iter().enumerate() {
        let sens = xai::layer_intercept(net, row, k)?;
        let w = sens.column(neuron);
        let a = net.forward(row)?.layer(k)[neuron];
        out[[t, 0]] = xai::synthetic_intercept(a, w, row);
        out.row_mut(t).slice_mut(ndarray::s![1..]).assign(&w);
    }
    Ok(out)
}

fn x_function(name: &str) -> Result<fn() -> Box<dyn XFunction>, Failure> {
    match name {
        "squared-output" => Ok(|| Box::new(SquaredOutput { output: 0 })),
        "identity" => Ok(|| Box::new(OutputIdentity { output: 0 })),
        other => Err(Failure::usage(format!(
            "unknown x-function {other:?} (expected squared-output or identity)"
        ))),
    }
}

pub fn explain(ctx: &Context, kind: ExplainKind) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let data = load_datasets(ctx)?;
    let (info, nets) = load_ensemble(ctx, &data)?;
    let full = &data.full;
    let lags = full.lags();
    let (sx, sy) = (data.info.scaling_x, data.info.scaling_y);
    let decision = full.decision_inputs();

    let header = match kind {
        ExplainKind::Lpd | ExplainKind::Layer => lag_header(lags, true),
        _ => lag_header(lags, false),
    };
    let xf = if kind == ExplainKind::Xf { Some(x_function(&cfg.xf)?) } else { None };
    let flows = nets
        .iter()
        .map(|net| -> Result<Array2<f64>, Failure> {
            Ok(match kind {
                ExplainKind::Lpd => xai::lpd_series(net, decision.view())?
                    .back_transformed(sx, sy)
                    .per_output
                    .swap_remove(0),
                ExplainKind::Qpd => match xai::qpd_series(net, decision.view(), QpdStorage::Diagonal)?
                    .per_output
                    .swap_remove(0)
                {
                    QpdData::Diagonal(m) => m * (sy.range() / (sx.range() * sx.range())),
                    QpdData::Full(_) => unreachable!("diagonal storage requested"),
                },
                ExplainKind::Ipd => xai::ipd_series(net, full.x().view(), full.y().view(), 0)?.values,
                ExplainKind::Layer => layer_flow(net, &decision, cfg.layer, cfg.neuron)?,
                ExplainKind::Xf => {
                    let make = xf.expect("x-function resolved");
                    xai::xf_series(net, decision.view(), |_| make())?
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let dir = format!("explain/{}", kind.name());
    ctx.dir.fresh_dir(&dir)?;
    let dates = full.dates();
    for (m, flow) in info.members.iter().zip(&flows) {
        ctx.dir.write_matrix(&format!("{dir}/member_{}.csv", m.seed), dates, &header, flow)?;
    }
    let (mean, sigma, tstat) = if flows.len() >= 2 {
        let s = analytics::ensemble_lpd_stats(&flows)?;
        (s.mean, s.sigma, s.tstat)
    } else {
        let m = flows[0].clone();
        let zeros = Array2::zeros(m.dim());
        let nan = Array2::from_elem(m.dim(), f64::NAN);
        (m, zeros, nan)
    };
    ctx.dir.write_matrix(&format!("{dir}/mean.csv"), dates, &header, &mean)?;
    ctx.dir.write_matrix(&format!("{dir}/sigma.csv"), dates, &header, &sigma)?;
    ctx.dir.write_matrix(&format!("{dir}/tstat.csv"), dates, &header, &tstat)?;
    info!("{}: {} members, {} x {}", kind.name(), flows.len(), mean.nrows(), mean.ncols());
    Ok(())
}

fn load_mean_lpd(ctx: &Context, data: &Datasets) -> Result<Array2<f64>, Failure> {
    ctx.dir.require(&[MEAN_LPD.into()])?;
    let (dates, _, m) = ctx.dir.read_matrix(MEAN_LPD)?;
    if dates != data.full.dates() {
        return Err(Failure::data(format!("{MEAN_LPD} is out of date; rerun explain --kind lpd")));
    }
    Ok(m)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn trigger_name(t: Trigger) -> &'static str {
    match t {
        Trigger::None => "none",
        Trigger::Below => "below",
        Trigger::Above => "above",
    }
}

#[derive(Debug, Serialize)]
struct SignalSummary {
    preset: SignalPreset,
    config: analytics::SignalConfig,
    defined_points: usize,
    triggered_points: usize,
    mean_exposure: f64,
}

/// Runs the configured signal rule; returns the preset name and its settings.
pub fn signals(ctx: &Context) -> Result<(String, analytics::SignalConfig), Failure> {
    let cfg = &ctx.cfg;
    let data = load_datasets(ctx)?;
    let mean = load_mean_lpd(ctx, &data)?;
    let signal = cfg.signal;
    let series = signal.signals(&mean)?;
    let regimes = signal.regimes(&mean)?;
    let drift = analytics::drift_analysis(&regimes, &data.full.raw_y().to_vec())?;
    let column = signal.column_index(mean.ncols() - 1)?;

    let mut csv = String::from("date,value,lower,upper,trigger,exposure\n");
    for (t, date) in data.full.dates().iter().enumerate() {
        let value = match column {
            Some(c) if signal.use_absolute => mean[[t, c]].abs(),
            Some(c) => mean[[t, c]],
            None => series.active[t] as f64,
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            date.format("%Y-%m-%d"),
            value,
            opt(series.lower[t]),
            opt(series.upper[t]),
            trigger_name(series.triggers[t]),
            series.exposure[t]
        ));
    }
    let mut drift_csv = String::from("regime,count,proportion_positive,average_next_return\n");
    for row in &drift.rows {
        drift_csv.push_str(&format!(
            "{},{},{},{}\n",
            row.regime,
            row.count,
            opt(row.proportion_positive),
            opt(row.average_next_return)
        ));
    }
    let name = cfg.preset.name();
    let dir = format!("signals/{name}");
    ctx.dir.fresh_dir(&dir)?;
    ctx.dir.write_bytes(&format!("{dir}/signals.csv"), csv.as_bytes())?;
    ctx.dir.write_bytes(&format!("{dir}/drift.csv"), drift_csv.as_bytes())?;
    let defined = series.defined.iter().filter(|d| **d).count();
    ctx.dir.write_json(
        &format!("{dir}/signals.json"),
        &SignalSummary {
            preset: cfg.preset,
            config: signal,
            defined_points: defined,
            triggered_points: series.triggered().filter(|h| *h).count(),
            mean_exposure: series.exposure.iter().sum::<f64>() / series.len() as f64,
        },
    )?;
    info!("{name}: q = {}, window = {}, {defined} defined points", signal.q, signal.window);
    Ok((name.to_string(), signal))
}

#[derive(Debug, Serialize)]
struct MemberMetrics {
    seed: u64,
    #[serde(flatten)]
    metrics: Metrics,
}

#[derive(Debug, Serialize)]
struct BacktestSummary {
    strategy: &'static str,
    periods_per_year: f64,
    first_date: NaiveDate,
    last_date: NaiveDate,
    members: Vec<MemberMetrics>,
    mean: Metrics,
    benchmark: Metrics,
}

pub fn backtest(ctx: &Context) -> Result<(), Failure> {
    let cfg = &ctx.cfg;
    let data = load_datasets(ctx)?;
    let rows = data.evaluation_rows();
    if rows.len() < 2 {
        return Err(Failure::data("backtest needs at least two evaluation rows"));
    }
    let dates = &data.full.dates()[rows.clone()];
    let returns = data.full.raw_y().slice(ndarray::s![rows.clone()]).to_vec();

    let (seeds, members, mean) = match cfg.strategy {
        Strategy::Sign => {
            let (info, nets) = load_ensemble(ctx, &data)?;
            let forecasts = nets
                .iter()
                .map(|n| Ok(train::decision_forecasts(n, &data.full)?[rows.clone()].to_vec()))
                .collect::<Result<Vec<_>, Failure>>()?;
            let opts = SignRuleOptions::default();
            let members = forecasts
                .iter()
                .map(|f| backtest::sign_rule(f, &returns, &opts))
                .collect::<Result<Vec<_>, _>>()?;
            let mean = backtest::sign_rule(&backtest::mean_forecast(&forecasts)?, &returns, &opts)?;
            (info.members.iter().map(|m| m.seed).collect::<Vec<_>>(), members, mean)
        }
        Strategy::Exposure | Strategy::LongShort => {
            let info = load_ensemble_info(ctx)?;
            let seeds: Vec<u64> = info.members.iter().map(|m| m.seed).collect();
            let files: Vec<String> = seeds.iter().map(|s| format!("explain/lpd/member_{s}.csv")).collect();
            let mut needed = files.clone();
            needed.push(MEAN_LPD.into());
            ctx.dir.require(&needed)?;
            let run = |s: &SignalSeries| match cfg.strategy {
                Strategy::Exposure => backtest::exposure_strategy(&s.slice(rows.clone()), &returns),
                _ => backtest::long_short_strategy(&s.slice(rows.clone()), &returns),
            };
            let members = files
                .iter()
                .map(|f| {
                    let (_, _, lpd) = ctx.dir.read_matrix(f)?;
                    Ok(run(&cfg.signal.signals(&lpd)?)?)
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            let mean = run(&cfg.signal.signals(&load_mean_lpd(ctx, &data)?)?)?;
            (seeds, members, mean)
        }
    };
    let benchmark = backtest::buy_and_hold(&returns)?;

    let dir = format!("backtest/{}", cfg.strategy.name());
    ctx.dir.fresh_dir(&dir)?;
    let write = |name: String, r: &BacktestResult| -> Result<(), Failure> {
        let mut buf = Vec::new();
        backtest::write_curve_csv(dates, r, &mut buf)?;
        ctx.dir.write_bytes(&format!("{dir}/{name}"), &buf)
    };
    let ppy = cfg.periods_per_year;
    let mut member_metrics = Vec::new();
    for (seed, r) in seeds.iter().zip(&members) {
        write(format!("member_{seed}.csv"), r)?;
        member_metrics.push(MemberMetrics {
            seed: *seed,
            metrics: backtest::metrics(r, 0.0, ppy)?,
        });
    }
    write("mean.csv".into(), &mean)?;
    write("benchmark.csv".into(), &benchmark)?;
    let summary = BacktestSummary {
        strategy: cfg.strategy.name(),
        periods_per_year: ppy,
        first_date: dates[0],
        last_date: *dates.last().unwrap(),
        members: member_metrics,
        mean: backtest::metrics(&mean, 0.0, ppy)?,
        benchmark: backtest::metrics(&benchmark, 0.0, ppy)?,
    };
    ctx.dir.write_json(&format!("{dir}/metrics.json"), &summary)?;
    info!(
        "{}: mean curve {:.4}, benchmark {:.4}",
        cfg.strategy.name(),
        mean.cumulative.last().unwrap(),
        benchmark.cumulative.last().unwrap()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct Report {
    layer_dims: Vec<usize>,
    members: Vec<MemberInfo>,
    heuristic: Option<analytics::HeuristicSummary>,
    /// Per LPD column, the mean absolute t-statistic over points where it is defined.
    mean_abs_tstat: Option<Vec<Option<f64>>>,
    in_out_correlations: Option<train::InOutCorrelations>,
    in_out_correlations_error: Option<String>,
    backtests: Vec<serde_json::Value>,
}

fn mean_abs_defined(column: ndarray::ArrayView1<f64>) -> Option<f64> {
    let v: Vec<f64> = column.iter().filter(|x| x.is_finite()).map(|x| x.abs()).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn report(ctx: &Context) -> Result<(), Failure> {
    let data = load_datasets(ctx)?;
    let (info, nets) = load_ensemble(ctx, &data)?;
    let lpd_dir = ctx.dir.path("explain/lpd");
    let (heuristic, mean_abs_tstat) = if lpd_dir.is_dir() {
        let mean = load_mean_lpd(ctx, &data)?;
        let (_, _, tstat) = ctx.dir.read_matrix("explain/lpd/tstat.csv")?;
        let t: Vec<Option<f64>> = tstat.axis_iter(Axis(1)).map(mean_abs_defined).collect();
        (Some(analytics::heuristic_summary(&mean)?), Some(t))
    } else {
        (None, None)
    };

    let (mut correlations, mut correlation_error) = (None, None);
    if data.info.split.is_some() {
        let arch = NetArchitecture::sigmoid(info.layer_dims.clone())?;
        let ensemble = Ensemble {
            architecture: arch,
            data_fingerprint: info.data_fingerprint.clone(),
            members: info
                .members
                .iter()
                .zip(nets)
                .map(|(m, net)| EnsembleMember {
                    seed: m.seed,
                    net,
                    report: m.report,
                })
                .collect(),
        };
        let out_rows = data.evaluation_rows();
        let out = LaggedDataset::from_raw(
            data.full.dates()[out_rows.clone()].to_vec(),
            data.full.raw_x().slice(ndarray::s![out_rows.clone(), ..]).to_owned(),
            Array1::from(data.full.raw_y().slice(ndarray::s![out_rows]).to_vec()),
            Some((data.info.scaling_x, data.info.scaling_y)),
        )?;
        match train::in_out_correlations(&ensemble, &data.in_sample, &out, ctx.cfg.periods_per_year) {
            Ok(c) => correlations = Some(c),
            Err(e) => correlation_error = Some(e.to_string()),
        }
    }

    let mut backtests = Vec::new();
    let bt = ctx.dir.path("backtest");
    if bt.is_dir() {
        let mut names: Vec<String> = std::fs::read_dir(&bt)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for name in names {
            let rel = format!("backtest/{name}/metrics.json");
            if ctx.dir.path(&rel).is_file() {
                backtests.push(ctx.dir.read_json(&rel)?);
            }
        }
    }
    ctx.dir.fresh_dir("report")?;
    ctx.dir.write_json(
        "report/summary.json",
        &Report {
            layer_dims: info.layer_dims,
            members: info.members,
            heuristic,
            mean_abs_tstat,
            in_out_correlations: correlations,
            in_out_correlations_error: correlation_error,
            backtests,
        },
    )?;
    Ok(())
}
