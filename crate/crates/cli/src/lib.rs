//! Command-line front end: train, tune, explain and plot.
//!
//! Every command reads a [`RunConfig`], either from a JSON file given with
//! `--config`, from flags, or both (flags win). All output bytes are a
//! function of the inputs and the seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use mlshap_core::data::{load_arff, load_csv, make_folds, Dataset, LabelSpec};
use mlshap_core::eval::{grid_search, CVReport, GridAxis, Metric, ParamGrid};
use mlshap_core::explainviz::{
    feature_importance, force_data, render_svg, summary_points, write_json, PlotSpec,
};
use mlshap_core::multilabel::{Algorithm, ModelConfig, MultiLabelModel};
use mlshap_core::seed::rng_for;
use mlshap_core::shap::{explain_instance, BackgroundSet, Budget, Estimator, Explanation};

pub const DEFAULT_BACKGROUND: usize = 100;
const STREAM_INSTANCES: u64 = 0x1257_0000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config, paths or input files. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while fitting, estimating or writing. Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<mlshap_core::Error> for CliError {
    fn from(e: mlshap_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(r: mlshap_core::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Arff,
    Csv,
}

/// Everything a run needs. Absent fields fall back to documented defaults;
/// `seed` has none.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Inferred from the file extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DataFormat>,
    /// `N` (last N attributes), `leading:N`, or comma-separated names.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Hyperparameter overrides applied after the preset or defaults.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<Estimator>,
    /// A coalition count or `full`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub grid: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scoring: Option<Metric>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// `all`, `random:N`, `A..B` or a comma-separated list of row indices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<String>,
    /// Label names or 0-based indices to explain; all labels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explain_labels: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Fields set in `over` replace those in `self`; maps are merged.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            data,
            format,
            labels,
            algo,
            preset,
            seed,
            background,
            estimator,
            budget,
            out,
            reps,
            folds,
            scoring,
            model,
            instances,
            explain_labels
        );
        self.params.extend(over.params);
        self.grid.extend(over.grid);
        self
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            CliError::Usage("a seed is required (--seed or \"seed\" in the config)".into())
        })
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Usage("an output directory is required (--out)".into()))
    }

    pub fn label_spec(&self) -> Result<LabelSpec> {
        let raw = self
            .labels
            .as_deref()
            .ok_or_else(|| CliError::Usage("label columns are required (--labels)".into()))?;
        parse_label_spec(raw)
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let path = self
            .data
            .as_deref()
            .ok_or_else(|| CliError::Usage("a dataset is required (--data)".into()))?;
        let spec = self.label_spec()?;
        let format = match self.format {
            Some(f) => f,
            None => match path.extension().and_then(|e| e.to_str()) {
                Some(e) if e.eq_ignore_ascii_case("csv") => DataFormat::Csv,
                _ => DataFormat::Arff,
            },
        };
        usage(match format {
            DataFormat::Arff => load_arff(path, &spec),
            DataFormat::Csv => load_csv(path, &spec),
        })
    }

    /// The training recipe: preset, else algorithm defaults, then `params`.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let seed = self.seed()?;
        let mut cfg = match (&self.preset, self.algo) {
            (Some(name), algo) => {
                let cfg = usage(ModelConfig::preset(name, seed))?;
                if let Some(a) = algo {
                    if a != cfg.algorithm() {
                        return Err(CliError::Usage(format!(
                            "preset '{name}' conflicts with --algo {a:?}"
                        )));
                    }
                }
                cfg
            }
            (None, Some(a)) => ModelConfig::default_for(a, seed),
            (None, None) => {
                return Err(CliError::Usage(
                    "either --algo or --preset is required".into(),
                ))
            }
        };
        for (name, &value) in &self.params {
            usage(cfg.set_param(name, value))?;
        }
        Ok(cfg)
    }

    pub fn budget(&self, n_features: usize) -> Result<Budget> {
        match &self.budget {
            Some(b) => usage(b.parse()),
            None => Ok(Budget::default_for(n_features)),
        }
    }
}

pub fn parse_label_spec(raw: &str) -> Result<LabelSpec> {
    let raw = raw.trim();
    if let Ok(n) = raw.parse::<usize>() {
        return Ok(LabelSpec::Trailing(n));
    }
    if let Some(n) = raw.strip_prefix("leading:") {
        return n
            .trim()
            .parse()
            .map(LabelSpec::Leading)
            .map_err(|_| CliError::Usage(format!("bad label count in '{raw}'")));
    }
    let names: Vec<String> = raw.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(|n| n.is_empty()) {
        return Err(CliError::Usage(format!("bad label list '{raw}'")));
    }
    Ok(LabelSpec::Names(names))
}

/// Resolves an instance selector against a dataset of `n` rows.
pub fn parse_instances(raw: &str, n: usize, seed: u64) -> Result<Vec<usize>> {
    let raw = raw.trim();
    let bad = || CliError::Usage(format!("bad instance selector '{raw}'"));
    let idx: Vec<usize> = if raw == "all" {
        (0..n).collect()
    } else if let Some(count) = raw.strip_prefix("random:") {
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if count > n {
            return Err(CliError::Usage(format!(
                "cannot pick {count} of {n} instances"
            )));
        }
        let mut v = index::sample(&mut rng_for(seed, STREAM_INSTANCES), n, count).into_vec();
        v.sort_unstable();
        v
    } else if let Some((a, b)) = raw.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else {
        raw.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if idx.is_empty() {
        return Err(CliError::Usage(format!(
            "instance selector '{raw}' selects nothing"
        )));
    }
    if let Some(&i) = idx.iter().find(|&&i| i >= n) {
        return Err(CliError::Usage(format!(
            "instance {i} out of range (dataset has {n} rows)"
        )));
    }
    Ok(idx)
}

/// Label names are matched first, then 0-based indices.
pub fn parse_label_selection(raw: Option<&str>, names: &[String]) -> Result<Vec<usize>> {
    let Some(raw) = raw else {
        return Ok((0..names.len()).collect());
    };
    raw.split(',')
        .map(|tok| {
            let tok = tok.trim();
            if let Some(i) = names.iter().position(|n| n == tok) {
                return Ok(i);
            }
            match tok.parse::<usize>() {
                Ok(i) if i < names.len() => Ok(i),
                _ => Err(CliError::Usage(format!(
                    "unknown label '{tok}' (model has {} labels)",
                    names.len()
                ))),
            }
        })
        .collect()
}

/// Parses `name=v1,v2,...` or `name=A..=B` (integer range, inclusive).
pub fn parse_grid_axis(raw: &str) -> Result<(String, Vec<f64>)> {
    let bad = || {
        CliError::Usage(format!(
            "bad grid axis '{raw}', expected name=v1,v2 or name=A..=B"
        ))
    };
    let (name, values) = raw.split_once('=').ok_or_else(bad)?;
    let values = if let Some((a, b)) = values.split_once("..=") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).map(|v| v as f64).collect()
    } else {
        values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok((name.trim().to_string(), values))
}

fn parse_param(raw: &str) -> Result<(String, f64)> {
    let (name, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("bad parameter '{raw}', expected name=value")))?;
    let value = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad value in '{raw}'")))?;
    Ok((name.trim().to_string(), value))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub dataset: String,
    pub n_instances: usize,
    pub n_features: usize,
    pub n_labels: usize,
    pub label_names: Vec<String>,
    pub config: ModelConfig,
    /// Hamming loss, subset accuracy and micro-F1 on the training data.
    pub training_metrics: BTreeMap<String, f64>,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub model_path: PathBuf,
    pub report_path: PathBuf,
    pub model: MultiLabelModel,
    pub report: TrainReport,
}

pub fn fit_from_config(config: &RunConfig, dataset: &Dataset) -> Result<MultiLabelModel> {
    Ok(config.model_config()?.fit(dataset)?)
}

/// Fits the configured model on the full dataset and writes `model.json` and
/// `train_report.json`.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutput> {
    config.seed()?;
    let out = config.out_dir()?;
    let dataset = config.load_dataset()?;
    let model = fit_from_config(config, &dataset)?;

    let mut pred = ndarray::Array2::<u8>::zeros((dataset.n_instances(), dataset.n_labels()));
    for i in 0..dataset.n_instances() {
        let row = model.predict(dataset.feature_row(i), 0.5)?;
        pred.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    let training_metrics = Metric::ALL
        .iter()
        .map(|m| Ok((m.name().to_string(), m.score(dataset.labels(), &pred)?)))
        .collect::<Result<_>>()?;
    let report = TrainReport {
        dataset: dataset.name().to_string(),
        n_instances: dataset.n_instances(),
        n_features: dataset.n_features(),
        n_labels: dataset.n_labels(),
        label_names: dataset.label_names().to_vec(),
        config: model.config.clone(),
        training_metrics,
    };

    ensure_dir(out)?;
    let model_path = out.join("model.json");
    let report_path = out.join("train_report.json");
    write_file(&model_path, &model.to_json()?)?;
    write_file(
        &report_path,
        &serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?,
    )?;
    write_file(&out.join("run_config.json"), &config.to_json())?;
    Ok(TrainOutput {
        model_path,
        report_path,
        model,
        report,
    })
}

/// Grid used when the config names none: `k` in 1..=20 for ML-kNN, depth
/// {3, 15} by minimum leaf size {1, 2} for the forest methods.
pub fn default_grid(base: &ModelConfig) -> Vec<GridAxis> {
    match base.algorithm() {
        Algorithm::Mlknn => ParamGrid::mlknn_k_range().axes,
        Algorithm::Br | Algorithm::Cc => vec![
            GridAxis {
                name: "max_depth".into(),
                values: vec![3.0, 15.0],
            },
            GridAxis {
                name: "min_samples_leaf".into(),
                values: vec![1.0, 2.0],
            },
        ],
    }
}

#[derive(Debug)]
pub struct TuneOutput {
    pub report_path: PathBuf,
    pub table_path: PathBuf,
    pub report: CVReport,
}

/// Repeated k-fold grid search; writes `cv_report.json` and `cv_table.txt`.
pub fn cmd_tune(config: &RunConfig) -> Result<TuneOutput> {
    let seed = config.seed()?;
    let out = config.out_dir()?;
    let dataset = config.load_dataset()?;
    let base = config.model_config()?;
    let axes = if config.grid.is_empty() {
        default_grid(&base)
    } else {
        config
            .grid
            .iter()
            .map(|(name, values)| GridAxis {
                name: name.clone(),
                values: values.clone(),
            })
            .collect()
    };
    let grid = ParamGrid { base, axes };
    usage(grid.points())?;
    let plan = usage(make_folds(
        dataset.n_instances(),
        config.reps.unwrap_or(2),
        config.folds.unwrap_or(5),
        seed,
    ))?;
    let report = grid_search(
        &dataset,
        &grid,
        &plan,
        config.scoring.unwrap_or(Metric::HammingLoss),
    )?;

    ensure_dir(out)?;
    let report_path = out.join("cv_report.json");
    let table_path = out.join("cv_table.txt");
    write_file(&report_path, &report.to_json()?)?;
    write_file(&table_path, &report.render_table())?;
    write_file(&out.join("run_config.json"), &config.to_json())?;
    Ok(TuneOutput {
        report_path,
        table_path,
        report,
    })
}

pub fn explanation_file_name(instance: usize, label: usize) -> String {
    format!("explanation_i{instance}_l{label}.json")
}

#[derive(Debug)]
pub struct ExplainOutput {
    pub files: Vec<PathBuf>,
    pub explanations: Vec<Explanation>,
}

/// Explains the selected instances and labels. Uses `model` when set,
/// otherwise fits the configured model on the full dataset first.
pub fn cmd_explain(config: &RunConfig) -> Result<ExplainOutput> {
    let seed = config.seed()?;
    let out = config.out_dir()?;
    let dataset = config.load_dataset()?;
    let model = match &config.model {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read model {}: {e}", path.display()))
            })?;
            usage(MultiLabelModel::from_json(&text))?
        }
        None => fit_from_config(config, &dataset)?,
    };
    if model.n_features != dataset.n_features() {
        return Err(CliError::Usage(format!(
            "model expects {} features but the dataset has {}",
            model.n_features,
            dataset.n_features()
        )));
    }
    let instances = parse_instances(
        config.instances.as_deref().ok_or_else(|| {
            CliError::Usage("an instance selector is required (--instances)".into())
        })?,
        dataset.n_instances(),
        seed,
    )?;
    let labels = parse_label_selection(config.explain_labels.as_deref(), &model.label_names)?;
    let estimator = config.estimator.unwrap_or(Estimator::Kernel);
    let budget = config.budget(dataset.n_features())?;
    let background = usage(BackgroundSet::sample(
        dataset.features(),
        config.background.unwrap_or(DEFAULT_BACKGROUND),
        seed,
    ))?;

    let mut explanations = Vec::with_capacity(instances.len() * labels.len());
    for &i in &instances {
        explanations.extend(explain_instance(
            &model,
            i,
            dataset.feature_row(i),
            &background,
            &labels,
            estimator,
            budget,
            seed,
        )?);
    }
    ensure_dir(out)?;
    let mut files = Vec::with_capacity(explanations.len());
    for e in &explanations {
        let path = out.join(explanation_file_name(e.instance, e.label));
        write_file(&path, &e.to_json()?)?;
        files.push(path);
    }
    Ok(ExplainOutput {
        files,
        explanations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Importance,
    Summary,
    Force,
}

#[derive(Debug, Clone)]
pub struct PlotRequest {
    pub kind: PlotKind,
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    /// Restricts a summary plot to one label when inputs mix labels.
    pub label: Option<usize>,
    pub title: Option<String>,
}

pub fn read_explanations(paths: &[PathBuf]) -> Result<Vec<Explanation>> {
    if paths.is_empty() {
        return Err(CliError::Usage("no explanation files given".into()));
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            Explanation::from_json(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Writes an SVG and its JSON payload per plot; returns all written paths.
pub fn cmd_plot(req: &PlotRequest) -> Result<Vec<PathBuf>> {
    let mut explanations = read_explanations(&req.inputs)?;
    let specs: Vec<(String, PlotSpec)> = match req.kind {
        PlotKind::Importance => {
            let table = usage(feature_importance(&explanations))?;
            let title = req
                .title
                .clone()
                .unwrap_or_else(|| "Feature importance".into());
            vec![("importance".into(), PlotSpec::importance(table, title))]
        }
        PlotKind::Summary => {
            if let Some(l) = req.label {
                explanations.retain(|e| e.label == l);
                if explanations.is_empty() {
                    return Err(CliError::Usage(format!("no explanations for label {l}")));
                }
            }
            let points = usage(summary_points(&explanations))?;
            let title = req
                .title
                .clone()
                .unwrap_or_else(|| format!("SHAP summary, label {}", points.label));
            vec![(
                format!("summary_l{}", points.label),
                PlotSpec::summary(points, title),
            )]
        }
        PlotKind::Force => explanations
            .iter()
            .map(|e| {
                let title = req
                    .title
                    .clone()
                    .unwrap_or_else(|| format!("Instance {}, label {}", e.instance, e.label));
                (
                    format!("force_i{}_l{}", e.instance, e.label),
                    PlotSpec::force(force_data(e), title),
                )
            })
            .collect(),
    };
    ensure_dir(&req.out)?;
    let mut written = Vec::new();
    for (stem, spec) in specs {
        let svg = req.out.join(format!("{stem}.svg"));
        let json = req.out.join(format!("{stem}.json"));
        write_file(&svg, &render_svg(&spec))?;
        write_file(&json, &write_json(&spec)?)?;
        written.push(svg);
        written.push(json);
    }
    Ok(written)
}

#[derive(Debug, Parser)]
#[command(
    name = "mlshap",
    version,
    about = "Multi-label classifiers with Shapley-value explanations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a whole dataset.
    Train(RunArgs),
    /// Grid search with repeated k-fold cross-validation.
    Tune(TuneArgs),
    /// Shapley-value explanations for selected instances and labels.
    Explain(ExplainArgs),
    /// Render explanation files as SVG plus a JSON payload.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Label columns: a trailing count, `leading:N`, or comma-separated names.
    #[arg(long)]
    pub labels: Option<String>,
    #[arg(long, value_parser = parse_algo)]
    pub algo: Option<Algorithm>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Hyperparameter override, e.g. `--param max_depth=10`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<Estimator>,
    /// Coalition budget for kernel estimation: a count or `full`.
    #[arg(long)]
    pub budget: Option<String>,
    /// Background rows sampled from the dataset.
    #[arg(long)]
    pub background: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_algo(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: mlshap_core::Error| e.to_string())
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    s.parse().map_err(|e: mlshap_core::Error| e.to_string())
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: mlshap_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Grid axis, e.g. `--grid k=1..=20` or `--grid max_depth=3,15`.
    #[arg(long = "grid", value_name = "NAME=VALUES")]
    pub grid: Vec<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_parser = parse_metric)]
    pub scoring: Option<Metric>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Model file from `train`; the configured model is fitted when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `all`, `random:N`, `A..B`, or comma-separated row indices.
    #[arg(long)]
    pub instances: Option<String>,
    /// Labels to explain, by name or 0-based index.
    #[arg(long = "explain-labels")]
    pub explain_labels: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Only use explanations of this label (summary plots).
    #[arg(long)]
    pub label: Option<usize>,
    #[arg(long)]
    pub title: Option<String>,
    /// Explanation JSON files.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

impl RunArgs {
    /// The config file (if any) overlaid with the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let params = self
            .params
            .iter()
            .map(|p| parse_param(p))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(base.overlay(RunConfig {
            data: self.data.clone(),
            format: self.format,
            labels: self.labels.clone(),
            algo: self.algo,
            preset: self.preset.clone(),
            params,
            seed: self.seed,
            background: self.background,
            estimator: self.estimator,
            budget: self.budget.clone(),
            out: self.out.clone(),
            ..RunConfig::default()
        }))
    }
}

fn execute(command: Command) -> Result<String> {
    match command {
        Command::Train(args) => {
            let out = cmd_train(&args.resolve()?)?;
            Ok(format!(
                "trained {} labels on {} instances -> {}",
                out.report.n_labels,
                out.report.n_instances,
                out.model_path.display()
            ))
        }
        Command::Tune(args) => {
            let mut config = args.run.resolve()?;
            for raw in &args.grid {
                let (name, values) = parse_grid_axis(raw)?;
                config.grid.insert(name, values);
            }
            config = config.overlay(RunConfig {
                reps: args.reps,
                folds: args.folds,
                scoring: args.scoring,
                ..RunConfig::default()
            });
            let out = cmd_tune(&config)?;
            Ok(format!(
                "{}\n{} fit/evaluate cycles -> {}",
                out.report.render_table().trim_end(),
                out.report.total_evaluations,
                out.report_path.display()
            ))
        }
        Command::Explain(args) => {
            let config = args.run.resolve()?.overlay(RunConfig {
                model: args.model,
                instances: args.instances,
                explain_labels: args.explain_labels,
                ..RunConfig::default()
            });
            let out = cmd_explain(&config)?;
            Ok(format!(
                "wrote {} explanation files to {}",
                out.files.len(),
                config.out_dir()?.display()
            ))
        }
        Command::Plot(args) => {
            let written = cmd_plot(&PlotRequest {
                kind: args.kind,
                inputs: args.files,
                out: args.out,
                label: args.label,
                title: args.title,
            })?;
            Ok(written
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join("\n"))
        }
    }
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
