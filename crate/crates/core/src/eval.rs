//! Multi-label metrics and repeated k-fold grid search.

use std::collections::BTreeMap;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::multilabel::{predict_labels, ModelConfig};

fn check_same_shape(y_true: &Array2<u8>, y_pred: &Array2<u8>) -> Result<()> {
    if y_true.dim() != y_pred.dim() {
        return Err(Error::InvalidParameter(format!(
            "label matrices differ in shape: {:?} vs {:?}",
            y_true.dim(),
            y_pred.dim()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput("empty label matrix"));
    }
    Ok(())
}

/// Fraction of label entries that disagree.
pub fn hamming_loss(y_true: &Array2<u8>, y_pred: &Array2<u8>) -> Result<f64> {
    check_same_shape(y_true, y_pred)?;
    let wrong = y_true.iter().zip(y_pred).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / y_true.len() as f64)
}

/// Fraction of rows predicted exactly.
pub fn subset_accuracy(y_true: &Array2<u8>, y_pred: &Array2<u8>) -> Result<f64> {
    check_same_shape(y_true, y_pred)?;
    let exact = y_true
        .rows()
        .into_iter()
        .zip(y_pred.rows())
        .filter(|(a, b)| a == b)
        .count();
    Ok(exact as f64 / y_true.nrows() as f64)
}

/// `2TP / (2TP + FP + FN)` pooled over all labels. Defined as 1 when neither
/// matrix has a positive entry.
pub fn micro_f1(y_true: &Array2<u8>, y_pred: &Array2<u8>) -> Result<f64> {
    check_same_shape(y_true, y_pred)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    Ok(if denom == 0 {
        1.0
    } else {
        (2 * tp) as f64 / denom as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    HammingLoss,
    SubsetAccuracy,
    MicroF1,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::HammingLoss, Metric::SubsetAccuracy, Metric::MicroF1];

    pub fn name(self) -> &'static str {
        match self {
            Metric::HammingLoss => "hamming_loss",
            Metric::SubsetAccuracy => "subset_accuracy",
            Metric::MicroF1 => "micro_f1",
        }
    }

    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::HammingLoss)
    }

    pub fn score(self, y_true: &Array2<u8>, y_pred: &Array2<u8>) -> Result<f64> {
        match self {
            Metric::HammingLoss => hamming_loss(y_true, y_pred),
            Metric::SubsetAccuracy => subset_accuracy(y_true, y_pred),
            Metric::MicroF1 => micro_f1(y_true, y_pred),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric '{s}'")))
    }
}

/// One hyperparameter and the values to try.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Cartesian product of axes applied on top of a base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub base: ModelConfig,
    pub axes: Vec<GridAxis>,
}

impl ParamGrid {
    /// The ML-kNN search with `k` in `1..=20`.
    pub fn mlknn_k_range() -> Self {
        ParamGrid {
            base: ModelConfig::Mlknn {
                k: 1,
                smoothing: 1.0,
            },
            axes: vec![GridAxis {
                name: "k".into(),
                values: (1..=20).map(f64::from).collect(),
            }],
        }
    }

    /// Expands the grid; the first axis varies slowest.
    pub fn points(&self) -> Result<Vec<(BTreeMap<String, f64>, ModelConfig)>> {
        if let Some(axis) = self.axes.iter().find(|a| a.values.is_empty()) {
            return Err(Error::InvalidParameter(format!(
                "grid axis '{}' has no values",
                axis.name
            )));
        }
        let mut points = vec![(BTreeMap::new(), self.base.clone())];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for (params, cfg) in &points {
                for &v in &axis.values {
                    let mut cfg = cfg.clone();
                    cfg.set_param(&axis.name, v)?;
                    let mut params = params.clone();
                    params.insert(axis.name.clone(), v);
                    next.push((params, cfg));
                }
            }
            points = next;
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation across evaluations.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub params: BTreeMap<String, f64>,
    pub config: ModelConfig,
    pub evaluations: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub scoring: Metric,
    pub repetitions: usize,
    pub folds_per_rep: usize,
    pub fold_seed: u64,
    pub points: Vec<PointReport>,
    pub best: usize,
    /// Fit/evaluate cycles run, `points × repetitions × folds`.
    pub total_evaluations: usize,
}

impl CVReport {
    pub fn best_point(&self) -> &PointReport {
        &self.points[self.best]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text table, best score first.
    pub fn render_table(&self) -> String {
        let key = self.scoring.name();
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        let score = |i: usize| self.points[i].metrics[key].mean;
        order.sort_by(|&a, &b| {
            let o = score(a).total_cmp(&score(b));
            let o = if self.scoring.lower_is_better() {
                o
            } else {
                o.reverse()
            };
            o.then(a.cmp(&b))
        });
        let mut out = format!("{:<5} {:<40}", "rank", "params");
        for m in Metric::ALL {
            out += &format!(" {:>22}", m.name());
        }
        out.push('\n');
        for (rank, &i) in order.iter().enumerate() {
            let p = &self.points[i];
            let params = p
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",");
            out += &format!(
                "{:<5} {:<40}",
                rank + 1,
                if params.is_empty() {
                    "-".into()
                } else {
                    params
                }
            );
            for m in Metric::ALL {
                let s = p.metrics[m.name()];
                out += &format!(" {:>13.4} ± {:<6.4}", s.mean, s.std);
            }
            if i == self.best {
                out += "  *";
            }
            out.push('\n');
        }
        out
    }
}

fn evaluate(cfg: &ModelConfig, train: &Dataset, test: &Dataset) -> Result<[f64; 3]> {
    let model = cfg.fit(train)?;
    let mut pred = Array2::<u8>::zeros((test.n_instances(), test.n_labels()));
    for i in 0..test.n_instances() {
        let row = predict_labels(&model.predict_proba(test.feature_row(i))?, 0.5);
        pred.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    let y = test.labels();
    Ok([
        hamming_loss(y, &pred)?,
        subset_accuracy(y, &pred)?,
        micro_f1(y, &pred)?,
    ])
}

fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MetricSummary {
        mean,
        std: var.sqrt(),
    }
}

/// Trains and scores every grid point on every fold of `plan`.
///
/// The best point has the highest mean score (lowest for losses); ties keep
/// the earlier point in grid order.
pub fn grid_search(
    dataset: &Dataset,
    grid: &ParamGrid,
    plan: &FoldPlan,
    scoring: Metric,
) -> Result<CVReport> {
    if plan.n_instances != dataset.n_instances() {
        return Err(Error::InvalidParameter(format!(
            "fold plan covers {} instances but the dataset has {}",
            plan.n_instances,
            dataset.n_instances()
        )));
    }
    let points = grid.points()?;
    if points.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let folds: Vec<(Dataset, Dataset)> = plan
        .folds()
        .map(|f| Ok((dataset.split(&f.train)?, dataset.split(&f.test)?)))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..folds.len()).map(move |f| (p, f)))
        .collect();
    let scores: Vec<[f64; 3]> = jobs
        .par_iter()
        .map(|&(p, f)| evaluate(&points[p].1, &folds[f].0, &folds[f].1))
        .collect::<Result<_>>()?;

    let reports: Vec<PointReport> = points
        .into_iter()
        .enumerate()
        .map(|(p, (params, config))| {
            let chunk = &scores[p * folds.len()..(p + 1) * folds.len()];
            let metrics = Metric::ALL
                .iter()
                .enumerate()
                .map(|(m, metric)| {
                    let vals: Vec<f64> = chunk.iter().map(|s| s[m]).collect();
                    (metric.name().to_string(), summarize(&vals))
                })
                .collect();
            PointReport {
                params,
                config,
                evaluations: chunk.len(),
                metrics,
            }
        })
        .collect();

    let key = scoring.name();
    let mut best = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        let (cand, cur) = (r.metrics[key].mean, reports[best].metrics[key].mean);
        let better = if scoring.lower_is_better() {
            cand < cur
        } else {
            cand > cur
        };
        if better {
            best = i;
        }
    }
    Ok(CVReport {
        scoring,
        repetitions: plan.repetitions,
        folds_per_rep: plan.folds_per_rep,
        fold_seed: plan.seed,
        total_evaluations: scores.len(),
        points: reports,
        best,
    })
}
