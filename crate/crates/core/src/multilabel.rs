//! Binary relevance, classifier chains and ML-kNN.
//!
//! All three fit into [`MultiLabelModel`], whose contract is a probability
//! in `[0, 1]` for every label of a feature vector.

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams, MaxFeatures, RandomForest};
use crate::seed;

pub const MODEL_FORMAT_VERSION: u32 = 1;

const STREAM_LABEL: u64 = 0x1AB3_0000;

/// Seed of the forest that models label `label` when the run seed is `seed`.
///
/// Depends only on the label's column index, so one label's forest does not
/// change when other label columns are added, removed or reordered.
pub fn label_seed(seed: u64, label: usize) -> u64 {
    seed::derive_seed(seed, STREAM_LABEL + label as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BRModel {
    pub per_label_models: Vec<RandomForest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CCModel {
    /// `chain_order[j]` is the label predicted at chain position `j`.
    pub chain_order: Vec<usize>,
    /// Model at position `j` sees the features followed by the `j` labels
    /// earlier in the chain.
    pub chained_models: Vec<RandomForest>,
}

/// Neighbour-count histograms for one label: `present[j]` counts training
/// instances carrying the label with exactly `j` of their `k` neighbours
/// carrying it too; `absent[j]` the same for instances without the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondCounts {
    pub present: Vec<usize>,
    pub absent: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLKNNModel {
    pub k: usize,
    pub smoothing: f64,
    pub train_features: Array2<f64>,
    pub train_labels: Array2<u8>,
    /// Smoothed `P(label present)` per label.
    pub priors: Vec<f64>,
    pub cond_counts: Vec<CondCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelVariant {
    BinaryRelevance(BRModel),
    ClassifierChain(CCModel),
    Mlknn(MLKNNModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelModel {
    pub n_features: usize,
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub config: ModelConfig,
    pub variant: ModelVariant,
}

impl MultiLabelModel {
    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Per-label probabilities, in the dataset's label order.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok(match &self.variant {
            ModelVariant::BinaryRelevance(br) => br
                .per_label_models
                .iter()
                .map(|f| f.predict_unchecked(x))
                .collect(),
            ModelVariant::ClassifierChain(cc) => cc.predict_unchecked(x, cc.chain_order.len()),
            ModelVariant::Mlknn(m) => m.predict_unchecked(x),
        })
    }

    /// Probability of one label. Cheaper than [`Self::predict_proba`] for
    /// binary relevance and for chain links early in the chain.
    pub fn predict_label_proba(&self, x: &[f64], label: usize) -> Result<f64> {
        self.check_width(x)?;
        if label >= self.n_labels() {
            return Err(Error::IndexOutOfRange {
                index: label,
                len: self.n_labels(),
            });
        }
        Ok(match &self.variant {
            ModelVariant::BinaryRelevance(br) => br.per_label_models[label].predict_unchecked(x),
            ModelVariant::ClassifierChain(cc) => {
                let pos = cc
                    .chain_order
                    .iter()
                    .position(|&l| l == label)
                    .expect("chain order is a permutation");
                cc.predict_unchecked(x, pos + 1)[label]
            }
            ModelVariant::Mlknn(m) => m.label_score(&m.neighbours(x), label),
        })
    }

    pub fn predict(&self, x: &[f64], threshold: f64) -> Result<Vec<u8>> {
        Ok(predict_labels(&self.predict_proba(x)?, threshold))
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            format_version: u32,
            model: &'a MultiLabelModel,
        }
        Ok(serde_json::to_string(&Doc {
            format_version: MODEL_FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            format_version: u32,
            model: MultiLabelModel,
        }
        let doc: Doc = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc.model)
    }
}

/// Thresholds probabilities; a value equal to the threshold counts as relevant.
pub fn predict_labels(probas: &[f64], threshold: f64) -> Vec<u8> {
    probas.iter().map(|&p| u8::from(p >= threshold)).collect()
}

fn label_vec(ds: &Dataset, l: usize) -> Vec<u8> {
    ds.label_column(l).to_vec()
}

fn check_trainable(train: &Dataset) -> Result<()> {
    if train.n_labels() == 0 {
        return Err(Error::InvalidDataset("no labels".into()));
    }
    if train.n_instances() == 0 {
        return Err(Error::EmptyInput("no training instances"));
    }
    Ok(())
}

/// Binary relevance with per-label seeds from [`label_seed`].
pub fn fit_br(train: &Dataset, params: &ForestParams) -> Result<MultiLabelModel> {
    let seeds: Vec<u64> = (0..train.n_labels())
        .map(|l| label_seed(params.seed, l))
        .collect();
    let mut model = fit_br_with_seeds(train, params, &seeds)?;
    model.config = ModelConfig::BinaryRelevance { forest: *params };
    Ok(model)
}

/// Binary relevance where label `l`'s forest is seeded with `seeds[l]`.
pub fn fit_br_with_seeds(
    train: &Dataset,
    params: &ForestParams,
    seeds: &[u64],
) -> Result<MultiLabelModel> {
    check_trainable(train)?;
    if seeds.len() != train.n_labels() {
        return Err(Error::WidthMismatch {
            expected: train.n_labels(),
            actual: seeds.len(),
        });
    }
    let per_label_models = seeds
        .par_iter()
        .enumerate()
        .map(|(l, &s)| {
            let y = label_vec(train, l);
            fit_forest(train.features(), &y, &ForestParams { seed: s, ..*params })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiLabelModel {
        n_features: train.n_features(),
        label_names: train.label_names().to_vec(),
        feature_names: train.feature_names().to_vec(),
        config: ModelConfig::BinaryRelevance { forest: *params },
        variant: ModelVariant::BinaryRelevance(BRModel { per_label_models }),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainOrder {
    /// A permutation drawn from the forest seed.
    Random,
    Explicit(Vec<usize>),
}

pub fn resolve_chain_order(order: &ChainOrder, n_labels: usize, seed: u64) -> Result<Vec<usize>> {
    match order {
        ChainOrder::Random => {
            let mut perm: Vec<usize> = (0..n_labels).collect();
            perm.shuffle(&mut seed::rng_for(seed, seed::STREAM_CHAIN_ORDER));
            Ok(perm)
        }
        ChainOrder::Explicit(perm) => {
            let mut seen = vec![false; n_labels];
            if perm.len() != n_labels
                || perm
                    .iter()
                    .any(|&l| l >= n_labels || std::mem::replace(&mut seen[l], true))
            {
                return Err(Error::InvalidParameter(format!(
                    "chain order {perm:?} is not a permutation of 0..{n_labels}"
                )));
            }
            Ok(perm.clone())
        }
    }
}

/// Classifier chain. Link `j` is trained on the features plus the true
/// values of the labels at chain positions `0..j`.
pub fn fit_cc(
    train: &Dataset,
    params: &ForestParams,
    order: &ChainOrder,
) -> Result<MultiLabelModel> {
    check_trainable(train)?;
    let chain_order = resolve_chain_order(order, train.n_labels(), params.seed)?;
    let chained_models = chain_order
        .par_iter()
        .enumerate()
        .map(|(j, &label)| {
            let prefix: Vec<usize> = chain_order[..j].to_vec();
            let augmented = if prefix.is_empty() {
                train.features().clone()
            } else {
                let earlier = train.labels().select(Axis(1), &prefix).mapv(f64::from);
                concatenate(Axis(1), &[train.features().view(), earlier.view()])
                    .expect("row counts agree")
            };
            let y = label_vec(train, label);
            fit_forest(
                &augmented,
                &y,
                &ForestParams {
                    seed: label_seed(params.seed, label),
                    ..*params
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiLabelModel {
        n_features: train.n_features(),
        label_names: train.label_names().to_vec(),
        feature_names: train.feature_names().to_vec(),
        config: ModelConfig::ClassifierChain {
            forest: *params,
            order: order.clone(),
        },
        variant: ModelVariant::ClassifierChain(CCModel {
            chain_order,
            chained_models,
        }),
    })
}

impl CCModel {
    /// Runs the first `upto` links. Earlier links feed their thresholded
    /// (>= 0.5) decisions to later ones. Output is indexed by label; labels
    /// beyond `upto` are left at 0.
    fn predict_unchecked(&self, x: &[f64], upto: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.chain_order.len()];
        let mut input = Vec::with_capacity(x.len() + upto);
        input.extend_from_slice(x);
        for (model, &label) in self.chained_models.iter().zip(&self.chain_order).take(upto) {
            let p = model.predict_unchecked(&input);
            out[label] = p;
            input.push(if p >= 0.5 { 1.0 } else { 0.0 });
        }
        out
    }
}

/// Indices of the `k` training rows closest to `x` in Euclidean distance,
/// nearest first; equal distances are ordered by row index.
pub fn knn_indices(train_features: &Array2<f64>, x: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > train_features.nrows() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds {} training rows",
            train_features.nrows()
        )));
    }
    if x.len() != train_features.ncols() {
        return Err(Error::WidthMismatch {
            expected: train_features.ncols(),
            actual: x.len(),
        });
    }
    Ok(nearest(train_features, x, k, None))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn nearest(train: &Array2<f64>, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = train
        .rows()
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .map(|(i, row)| (sq_dist(row.as_slice().expect("row-major"), x), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k == 0 {
        return Vec::new();
    }
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, i)| i).collect()
}

/// ML-kNN: smoothed priors and neighbour-count histograms per label.
/// Neighbour statistics exclude the instance itself.
pub fn fit_mlknn(train: &Dataset, k: usize, smoothing: f64) -> Result<MultiLabelModel> {
    check_trainable(train)?;
    let m = train.n_instances();
    if k == 0 || k >= m {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < {m} (number of instances), got {k}"
        )));
    }
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "smoothing must be positive, got {smoothing}"
        )));
    }
    let n_labels = train.n_labels();
    let features = train.features();
    let labels = train.labels();

    let priors = (0..n_labels)
        .map(|l| {
            let pos = labels.column(l).iter().map(|&v| f64::from(v)).sum::<f64>();
            (smoothing + pos) / (2.0 * smoothing + m as f64)
        })
        .collect();

    let neighbour_counts: Vec<Vec<usize>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let nn = nearest(features, train.feature_row(i), k, Some(i));
            (0..n_labels)
                .map(|l| nn.iter().filter(|&&j| labels[[j, l]] == 1).count())
                .collect()
        })
        .collect();

    let cond_counts = (0..n_labels)
        .map(|l| {
            let mut cc = CondCounts {
                present: vec![0; k + 1],
                absent: vec![0; k + 1],
            };
            for (i, counts) in neighbour_counts.iter().enumerate() {
                let bin = if labels[[i, l]] == 1 {
                    &mut cc.present
                } else {
                    &mut cc.absent
                };
                bin[counts[l]] += 1;
            }
            cc
        })
        .collect();

    Ok(MultiLabelModel {
        n_features: train.n_features(),
        label_names: train.label_names().to_vec(),
        feature_names: train.feature_names().to_vec(),
        config: ModelConfig::Mlknn { k, smoothing },
        variant: ModelVariant::Mlknn(MLKNNModel {
            k,
            smoothing,
            train_features: features.clone(),
            train_labels: labels.clone(),
            priors,
            cond_counts,
        }),
    })
}

impl MLKNNModel {
    fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        nearest(&self.train_features, x, self.k, None)
    }

    fn label_score(&self, nn: &[usize], l: usize) -> f64 {
        let c = nn
            .iter()
            .filter(|&&j| self.train_labels[[j, l]] == 1)
            .count();
        let s = self.smoothing;
        let k = self.k as f64;
        let counts = &self.cond_counts[l];
        let total_present: usize = counts.present.iter().sum();
        let total_absent: usize = counts.absent.iter().sum();
        let like_present = (s + counts.present[c] as f64) / (s * (k + 1.0) + total_present as f64);
        let like_absent = (s + counts.absent[c] as f64) / (s * (k + 1.0) + total_absent as f64);
        let prior = self.priors[l];
        let num = prior * like_present;
        num / (num + (1.0 - prior) * like_absent)
    }

    fn predict_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let nn = self.neighbours(x);
        (0..self.priors.len())
            .map(|l| self.label_score(&nn, l))
            .collect()
    }
}

/// A fully specified training recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ModelConfig {
    BinaryRelevance {
        forest: ForestParams,
    },
    ClassifierChain {
        forest: ForestParams,
        order: ChainOrder,
    },
    Mlknn {
        k: usize,
        smoothing: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Br,
    Cc,
    Mlknn,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "br" => Ok(Algorithm::Br),
            "cc" => Ok(Algorithm::Cc),
            "mlknn" => Ok(Algorithm::Mlknn),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm '{other}'"
            ))),
        }
    }
}

pub const PRESETS: [&str; 3] = ["paper-br", "paper-cc", "paper-mlknn"];

impl ModelConfig {
    /// Library defaults for an algorithm.
    pub fn default_for(algorithm: Algorithm, seed: u64) -> Self {
        let forest = ForestParams {
            seed,
            ..ForestParams::default()
        };
        match algorithm {
            Algorithm::Br => ModelConfig::BinaryRelevance { forest },
            Algorithm::Cc => ModelConfig::ClassifierChain {
                forest,
                order: ChainOrder::Random,
            },
            Algorithm::Mlknn => ModelConfig::Mlknn {
                k: 10,
                smoothing: 1.0,
            },
        }
    }

    /// Named configurations:
    ///
    /// - `paper-br`: entropy forest, max depth 15, min leaf size 2
    /// - `paper-cc`: entropy forest, max depth 3, random chain order
    /// - `paper-mlknn`: k = 5, Laplace smoothing
    ///
    /// Forest settings not listed (100 trees, sqrt features) are defaults.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let base = ForestParams {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_leaf: 1,
            bootstrap: true,
            max_depth: 15,
            seed,
        };
        match name {
            "paper-br" => Ok(ModelConfig::BinaryRelevance {
                forest: ForestParams {
                    max_depth: 15,
                    min_samples_leaf: 2,
                    ..base
                },
            }),
            "paper-cc" => Ok(ModelConfig::ClassifierChain {
                forest: ForestParams {
                    max_depth: 3,
                    ..base
                },
                order: ChainOrder::Random,
            }),
            "paper-mlknn" => Ok(ModelConfig::Mlknn {
                k: 5,
                smoothing: 1.0,
            }),
            other => Err(Error::InvalidParameter(format!(
                "unknown preset '{other}' (known: {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            ModelConfig::BinaryRelevance { .. } => Algorithm::Br,
            ModelConfig::ClassifierChain { .. } => Algorithm::Cc,
            ModelConfig::Mlknn { .. } => Algorithm::Mlknn,
        }
    }

    /// Overrides one named hyperparameter.
    ///
    /// Forest algorithms accept `n_trees`, `max_depth`, `min_samples_leaf`,
    /// `max_features` and `seed`; ML-kNN accepts `k` and `s`.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be a non-negative integer, got {v}"
                )))
            }
        };
        match self {
            ModelConfig::BinaryRelevance { forest }
            | ModelConfig::ClassifierChain { forest, .. } => {
                match name {
                    "n_trees" => forest.n_trees = as_count(value)?,
                    "max_depth" => forest.max_depth = as_count(value)?,
                    "min_samples_leaf" => forest.min_samples_leaf = as_count(value)?,
                    "max_features" => forest.max_features = MaxFeatures::Count(as_count(value)?),
                    "seed" => forest.seed = as_count(value)? as u64,
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "unknown forest hyperparameter '{other}'"
                        )))
                    }
                }
                forest.validate()
            }
            ModelConfig::Mlknn { k, smoothing } => {
                match name {
                    "k" => *k = as_count(value)?,
                    "s" | "smoothing" => *smoothing = value,
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "unknown ML-kNN hyperparameter '{other}'"
                        )))
                    }
                }
                Ok(())
            }
        }
    }

    pub fn fit(&self, train: &Dataset) -> Result<MultiLabelModel> {
        match self {
            ModelConfig::BinaryRelevance { forest } => fit_br(train, forest),
            ModelConfig::ClassifierChain { forest, order } => fit_cc(train, forest, order),
            ModelConfig::Mlknn { k, smoothing } => fit_mlknn(train, *k, *smoothing),
        }
    }
}
