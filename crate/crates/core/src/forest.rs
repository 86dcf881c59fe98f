//! Binary probabilistic random forest built from entropy decision trees.
//!
//! Trees are grown greedily: at every node a random subset of
//! `max_features` features is scanned, each candidate threshold being the
//! midpoint between two consecutive distinct values, and the split with the
//! largest information gain wins. Ties go to the lowest feature index, then
//! the lowest threshold. Leaves store the positive-class fraction of their
//! training rows.

use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const FOREST_FORMAT_VERSION: u32 = 1;

/// Number of features drawn as split candidates at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(c) => c,
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
    /// Draw a with-replacement resample of the training rows for every tree.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 15,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter(
                "max_depth must be at least 1".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::InvalidParameter(
                "max_features must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Binary entropy in bits of a `(positive, negative)` count pair.
pub fn entropy(positive: usize, negative: usize) -> Result<f64> {
    if positive + negative == 0 {
        return Err(Error::EmptyInput("entropy of an empty node"));
    }
    Ok(entropy_unchecked(positive as f64, negative as f64))
}

fn entropy_unchecked(pos: f64, neg: f64) -> f64 {
    let n = pos + neg;
    let mut h = 0.0;
    for c in [pos, neg] {
        if c > 0.0 {
            let p = c / n;
            h -= p * p.log2();
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probability: f64,
    },
}

/// Arena-allocated binary tree; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    n_features: usize,
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { probability } => return probability,
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

struct TreeBuilder<'a> {
    x: &'a Array2<f64>,
    y: &'a [u8],
    params: &'a ForestParams,
    n_candidates: usize,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8)>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            probability: pos as f64 / n as f64,
        });
        if depth >= self.params.max_depth
            || pos == 0
            || pos == n
            || n < 2 * self.params.min_samples_leaf
        {
            return id;
        }
        let mut features: Vec<usize> =
            index::sample(rng, self.x.ncols(), self.n_candidates).into_vec();
        features.sort_unstable();
        let Some(split) = best_split(
            self.x,
            self.y,
            rows,
            &features,
            self.params.min_samples_leaf,
            &mut self.scratch,
        ) else {
            return id;
        };
        let (left_rows, right_rows) =
            partition(rows, |&r| self.x[[r, split.feature]] <= split.threshold);
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        self.nodes[id] = Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn partition<T, F: Fn(&T) -> bool>(items: &mut [T], pred: F) -> (&mut [T], &mut [T]) {
    let mut k = 0;
    for i in 0..items.len() {
        if pred(&items[i]) {
            items.swap(i, k);
            k += 1;
        }
    }
    items.split_at_mut(k)
}

/// Best entropy-gain split of `rows` over `features` (scanned in the given
/// order), respecting the minimum leaf size. `None` if no valid split exists.
pub fn best_split(
    x: &Array2<f64>,
    y: &[u8],
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
    scratch: &mut Vec<(f64, u8)>,
) -> Option<Split> {
    let n = rows.len();
    let total_pos = rows.iter().filter(|&&r| y[r] == 1).count() as f64;
    let parent = entropy_unchecked(total_pos, n as f64 - total_pos);
    let mut best: Option<Split> = None;
    for &f in features {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (x[[r, f]], y[r])));
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0.0;
        for i in 0..n - 1 {
            left_pos += f64::from(scratch[i].1);
            let (lo, hi) = (scratch[i].0, scratch[i + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_samples_leaf || n_right < min_samples_leaf {
                continue;
            }
            let right_pos = total_pos - left_pos;
            let gain = parent
                - (n_left as f64 / n as f64)
                    * entropy_unchecked(left_pos, n_left as f64 - left_pos)
                - (n_right as f64 / n as f64)
                    * entropy_unchecked(right_pos, n_right as f64 - right_pos);
            if best.is_none_or(|b| gain > b.gain) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

fn check_xy(x: &Array2<f64>, y: &[u8]) -> Result<()> {
    if x.nrows() == 0 || y.is_empty() {
        return Err(Error::EmptyInput("no training rows"));
    }
    if x.nrows() != y.len() {
        return Err(Error::WidthMismatch {
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if x.ncols() == 0 {
        return Err(Error::EmptyInput("no features"));
    }
    Ok(())
}

/// Fits one tree on all rows of `x`.
pub fn fit_tree(
    x: &Array2<f64>,
    y: &[u8],
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> Result<DecisionTree> {
    check_xy(x, y)?;
    params.validate()?;
    let mut rows: Vec<usize> = (0..x.nrows()).collect();
    Ok(grow(x, y, &mut rows, params, rng))
}

fn grow(
    x: &Array2<f64>,
    y: &[u8],
    rows: &mut [usize],
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let mut builder = TreeBuilder {
        x,
        y,
        params,
        n_candidates: params.max_features.resolve(x.ncols()),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    builder.build(rows, 0, rng);
    DecisionTree {
        n_features: x.ncols(),
        nodes: builder.nodes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    params: ForestParams,
    n_features: usize,
    trees: Vec<DecisionTree>,
}

/// Fits `n_trees` trees. Tree `t` draws its bootstrap sample and its feature
/// subsets from a stream derived from `(params.seed, t)`, so the result does
/// not depend on scheduling.
pub fn fit_forest(x: &Array2<f64>, y: &[u8], params: &ForestParams) -> Result<RandomForest> {
    check_xy(x, y)?;
    params.validate()?;
    let n = x.nrows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng_for(params.seed, t as u64);
            let mut rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(x, y, &mut rows, params, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        params: *params,
        n_features: x.ncols(),
        trees,
    })
}

impl RandomForest {
    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of the per-tree leaf probabilities.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / self.trees.len() as f64
    }

    /// Builds a forest from already fitted trees.
    pub fn from_trees(params: ForestParams, trees: Vec<DecisionTree>) -> Result<Self> {
        let n_features = trees
            .first()
            .ok_or(Error::EmptyInput("forest without trees"))?
            .n_features;
        if let Some(t) = trees.iter().find(|t| t.n_features != n_features) {
            return Err(Error::WidthMismatch {
                expected: n_features,
                actual: t.n_features,
            });
        }
        Ok(RandomForest {
            params: ForestParams {
                n_trees: trees.len(),
                ..params
            },
            n_features,
            trees,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            format_version: u32,
            forest: &'a RandomForest,
        }
        Ok(serde_json::to_string(&Doc {
            format_version: FOREST_FORMAT_VERSION,
            forest: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            format_version: u32,
            forest: RandomForest,
        }
        let doc: Doc = serde_json::from_str(text)?;
        if doc.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported forest format version {}",
                doc.format_version
            )));
        }
        Ok(doc.forest)
    }
}
