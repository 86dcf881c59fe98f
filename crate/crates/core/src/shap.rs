//! Shapley attributions for a single scalar prediction.
//!
//! A coalition `S` of features is valued by the interventional expectation
//!
//! ```text
//! v(S) = mean over background rows b of f(x_S, b_{not S})
//! ```
//!
//! [`exact_shapley`] enumerates every subset and applies the Shapley weights
//! `|S|! (M - |S| - 1)! / M!`. [`kernel_shap`] fits the additive surrogate
//! `g(z) = phi0 + sum_j phi_j z_j` to sampled coalitions by weighted least
//! squares with the Shapley kernel, with `g(empty) = v(empty)` and
//! `g(full) = f(x)` imposed exactly by eliminating one coefficient.

use std::collections::HashMap;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multilabel::MultiLabelModel;
use crate::seed;

/// Largest feature count accepted by exact enumeration and full-budget Kernel SHAP.
pub const ENUMERATION_CAP: usize = 16;

/// A deterministic scalar function of a feature vector.
pub trait ExplainTarget: Sync {
    fn n_features(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

/// Wraps a closure as an [`ExplainTarget`].
pub struct FnTarget<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnTarget<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        FnTarget { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> ExplainTarget for FnTarget<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Probability of one label under a fitted multi-label model.
pub struct LabelTarget<'a> {
    model: &'a MultiLabelModel,
    label: usize,
}

impl<'a> LabelTarget<'a> {
    pub fn new(model: &'a MultiLabelModel, label: usize) -> Result<Self> {
        if label >= model.n_labels() {
            return Err(Error::IndexOutOfRange {
                index: label,
                len: model.n_labels(),
            });
        }
        Ok(LabelTarget { model, label })
    }
}

impl ExplainTarget for LabelTarget<'_> {
    fn n_features(&self) -> usize {
        self.model.n_features
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.model
            .predict_label_proba(x, self.label)
            .expect("width checked before evaluation")
    }
}

/// Which features are observed (`true`) in a coalition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoalitionMask(Vec<bool>);

impl CoalitionMask {
    pub fn new(bits: Vec<bool>) -> Self {
        CoalitionMask(bits)
    }

    pub fn empty(m: usize) -> Self {
        CoalitionMask(vec![false; m])
    }

    pub fn full(m: usize) -> Self {
        CoalitionMask(vec![true; m])
    }

    /// Mask whose bit `j` is bit `j` of `bits`.
    pub fn from_bits(bits: u64, m: usize) -> Self {
        CoalitionMask((0..m).map(|j| bits >> j & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn size(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn complement(&self) -> Self {
        CoalitionMask(self.0.iter().map(|b| !b).collect())
    }
}

/// Reference rows used to fill in unobserved features.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    rows: Array2<f64>,
}

impl BackgroundSet {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::EmptyInput("background set has no rows"));
        }
        Ok(BackgroundSet {
            rows: rows.as_standard_layout().into_owned(),
        })
    }

    /// `n` distinct rows of `features` chosen by `seed` (all rows if fewer).
    /// Rows keep their original relative order.
    pub fn sample(features: &Array2<f64>, n: usize, seed: u64) -> Result<Self> {
        let total = features.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "background size must be at least 1".into(),
            ));
        }
        let mut idx: Vec<usize> = if n >= total {
            (0..total).collect()
        } else {
            index::sample(&mut seed::rng_for(seed, seed::STREAM_BACKGROUND), total, n).into_vec()
        };
        idx.sort_unstable();
        BackgroundSet::new(features.select(ndarray::Axis(0), &idx))
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn width(&self) -> usize {
        self.rows.ncols()
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i).to_slice().expect("row-major")
    }
}

/// Attribution of one prediction: `base_value + sum(phi) == fx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ExplanationDoc", try_from = "ExplanationDoc")]
pub struct Explanation {
    pub instance: usize,
    pub label: usize,
    pub base_value: f64,
    pub fx: f64,
    pub phi: Vec<f64>,
    /// The explained instance's feature values.
    pub values: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Explanation {
    pub fn n_features(&self) -> usize {
        self.phi.len()
    }

    /// `base_value + sum(phi) - fx`.
    pub fn local_accuracy_gap(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - self.fx
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn with_names(mut self, names: &[String]) -> Self {
        if names.len() == self.phi.len() {
            self.feature_names = names.to_vec();
        }
        self
    }
}

#[derive(Serialize, Deserialize)]
struct PhiEntry {
    feature: String,
    value: f64,
    shap: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplanationDoc {
    instance: usize,
    label: usize,
    base_value: f64,
    fx: f64,
    phi: Vec<PhiEntry>,
}

impl From<Explanation> for ExplanationDoc {
    fn from(e: Explanation) -> Self {
        ExplanationDoc {
            instance: e.instance,
            label: e.label,
            base_value: e.base_value,
            fx: e.fx,
            phi: e
                .feature_names
                .into_iter()
                .zip(e.values)
                .zip(e.phi)
                .map(|((feature, value), shap)| PhiEntry {
                    feature,
                    value,
                    shap,
                })
                .collect(),
        }
    }
}

impl TryFrom<ExplanationDoc> for Explanation {
    type Error = String;
    fn try_from(d: ExplanationDoc) -> std::result::Result<Self, String> {
        let mut e = Explanation {
            instance: d.instance,
            label: d.label,
            base_value: d.base_value,
            fx: d.fx,
            phi: Vec::with_capacity(d.phi.len()),
            values: Vec::with_capacity(d.phi.len()),
            feature_names: Vec::with_capacity(d.phi.len()),
        };
        for p in d.phi {
            e.feature_names.push(p.feature);
            e.values.push(p.value);
            e.phi.push(p.shap);
        }
        Ok(e)
    }
}

fn default_names(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("f{j}")).collect()
}

fn check_inputs(
    target: &dyn ExplainTarget,
    x: &[f64],
    background: &BackgroundSet,
) -> Result<usize> {
    let m = target.n_features();
    if x.len() != m {
        return Err(Error::WidthMismatch {
            expected: m,
            actual: x.len(),
        });
    }
    if background.width() != m {
        return Err(Error::WidthMismatch {
            expected: m,
            actual: background.width(),
        });
    }
    if m == 0 {
        return Err(Error::EmptyInput("target has no features"));
    }
    Ok(m)
}

/// Value of a coalition: mean of `f` over hybrids taking `x` on the masked-in
/// features and each background row elsewhere. The full mask returns `f(x)`.
pub fn eval_coalition(
    target: &dyn ExplainTarget,
    x: &[f64],
    mask: &CoalitionMask,
    background: &BackgroundSet,
) -> Result<f64> {
    let m = check_inputs(target, x, background)?;
    if mask.len() != m {
        return Err(Error::WidthMismatch {
            expected: m,
            actual: mask.len(),
        });
    }
    Ok(coalition_value(target, x, mask.bits(), background))
}

fn coalition_value(
    target: &dyn ExplainTarget,
    x: &[f64],
    mask: &[bool],
    background: &BackgroundSet,
) -> f64 {
    if mask.iter().all(|&b| b) {
        return target.eval(x);
    }
    let mut hybrid = vec![0.0; x.len()];
    let mut sum = 0.0;
    for r in 0..background.n_rows() {
        let b = background.row(r);
        for j in 0..x.len() {
            hybrid[j] = if mask[j] { x[j] } else { b[j] };
        }
        sum += target.eval(&hybrid);
    }
    sum / background.n_rows() as f64
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact Shapley values by enumerating all `2^M` coalitions (`M <= 16`).
pub fn exact_shapley(
    target: &dyn ExplainTarget,
    x: &[f64],
    background: &BackgroundSet,
) -> Result<Explanation> {
    let m = check_inputs(target, x, background)?;
    if m > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            features: m,
            cap: ENUMERATION_CAP,
        });
    }
    let n_masks = 1usize << m;
    let values: Vec<f64> = (0..n_masks)
        .into_par_iter()
        .map(|bits| {
            let mask: Vec<bool> = (0..m).map(|j| bits >> j & 1 == 1).collect();
            coalition_value(target, x, &mask, background)
        })
        .collect();
    // |S|! (M - |S| - 1)! / M!  ==  1 / (M * C(M-1, |S|))
    let weights: Vec<f64> = (0..m)
        .map(|s| 1.0 / (m as f64 * binomial(m - 1, s)))
        .collect();
    let phi = (0..m)
        .map(|i| {
            let bit = 1usize << i;
            (0..n_masks)
                .filter(|s| s & bit == 0)
                .map(|s| weights[s.count_ones() as usize] * (values[s | bit] - values[s]))
                .sum()
        })
        .collect();
    Ok(Explanation {
        instance: 0,
        label: 0,
        base_value: values[0],
        fx: values[n_masks - 1],
        phi,
        values: x.to_vec(),
        feature_names: default_names(m),
    })
}

/// Shapley kernel weight of a coalition of size `z` among `m` features:
/// `(m - 1) / (C(m, z) z (m - z))`. Empty and full coalitions are constraints,
/// not weighted samples.
pub fn kernel_weight(m: usize, z: usize) -> Result<f64> {
    if z == 0 || z >= m {
        return Err(Error::InvalidParameter(format!(
            "coalition size {z} has no kernel weight for {m} features (need 1 <= z <= {})",
            m.saturating_sub(1)
        )));
    }
    Ok((m - 1) as f64 / (binomial(m, z) * z as f64 * (m - z) as f64))
}

/// Number of coalitions Kernel SHAP evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Samples(usize),
    /// Every proper coalition (`2^M - 2`); needs `M <= 16`.
    Full,
}

impl Budget {
    /// `2M + 2048`.
    pub fn default_for(m: usize) -> Self {
        Budget::Samples(2 * m + 2048)
    }
}

impl FromStr for Budget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(Budget::Full);
        }
        s.parse::<usize>().map(Budget::Samples).map_err(|_| {
            Error::InvalidParameter(format!("budget must be a count or 'full', got '{s}'"))
        })
    }
}

impl std::fmt::Display for Budget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Budget::Samples(n) => write!(f, "{n}"),
            Budget::Full => f.write_str("full"),
        }
    }
}

fn for_each_combination(m: usize, size: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        visit(&idx);
        let mut i = size;
        while i > 0 && idx[i - 1] == m - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn mask_from_indices(m: usize, idx: &[usize]) -> CoalitionMask {
    let mut bits = vec![false; m];
    for &i in idx {
        bits[i] = true;
    }
    CoalitionMask(bits)
}

/// Coalitions and regression weights for a Kernel SHAP fit.
///
/// Size classes are visited from the outside in (`{1, M-1}`, `{2, M-2}`, ...)
/// and enumerated completely, with their exact kernel weights, while the
/// budget allows. The kernel mass of the classes left over is then spread
/// over `remaining` draws: a size is drawn proportionally to its class mass,
/// a subset of that size uniformly, and its complement is added as the next
/// draw. Repeated draws accumulate weight on one row.
pub fn sample_coalitions(m: usize, budget: Budget, seed: u64) -> Result<Vec<(CoalitionMask, f64)>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "coalition sampling needs at least 2 features, got {m}"
        )));
    }
    let proper = 2f64.powi(m as i32) - 2.0;
    let mut remaining = match budget {
        Budget::Full if m > ENUMERATION_CAP => {
            return Err(Error::EnumerationCap {
                features: m,
                cap: ENUMERATION_CAP,
            })
        }
        Budget::Full => proper,
        Budget::Samples(n) if n < 2 => {
            return Err(Error::InvalidParameter(format!(
                "budget must be at least 2, got {n}"
            )))
        }
        Budget::Samples(n) => (n as f64).min(proper),
    };

    let mut out: Vec<(CoalitionMask, f64)> = Vec::new();
    let mut open_sizes: Vec<usize> = Vec::new();
    let mut s = 1;
    while s <= m / 2 {
        let paired = s != m - s;
        let count = binomial(m, s) * if paired { 2.0 } else { 1.0 };
        if open_sizes.is_empty() && count <= remaining {
            let w = kernel_weight(m, s)?;
            for_each_combination(m, s, |idx| {
                let mask = mask_from_indices(m, idx);
                if paired {
                    let comp = mask.complement();
                    out.push((mask, w));
                    out.push((comp, w));
                } else {
                    out.push((mask, w));
                }
            });
            remaining -= count;
        } else {
            open_sizes.push(s);
            if paired {
                open_sizes.push(m - s);
            }
        }
        s += 1;
    }

    let draws = remaining as usize;
    if open_sizes.is_empty() || draws == 0 {
        return Ok(out);
    }
    // kernel mass of a whole size class: C(M, z) * weight(z) = (M - 1) / (z (M - z))
    let class_mass: Vec<f64> = open_sizes
        .iter()
        .map(|&z| (m - 1) as f64 / (z * (m - z)) as f64)
        .collect();
    let open_mass: f64 = class_mass.iter().sum();
    let per_draw = open_mass / draws as f64;

    let mut rng = seed::rng_for(seed, seed::STREAM_COALITIONS);
    let mut slot: HashMap<CoalitionMask, usize> = HashMap::new();
    let mut add = |mask: CoalitionMask, out: &mut Vec<(CoalitionMask, f64)>| match slot.get(&mask) {
        Some(&i) => out[i].1 += per_draw,
        None => {
            slot.insert(mask.clone(), out.len());
            out.push((mask, per_draw));
        }
    };
    let mut taken = 0;
    while taken < draws {
        let mut u = rng.gen::<f64>() * open_mass;
        let mut pick = open_sizes.len() - 1;
        for (i, &mass) in class_mass.iter().enumerate() {
            if u < mass {
                pick = i;
                break;
            }
            u -= mass;
        }
        let z = open_sizes[pick];
        let idx = index::sample(&mut rng, m, z).into_vec();
        let mask = mask_from_indices(m, &idx);
        let comp = mask.complement();
        add(mask, &mut out);
        taken += 1;
        if taken < draws {
            add(comp, &mut out);
            taken += 1;
        }
    }
    Ok(out)
}

/// Minimises `sum_i w_i (r_i - a_i . c)^2` through the normal equations and
/// a Cholesky factorisation. Fails on rank-deficient designs.
pub fn solve_weighted_ls(
    design: &Array2<f64>,
    weights: &[f64],
    responses: &[f64],
) -> Result<Vec<f64>> {
    let (rows, cols) = design.dim();
    if weights.len() != rows || responses.len() != rows {
        return Err(Error::WidthMismatch {
            expected: rows,
            actual: weights.len().min(responses.len()),
        });
    }
    if rows < cols {
        return Err(Error::Estimation(format!(
            "underdetermined system: {rows} rows for {cols} unknowns"
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "weights must be positive, got {w}"
        )));
    }
    if cols == 0 {
        return Ok(Vec::new());
    }
    let mut gram = DMatrix::<f64>::zeros(cols, cols);
    let mut rhs = DVector::<f64>::zeros(cols);
    for (i, row) in design.rows().into_iter().enumerate() {
        let w = weights[i];
        for a in 0..cols {
            let wa = w * row[a];
            if wa == 0.0 {
                continue;
            }
            rhs[a] += wa * responses[i];
            for b in a..cols {
                gram[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..cols {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let scale = gram.diagonal().max();
    let chol = gram.clone().cholesky().ok_or_else(|| {
        Error::Estimation("rank-deficient design (normal matrix not positive definite)".into())
    })?;
    let l = chol.l_dirty();
    let min_pivot = (0..cols)
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if !scale.is_finite() || scale <= 0.0 || min_pivot <= scale * 1e-12 {
        return Err(Error::Estimation(
            "rank-deficient design (coalitions do not identify every attribution)".into(),
        ));
    }
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Kernel SHAP estimate with `base_value + sum(phi) == fx` imposed exactly.
pub fn kernel_shap(
    target: &dyn ExplainTarget,
    x: &[f64],
    background: &BackgroundSet,
    budget: Budget,
    seed: u64,
) -> Result<Explanation> {
    let m = check_inputs(target, x, background)?;
    if let Budget::Samples(n) = budget {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "budget must be at least 2, got {n}"
            )));
        }
    }
    if budget == Budget::Full && m > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            features: m,
            cap: ENUMERATION_CAP,
        });
    }
    let base_value = coalition_value(target, x, &vec![false; m], background);
    let fx = target.eval(x);
    let delta = fx - base_value;
    let explanation = |phi| Explanation {
        instance: 0,
        label: 0,
        base_value,
        fx,
        phi,
        values: x.to_vec(),
        feature_names: default_names(m),
    };
    if m == 1 {
        return Ok(explanation(vec![delta]));
    }

    let coalitions = sample_coalitions(m, budget, seed)?;
    let values: Vec<f64> = coalitions
        .par_iter()
        .map(|(mask, _)| coalition_value(target, x, mask.bits(), background))
        .collect();

    // phi_last = delta - sum(others); substitute into g(z) = sum phi_j z_j
    let last = m - 1;
    let mut design = Array2::<f64>::zeros((coalitions.len(), last));
    let mut responses = Vec::with_capacity(coalitions.len());
    let mut weights = Vec::with_capacity(coalitions.len());
    for (i, ((mask, w), v)) in coalitions.iter().zip(&values).enumerate() {
        let bits = mask.bits();
        let z_last = f64::from(u8::from(bits[last]));
        for j in 0..last {
            design[[i, j]] = f64::from(u8::from(bits[j])) - z_last;
        }
        responses.push(v - base_value - z_last * delta);
        weights.push(*w);
    }
    let mut phi = solve_weighted_ls(&design, &weights, &responses)?;
    let rest: f64 = phi.iter().sum();
    phi.push(delta - rest);
    Ok(explanation(phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Exact,
    Kernel,
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Estimator::Exact),
            "kernel" => Ok(Estimator::Kernel),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator '{other}'"
            ))),
        }
    }
}

/// Seed of the coalition sampler for one (instance, label) pair.
pub fn explanation_seed(seed: u64, instance: usize, label: usize) -> u64 {
    seed::derive_seed(seed::derive_seed(seed, instance as u64), label as u64)
}

/// One explanation per requested label of `model` at instance `x`.
#[allow(clippy::too_many_arguments)]
pub fn explain_instance(
    model: &MultiLabelModel,
    instance: usize,
    x: &[f64],
    background: &BackgroundSet,
    labels: &[usize],
    estimator: Estimator,
    budget: Budget,
    seed: u64,
) -> Result<Vec<Explanation>> {
    labels
        .iter()
        .map(|&label| {
            let target = LabelTarget::new(model, label)?;
            let mut e = match estimator {
                Estimator::Exact => exact_shapley(&target, x, background)?,
                Estimator::Kernel => kernel_shap(
                    &target,
                    x,
                    background,
                    budget,
                    explanation_seed(seed, instance, label),
                )?,
            };
            e.instance = instance;
            e.label = label;
            Ok(e.with_names(&model.feature_names))
        })
        .collect()
}
