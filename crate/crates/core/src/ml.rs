//! Built-in models (ZeroR, CART, ridge linear regression, logistic regression),
//! the metric suite, and the holdout driver.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ast::AnalyticRule;
use crate::encoding::{EncoderConfig, EncodingError, FittedEncoder};
use crate::event_log::{AttributeValue, EventLog};
use crate::labeling::{build_dataset, fit_on_log, LabelError, LabelOptions, LabeledDataset, SkipReport, Task};

#[derive(Debug, thiserror::Error)]
pub enum MlError {
    #[error("{model} cannot be trained for {task:?}")]
    TaskMismatch { model: &'static str, task: Task },
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("expected {expected} features, got {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("{side} split has no labeled rows")]
    EmptySplit { side: &'static str },
    #[error("not a foe-predict v1 model file (header {found:?})")]
    VersionMismatch { found: String },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("split fraction must lie in (0, 1), got {0}")]
    BadSplit(f64),
}

fn default_depth() -> usize {
    10
}
fn one() -> usize {
    1
}
fn default_ridge() -> f64 {
    1e-3
}
fn default_lr() -> f64 {
    0.5
}
fn default_iters() -> usize {
    500
}
fn default_l2() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    ZeroR,
    DecisionTree {
        #[serde(default = "default_depth")]
        max_depth: usize,
        #[serde(default = "one")]
        min_samples_leaf: usize,
        /// CART here is fully deterministic; the seed is recorded for provenance only.
        #[serde(default)]
        seed: u64,
    },
    LinearRegression {
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    LogisticRegression {
        #[serde(default = "default_lr")]
        learning_rate: f64,
        #[serde(default = "default_iters")]
        iterations: usize,
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl ModelSpec {
    pub fn tree(max_depth: usize) -> Self {
        ModelSpec::DecisionTree {
            max_depth,
            min_samples_leaf: 1,
            seed: 0,
        }
    }

    pub fn linear() -> Self {
        ModelSpec::LinearRegression { ridge: default_ridge() }
    }

    pub fn logistic(seed: u64) -> Self {
        ModelSpec::LogisticRegression {
            learning_rate: default_lr(),
            iterations: default_iters(),
            l2: default_l2(),
            seed,
        }
    }

    /// Short name as used on the command line: zeror, tree, linear, logistic.
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::ZeroR => "zeror",
            ModelSpec::DecisionTree { .. } => "tree",
            ModelSpec::LinearRegression { .. } => "linear",
            ModelSpec::LogisticRegression { .. } => "logistic",
        }
    }

    /// Default hyperparameters for a command-line model name.
    pub fn from_name(name: &str, seed: u64) -> Option<Self> {
        Some(match name {
            "zeror" => ModelSpec::ZeroR,
            "tree" => ModelSpec::DecisionTree {
                max_depth: default_depth(),
                min_samples_leaf: 1,
                seed,
            },
            "linear" => ModelSpec::linear(),
            "logistic" => ModelSpec::logistic(seed),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Class fractions (classification) or `[mean]` (regression).
    Leaf { value: Vec<f64> },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Params {
    ZeroR {
        prior: Vec<f64>,
        mean: f64,
    },
    Tree {
        nodes: Vec<Node>,
    },
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    /// One `[w..., b]` row per class (one row in the binary case, for the second label).
    Logistic {
        mean: Vec<f64>,
        scale: Vec<f64>,
        coefficients: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub task: Task,
    pub width: usize,
    /// Sorted class labels; empty for regression.
    pub labels: Vec<String>,
    pub params: Params,
    /// Non-fatal training remarks (for example a single training class).
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Class { label: String, probabilities: Vec<f64> },
    Value(f64),
}

impl Prediction {
    /// Probability of the positive class (the second sorted label, or the only one).
    pub fn score(&self) -> f64 {
        match self {
            Prediction::Class { probabilities, .. } => match probabilities.len() {
                0 => 0.0,
                1 => probabilities[0],
                _ => probabilities[1],
            },
            Prediction::Value(_) => 0.0,
        }
    }

    pub fn value(&self) -> AttributeValue {
        match self {
            Prediction::Class { label, .. } => AttributeValue::Text(label.clone()),
            Prediction::Value(x) => AttributeValue::Number(*x),
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// CART

enum Ys<'a> {
    Class(&'a [usize], usize),
    Real(&'a [f64]),
}

struct Cart<'a> {
    x: &'a [Vec<f64>],
    y: Ys<'a>,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Cart<'_> {
    fn leaf_value(&self, idx: &[usize]) -> Vec<f64> {
        match &self.y {
            Ys::Class(y, k) => {
                let mut c = vec![0.0; *k];
                for &i in idx {
                    c[y[i]] += 1.0;
                }
                let n = idx.len() as f64;
                c.iter().map(|v| v / n).collect()
            }
            Ys::Real(y) => vec![idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64],
        }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        match &self.y {
            Ys::Class(y, _) => idx.iter().all(|&i| y[i] == y[idx[0]]),
            Ys::Real(y) => idx.iter().all(|&i| y[i] == y[idx[0]]),
        }
    }

    /// Score to maximize: Σ_child (Σ_c n_c²)/n for Gini, (Σ y)²/n for variance.
    fn parent_score(&self, idx: &[usize]) -> f64 {
        let n = idx.len() as f64;
        match &self.y {
            Ys::Class(y, k) => {
                let mut c = vec![0.0; *k];
                for &i in idx {
                    c[y[i]] += 1.0;
                }
                c.iter().map(|v| v * v).sum::<f64>() / n
            }
            Ys::Real(y) => {
                let s: f64 = idx.iter().map(|&i| y[i]).sum();
                s * s / n
            }
        }
    }

    fn best_split(&self, idx: &[usize]) -> Option<Best> {
        let n = idx.len();
        let parent = self.parent_score(idx);
        let tol = 1e-12 * parent.abs().max(1e-12);
        let mut best: Option<Best> = None;
        let width = self.x.first().map_or(0, Vec::len);
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
        let k = match &self.y {
            Ys::Class(_, k) => *k,
            Ys::Real(_) => 0,
        };
        let mut cl = vec![0.0f64; k];
        let mut cr = vec![0.0f64; k];
        for f in 0..width {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x[i][f], i)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[n - 1].0 {
                continue;
            }
            // running statistics for the left part
            let (mut sq_l, mut sq_r, mut sum_l, mut sum_r) = (0.0, 0.0, 0.0, 0.0);
            match &self.y {
                Ys::Class(y, _) => {
                    cl.iter_mut().for_each(|v| *v = 0.0);
                    cr.iter_mut().for_each(|v| *v = 0.0);
                    for &(_, i) in &order {
                        cr[y[i]] += 1.0;
                    }
                    sq_r = cr.iter().map(|v| v * v).sum();
                }
                Ys::Real(y) => sum_r = order.iter().map(|&(_, i)| y[i]).sum(),
            }
            for p in 1..n {
                let i = order[p - 1].1;
                match &self.y {
                    Ys::Class(y, _) => {
                        let c = y[i];
                        sq_l += 2.0 * cl[c] + 1.0;
                        sq_r -= 2.0 * cr[c] - 1.0;
                        cl[c] += 1.0;
                        cr[c] -= 1.0;
                    }
                    Ys::Real(y) => {
                        sum_l += y[i];
                        sum_r -= y[i];
                    }
                }
                let (lo, hi) = (order[p - 1].0, order[p].0);
                if lo == hi || p < self.min_leaf || n - p < self.min_leaf {
                    continue;
                }
                let (nl, nr) = (p as f64, (n - p) as f64);
                let score = match &self.y {
                    Ys::Class(..) => sq_l / nl + sq_r / nr,
                    Ys::Real(_) => sum_l * sum_l / nl + sum_r * sum_r / nr,
                };
                let gain = score - parent;
                if gain > tol && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Best {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(&idx),
        });
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf || self.is_pure(&idx) {
            return id;
        }
        let Some(best) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

fn tree_leaf<'n>(nodes: &'n [Node], x: &[f64]) -> &'n [f64] {
    let mut at = 0;
    loop {
        match &nodes[at] {
            Node::Leaf { value } => return value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => at = if x[*feature] <= *threshold { *left } else { *right },
        }
    }
}

// ---------------------------------------------------------------------------
// Logistic regression

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `l2/2 · |w|²` (bias excluded) and its gradient.
/// `w` holds the feature weights followed by the bias; `y` is 0 or 1.
pub fn logistic_loss_grad(w: &[f64], x: &[Vec<f64>], y: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let p = w.len() - 1;
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (xi, &yi) in x.iter().zip(y) {
        let z = xi.iter().zip(&w[..p]).map(|(a, b)| a * b).sum::<f64>() + w[p];
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        for (g, a) in grad[..p].iter_mut().zip(xi) {
            *g += r * a;
        }
        grad[p] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for j in 0..p {
        loss += 0.5 * l2 * w[j] * w[j];
        grad[j] += l2 * w[j];
    }
    (loss, grad)
}

fn standardize(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let p = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; p];
    for r in rows {
        for j in 0..p {
            scale[j] += (r[j] - mean[j]).powi(2) / n;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    (mean, scale)
}

fn apply_scale(x: &[f64], mean: &[f64], scale: &[f64]) -> Vec<f64> {
    x.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s).collect()
}

fn fit_logistic(x: &[Vec<f64>], y: &[f64], lr: f64, iters: usize, l2: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = x[0].len();
    let mut w: Vec<f64> = (0..=p).map(|_| rng.gen_range(-0.01..0.01)).collect();
    for _ in 0..iters {
        let (_, g) = logistic_loss_grad(&w, x, y, l2);
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= lr * gi;
        }
    }
    w
}

fn linear_score(w: &[f64], x: &[f64]) -> f64 {
    let p = w.len() - 1;
    x.iter().zip(&w[..p]).map(|(a, b)| a * b).sum::<f64>() + w[p]
}

// ---------------------------------------------------------------------------
// Training and prediction

fn class_index(ds: &LabeledDataset) -> (Vec<String>, Vec<usize>) {
    let raw = ds.labels();
    let mut labels = raw.clone();
    labels.sort();
    labels.dedup();
    let y = raw.iter().map(|l| labels.binary_search(l).unwrap_or(0)).collect();
    (labels, y)
}

pub fn train(ds: &LabeledDataset, spec: &ModelSpec) -> Result<TrainedModel, MlError> {
    if ds.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let width = ds.width();
    if let Some(r) = ds.rows.iter().find(|r| r.len() != width) {
        return Err(MlError::SchemaMismatch {
            expected: width,
            found: r.len(),
        });
    }
    let mut notes = Vec::new();
    match (spec, ds.task) {
        (ModelSpec::LinearRegression { .. }, Task::Classification) => {
            return Err(MlError::TaskMismatch {
                model: "linear regression",
                task: ds.task,
            })
        }
        (ModelSpec::LogisticRegression { .. }, Task::Regression) => {
            return Err(MlError::TaskMismatch {
                model: "logistic regression",
                task: ds.task,
            })
        }
        _ => {}
    }
    let (labels, yc) = match ds.task {
        Task::Classification => class_index(ds),
        Task::Regression => (Vec::new(), Vec::new()),
    };
    let yr = ds.numeric_targets();
    if ds.task == Task::Classification && labels.len() == 1 {
        notes.push(format!("single training class {:?}", labels[0]));
    }
    let params = match spec {
        ModelSpec::ZeroR => match ds.task {
            Task::Classification => {
                let mut prior = vec![0.0; labels.len()];
                for &c in &yc {
                    prior[c] += 1.0;
                }
                let n = yc.len() as f64;
                prior.iter_mut().for_each(|p| *p /= n);
                Params::ZeroR { prior, mean: 0.0 }
            }
            Task::Regression => Params::ZeroR {
                prior: Vec::new(),
                mean: yr.iter().sum::<f64>() / yr.len() as f64,
            },
        },
        ModelSpec::DecisionTree {
            max_depth,
            min_samples_leaf,
            ..
        } => {
            let y = match ds.task {
                Task::Classification => Ys::Class(&yc, labels.len()),
                Task::Regression => Ys::Real(&yr),
            };
            let mut cart = Cart {
                x: &ds.rows,
                y,
                max_depth: *max_depth,
                min_leaf: (*min_samples_leaf).max(1),
                nodes: Vec::new(),
            };
            cart.grow((0..ds.len()).collect(), 0);
            Params::Tree { nodes: cart.nodes }
        }
        ModelSpec::LinearRegression { ridge } => {
            let (n, p) = (ds.len(), width);
            let xm = DMatrix::from_fn(n, p, |i, j| ds.rows[i][j]);
            let means: Vec<f64> = (0..p).map(|j| xm.column(j).mean()).collect();
            let ymean = yr.iter().sum::<f64>() / n as f64;
            let xc = DMatrix::from_fn(n, p, |i, j| ds.rows[i][j] - means[j]);
            let yv = DVector::from_iterator(n, yr.iter().map(|v| v - ymean));
            let a = xc.transpose() * &xc + DMatrix::identity(p, p) * *ridge;
            let b = xc.transpose() * yv;
            let w = match a.clone().cholesky() {
                Some(ch) => ch.solve(&b),
                None => a
                    .svd(true, true)
                    .solve(&b, 1e-12)
                    .map_err(|e| MlError::Corrupt(e.to_string()))?,
            };
            let weights: Vec<f64> = w.iter().copied().collect();
            let bias = ymean - weights.iter().zip(&means).map(|(a, b)| a * b).sum::<f64>();
            Params::Linear { weights, bias }
        }
        ModelSpec::LogisticRegression {
            learning_rate,
            iterations,
            l2,
            seed,
        } => {
            let (mean, scale) = standardize(&ds.rows);
            let xs: Vec<Vec<f64>> = ds.rows.iter().map(|r| apply_scale(r, &mean, &scale)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let positives: Vec<usize> = match labels.len() {
                1 => vec![],
                2 => vec![1],
                k => (0..k).collect(),
            };
            let coefficients = positives
                .iter()
                .map(|&c| {
                    let y: Vec<f64> = yc.iter().map(|&v| if v == c { 1.0 } else { 0.0 }).collect();
                    fit_logistic(&xs, &y, *learning_rate, *iterations, *l2, &mut rng)
                })
                .collect();
            Params::Logistic {
                mean,
                scale,
                coefficients,
            }
        }
    };
    Ok(TrainedModel {
        task: ds.task,
        width,
        labels,
        params,
        notes,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self.params {
            Params::ZeroR { .. } => "zeror",
            Params::Tree { .. } => "tree",
            Params::Linear { .. } => "linear",
            Params::Logistic { .. } => "logistic",
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, MlError> {
        if x.len() != self.width {
            return Err(MlError::SchemaMismatch {
                expected: self.width,
                found: x.len(),
            });
        }
        let probs = match (&self.params, self.task) {
            (Params::ZeroR { mean, .. }, Task::Regression) => return Ok(Prediction::Value(*mean)),
            (Params::ZeroR { prior, .. }, Task::Classification) => prior.clone(),
            (Params::Tree { nodes }, Task::Regression) => return Ok(Prediction::Value(tree_leaf(nodes, x)[0])),
            (Params::Tree { nodes }, Task::Classification) => tree_leaf(nodes, x).to_vec(),
            (Params::Linear { weights, bias }, _) => {
                return Ok(Prediction::Value(
                    weights.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias,
                ))
            }
            (
                Params::Logistic {
                    mean,
                    scale,
                    coefficients,
                },
                _,
            ) => {
                let xs = apply_scale(x, mean, scale);
                match self.labels.len() {
                    1 => vec![1.0],
                    2 => {
                        let p = sigmoid(linear_score(&coefficients[0], &xs));
                        vec![1.0 - p, p]
                    }
                    _ => {
                        let s: Vec<f64> = coefficients.iter().map(|w| sigmoid(linear_score(w, &xs))).collect();
                        let total: f64 = s.iter().sum();
                        s.iter().map(|v| v / total).collect()
                    }
                }
            }
        };
        let label = self.labels[argmax(&probs)].clone();
        Ok(Prediction::Class {
            label,
            probabilities: probs,
        })
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>, MlError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Probability assigned to `label` (0 for labels unseen in training).
    pub fn class_probability(&self, p: &Prediction, label: &str) -> f64 {
        match p {
            Prediction::Class { probabilities, .. } => self
                .labels
                .binary_search_by(|l| l.as_str().cmp(label))
                .map(|i| probabilities[i])
                .unwrap_or(0.0),
            Prediction::Value(_) => 0.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Metrics

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Metrics {
    Classification {
        auc: f64,
        accuracy: f64,
        weighted_precision: f64,
        weighted_recall: f64,
        f_measure: f64,
        n_test: usize,
        /// Conventions applied where a metric is undefined.
        flags: Vec<String>,
    },
    Regression {
        mae: f64,
        rmse: f64,
        n_test: usize,
    },
}

impl Metrics {
    pub fn auc(&self) -> Option<f64> {
        match self {
            Metrics::Classification { auc, .. } => Some(*auc),
            _ => None,
        }
    }

    pub fn accuracy(&self) -> Option<f64> {
        match self {
            Metrics::Classification { accuracy, .. } => Some(*accuracy),
            _ => None,
        }
    }

    pub fn mae(&self) -> Option<f64> {
        match self {
            Metrics::Regression { mae, .. } => Some(*mae),
            _ => None,
        }
    }

    pub fn rmse(&self) -> Option<f64> {
        match self {
            Metrics::Regression { rmse, .. } => Some(*rmse),
            _ => None,
        }
    }
}

/// Rank-based AUC with average ranks for ties. `None` if either class is absent.
pub fn rank_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n = scores.len();
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// MAE and RMSE.
pub fn regression_metrics(predicted: &[f64], truth: &[f64]) -> Metrics {
    let n = truth.len() as f64;
    let mae = predicted.iter().zip(truth).map(|(p, t)| (t - p).abs()).sum::<f64>() / n;
    let rmse = (predicted.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / n).sqrt();
    Metrics::Regression {
        mae,
        rmse,
        n_test: truth.len(),
    }
}

/// Accuracy, support-weighted one-vs-rest AUC, weighted precision/recall and F-measure.
/// `scores[i][c]` is the score of `classes[c]` for row `i`.
pub fn classification_metrics(predicted: &[String], truth: &[String], scores: &dyn Fn(usize, &str) -> f64) -> Metrics {
    let n = truth.len();
    let mut flags = Vec::new();
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    for t in truth {
        *support.entry(t.as_str()).or_default() += 1;
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    let accuracy = correct as f64 / n as f64;

    let (mut wp, mut wr) = (0.0, 0.0);
    for (&c, &nc) in &support {
        let tp = predicted.iter().zip(truth).filter(|(p, t)| *p == c && *t == c).count();
        let pc = predicted.iter().filter(|p| *p == c).count();
        let precision = if pc == 0 {
            flags.push(format!("class {c:?} never predicted: precision taken as 0"));
            0.0
        } else {
            tp as f64 / pc as f64
        };
        wp += nc as f64 * precision;
        wr += tp as f64;
    }
    wp /= n as f64;
    wr /= n as f64;

    let classes: Vec<&str> = support.keys().copied().collect();
    let auc = match classes.len() {
        1 => {
            flags.push("single class in test set: AUC taken as 0.5".into());
            0.5
        }
        2 => {
            let pos = classes[1];
            let s: Vec<f64> = (0..n).map(|i| scores(i, pos)).collect();
            let y: Vec<bool> = truth.iter().map(|t| t == pos).collect();
            rank_auc(&s, &y).unwrap_or(0.5)
        }
        _ => {
            let mut acc = 0.0;
            for &c in &classes {
                let s: Vec<f64> = (0..n).map(|i| scores(i, c)).collect();
                let y: Vec<bool> = truth.iter().map(|t| t == c).collect();
                acc += support[c] as f64 * rank_auc(&s, &y).unwrap_or(0.5);
            }
            acc / n as f64
        }
    };
    let f_measure = if wp + wr > 0.0 { 2.0 * wp * wr / (wp + wr) } else { 0.0 };
    Metrics::Classification {
        auc,
        accuracy,
        weighted_precision: wp,
        weighted_recall: wr,
        f_measure,
        n_test: n,
        flags,
    }
}

/// Scores a model's predictions against true target values.
pub fn compute_metrics(model: &TrainedModel, predictions: &[Prediction], truths: &[AttributeValue]) -> Metrics {
    match model.task {
        Task::Regression => {
            let p: Vec<f64> = predictions
                .iter()
                .map(|p| match p {
                    Prediction::Value(v) => *v,
                    _ => f64::NAN,
                })
                .collect();
            let t: Vec<f64> = truths.iter().map(|t| t.as_number().unwrap_or(f64::NAN)).collect();
            regression_metrics(&p, &t)
        }
        Task::Classification => {
            let p: Vec<String> = predictions.iter().map(|p| p.value().render()).collect();
            let t: Vec<String> = truths.iter().map(AttributeValue::render).collect();
            classification_metrics(&p, &t, &|i, c| model.class_probability(&predictions[i], c))
        }
    }
}

// ---------------------------------------------------------------------------
// Holdout

/// Number of training traces: `⌈split · N⌉`.
pub fn split_point(n: usize, split: f64) -> usize {
    ((split * n as f64) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone)]
pub struct HoldoutData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub encoder: FittedEncoder,
    pub train_skips: SkipReport,
    pub test_skips: SkipReport,
    pub train_traces: usize,
    pub test_traces: usize,
}

impl HoldoutData {
    /// Splits traces in log order, fits the encoder on the training part and labels both parts.
    pub fn prepare(
        rule: &AnalyticRule,
        log: &EventLog,
        config: &EncoderConfig,
        split: f64,
        opts: LabelOptions,
    ) -> Result<Self, MlError> {
        if !(split > 0.0 && split < 1.0) {
            return Err(MlError::BadSplit(split));
        }
        let cut = split_point(log.traces.len(), split);
        let train_log = EventLog::new(log.traces[..cut].to_vec());
        let test_log = EventLog::new(log.traces[cut..].to_vec());
        if train_log.traces.is_empty() {
            return Err(MlError::EmptySplit { side: "training" });
        }
        if test_log.traces.is_empty() {
            return Err(MlError::EmptySplit { side: "test" });
        }
        let encoder = fit_on_log(config, &train_log, opts)?;
        let (train, train_skips) = build_dataset(rule, &train_log, &encoder, opts)?;
        let (test, test_skips) = build_dataset(rule, &test_log, &encoder, opts)?;
        if train.is_empty() {
            return Err(MlError::EmptySplit { side: "training" });
        }
        if test.is_empty() {
            return Err(MlError::EmptySplit { side: "test" });
        }
        Ok(HoldoutData {
            train,
            test,
            encoder,
            train_skips,
            test_skips,
            train_traces: train_log.traces.len(),
            test_traces: test_log.traces.len(),
        })
    }

    pub fn evaluate(&self, spec: &ModelSpec) -> Result<(Metrics, TrainedModel), MlError> {
        let model = train(&self.train, spec)?;
        let preds = model.predict_all(&self.test.rows)?;
        Ok((compute_metrics(&model, &preds, &self.test.targets), model))
    }
}

/// Trains on the first `split` of the traces and scores on the rest.
pub fn evaluate_holdout(
    rule: &AnalyticRule,
    log: &EventLog,
    config: &EncoderConfig,
    spec: &ModelSpec,
    split: f64,
    opts: LabelOptions,
) -> Result<Metrics, MlError> {
    Ok(HoldoutData::prepare(rule, log, config, split, opts)?.evaluate(spec)?.0)
}

// ---------------------------------------------------------------------------
// Persistence

const HEADER: &str = "foe-predict-model v1";

impl fmt::Display for TrainedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let json = |v: &dyn erased::Json| v.json();
        writeln!(f, "{HEADER} {}", self.kind())?;
        writeln!(f, "task={}", json(&self.task))?;
        writeln!(f, "width={}", self.width)?;
        writeln!(f, "labels={}", json(&self.labels))?;
        writeln!(f, "notes={}", json(&self.notes))?;
        writeln!(f, "params={}", json(&self.params))?;
        writeln!(f, "end")
    }
}

mod erased {
    pub trait Json {
        fn json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn json(&self) -> String {
            serde_json::to_string(self).expect("model parameters serialize")
        }
    }
}

/// Parses the text produced by [`save_model`].
pub fn parse_model(text: &str) -> Result<TrainedModel, MlError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let kind = header
        .strip_prefix(HEADER)
        .map(str::trim)
        .filter(|k| ["zeror", "tree", "linear", "logistic"].contains(k))
        .ok_or_else(|| MlError::VersionMismatch {
            found: header.chars().take(60).collect(),
        })?;
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    let mut ended = false;
    for line in lines {
        if line == "end" {
            ended = true;
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| MlError::Corrupt(format!("bad line {line:?}")))?;
        fields.insert(k, v);
    }
    if !ended {
        return Err(MlError::Corrupt("missing end marker".into()));
    }
    fn field<T: serde::de::DeserializeOwned>(fields: &BTreeMap<&str, &str>, key: &str) -> Result<T, MlError> {
        let raw = fields
            .get(key)
            .ok_or_else(|| MlError::Corrupt(format!("missing {key}")))?;
        serde_json::from_str(raw).map_err(|e| MlError::Corrupt(format!("{key}: {e}")))
    }
    let model = TrainedModel {
        task: field(&fields, "task")?,
        width: field(&fields, "width")?,
        labels: field(&fields, "labels")?,
        notes: field(&fields, "notes").unwrap_or_default(),
        params: field(&fields, "params")?,
    };
    if model.kind() != kind {
        return Err(MlError::Corrupt(format!(
            "header says {kind}, parameters are {}",
            model.kind()
        )));
    }
    Ok(model)
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), MlError> {
    fs::write(path, model.to_string())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel, MlError> {
    parse_model(&fs::read_to_string(path)?)
}
