//! Native implementations of the five baseline classifiers: decision
//! tree, linear SVM, logistic regression, random forest, and k-nearest
//! neighbours.
//!
//! Every model standardizes features with statistics from its own
//! training data, trains deterministically from an explicit seed, and
//! serializes to a versioned JSON document that reloads to identical
//! predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use rand::seq::SliceRandom;
use rand::Rng;

pub const MODEL_FORMAT: &str = "gazedp-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree,
    LinearSvm,
    LogisticRegression,
    RandomForest,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::DecisionTree,
        ModelKind::LinearSvm,
        ModelKind::LogisticRegression,
        ModelKind::RandomForest,
        ModelKind::Knn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Knn => "knn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::argument(format!("unknown model kind '{s}'")))
    }
}

/// Hyperparameters for all five kinds; each kind reads its own subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub max_depth: usize,
    pub trees: usize,
    pub k_neighbors: usize,
    pub c: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            max_depth: 8,
            trees: 100,
            k_neighbors: 5,
            c: 1.0,
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyper: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ModelSpec {
            kind,
            hyper: Hyperparameters::default(),
            seed,
        }
    }

    fn check(&self) -> Result<()> {
        let h = &self.hyper;
        if h.max_depth == 0
            || h.trees == 0
            || h.k_neighbors == 0
            || h.epochs == 0
            || !(h.c.is_finite() && h.c > 0.0)
            || !(h.learning_rate.is_finite() && h.learning_rate > 0.0)
            || h.l2 < 0.0
        {
            return Err(Error::argument("hyperparameters must be positive"));
        }
        Ok(())
    }
}

/// Per-feature z-scoring fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut means = vec![0.0; d];
        for row in x {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; d];
        for row in x {
            for (s, (v, m)) in stds.iter_mut().zip(row.iter().zip(&means)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0; // constant feature: leave centred
            }
        }
        Standardizer { means, stds }
    }

    fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Class share at the leaf.
        distribution: Vec<f64>,
    },
}

impl TreeNode {
    fn distribution<'a>(&'a self, row: &[f64]) -> &'a [f64] {
        match self {
            TreeNode::Leaf { distribution } => distribution,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.distribution(row)
                } else {
                    right.distribution(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ModelInner {
    Tree(TreeNode),
    Forest(Vec<TreeNode>),
    /// One weight vector per class (bias last); margins for SVM, logits
    /// for logistic regression.
    Linear { weights: Vec<Vec<f64>>, probabilistic: bool },
    Knn { rows: Vec<Vec<f64>>, labels: Vec<usize> },
}

/// A trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    pub spec: ModelSpec,
    pub n_classes: usize,
    standardizer: Standardizer,
    inner: ModelInner,
}

impl Model {
    /// Per-class scores for one raw (unstandardized) feature row.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let z = self.standardizer.transform(row);
        match &self.inner {
            ModelInner::Tree(root) => root.distribution(&z).to_vec(),
            ModelInner::Forest(trees) => {
                let mut acc = vec![0.0; self.n_classes];
                for tree in trees {
                    for (a, v) in acc.iter_mut().zip(tree.distribution(&z)) {
                        *a += v;
                    }
                }
                for a in &mut acc {
                    *a /= trees.len() as f64;
                }
                acc
            }
            ModelInner::Linear { weights, probabilistic } => weights
                .iter()
                .map(|w| {
                    let margin = dot_bias(w, &z);
                    if *probabilistic {
                        sigmoid(margin)
                    } else {
                        margin
                    }
                })
                .collect(),
            ModelInner::Knn { rows, labels } => {
                let k = self.spec.hyper.k_neighbors.min(rows.len());
                let mut dist: Vec<(f64, usize)> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (squared_distance(r, &z), i))
                    .collect();
                dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut votes = vec![0.0; self.n_classes];
                for &(_, idx) in dist.iter().take(k) {
                    votes[labels[idx]] += 1.0 / k as f64;
                }
                votes
            }
        }
    }

    /// Predicted class index (ties resolve to the lowest index).
    pub fn predict(&self, row: &[f64]) -> usize {
        let scores = self.scores(row);
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let model: Model = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::argument(format!(
                "unsupported model format '{}'",
                model.format
            )));
        }
        Ok(model)
    }
}

fn dot_bias(w: &[f64], z: &[f64]) -> f64 {
    let d = w.len() - 1;
    w[d] + z.iter().zip(&w[..d]).map(|(a, b)| a * b).sum::<f64>()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Train a classifier. Labels are dense class indices `0..n_classes`.
pub fn train(spec: &ModelSpec, x: &[Vec<f64>], y: &[usize]) -> Result<Model> {
    spec.check()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::argument("training data must be nonempty and aligned"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::argument("features must be finite"));
    }
    let n_classes = y.iter().copied().max().expect("nonempty") + 1;
    let distinct = {
        let mut seen = vec![false; n_classes];
        for &label in y {
            seen[label] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::argument("training labels must contain at least 2 classes"));
    }

    let standardizer = Standardizer::fit(x);
    let z: Vec<Vec<f64>> = x.iter().map(|row| standardizer.transform(row)).collect();

    let inner = match spec.kind {
        ModelKind::DecisionTree => ModelInner::Tree(grow_tree(
            &z,
            y,
            &(0..z.len()).collect::<Vec<_>>(),
            n_classes,
            spec.hyper.max_depth,
            None,
        )),
        ModelKind::RandomForest => {
            let d = z[0].len();
            let subset = (d as f64).sqrt().ceil() as usize;
            let trees = (0..spec.hyper.trees)
                .map(|t| {
                    let mut rng = rng_from_seed(derive_seed(spec.seed, "tree", t as u64));
                    let rows: Vec<usize> =
                        (0..z.len()).map(|_| rng.random_range(0..z.len())).collect();
                    grow_tree(
                        &z,
                        y,
                        &rows,
                        n_classes,
                        spec.hyper.max_depth,
                        Some((subset, &mut rng)),
                    )
                })
                .collect();
            ModelInner::Forest(trees)
        }
        ModelKind::LogisticRegression => ModelInner::Linear {
            weights: (0..n_classes)
                .map(|c| train_logistic(&z, y, c, &spec.hyper))
                .collect(),
            probabilistic: true,
        },
        ModelKind::LinearSvm => ModelInner::Linear {
            weights: (0..n_classes)
                .map(|c| train_svm(&z, y, c, &spec.hyper, spec.seed))
                .collect(),
            probabilistic: false,
        },
        ModelKind::Knn => ModelInner::Knn {
            rows: z,
            labels: y.to_vec(),
        },
    };

    Ok(Model {
        format: MODEL_FORMAT.to_string(),
        spec: *spec,
        n_classes,
        standardizer,
        inner,
    })
}

fn class_counts(y: &[usize], rows: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    for &i in rows {
        counts[y[i]] += 1.0;
    }
    counts
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

/// CART with gini impurity. `feature_sample` draws a random feature
/// subset per node (random forest mode).
fn grow_tree(
    z: &[Vec<f64>],
    y: &[usize],
    rows: &[usize],
    n_classes: usize,
    depth_left: usize,
    mut feature_sample: Option<(usize, &mut rand_chacha::ChaCha8Rng)>,
) -> TreeNode {
    let counts = class_counts(y, rows, n_classes);
    let total = rows.len() as f64;
    let leaf = || TreeNode::Leaf {
        distribution: counts.iter().map(|c| c / total.max(1.0)).collect(),
    };
    if depth_left == 0 || rows.len() < 2 || gini(&counts, total) == 0.0 {
        return leaf();
    }

    let d = z[0].len();
    let candidate_features: Vec<usize> = match &mut feature_sample {
        Some((subset, rng)) => {
            let mut all: Vec<usize> = (0..d).collect();
            all.shuffle(*rng);
            all.truncate((*subset).max(1));
            all.sort_unstable();
            all
        }
        None => (0..d).collect(),
    };

    let parent_impurity = gini(&counts, total);
    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    for &feature in &candidate_features {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| z[a][feature].total_cmp(&z[b][feature]).then(a.cmp(&b)));
        let mut left_counts = vec![0.0; n_classes];
        for w in 0..order.len() - 1 {
            left_counts[y[order[w]]] += 1.0;
            let v0 = z[order[w]][feature];
            let v1 = z[order[w + 1]][feature];
            if v0 == v1 {
                continue;
            }
            let left_total = (w + 1) as f64;
            let right_total = total - left_total;
            let right_counts: Vec<f64> = counts
                .iter()
                .zip(&left_counts)
                .map(|(c, l)| c - l)
                .collect();
            let gain = parent_impurity
                - (left_total / total) * gini(&left_counts, left_total)
                - (right_total / total) * gini(&right_counts, right_total);
            let threshold = 0.5 * (v0 + v1);
            let better = match &best {
                None => gain > 1e-12,
                Some((g, f, t)) => {
                    gain > *g + 1e-12
                        || ((gain - *g).abs() <= 1e-12 && (feature, threshold) < (*f, *t))
                }
            };
            if better {
                best = Some((gain, feature, threshold));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return leaf();
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| z[i][feature] <= threshold);
    if left_rows.is_empty() || right_rows.is_empty() {
        return leaf();
    }
    let left = grow_tree(
        z,
        y,
        &left_rows,
        n_classes,
        depth_left - 1,
        feature_sample.as_mut().map(|(s, rng)| (*s, &mut **rng)),
    );
    let right = grow_tree(
        z,
        y,
        &right_rows,
        n_classes,
        depth_left - 1,
        feature_sample.as_mut().map(|(s, rng)| (*s, &mut **rng)),
    );
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// One-vs-rest logistic regression by full-batch gradient descent.
fn train_logistic(z: &[Vec<f64>], y: &[usize], positive: usize, hyper: &Hyperparameters) -> Vec<f64> {
    let n = z.len();
    let d = z[0].len();
    let mut w = vec![0.0f64; d + 1];
    let targets: Vec<f64> = y.iter().map(|&c| (c == positive) as u8 as f64).collect();
    for _ in 0..hyper.epochs {
        let mut grad = vec![0.0f64; d + 1];
        for (row, &t) in z.iter().zip(&targets) {
            let err = sigmoid(dot_bias(&w, row)) - t;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += err * v;
            }
            grad[d] += err;
        }
        for (j, g) in grad.iter_mut().enumerate() {
            *g /= n as f64;
            if j < d {
                *g += hyper.l2 * w[j];
            }
        }
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj -= hyper.learning_rate * g;
        }
    }
    w
}

/// One-vs-rest hinge loss by stochastic subgradient descent with the
/// 1/(lambda t) step schedule.
fn train_svm(
    z: &[Vec<f64>],
    y: &[usize],
    positive: usize,
    hyper: &Hyperparameters,
    seed: u64,
) -> Vec<f64> {
    let n = z.len();
    let d = z[0].len();
    let lambda = 1.0 / (hyper.c * n as f64);
    let mut w = vec![0.0f64; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(derive_seed(seed, "svm", positive as u64));
    let mut t = 0usize;
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let target = if y[i] == positive { 1.0 } else { -1.0 };
            let margin = target * dot_bias(&w, &z[i]);
            for wj in w.iter_mut().take(d) {
                *wj *= 1.0 - eta * lambda;
            }
            if margin < 1.0 {
                for (wj, v) in w.iter_mut().zip(&z[i]) {
                    *wj += eta * target * v;
                }
                w[d] += eta * target;
            }
        }
    }
    w
}
