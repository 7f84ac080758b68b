//! Weighted CART with Gini impurity.

use serde::{Deserialize, Serialize};

use super::{ClassifierModel, ClassifyError, FeatureMatrix, ModelKind};

/// `1 - Σ p_k²` over (possibly weighted) class counts; 0 for an empty node.
pub fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Class distribution summing to 1.
    Leaf { distribution: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_distribution(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { distribution } => return distribution,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_class(&self, row: &[f64]) -> usize {
        super::argmax(self.leaf_distribution(row))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Grows a tree on `rows[idx]` with per-row `weights` (indexed like `rows`).
pub(crate) fn grow(
    rows: &[Vec<f64>],
    labels: &[usize],
    weights: &[f64],
    idx: &[usize],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
) -> Tree {
    let mut g = Grower { rows, labels, weights, n_classes, max_depth, min_leaf, nodes: Vec::new() };
    g.build(idx.to_vec(), 0);
    Tree { nodes: g.nodes }
}

struct Grower<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    weights: &'a [f64],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &i in idx {
            c[self.labels[i]] += self.weights[i];
        }
        c
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&idx);
        let leaf = |counts: &[f64], idx: &[usize], labels: &[usize], k: usize| {
            let total: f64 = counts.iter().sum();
            let distribution = if total > 0.0 {
                counts.iter().map(|c| c / total).collect()
            } else {
                let mut d = vec![0.0; k];
                for &i in idx {
                    d[labels[i]] += 1.0 / idx.len() as f64;
                }
                d
            };
            Node::Leaf { distribution }
        };
        self.nodes.push(leaf(&counts, &idx, self.labels, self.n_classes));
        let pure = counts.iter().filter(|c| **c > 0.0).count() <= 1;
        if depth >= self.max_depth || pure || idx.len() < 2 * self.min_leaf {
            return id;
        }
        let Some(split) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][split.feature] <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }

    fn best_split(&self, idx: &[usize]) -> Option<Split> {
        let n_features = self.rows[idx[0]].len();
        let total = self.counts(idx);
        let w_total: f64 = total.iter().sum();
        let mut best: Option<Split> = None;
        let mut order = idx.to_vec();
        for f in 0..n_features {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left = vec![0.0; self.n_classes];
            let mut right = total.clone();
            for pos in 0..order.len() - 1 {
                let i = order[pos];
                left[self.labels[i]] += self.weights[i];
                right[self.labels[i]] -= self.weights[i];
                let (v, next) = (self.rows[i][f], self.rows[order[pos + 1]][f]);
                let n_left = pos + 1;
                if v == next || n_left < self.min_leaf || order.len() - n_left < self.min_leaf {
                    continue;
                }
                let wl: f64 = left.iter().sum();
                let wr = (w_total - wl).max(0.0);
                let impurity = if w_total > 0.0 { (wl * gini(&left) + wr * gini(&right)) / w_total } else { 0.0 };
                let improves = match &best {
                    None => true,
                    Some(b) => impurity < b.impurity - 1e-12 * b.impurity.abs().max(1e-300),
                };
                if improves {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(Split { feature: f, threshold, impurity });
                }
            }
        }
        best
    }
}

/// Single CART tree. Data holding one class yields a one-leaf model and a warning.
pub fn fit_cart(data: &FeatureMatrix, max_depth: usize, min_leaf: usize) -> Result<ClassifierModel, ClassifyError> {
    if data.is_empty() {
        return Err(ClassifyError::Empty);
    }
    if min_leaf == 0 {
        return Err(ClassifyError::InvalidParam("min_leaf must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    if data.class_counts().iter().filter(|c| **c > 0).count() < 2 {
        warnings.push("training data holds a single class; model is one leaf".into());
    }
    let weights = vec![1.0; data.len()];
    let idx: Vec<usize> = (0..data.len()).collect();
    let tree = grow(&data.rows, &data.labels, &weights, &idx, data.classes.len(), max_depth, min_leaf);
    Ok(ClassifierModel {
        kind: ModelKind::Cart,
        classes: data.classes.clone(),
        feature_names: data.feature_names.clone(),
        trees: vec![tree],
        tree_weights: vec![1.0],
        max_depth,
        min_leaf,
        rounds: 1,
        seed: None,
        round_log: Vec::new(),
        warnings,
    })
}
