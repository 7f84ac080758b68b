//! Miner classification from block features.
//!
//! Rows are blocks, features are `(avg_fee, size, tx_count, interblock)`
//! (optionally followed by the mempool snapshot), labels are miner names
//! with everything outside the top-k pools folded into `Other`.

mod ensemble;
mod metrics;
mod tree;

pub use ensemble::{fit_boosted, fit_rusboost, RoundLog};
pub use metrics::{evaluate_classifier, roc_auc, ClassMetrics, ClassifierEvaluation, RocCurve};
pub use tree::{fit_cart, gini, Node, Tree};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BlockSeries;

/// Label for miners outside the top-k.
pub const OTHER_LABEL: &str = "Other";

pub const BASE_FEATURES: [&str; 4] = ["avg_fee", "size", "tx_count", "interblock"];
pub const MEMPOOL_FEATURES: [&str; 3] = ["mempool_tx_count", "mempool_bytes", "mempool_fee"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("series of length {0} is too short; need at least 2 blocks")]
    TooShort(usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("feature matrix is empty")]
    Empty,
    #[error("row has {found} features, model expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("label '{0}' is not one of the model classes")]
    UnknownLabel(String),
    #[error("every boosting round was discarded: the weak learner ({0}) is no better than chance")]
    WeakLearner(String),
    #[error("labels contain a single class")]
    SingleClass,
}

/// Which miners keep their own label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPolicy {
    /// Most frequent miners (by block count, ties by name) kept as classes.
    pub top_k: usize,
    /// Append the mempool snapshot to the base features.
    pub include_mempool: bool,
}

impl Default for LabelPolicy {
    fn default() -> Self {
        Self { top_k: 8, include_mempool: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub classes: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Index into `classes` per row.
    pub labels: Vec<usize>,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, classes: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, ClassifyError> {
        let m = Self { feature_names, classes, rows, labels };
        m.validate()?;
        Ok(m)
    }

    /// Builds a matrix from string labels; classes appear in first-seen order.
    pub fn from_labelled(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: &[&str]) -> Result<Self, ClassifyError> {
        let mut classes: Vec<String> = Vec::new();
        let mut idx = Vec::with_capacity(labels.len());
        for l in labels {
            let i = match classes.iter().position(|c| c == l) {
                Some(i) => i,
                None => {
                    classes.push(l.to_string());
                    classes.len() - 1
                }
            };
            idx.push(i);
        }
        Self::new(feature_names, classes, rows, idx)
    }

    fn validate(&self) -> Result<(), ClassifyError> {
        if self.rows.len() != self.labels.len() {
            return Err(ClassifyError::InvalidParam(format!("{} rows but {} labels", self.rows.len(), self.labels.len())));
        }
        let f = self.feature_names.len();
        if let Some(r) = self.rows.iter().find(|r| r.len() != f) {
            return Err(ClassifyError::Arity { expected: f, found: r.len() });
        }
        if self.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ClassifyError::InvalidParam("feature values must be finite".into()));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.classes.len()) {
            return Err(ClassifyError::InvalidParam(format!("label index {l} out of range")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.classes.len()];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn label_of(&self, row: usize) -> &str {
        &self.classes[self.labels[row]]
    }

    /// Rows at `indices`, keeping the class list.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            classes: self.classes.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Only rows labelled with one of `keep`, whose order becomes the class list.
    pub fn restrict_to(&self, keep: &[&str]) -> Result<FeatureMatrix, ClassifyError> {
        let mut map = HashMap::new();
        for (new, name) in keep.iter().enumerate() {
            let old = self
                .classes
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| ClassifyError::UnknownLabel(name.to_string()))?;
            map.insert(old, new);
        }
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (r, l) in self.rows.iter().zip(&self.labels) {
            if let Some(&n) = map.get(l) {
                rows.push(r.clone());
                labels.push(n);
            }
        }
        Ok(FeatureMatrix {
            feature_names: self.feature_names.clone(),
            classes: keep.iter().map(|s| s.to_string()).collect(),
            rows,
            labels,
        })
    }

    /// Per-class chronological split: the last `floor(n_c · test_frac)` rows
    /// of each class go to the test side, so rare pools appear on both sides.
    pub fn stratified_split(&self, test_frac: f64) -> Result<(FeatureMatrix, FeatureMatrix), ClassifyError> {
        if !(0.0..1.0).contains(&test_frac) {
            return Err(ClassifyError::InvalidParam(format!("test fraction {test_frac} outside [0, 1)")));
        }
        let counts = self.class_counts();
        let n_test: Vec<usize> = counts.iter().map(|&c| (c as f64 * test_frac).floor() as usize).collect();
        let mut seen = vec![0; self.classes.len()];
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, &l) in self.labels.iter().enumerate() {
            if seen[l] < counts[l] - n_test[l] {
                train.push(i);
            } else {
                test.push(i);
            }
            seen[l] += 1;
        }
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Comma-separated dump with a trailing `label` column.
    pub fn to_csv(&self) -> String {
        let mut out = self.feature_names.join(",");
        out.push_str(",label\n");
        for (r, l) in self.rows.iter().zip(&self.labels) {
            for v in r {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&self.classes[*l]);
            out.push('\n');
        }
        out
    }
}

/// Features per block from the second block on (the first has no
/// inter-block time).
pub fn build_feature_matrix(series: &BlockSeries, policy: &LabelPolicy) -> Result<FeatureMatrix, ClassifyError> {
    if series.len() < 2 {
        return Err(ClassifyError::TooShort(series.len()));
    }
    if policy.top_k == 0 {
        return Err(ClassifyError::InvalidParam("top_k must be at least 1".into()));
    }
    let blocks = &series.blocks()[1..];
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for b in blocks {
        *counts.entry(b.miner.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut classes: Vec<String> = ranked.iter().take(policy.top_k).map(|(m, _)| m.to_string()).collect();
    if ranked.len() > policy.top_k {
        classes.push(OTHER_LABEL.to_string());
    }
    let other = classes.len() - 1;
    let mut feature_names: Vec<String> = BASE_FEATURES.iter().map(|s| s.to_string()).collect();
    if policy.include_mempool {
        feature_names.extend(MEMPOOL_FEATURES.iter().map(|s| s.to_string()));
    }
    let interblock = series.interblock();
    let mut rows = Vec::with_capacity(blocks.len());
    let mut labels = Vec::with_capacity(blocks.len());
    for (b, td) in blocks.iter().zip(interblock) {
        let mut r = vec![b.avg_fee.as_btc_f64(), b.size as f64, b.tx_count as f64, *td as f64];
        if policy.include_mempool {
            r.extend([b.mempool.tx_count as f64, b.mempool.total_bytes as f64, b.mempool.total_fee.as_btc_f64()]);
        }
        rows.push(r);
        labels.push(classes.iter().take(policy.top_k).position(|c| *c == b.miner).unwrap_or(other));
    }
    FeatureMatrix::new(feature_names, classes, rows, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cart,
    Boosted,
    RusBoost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub kind: ModelKind,
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    pub tree_weights: Vec<f64>,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub rounds: usize,
    pub seed: Option<u64>,
    pub round_log: Vec<RoundLog>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    /// Per-class scores in `classes` order, summing to 1.
    pub scores: Vec<f64>,
}

impl ClassifierModel {
    /// Weighted mean of the leaf distributions reached by `row`.
    pub fn scores(&self, row: &[f64]) -> Result<Vec<f64>, ClassifyError> {
        if row.len() != self.feature_names.len() {
            return Err(ClassifyError::Arity { expected: self.feature_names.len(), found: row.len() });
        }
        let mut s = vec![0.0; self.classes.len()];
        let total: f64 = self.tree_weights.iter().sum();
        for (t, w) in self.trees.iter().zip(&self.tree_weights) {
            for (acc, p) in s.iter_mut().zip(t.leaf_distribution(row)) {
                *acc += w * p / total;
            }
        }
        Ok(s)
    }

    /// Argmax of [`ClassifierModel::scores`]; ties go to the earliest class.
    pub fn predict(&self, row: &[f64]) -> Result<Prediction, ClassifyError> {
        let scores = self.scores(row)?;
        let class_index = argmax(&scores);
        Ok(Prediction { class_index, label: self.classes[class_index].clone(), scores })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

pub fn predict(model: &ClassifierModel, row: &[f64]) -> Result<Prediction, ClassifyError> {
    model.predict(row)
}

/// First index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
