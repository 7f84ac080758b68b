//! SAMME boosting and its random-undersampling variant.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::grow;
use super::{ClassifierModel, ClassifyError, FeatureMatrix, ModelKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    /// Rows per class the weak learner was trained on.
    pub train_counts: Vec<usize>,
    /// Weighted training error on the full set.
    pub error: f64,
    /// Tree weight; 0 for discarded rounds.
    pub alpha: f64,
    pub discarded: bool,
}

/// Multi-class AdaBoost (SAMME) over depth-limited trees.
pub fn fit_boosted(data: &FeatureMatrix, rounds: usize, max_depth: usize) -> Result<ClassifierModel, ClassifyError> {
    boost(data, rounds, max_depth, None)
}

/// SAMME where every round trains on a random undersample holding
/// `min_c n_c` rows of each class; weights still update on the full set.
pub fn fit_rusboost(data: &FeatureMatrix, rounds: usize, max_depth: usize, seed: u64) -> Result<ClassifierModel, ClassifyError> {
    boost(data, rounds, max_depth, Some(seed))
}

fn boost(data: &FeatureMatrix, rounds: usize, max_depth: usize, seed: Option<u64>) -> Result<ClassifierModel, ClassifyError> {
    if rounds == 0 {
        return Err(ClassifyError::InvalidParam("rounds must be at least 1".into()));
    }
    if data.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let n = data.len();
    let n_classes = data.classes.len();
    let counts = data.class_counts();
    let present = counts.iter().filter(|c| **c > 0).count();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let by_class: Vec<Vec<usize>> = (0..n_classes)
        .map(|c| (0..n).filter(|&i| data.labels[i] == c).collect())
        .collect();
    let minority = counts.iter().copied().filter(|c| *c > 0).min().unwrap_or(0);

    let mut model = ClassifierModel {
        kind: if seed.is_some() { ModelKind::RusBoost } else { ModelKind::Boosted },
        classes: data.classes.clone(),
        feature_names: data.feature_names.clone(),
        trees: Vec::new(),
        tree_weights: Vec::new(),
        max_depth,
        min_leaf: 1,
        rounds,
        seed,
        round_log: Vec::new(),
        warnings: Vec::new(),
    };
    if present < 2 {
        model.warnings.push("training data holds a single class; model is one leaf".into());
        let idx: Vec<usize> = (0..n).collect();
        model.trees.push(grow(&data.rows, &data.labels, &vec![1.0; n], &idx, n_classes, 0, 1));
        model.tree_weights.push(1.0);
        return Ok(model);
    }
    let k = present as f64;
    let chance = 1.0 - 1.0 / k;
    let uniform = 1.0 / n as f64;
    let mut w = vec![uniform; n];

    for round in 0..rounds {
        let idx: Vec<usize> = match rng.as_mut() {
            Some(rng) => {
                let mut idx = Vec::with_capacity(minority * present);
                for rows in by_class.iter().filter(|r| !r.is_empty()) {
                    idx.extend(sample(rng, rows.len(), minority).into_iter().map(|j| rows[j]));
                }
                idx.sort_unstable();
                idx
            }
            None => (0..n).collect(),
        };
        let mut train_counts = vec![0; n_classes];
        for &i in &idx {
            train_counts[data.labels[i]] += 1;
        }
        let tree = grow(&data.rows, &data.labels, &w, &idx, n_classes, max_depth, 1);
        let wrong: Vec<bool> = (0..n).map(|i| tree.predict_class(&data.rows[i]) != data.labels[i]).collect();
        let w_sum: f64 = w.iter().sum();
        let err = wrong.iter().zip(&w).filter(|(x, _)| **x).map(|(_, wi)| wi).sum::<f64>() / w_sum;
        if err >= chance - 1e-12 {
            model.round_log.push(RoundLog { round, train_counts, error: err, alpha: 0.0, discarded: true });
            w.iter_mut().for_each(|v| *v = uniform);
            continue;
        }
        if err <= 0.0 {
            let alpha = if model.trees.is_empty() { 1.0 } else { samme_alpha(1e-10, k) };
            model.round_log.push(RoundLog { round, train_counts, error: 0.0, alpha, discarded: false });
            model.trees.push(tree);
            model.tree_weights.push(alpha);
            break;
        }
        let alpha = samme_alpha(err, k);
        let boost = alpha.exp();
        for (wi, x) in w.iter_mut().zip(&wrong) {
            if *x {
                *wi *= boost;
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        model.round_log.push(RoundLog { round, train_counts, error: err, alpha, discarded: false });
        model.trees.push(tree);
        model.tree_weights.push(alpha);
    }
    if model.trees.is_empty() {
        return Err(ClassifyError::WeakLearner(format!("depth-{max_depth} tree")));
    }
    let discarded = model.round_log.iter().filter(|r| r.discarded).count();
    if discarded > 0 {
        model.warnings.push(format!("{discarded} of {} rounds discarded at chance-level error", model.round_log.len()));
    }
    Ok(model)
}

fn samme_alpha(err: f64, k: f64) -> f64 {
    ((1.0 - err) / err).ln() + (k - 1.0).ln()
}

#[cfg(test)]
mod tests {
    use super::super::testdata::plane;
    use super::super::{fit_cart, Node, Tree};
    use super::*;

    fn accuracy(model: &ClassifierModel, data: &FeatureMatrix) -> f64 {
        let hits = data
            .rows
            .iter()
            .zip(&data.labels)
            .filter(|(r, l)| model.predict(r).unwrap().class_index == **l)
            .count();
        hits as f64 / data.len() as f64
    }

    fn tpr(model: &ClassifierModel, data: &FeatureMatrix, class: usize) -> f64 {
        let (mut tp, mut pos) = (0, 0);
        for (r, l) in data.rows.iter().zip(&data.labels) {
            if *l == class {
                pos += 1;
                if model.predict(r).unwrap().class_index == class {
                    tp += 1;
                }
            }
        }
        tp as f64 / pos as f64
    }

    #[test]
    fn perfect_learner_stops_after_one_round() {
        let m = plane(200, 1, &["a", "b"], |x, _| usize::from(x > 0.0));
        let b = fit_boosted(&m, 20, 1).unwrap();
        assert_eq!(b.trees.len(), 1);
        assert_eq!(b.round_log.len(), 1);
        let single = fit_cart(&m, 1, 1).unwrap();
        assert_eq!(b.trees[0], single.trees[0]);
        assert_eq!(accuracy(&b, &m), 1.0);
    }

    #[test]
    fn rounds_must_be_positive() {
        let m = plane(20, 1, &["a", "b"], |x, _| usize::from(x > 0.0));
        assert!(matches!(fit_boosted(&m, 0, 1), Err(ClassifyError::InvalidParam(_))));
        assert!(matches!(fit_rusboost(&m, 0, 1, 3), Err(ClassifyError::InvalidParam(_))));
    }

    #[test]
    fn chance_level_learner_fails() {
        // a depth-0 tree predicts the majority, which is chance level on balanced data
        let mut m = plane(100, 4, &["a", "b"], |x, _| usize::from(x > 0.0));
        m.labels = (0..m.len()).map(|i| i % 2).collect();
        let err = fit_boosted(&m, 5, 0).unwrap_err();
        assert!(err.to_string().contains("depth-0"));
    }

    #[test]
    fn stumps_lift_a_diagonal_boundary() {
        let train = plane(2_000, 7, &["a", "b"], |x, y| usize::from(x + y > 0.0));
        let test = plane(2_000, 8, &["a", "b"], |x, y| usize::from(x + y > 0.0));
        let stump = fit_cart(&train, 1, 1).unwrap();
        let boosted = fit_boosted(&train, 100, 1).unwrap();
        assert!(accuracy(&stump, &train) < 0.8);
        assert!(accuracy(&boosted, &train) > 0.95, "{}", accuracy(&boosted, &train));
        assert!(accuracy(&boosted, &test) > 0.93);
    }

    #[test]
    fn xor_needs_interaction_depth() {
        let xor = plane(2_000, 5, &["a", "b"], |x, y| usize::from((x > 0.0) != (y > 0.0)));
        // stump ensembles are additive in the features, so at most three of the
        // four quadrants can be right
        let stumps = fit_boosted(&xor, 50, 1).unwrap();
        assert!(accuracy(&stumps, &xor) <= 0.8, "{}", accuracy(&stumps, &xor));
        let depth2 = fit_boosted(&xor, 50, 2).unwrap();
        assert!(accuracy(&depth2, &xor) > 0.95);
    }

    #[test]
    fn undersampling_sizes() {
        let m = plane(1_000, 2, &["a", "b"], |x, y| usize::from(x > 0.9 && y > -0.8));
        let counts = m.class_counts();
        assert!(counts[1] < counts[0]);
        let r = fit_rusboost(&m, 10, 2, 11).unwrap();
        for log in &r.round_log {
            assert_eq!(log.train_counts, [counts[1], counts[1]]);
        }
    }

    #[test]
    fn undersampling_100_to_10() {
        let rows: Vec<Vec<f64>> = (0..110).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let labels: Vec<&str> = (0..110).map(|i| if i % 11 == 0 { "B" } else { "A" }).collect();
        let m = FeatureMatrix::from_labelled(super::super::testdata::names(2), rows, &labels).unwrap();
        assert_eq!(m.class_counts(), [10, 100]);
        let r = fit_rusboost(&m, 5, 1, 1).unwrap();
        assert!(r.round_log.iter().all(|l| l.train_counts.iter().sum::<usize>() == 20));
    }

    #[test]
    fn rusboost_is_seed_deterministic() {
        let m = plane(600, 3, &["a", "b", "c"], |x, y| if x > 0.5 { 0 } else if y > 0.6 { 1 } else { 2 });
        let a = fit_rusboost(&m, 15, 2, 99).unwrap();
        let b = fit_rusboost(&m, 15, 2, 99).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = fit_rusboost(&m, 15, 2, 100).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn balanced_data_matches_plain_boosting() {
        let train = plane(1_000, 21, &["a", "b"], |x, y| usize::from(x * x + y * y < 0.5));
        let mut idx0: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == 0).collect();
        let idx1: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] == 1).collect();
        idx0.truncate(idx1.len());
        idx0.extend(&idx1);
        idx0.sort_unstable();
        let balanced = train.subset(&idx0);
        let test = plane(2_000, 22, &["a", "b"], |x, y| usize::from(x * x + y * y < 0.5));
        let a = accuracy(&fit_boosted(&balanced, 30, 2).unwrap(), &test);
        let b = accuracy(&fit_rusboost(&balanced, 30, 2, 5).unwrap(), &test);
        assert!((a - b).abs() <= 0.05, "{a} vs {b}");
    }

    #[test]
    fn rusboost_helps_the_minority() {
        // 9:1 skew; the minority occupies a corner that also holds majority noise
        let mut wins = 0;
        for seed in 0..10 {
            let label = |x: f64, y: f64| usize::from(x > 0.2 && y > 0.2 && (x + y) > 0.9);
            let train = plane(2_000, 100 + seed, &["maj", "min"], label);
            let test = plane(2_000, 200 + seed, &["maj", "min"], label);
            let noisy = |m: FeatureMatrix, s: u64| {
                let mut m = m;
                for (i, l) in m.labels.iter_mut().enumerate() {
                    if *l == 1 && (i as u64 + s) % 3 == 0 {
                        *l = 0;
                    }
                }
                m
            };
            let train = noisy(train, seed);
            let b = fit_boosted(&train, 20, 1).unwrap();
            let r = fit_rusboost(&train, 20, 1, seed).unwrap();
            if tpr(&r, &test, 1) >= tpr(&b, &test, 1) {
                wins += 1;
            }
        }
        assert!(wins > 5, "rusboost won {wins} of 10");
    }

    #[test]
    fn equal_weight_disagreement_ties_to_first_class() {
        let leaf = |d: Vec<f64>| Tree { nodes: vec![Node::Leaf { distribution: d }] };
        let model = ClassifierModel {
            kind: ModelKind::Boosted,
            classes: vec!["x".into(), "y".into()],
            feature_names: vec!["f".into()],
            trees: vec![leaf(vec![1.0, 0.0]), leaf(vec![0.0, 1.0])],
            tree_weights: vec![0.7, 0.7],
            max_depth: 1,
            min_leaf: 1,
            rounds: 2,
            seed: None,
            round_log: vec![],
            warnings: vec![],
        };
        let p = model.predict(&[0.0]).unwrap();
        assert_eq!(p.label, "x");
        assert_eq!(p.scores, [0.5, 0.5]);
        assert!(matches!(model.predict(&[0.0, 1.0]), Err(ClassifyError::Arity { expected: 1, found: 2 })));
    }
}
