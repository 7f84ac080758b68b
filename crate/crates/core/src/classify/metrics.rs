//! Confusion matrices, sensitivity / miss rate and one-vs-rest ROC.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ClassifierModel, ClassifyError, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    /// Score threshold reached at each point (`+inf` for the origin).
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for (t, (f, p)) in self.thresholds.iter().zip(&self.points) {
            writeln!(out, "{t},{f},{p}").expect("write to string");
        }
        out
    }
}

/// Threshold sweep over the distinct scores, highest first; rows sharing a
/// score enter together, so ties draw a diagonal segment.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<RocCurve, ClassifyError> {
    if scores.len() != positive.len() {
        return Err(ClassifyError::InvalidParam(format!("{} scores for {} labels", scores.len(), positive.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ClassifyError::InvalidParam("scores must be finite".into()));
    }
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ClassifyError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().expect("origin present");
        let p = (fp as f64 / n_neg as f64, tp as f64 / n_pos as f64);
        auc += (p.0 - x0) * (p.1 + y0) / 2.0;
        points.push(p);
        thresholds.push(s);
    }
    Ok(RocCurve { points, thresholds, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    /// `TP / (TP + FN)`; `None` without support.
    pub tpr: Option<f64>,
    /// One-vs-rest curve; `None` when the class is absent or is the only one present.
    pub roc: Option<RocCurve>,
}

impl ClassMetrics {
    pub fn auc(&self) -> Option<f64> {
        self.roc.as_ref().map(|r| r.auc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEvaluation {
    pub classes: Vec<String>,
    /// Rows are true classes, columns predicted.
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    /// Macro mean of per-class TPR over classes with support.
    pub sensitivity: f64,
    /// `1 - sensitivity`.
    pub miss_rate: f64,
    pub per_class: Vec<ClassMetrics>,
}

impl ClassifierEvaluation {
    /// Metrics from a confusion matrix alone (no ROC curves).
    pub fn from_confusion(classes: Vec<String>, confusion: Vec<Vec<u64>>) -> Result<Self, ClassifyError> {
        let k = classes.len();
        if confusion.len() != k || confusion.iter().any(|r| r.len() != k) {
            return Err(ClassifyError::InvalidParam(format!("confusion matrix must be {k}x{k}")));
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(ClassifyError::Empty);
        }
        let trace: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let per_class: Vec<ClassMetrics> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let support: u64 = confusion[i].iter().sum();
                ClassMetrics {
                    class: c.clone(),
                    support,
                    tpr: (support > 0).then(|| confusion[i][i] as f64 / support as f64),
                    roc: None,
                }
            })
            .collect();
        let tprs: Vec<f64> = per_class.iter().filter_map(|m| m.tpr).collect();
        let sensitivity = tprs.iter().sum::<f64>() / tprs.len() as f64;
        Ok(Self {
            classes,
            confusion,
            accuracy: trace as f64 / total as f64,
            sensitivity,
            miss_rate: 1.0 - sensitivity,
            per_class,
        })
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Mean one-vs-rest AUC over classes that have a curve.
    pub fn macro_auc(&self) -> Option<f64> {
        let aucs: Vec<f64> = self.per_class.iter().filter_map(|m| m.auc()).collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    }

    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            out.push_str(c);
            for v in row {
                write!(out, ",{v}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }

    /// One line in the layout `model,accuracy,sensitivity,miss_rate,auc`.
    pub fn summary_csv(&self, model: &str) -> String {
        let auc = self.macro_auc().map_or(String::new(), |a| a.to_string());
        format!(
            "model,accuracy,sensitivity,miss_rate,auc\n{model},{},{},{},{auc}\n",
            self.accuracy, self.sensitivity, self.miss_rate
        )
    }
}

pub fn evaluate_classifier(model: &ClassifierModel, test: &FeatureMatrix) -> Result<ClassifierEvaluation, ClassifyError> {
    if test.is_empty() {
        return Err(ClassifyError::Empty);
    }
    let map: Vec<usize> = test
        .classes
        .iter()
        .map(|c| model.classes.iter().position(|m| m == c).ok_or_else(|| ClassifyError::UnknownLabel(c.clone())))
        .collect::<Result<_, _>>()?;
    let k = model.classes.len();
    let mut confusion = vec![vec![0u64; k]; k];
    let mut scores = Vec::with_capacity(test.len());
    let mut truth = Vec::with_capacity(test.len());
    for (row, l) in test.rows.iter().zip(&test.labels) {
        let p = model.predict(row)?;
        let t = map[*l];
        confusion[t][p.class_index] += 1;
        scores.push(p.scores);
        truth.push(t);
    }
    let mut eval = ClassifierEvaluation::from_confusion(model.classes.clone(), confusion)?;
    for (c, m) in eval.per_class.iter_mut().enumerate() {
        let s: Vec<f64> = scores.iter().map(|v| v[c]).collect();
        let pos: Vec<bool> = truth.iter().map(|t| *t == c).collect();
        m.roc = roc_auc(&s, &pos).ok();
    }
    Ok(eval)
}

#[cfg(test)]
mod tests {
    use super::super::testdata::plane;
    use super::super::{fit_boosted, fit_cart};
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn binary_by_hand() {
        let e = ClassifierEvaluation::from_confusion(names(&["a", "b"]), vec![vec![70, 30], vec![20, 80]]).unwrap();
        assert_eq!(e.accuracy, 0.75);
        assert!((e.sensitivity - 0.75).abs() < 1e-15);
        assert_eq!(e.miss_rate + e.sensitivity, 1.0);
        assert_eq!(e.total(), 200);
    }

    #[test]
    fn miss_rate_complements_sensitivity() {
        // macro TPR (0.90 + 0.87) / 2 = 0.885
        let e = ClassifierEvaluation::from_confusion(names(&["F2Pool", "SlushPool"]), vec![vec![90, 10], vec![13, 87]]).unwrap();
        assert_eq!(format!("{:.3}", e.sensitivity), "0.885");
        assert_eq!(format!("{:.3}", e.miss_rate), "0.115");
        assert!((e.miss_rate - 0.115).abs() < 1e-12);
    }

    #[test]
    fn roc_examples() {
        let labels = [false, false, true, true];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap().auc, 0.0);
        let flat = roc_auc(&[0.5; 4], &labels).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points, [(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]), Err(ClassifyError::SingleClass));
        let c = roc_auc(&[0.3, 0.7, 0.5], &[false, true, true]).unwrap();
        assert_eq!(c.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
        assert!(c.to_csv().starts_with("threshold,fpr,tpr\ninf,0,0\n"));
    }

    #[test]
    fn perfect_classifier_evaluation() {
        let m = plane(300, 2, &["a", "b", "c"], |x, _| if x < -0.3 { 0 } else if x < 0.3 { 1 } else { 2 });
        let model = fit_cart(&m, 3, 1).unwrap();
        let e = evaluate_classifier(&model, &m).unwrap();
        assert_eq!(e.accuracy, 1.0);
        for (i, row) in e.confusion.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v > 0, i == j);
            }
        }
        assert!(e.per_class.iter().all(|c| c.auc() == Some(1.0)));
        assert_eq!(e.macro_auc(), Some(1.0));
        let csv = e.confusion_csv();
        assert!(csv.starts_with("true\\predicted,a,b,c\n"));
        assert!(e.summary_csv("cart").lines().nth(1).unwrap().starts_with("cart,1,1,0,1"));
    }

    #[test]
    fn unknown_test_label_rejected() {
        let train = plane(50, 1, &["a", "b"], |x, _| usize::from(x > 0.0));
        let model = fit_cart(&train, 2, 1).unwrap();
        let mut test = train.clone();
        test.classes = names(&["a", "zzz"]);
        assert_eq!(evaluate_classifier(&model, &test), Err(ClassifyError::UnknownLabel("zzz".into())));
        assert_eq!(evaluate_classifier(&model, &train.subset(&[])), Err(ClassifyError::Empty));
    }

    #[test]
    fn test_classes_are_mapped_by_name() {
        let train = plane(200, 1, &["a", "b"], |x, _| usize::from(x > 0.0));
        let model = fit_cart(&train, 2, 1).unwrap();
        let test = train.restrict_to(&["b", "a"]).unwrap();
        let e = evaluate_classifier(&model, &test).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e.classes, ["a", "b"]);
    }

    proptest! {
        #[test]
        fn confusion_conservation(cells in proptest::collection::vec(0u64..50, 9)) {
            prop_assume!(cells.iter().sum::<u64>() > 0);
            let m: Vec<Vec<u64>> = cells.chunks(3).map(|c| c.to_vec()).collect();
            let e = ClassifierEvaluation::from_confusion(names(&["a", "b", "c"]), m.clone()).unwrap();
            prop_assert_eq!(e.total(), cells.iter().sum::<u64>());
            for (i, c) in e.per_class.iter().enumerate() {
                prop_assert_eq!(c.support, m[i].iter().sum::<u64>());
                if let Some(t) = c.tpr {
                    let fnr = (c.support - m[i][i]) as f64 / c.support as f64;
                    prop_assert!((t + fnr - 1.0).abs() < 1e-15);
                }
            }
            prop_assert!((e.sensitivity + e.miss_rate - 1.0).abs() <= f64::EPSILON);
        }

        #[test]
        fn auc_antisymmetric(data in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 2..60)) {
            let (s, l): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
            prop_assume!(l.iter().any(|x| *x) && l.iter().any(|x| !*x));
            let a = roc_auc(&s, &l).unwrap().auc;
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let b = roc_auc(&neg, &l).unwrap().auc;
            prop_assert!((a + b - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn boosted_eval_is_consistent(seed in 0u64..100) {
            let m = plane(120, seed, &["a", "b"], |x, y| usize::from(x > y));
            let model = fit_boosted(&m, 5, 1).unwrap();
            let e = evaluate_classifier(&model, &m).unwrap();
            let trace: u64 = (0..2).map(|i| e.confusion[i][i]).sum();
            prop_assert_eq!(e.accuracy, trace as f64 / 120.0);
        }
    }
}
