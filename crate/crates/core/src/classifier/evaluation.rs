//! Stratified k-fold cross-validation and classification reports.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_class_counts, encode_labels, train_rows, ClassSetup, ClassifierError, FeatureVector, Featurizer,
    TrainConfig, PROMOTING_CLASS,
};
use crate::domain::Stance;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    /// Rows are actual classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub folds: usize,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvaluationReport {
    /// Builds the report from parallel actual/predicted class indices.
    pub fn from_predictions(class_names: &[&str], actual: &[usize], predicted: &[usize], folds: usize) -> Self {
        let k = class_names.len();
        let mut confusion = vec![vec![0u64; k]; k];
        for (&a, &p) in actual.iter().zip(predicted) {
            confusion[a][p] += 1;
        }
        let total: u64 = confusion.iter().flatten().sum();
        let per_class: Vec<ClassMetrics> = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let support: u64 = confusion[c].iter().sum();
                let predicted_c: u64 = confusion.iter().map(|r| r[c]).sum();
                let precision = ratio(tp, predicted_c);
                let recall = ratio(tp, support);
                let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
                ClassMetrics { precision, recall, f1, support }
            })
            .collect();
        let weighted = |f: fn(&ClassMetrics) -> f64| {
            if total == 0 {
                return 0.0;
            }
            per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
        };
        let trace: u64 = (0..k).map(|c| confusion[c][c]).sum();
        EvaluationReport {
            class_names: class_names.iter().map(|s| s.to_string()).collect(),
            weighted_precision: weighted(|m| m.precision),
            weighted_recall: weighted(|m| m.recall),
            weighted_f1: weighted(|m| m.f1),
            accuracy: ratio(trace, total),
            per_class,
            confusion,
            folds,
        }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Metric rows for the promoting class and weighted averages, tab separated.
    pub fn metrics_table(&self) -> String {
        let p = &self.per_class[PROMOTING_CLASS];
        let rows = [
            ("precision_promoting", p.precision),
            ("recall_promoting", p.recall),
            ("f1_promoting", p.f1),
            ("precision_weighted", self.weighted_precision),
            ("recall_weighted", self.weighted_recall),
            ("f1_weighted", self.weighted_f1),
            ("accuracy", self.accuracy),
        ];
        let mut out = String::from("metric\tvalue\n");
        for (name, v) in rows {
            let _ = writeln!(out, "{name}\t{v:.4}");
        }
        let _ = writeln!(out, "folds\t{}", self.folds);
        out
    }

    /// Confusion matrix with row percentages, tab separated.
    pub fn confusion_table(&self) -> String {
        let mut out = String::from("actual\\predicted");
        for name in &self.class_names {
            let _ = write!(out, "\t{name}");
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            let support: u64 = row.iter().sum();
            let _ = write!(out, "{name}");
            for &c in row {
                let _ = write!(out, "\t{c} ({:.0}%)", 100.0 * ratio(c, support));
            }
            out.push('\n');
        }
        out
    }
}

/// Splits example positions into `k` test folds, dealing each class
/// round-robin after a seeded shuffle.
pub fn stratified_folds(labels: &[usize], classes: &[&str], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ClassifierError> {
    if k < 2 || labels.len() < k {
        return Err(ClassifierError::BadFoldCount { k, n: labels.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for (c, name) in classes.iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < k {
            return Err(ClassifierError::ClassMissingFromFold { class: name.to_string(), count: members.len(), k });
        }
        members.shuffle(&mut rng);
        for m in members {
            folds[next % k].push(m);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// What happened in one fold, in corpus positions.
#[derive(Debug, Clone)]
pub struct FoldTrace {
    pub test: Vec<usize>,
    /// Training multiset after oversampling.
    pub train: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub report: EvaluationReport,
    pub folds: Vec<FoldTrace>,
}

/// Held-out labels and predictions of one fold, plus its trace.
type FoldOutcome = (Vec<usize>, Vec<usize>, FoldTrace);

/// Stratified k-fold cross-validation. Oversampling happens inside each
/// training split only; folds train in parallel on derived seeds.
pub fn cross_validate_traced(
    corpus: &[(FeatureVector, Stance)],
    setup: ClassSetup,
    featurizer: Featurizer,
    k: usize,
    seed: u64,
    config: &TrainConfig,
) -> Result<CrossValidation, ClassifierError> {
    let encoded = encode_labels(corpus, setup);
    let labels: Vec<usize> = encoded.iter().map(|e| e.1).collect();
    check_class_counts(&labels, setup, 1)?;
    let folds = stratified_folds(&labels, setup.class_names(), k, derive_seed(seed, "folds"))?;

    let results: Vec<Result<FoldOutcome, ClassifierError>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let mut in_test = vec![false; encoded.len()];
            test.iter().for_each(|&i| in_test[i] = true);
            let train_pos: Vec<usize> = (0..encoded.len()).filter(|&i| !in_test[i]).collect();
            let rows: Vec<(&FeatureVector, usize)> =
                train_pos.iter().map(|&i| (&corpus[encoded[i].0].0, encoded[i].1)).collect();
            let (model, order) = train_rows(&rows, setup, featurizer, derive_seed(seed, &format!("fold/{f}")), config)?;
            let vectors: Vec<FeatureVector> = test.iter().map(|&i| corpus[encoded[i].0].0.clone()).collect();
            let predicted: Vec<usize> = model.predict_batch(&vectors)?.into_iter().map(|p| p.class).collect();
            let actual: Vec<usize> = test.iter().map(|&i| encoded[i].1).collect();
            let trace = FoldTrace {
                test: test.iter().map(|&i| encoded[i].0).collect(),
                train: order.iter().map(|&r| encoded[train_pos[r]].0).collect(),
            };
            Ok((actual, predicted, trace))
        })
        .collect();

    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    let mut traces = Vec::new();
    for r in results {
        let (a, p, t) = r?;
        actual.extend(a);
        predicted.extend(p);
        traces.push(t);
    }
    Ok(CrossValidation {
        report: EvaluationReport::from_predictions(setup.class_names(), &actual, &predicted, k),
        folds: traces,
    })
}

pub fn cross_validate(
    corpus: &[(FeatureVector, Stance)],
    setup: ClassSetup,
    featurizer: Featurizer,
    k: usize,
    seed: u64,
    config: &TrainConfig,
) -> Result<EvaluationReport, ClassifierError> {
    cross_validate_traced(corpus, setup, featurizer, k, seed, config).map(|cv| cv.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_baseline_on_reference_counts() {
        let names = ClassSetup::ThreeClass.class_names();
        let mut actual = vec![0usize; 405];
        actual.extend(std::iter::repeat_n(2usize, 758));
        actual.extend(std::iter::repeat_n(1usize, 1459));
        let predicted = vec![1usize; actual.len()];
        let r = EvaluationReport::from_predictions(names, &actual, &predicted, 10);
        assert_eq!(r.accuracy, 1459.0 / 2622.0);
        assert_eq!(r.per_class[0].precision, 0.0);
        assert_eq!(r.per_class[1].recall, 1.0);
        let supports: Vec<u64> = r.confusion.iter().map(|row| row.iter().sum()).collect();
        assert_eq!(supports, [405, 1459, 758]);
    }

    #[test]
    fn report_invariants() {
        let names = ["a", "b", "c"];
        let actual = [0, 0, 1, 1, 2, 2, 2];
        let predicted = [0, 1, 1, 1, 2, 0, 2];
        let r = EvaluationReport::from_predictions(&names, &actual, &predicted, 2);
        for (c, m) in r.per_class.iter().enumerate() {
            assert_eq!(r.confusion[c].iter().sum::<u64>(), m.support);
        }
        let trace: u64 = (0..3).map(|c| r.confusion[c][c]).sum();
        assert_eq!(r.accuracy, trace as f64 / r.total() as f64);
        assert!((r.per_class[1].precision - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.metrics_table().contains("accuracy\t0.7143"));
        assert!(r.confusion_table().starts_with("actual\\predicted\ta\tb\tc\n"));
    }

    #[test]
    fn folds_are_stratified_partitions() {
        let labels: Vec<usize> = (0..100).map(|i| if i < 20 { 0 } else if i < 50 { 1 } else { 2 }).collect();
        let folds = stratified_folds(&labels, &["p", "n", "d"], 5, 9).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.iter().filter(|&&i| labels[i] == 0).count(), 4);
            assert_eq!(f.len(), 20);
        }
    }

    #[test]
    fn fold_errors() {
        let labels = vec![0, 0, 0, 1, 1];
        assert!(matches!(
            stratified_folds(&labels, &["p", "d"], 3, 1),
            Err(ClassifierError::ClassMissingFromFold { count: 2, k: 3, .. })
        ));
        assert!(matches!(stratified_folds(&labels, &["p", "d"], 1, 1), Err(ClassifierError::BadFoldCount { .. })));
        assert!(matches!(stratified_folds(&labels, &["p", "d"], 6, 1), Err(ClassifierError::BadFoldCount { .. })));
    }
}
