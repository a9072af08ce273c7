//! Stance classifier used to label videos nobody annotated by hand.
//!
//! Text channels are turned into hashed bag-of-token blocks, fed through a
//! four-layer ReLU network (256, 128, 64, 32 units, dropout 0.5) with a
//! softmax head. Class imbalance is handled by oversampling every class to
//! the size of the largest one. A promoting prediction is only accepted at
//! probability 0.7 or higher.

pub mod evaluation;
pub mod features;
pub mod network;

use std::io;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Stance, VideoId};
pub use evaluation::{cross_validate, cross_validate_traced, stratified_folds, CrossValidation, EvaluationReport, FoldTrace};
pub use features::{FeatureVector, Featurizer};
use network::{DropoutMasks, Mlp, Sgd};

pub const HIDDEN_LAYERS: [usize; 4] = [256, 128, 64, 32];
pub const DROPOUT_RATE: f64 = 0.5;
pub const DECISION_THRESHOLD: f64 = 0.7;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("no text channel has any token")]
    Unfeaturizable,
    #[error("video {0} has no text to featurize")]
    UnfeaturizableVideo(VideoId),
    #[error("class `{class}` has {count} training examples, at least {needed} required")]
    InsufficientData { class: String, count: usize, needed: usize },
    #[error("feature vector has {got} values, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least 2 folds and as many examples as folds (k={k}, n={n})")]
    BadFoldCount { k: usize, n: usize },
    #[error("class `{class}` has {count} examples, too few to appear in each of {k} folds")]
    ClassMissingFromFold { class: String, count: usize, k: usize },
    #[error("model file: {0}")]
    Io(#[from] io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("model format version {0} not supported")]
    Version(u32),
}

/// Which stances the model separates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSetup {
    /// Promoting vs debunking; neutral examples are left out.
    BinaryNoNeutral,
    /// Promoting vs everything else.
    BinaryWithNeutral,
    ThreeClass,
}

impl ClassSetup {
    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            ClassSetup::BinaryNoNeutral => &["promoting", "debunking"],
            ClassSetup::BinaryWithNeutral => &["promoting", "debunking+neutral"],
            ClassSetup::ThreeClass => &["promoting", "neutral", "debunking"],
        }
    }

    pub fn class_count(self) -> usize {
        self.class_names().len()
    }

    /// Class index of a stance, `None` when the setup leaves it out.
    pub fn class_of(self, stance: Stance) -> Option<usize> {
        match (self, stance) {
            (_, Stance::Promoting) => Some(0),
            (ClassSetup::BinaryNoNeutral, Stance::Neutral) => None,
            (ClassSetup::BinaryNoNeutral, Stance::Debunking) => Some(1),
            (ClassSetup::BinaryWithNeutral, _) => Some(1),
            (ClassSetup::ThreeClass, Stance::Neutral) => Some(1),
            (ClassSetup::ThreeClass, Stance::Debunking) => Some(2),
        }
    }

    /// Stance reported for a class. The merged non-promoting class reads as neutral.
    pub fn stance_of(self, class: usize) -> Stance {
        match (self, class) {
            (_, 0) => Stance::Promoting,
            (ClassSetup::BinaryNoNeutral, 1) => Stance::Debunking,
            (ClassSetup::BinaryWithNeutral, 1) => Stance::Neutral,
            (ClassSetup::ThreeClass, 1) => Stance::Neutral,
            (ClassSetup::ThreeClass, 2) => Stance::Debunking,
            _ => panic!("class {class} out of range for {self:?}"),
        }
    }
}

/// Class 0 is promoting in every setup.
pub const PROMOTING_CLASS: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, batch_size: 32, learning_rate: 0.01, momentum: 0.9, dropout_rate: DROPOUT_RATE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub version: u32,
    pub featurizer: Featurizer,
    pub class_setup: ClassSetup,
    pub hidden_layers: Vec<usize>,
    pub dropout_rate: f64,
    pub decision_threshold: f64,
    pub network: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub stance: Stance,
    pub class: usize,
    pub confidence: f64,
    pub probabilities: Vec<f64>,
}

/// Picks the reported class from softmax outputs.
///
/// A promoting argmax below `threshold` yields the most probable
/// non-promoting class with its own probability.
pub fn apply_threshold(probabilities: &[f64], threshold: f64) -> (usize, f64) {
    let argmax = |skip: Option<usize>| {
        probabilities
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .fold((usize::MAX, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
    };
    let (best, p) = argmax(None);
    if best == PROMOTING_CLASS && p < threshold {
        argmax(Some(PROMOTING_CLASS))
    } else {
        (best, p)
    }
}

/// Indices into `labels` after drawing every class up to the largest class
/// size with replacement.
pub fn oversample(indices: &[usize], labels: &[usize], classes: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut by_class = vec![Vec::new(); classes];
    for &i in indices {
        by_class[labels[i]].push(i);
    }
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(target * classes);
    for members in &by_class {
        out.extend_from_slice(members);
        if members.is_empty() {
            continue;
        }
        for _ in members.len()..target {
            out.push(members[rng.random_range(0..members.len())]);
        }
    }
    out
}

/// Keeps the examples the setup uses, as (row, class) pairs.
pub(crate) fn encode_labels(corpus: &[(FeatureVector, Stance)], setup: ClassSetup) -> Vec<(usize, usize)> {
    corpus
        .iter()
        .enumerate()
        .filter_map(|(i, (_, s))| setup.class_of(*s).map(|c| (i, c)))
        .collect()
}

pub(crate) fn check_class_counts(labels: &[usize], setup: ClassSetup, needed: usize) -> Result<(), ClassifierError> {
    let mut counts = vec![0usize; setup.class_count()];
    for &c in labels {
        counts[c] += 1;
    }
    for (c, &count) in counts.iter().enumerate() {
        if count < needed {
            return Err(ClassifierError::InsufficientData {
                class: setup.class_names()[c].to_string(),
                count,
                needed,
            });
        }
    }
    Ok(())
}

fn batch_matrix(rows: &[&FeatureVector], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows.len(), width));
    for (r, fv) in rows.iter().enumerate() {
        m.row_mut(r).assign(&ndarray::ArrayView1::from(&fv.values[..]));
    }
    m
}

/// Trains on `(features, class)` rows. Deterministic in `seed`. Also returns
/// the oversampled row multiset the epochs drew from.
pub(crate) fn train_rows(
    rows: &[(&FeatureVector, usize)],
    setup: ClassSetup,
    featurizer: Featurizer,
    seed: u64,
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<usize>), ClassifierError> {
    let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
    check_class_counts(&labels, setup, 2)?;
    let width = featurizer.width();
    if let Some((fv, _)) = rows.iter().find(|(fv, _)| fv.len() != width) {
        return Err(ClassifierError::DimensionMismatch { expected: width, got: fv.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![width];
    sizes.extend_from_slice(&HIDDEN_LAYERS);
    sizes.push(setup.class_count());
    let mut net = Mlp::new(&sizes, &mut rng);
    let mut opt = Sgd::new(&net, config.learning_rate, config.momentum);

    let all: Vec<usize> = (0..rows.len()).collect();
    let mut order = oversample(&all, &labels, setup.class_count(), &mut rng);
    let drawn = order.clone();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let batch: Vec<&FeatureVector> = chunk.iter().map(|&i| rows[i].0).collect();
            let targets: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let x = batch_matrix(&batch, width);
            let masks = (config.dropout_rate > 0.0)
                .then(|| DropoutMasks::sample(&net, chunk.len(), config.dropout_rate, &mut rng));
            let (_, grads) = net.loss_and_gradients(x.view(), &targets, masks.as_ref());
            opt.step(&mut net, &grads);
        }
    }

    let model = ClassifierModel {
        version: MODEL_FORMAT_VERSION,
        featurizer,
        class_setup: setup,
        hidden_layers: HIDDEN_LAYERS.to_vec(),
        dropout_rate: config.dropout_rate,
        decision_threshold: DECISION_THRESHOLD,
        network: net,
    };
    Ok((model, drawn))
}

/// Trains a model on labeled feature vectors. Examples whose stance the setup
/// leaves out are ignored.
pub fn train(
    corpus: &[(FeatureVector, Stance)],
    setup: ClassSetup,
    featurizer: Featurizer,
    seed: u64,
    config: &TrainConfig,
) -> Result<ClassifierModel, ClassifierError> {
    let rows: Vec<(&FeatureVector, usize)> =
        encode_labels(corpus, setup).into_iter().map(|(i, c)| (&corpus[i].0, c)).collect();
    train_rows(&rows, setup, featurizer, seed, config).map(|(m, _)| m)
}

impl ClassifierModel {
    pub fn input_width(&self) -> usize {
        self.network.input_width()
    }

    pub fn probabilities(&self, v: &FeatureVector) -> Result<Vec<f64>, ClassifierError> {
        Ok(self.probabilities_batch(std::slice::from_ref(v))?.remove(0))
    }

    pub fn probabilities_batch(&self, vs: &[FeatureVector]) -> Result<Vec<Vec<f64>>, ClassifierError> {
        let width = self.input_width();
        if let Some(v) = vs.iter().find(|v| v.len() != width) {
            return Err(ClassifierError::DimensionMismatch { expected: width, got: v.len() });
        }
        let refs: Vec<&FeatureVector> = vs.iter().collect();
        let p = self.network.probabilities(batch_matrix(&refs, width).view());
        Ok(p.outer_iter().map(|r| r.to_vec()).collect())
    }

    fn decide(&self, probabilities: Vec<f64>) -> Prediction {
        let (class, confidence) = apply_threshold(&probabilities, self.decision_threshold);
        Prediction { stance: self.class_setup.stance_of(class), class, confidence, probabilities }
    }

    pub fn predict(&self, v: &FeatureVector) -> Result<Prediction, ClassifierError> {
        Ok(self.decide(self.probabilities(v)?))
    }

    pub fn predict_batch(&self, vs: &[FeatureVector]) -> Result<Vec<Prediction>, ClassifierError> {
        Ok(self.probabilities_batch(vs)?.into_iter().map(|p| self.decide(p)).collect())
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let f = io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let f = io::BufReader::new(std::fs::File::open(path)?);
        let model: ClassifierModel = serde_json::from_reader(f)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::Version(model.version));
        }
        Ok(model)
    }
}
