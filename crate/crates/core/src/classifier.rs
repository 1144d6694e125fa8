//! Binary TT classifiers, multiclass decision strategies and γ selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::poly::DegreeVector;
use crate::sweep::{train_with_observer, LabeledData, LogEntry, TrainConfig};
use crate::tt::TensorTrain;

/// Per-feature affine map `x ↦ scale·x + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl Scaling {
    pub fn identity(d: usize) -> Self {
        Self {
            scale: vec![1.0; d],
            shift: vec![0.0; d],
        }
    }

    /// Sends each feature's minimum to -1 and maximum to +1. Constant
    /// features are mapped to 0.
    pub fn fit(features: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || features.is_empty() || !features.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values for dimension {dim}",
                features.len()
            )));
        }
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in features.chunks(dim) {
            for (k, &x) in row.iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        let mut s = Self::identity(dim);
        for k in 0..dim {
            let span = hi[k] - lo[k];
            if span > 0.0 && span.is_finite() {
                s.scale[k] = 2.0 / span;
                s.shift[k] = -(hi[k] + lo[k]) / span;
            } else {
                s.scale[k] = 0.0;
                s.shift[k] = 0.0;
            }
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.scale.iter().zip(&self.shift))
            .map(|(&v, (&a, &b))| a * v + b)
            .collect()
    }

    pub fn apply_rows(&self, features: &[f64]) -> Vec<f64> {
        features
            .chunks(self.dim())
            .flat_map(|row| self.apply(row))
            .collect()
    }
}

/// A polynomial discriminant `g(x) = ⟨T(s(x)), A⟩` with `A` in TT format and
/// `s` the stored feature scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTTClassifier {
    pub train: TensorTrain,
    pub degree: DegreeVector,
    pub scaling: Scaling,
}

impl BinaryTTClassifier {
    pub fn new(train: TensorTrain, degree: DegreeVector, scaling: Scaling) -> Result<Self> {
        if degree.len() != scaling.dim() || train.dims() != degree.dims() {
            return Err(Error::DimensionMismatch(format!(
                "train modes {:?}, degree vector of length {}, scaling of length {}",
                train.dims(),
                degree.len(),
                scaling.dim()
            )));
        }
        Ok(Self {
            train,
            degree,
            scaling,
        })
    }

    pub fn dim(&self) -> usize {
        self.degree.len()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "input has {} features, classifier expects {}",
                x.len(),
                self.dim()
            )));
        }
        self.train
            .eval_polynomial(&self.scaling.apply(x), &self.degree)
    }

    /// `+1` when the score is nonnegative, `-1` otherwise.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(decide(self.score(x)?))
    }
}

/// The binary decision rule: `score >= 0 → +1`.
pub fn decide(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// How an m-class problem is split into binary problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    OneVsAll,
    OneVsOne,
    BinaryCoding,
}

impl Strategy {
    /// Number of binary classifiers for `m` classes.
    pub fn num_classifiers(self, m: usize) -> usize {
        if m <= 2 {
            return 1;
        }
        match self {
            Strategy::OneVsAll => m,
            Strategy::OneVsOne => m * (m - 1) / 2,
            Strategy::BinaryCoding => code_length(m),
        }
    }
}

/// `⌈log₂ m⌉` (at least 1).
pub fn code_length(m: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < m {
        bits += 1;
    }
    bits.max(1)
}

/// Codeword of class index `c`: its binary representation, most significant bit first.
pub fn codeword(c: usize, bits: usize) -> Vec<bool> {
    (0..bits).rev().map(|b| (c >> b) & 1 == 1).collect()
}

/// The class pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn class_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect()
}

/// Binary classifiers plus the rule that combines their outputs.
///
/// Label conventions: for one-vs-all with `m >= 3` classifier `c` treats class
/// `c` as `+1`; one-vs-one classifier `(i, j)` treats class `j` as `+1`;
/// binary-coding classifier `b` treats classes whose codeword has bit `b` set
/// as `+1`. With two classes every strategy uses one classifier with the
/// second class as `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    pub strategy: Strategy,
    pub classifiers: Vec<BinaryTTClassifier>,
    pub class_labels: Vec<i64>,
}

impl MulticlassModel {
    pub fn new(strategy: Strategy, classifiers: Vec<BinaryTTClassifier>, class_labels: Vec<i64>) -> Result<Self> {
        let m = class_labels.len();
        if m < 2 {
            return Err(Error::InvalidConfig("at least two classes are required".into()));
        }
        let expected = strategy.num_classifiers(m);
        if classifiers.len() != expected {
            return Err(Error::InvalidConfig(format!(
                "{strategy:?} with {m} classes needs {expected} classifiers, got {}",
                classifiers.len()
            )));
        }
        let d = classifiers[0].dim();
        if classifiers.iter().any(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch("classifiers of different input dimension".into()));
        }
        Ok(Self {
            strategy,
            classifiers,
            class_labels,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn dim(&self) -> usize {
        self.classifiers[0].dim()
    }

    /// Codewords, one per class (binary coding only; empty otherwise).
    pub fn code_matrix(&self) -> Vec<Vec<bool>> {
        match self.strategy {
            Strategy::BinaryCoding => {
                let bits = self.classifiers.len();
                (0..self.num_classes()).map(|c| codeword(c, bits)).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Scores of all binary classifiers.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.classifiers.iter().map(|c| c.score(x)).collect()
    }

    /// Class index chosen for `x`.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        Ok(decide_class(self.strategy, self.num_classes(), &self.scores(x)?))
    }

    /// Class label chosen for `x`.
    pub fn predict(&self, x: &[f64]) -> Result<i64> {
        Ok(self.class_labels[self.predict_index(x)?])
    }

    pub fn predict_rows(&self, features: &[f64]) -> Result<Vec<i64>> {
        let d = self.dim();
        if !features.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch(format!(
                "{} values are not rows of length {d}",
                features.len()
            )));
        }
        features
            .par_chunks(d)
            .map(|row| self.predict(row))
            .collect()
    }
}

/// Combines binary scores into a class index (0-based). Ties go to the
/// smallest index.
pub fn decide_class(strategy: Strategy, m: usize, scores: &[f64]) -> usize {
    if m == 2 {
        return usize::from(scores[0] >= 0.0);
    }
    match strategy {
        Strategy::OneVsAll => {
            let mut best = 0;
            for (c, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = c;
                }
            }
            best
        }
        Strategy::OneVsOne => {
            let mut votes = vec![0usize; m];
            let mut margin = vec![0.0f64; m];
            for (&(i, j), &s) in class_pairs(m).iter().zip(scores) {
                let winner = if s >= 0.0 { j } else { i };
                votes[winner] += 1;
                margin[winner] += s.abs();
            }
            let mut best = 0;
            for c in 1..m {
                if votes[c] > votes[best] || (votes[c] == votes[best] && margin[c] > margin[best]) {
                    best = c;
                }
            }
            best
        }
        Strategy::BinaryCoding => {
            let bits: Vec<bool> = scores.iter().map(|&s| s >= 0.0).collect();
            let mut best = 0;
            let mut best_dist = usize::MAX;
            for c in 0..m {
                let dist = codeword(c, bits.len())
                    .iter()
                    .zip(&bits)
                    .filter(|(a, b)| a != b)
                    .count();
                if dist < best_dist {
                    best = c;
                    best_dist = dist;
                }
            }
            best
        }
    }
}

/// The ±1 labels (or `None` for samples that do not take part) of every
/// binary subproblem, given class indices of the samples.
pub fn binary_assignments(strategy: Strategy, m: usize, class_idx: &[usize]) -> Vec<Vec<Option<f64>>> {
    let sign = |b: bool| if b { 1.0 } else { -1.0 };
    if m == 2 {
        return vec![class_idx.iter().map(|&c| Some(sign(c == 1))).collect()];
    }
    match strategy {
        Strategy::OneVsAll => (0..m)
            .map(|t| class_idx.iter().map(|&c| Some(sign(c == t))).collect())
            .collect(),
        Strategy::OneVsOne => class_pairs(m)
            .into_iter()
            .map(|(i, j)| {
                class_idx
                    .iter()
                    .map(|&c| {
                        if c == j {
                            Some(1.0)
                        } else if c == i {
                            Some(-1.0)
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect(),
        Strategy::BinaryCoding => {
            let bits = code_length(m);
            (0..bits)
                .map(|b| {
                    class_idx
                        .iter()
                        .map(|&c| Some(sign(codeword(c, bits)[b])))
                        .collect()
                })
                .collect()
        }
    }
}

/// Seed of binary subproblem `index`.
pub fn subproblem_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains one binary classifier per subproblem of `strategy`, in parallel.
/// The class set is taken from the data.
pub fn train_multiclass(ds: &Dataset, config: &TrainConfig, strategy: Strategy) -> Result<MulticlassModel> {
    let classes = ds.classes();
    train_multiclass_for(ds, &classes, config, strategy, |_, _| {})
}

/// [`train_multiclass`] with an explicit class list (every class must occur
/// in `ds`) and an observer receiving `(subproblem, entry)` for each core update.
pub fn train_multiclass_for(
    ds: &Dataset,
    classes: &[i64],
    config: &TrainConfig,
    strategy: Strategy,
    observer: impl Fn(usize, &LogEntry) + Sync,
) -> Result<MulticlassModel> {
    if classes.len() < 2 {
        return Err(Error::InvalidLabels("at least two classes are required".into()));
    }
    let class_idx = ds.class_indices(classes)?;
    let mut present = vec![false; classes.len()];
    for &c in &class_idx {
        present[c] = true;
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(Error::InvalidLabels(format!(
            "class {} does not occur in the training data",
            classes[missing]
        )));
    }
    if ds.dim() != config.degree.len() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} features, degree vector has {} entries",
            ds.dim(),
            config.degree.len()
        )));
    }
    let scaling = Scaling::fit(ds.features(), ds.dim())?;
    let scaled = scaling.apply_rows(ds.features());
    let d = ds.dim();
    let problems = binary_assignments(strategy, classes.len(), &class_idx);
    let trains: Vec<TensorTrain> = problems
        .par_iter()
        .enumerate()
        .map(|(p, assignment)| {
            let mut feats = Vec::new();
            let mut labels = Vec::new();
            for (j, y) in assignment.iter().enumerate() {
                if let Some(y) = y {
                    feats.extend_from_slice(&scaled[j * d..(j + 1) * d]);
                    labels.push(*y);
                }
            }
            let data = LabeledData::new(feats, d, labels)?;
            let cfg = TrainConfig {
                seed: subproblem_seed(config.seed, p),
                ..config.clone()
            };
            let (tt, _) = train_with_observer(&data, &cfg, |e| observer(p, e))?;
            Ok(tt)
        })
        .collect::<Result<_>>()?;
    let classifiers = trains
        .into_iter()
        .map(|tt| BinaryTTClassifier::new(tt, config.degree.clone(), scaling.clone()))
        .collect::<Result<_>>()?;
    MulticlassModel::new(strategy, classifiers, classes.to_vec())
}

/// Error rate and confusion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub error_rate: f64,
    /// `confusion[t][p]`: samples of class `t` predicted as class `p`
    /// (indices into the model's class labels).
    pub confusion: Vec<Vec<usize>>,
    /// Samples whose true label is not one of the model's classes (always
    /// counted as errors, not part of `confusion`).
    pub unknown: usize,
    pub n: usize,
}

pub fn evaluate(model: &MulticlassModel, ds: &Dataset) -> Result<Evaluation> {
    let predicted = model.predict_rows(ds.features())?;
    Ok(evaluate_predictions(&model.class_labels, ds.labels(), &predicted))
}

pub fn evaluate_predictions(classes: &[i64], truth: &[i64], predicted: &[i64]) -> Evaluation {
    let m = classes.len();
    let mut confusion = vec![vec![0usize; m]; m];
    let mut wrong = 0;
    let mut unknown = 0;
    for (&t, &p) in truth.iter().zip(predicted) {
        if t != p {
            wrong += 1;
        }
        let ti = classes.iter().position(|&c| c == t);
        let pi = classes.iter().position(|&c| c == p);
        match (ti, pi) {
            (Some(ti), Some(pi)) => confusion[ti][pi] += 1,
            _ => unknown += 1,
        }
    }
    let n = truth.len();
    Evaluation {
        error_rate: if n == 0 { 0.0 } else { wrong as f64 / n as f64 },
        confusion,
        unknown,
        n,
    }
}

/// Per-γ mean held-out error and the selected γ.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_gamma: f64,
    /// `(γ, mean error over folds)` in grid order.
    pub mean_errors: Vec<(f64, f64)>,
}

/// Random assignment of `n` samples to `folds` folds of (nearly) equal size.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// K-fold cross-validation over `grid`; returns the γ with the smallest mean
/// held-out error (ties go to the smaller γ).
pub fn cross_validate_gamma(
    ds: &Dataset,
    config: &TrainConfig,
    strategy: Strategy,
    grid: &[f64],
    folds: usize,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::Empty("gamma grid"));
    }
    if folds < 2 || ds.len() < folds {
        return Err(Error::InvalidConfig(format!(
            "{folds}-fold cross-validation on {} samples",
            ds.len()
        )));
    }
    let classes = ds.classes();
    let assignment = fold_assignment(ds.len(), folds, config.seed);
    let splits: Vec<(Dataset, Dataset)> = (0..folds)
        .map(|f| {
            let train_idx: Vec<usize> = (0..ds.len()).filter(|&i| assignment[i] != f).collect();
            let test_idx: Vec<usize> = (0..ds.len()).filter(|&i| assignment[i] == f).collect();
            Ok((ds.subset(&train_idx)?, ds.subset(&test_idx)?))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |f| (g, f))).collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let cfg = config.clone().with_gamma(grid[g]);
            let (train_set, test_set) = &splits[f];
            let model = train_multiclass_for(train_set, &classes, &cfg, strategy, |_, _| {})?;
            Ok(evaluate(&model, test_set)?.error_rate)
        })
        .collect::<Result<_>>()?;
    let mean_errors: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(g, &gamma)| (gamma, errors[g * folds..(g + 1) * folds].iter().sum::<f64>() / folds as f64))
        .collect();
    let mut best = mean_errors[0];
    for &(g, e) in &mean_errors[1..] {
        if e < best.1 || (e == best.1 && g < best.0) {
            best = (g, e);
        }
    }
    Ok(CvResult {
        best_gamma: best.0,
        mean_errors,
    })
}
