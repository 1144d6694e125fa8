//! Synthetic data with a known tensor-train model behind the labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::poly::DegreeVector;
use crate::sweep::LabeledData;
use crate::tt::{RankVector, TensorTrain};

/// `n × d` features drawn uniformly from `[-1, 1]`, row-major.
pub fn uniform_features(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * d).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// A random train and `n` uniform samples labelled by the sign of its score
/// (zero counts as `+1`). Samples whose score is within `margin` of zero
/// are redrawn.
pub fn planted_binary(
    degree: &DegreeVector,
    ranks: &RankVector,
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<(TensorTrain, LabeledData)> {
    let tt = TensorTrain::random(&degree.dims(), ranks, seed)?;
    let data = planted_samples(&tt, degree, n, margin, seed ^ 0x5EED_DA7A)?;
    Ok((tt, data))
}

/// `n` uniform samples labelled by the sign of `tt`'s score, redrawing
/// those within `margin` of the decision boundary.
pub fn planted_samples(
    tt: &TensorTrain,
    degree: &DegreeVector,
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<LabeledData> {
    let d = degree.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut x = vec![0.0; d];
    while labels.len() < n {
        x.iter_mut().for_each(|v| *v = rng.random_range(-1.0..=1.0));
        let s = tt.eval_polynomial(&x, degree)?;
        if s.abs() < margin {
            continue;
        }
        features.extend_from_slice(&x);
        labels.push(if s >= 0.0 { 1.0 } else { -1.0 });
    }
    LabeledData::new(features, d, labels)
}

/// Binary labels `±1` mapped to classes `1` and `0`.
pub fn to_two_class(data: &LabeledData, provenance: &str) -> Result<Dataset> {
    let labels = data.labels().iter().map(|&y| i64::from(y > 0.0)).collect();
    Dataset::new(data.features().to_vec(), data.dim(), labels, provenance)
}

/// [`planted_binary`] with labels `0` (negative) and `1` (positive).
pub fn planted_two_class(
    degree: &DegreeVector,
    ranks: &RankVector,
    n: usize,
    margin: f64,
    seed: u64,
) -> Result<(TensorTrain, Dataset)> {
    let (tt, data) = planted_binary(degree, ranks, n, margin, seed)?;
    Ok((tt, to_two_class(&data, &format!("planted seed {seed}"))?))
}

/// Points of `{-1, 1}^d` labelled by `x_1 x_2 ... x_d`: exactly a rank-1
/// multilinear polynomial.
pub fn parity(d: usize, n: usize, seed: u64) -> Result<LabeledData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..n * d)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let labels = features.chunks(d).map(|row| row.iter().product()).collect();
    LabeledData::new(features, d, labels)
}
