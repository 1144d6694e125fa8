#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttclass::sweep::{LabeledData, SweepState, VandermondeTable};
use ttclass::{DegreeVector, RankVector, TTCore, TensorTrain};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Max elementwise difference relative to the largest magnitude.
pub fn rel_err_slice(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Unnormalized train with independent uniform entries and clipped ranks.
pub fn random_train(rng: &mut ChaCha8Rng, dims: &[usize], max_rank: usize) -> TensorTrain {
    let d = dims.len();
    let mut ranks = vec![1usize; d + 1];
    for k in 1..d {
        ranks[k] = rng.random_range(1..=max_rank);
    }
    if d > 1 {
        let rv = RankVector::new(ranks[1..d].to_vec()).unwrap().clipped(dims).unwrap();
        ranks[1..d].copy_from_slice(rv.ranks());
    }
    let cores = (0..d)
        .map(|k| {
            let len = ranks[k] * dims[k] * ranks[k + 1];
            TTCore::new(ranks[k], dims[k], ranks[k + 1], random_vec(rng, len)).unwrap()
        })
        .collect();
    TensorTrain::new(cores).unwrap()
}

pub fn random_dims(rng: &mut ChaCha8Rng, max_d: usize, max_n: usize) -> Vec<usize> {
    let d = rng.random_range(1..=max_d);
    (0..d).map(|_| rng.random_range(1..=max_n)).collect()
}

/// Random ±1 labelled data with features in [-1, 1].
pub fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> LabeledData {
    let f = random_vec(rng, n * d);
    let labels = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    LabeledData::new(f, d, labels).unwrap()
}

/// Train, data and caches positioned at core `k` (advancing from 0).
pub fn state_at(
    tt: &TensorTrain,
    data: &LabeledData,
    degree: &DegreeVector,
    k: usize,
) -> (VandermondeTable, SweepState) {
    let table = VandermondeTable::new(data, degree).unwrap();
    let mut state = SweepState::new(tt, &table).unwrap();
    for _ in 0..k {
        state
            .advance(tt, &table, ttclass::sweep::Direction::LeftToRight)
            .unwrap();
    }
    (table, state)
}
