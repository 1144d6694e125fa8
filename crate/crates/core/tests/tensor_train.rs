mod common;

use common::{random_dims, random_train, random_vec, rel_err, rel_err_slice, rng};
use nalgebra::DMatrix;
use rand::Rng;
use ttclass::dense::{frobenius_norm, outer_product};
use ttclass::tt::ORTHO_TOL;
use ttclass::{DegreeVector, RankVector, SparsePolynomial, TTCore, TensorTrain};

#[test]
fn entries_match_dense_reconstruction() {
    let mut r = rng(10);
    let tt = random_train(&mut r, &[3, 3, 3, 3], 2);
    let dense = tt.to_dense().unwrap();
    for _ in 0..50 {
        let idx: Vec<usize> = (0..4).map(|_| r.random_range(0..3)).collect();
        assert!(rel_err(tt.entry(&idx).unwrap(), dense.get(&idx).unwrap()) < 1e-14);
    }
    assert!(tt.entry(&[0, 0, 0, 3]).is_err());
    assert!(tt.entry(&[0, 0, 0]).is_err());
}

#[test]
fn rank_one_train_is_outer_product_and_norm_matches() {
    let mut r = rng(11);
    let vs: Vec<Vec<f64>> = [2, 3, 4].iter().map(|&n| random_vec(&mut r, n)).collect();
    let tt = TensorTrain::rank_one(&vs).unwrap();
    assert!(rel_err_slice(tt.to_dense().unwrap().as_slice(), outer_product(&vs).unwrap().as_slice()) < 1e-15);
    for _ in 0..10 {
        let dims = random_dims(&mut r, 5, 3);
        let tt = random_train(&mut r, &dims, 4);
        assert!(rel_err(tt.norm(), frobenius_norm(&tt.to_dense().unwrap())) < 1e-10);
    }
}

#[test]
fn contract_example_two_train() {
    let f: SparsePolynomial = "4*x1 + 1*x1^3 - 2*x1 x2 x3 - 7*x2 x3^2".parse().unwrap();
    let deg = DegreeVector::new(vec![3, 1, 2]).unwrap();
    let tt = TensorTrain::from_polynomial(&f, &deg).unwrap();
    let vs = deg.vandermonde_vectors(&[1.0, 1.0, 1.0]).unwrap();
    assert!((tt.contract(&vs).unwrap() + 4.0).abs() < 1e-12);
    assert!(tt.contract(&vs[..2]).is_err());
}

#[test]
fn random_train_contract() {
    let dims = [2, 2];
    let tt = TensorTrain::random(&dims, &RankVector::uniform(10, 2).unwrap(), 3).unwrap();
    assert_eq!(tt.ranks(), vec![2]);
    let again = TensorTrain::random(&dims, &RankVector::uniform(10, 2).unwrap(), 3).unwrap();
    assert_eq!(tt, again);
    let tt = TensorTrain::random(&[3, 4, 2, 3], &RankVector::uniform(3, 4).unwrap(), 9).unwrap();
    for core in tt.cores() {
        assert!((core.frobenius_norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn random_right_orthogonal_before_rescale() {
    let tt = TensorTrain::random_right_orthogonal(&[3, 4, 2, 3], &RankVector::uniform(3, 4).unwrap(), 9).unwrap();
    for core in &tt.cores()[1..] {
        assert!(core.right_gram_residual() < 1e-12);
    }
}

#[test]
fn shifting_left_through_train_left_orthogonalizes() {
    let mut r = rng(12);
    for _ in 0..10 {
        let dims = random_dims(&mut r, 5, 3);
        let mut tt = random_train(&mut r, &dims, 4);
        let before = tt.to_dense().unwrap();
        for k in 0..dims.len().saturating_sub(1) {
            tt.shift_orthogonal_left(k).unwrap();
            assert!(tt.core(k).is_left_orthogonal());
        }
        assert!(rel_err_slice(before.as_slice(), tt.to_dense().unwrap().as_slice()) < 1e-12);
        for k in (1..dims.len()).rev() {
            tt.shift_orthogonal_right(k).unwrap();
            assert!(tt.core(k).is_right_orthogonal());
        }
        assert!(rel_err_slice(before.as_slice(), tt.to_dense().unwrap().as_slice()) < 1e-12);
    }
    let mut tt = random_train(&mut r, &[2, 2, 2], 2);
    assert!(tt.shift_orthogonal_left(2).is_err());
    assert!(tt.shift_orthogonal_right(0).is_err());
}

#[test]
fn left_orthogonal_core_shift_leaves_next_core_alone() {
    // identity slice 0, zero slice 1: already left-orthogonal with R = I
    let mut data = vec![0.0; 2 * 2 * 2];
    data[0] = 1.0;
    data[5] = 1.0;
    let c0 = TTCore::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let c1 = TTCore::new(2, 2, 1, vec![0.3, -0.2, 0.5, 0.9]).unwrap();
    let mut tt = TensorTrain::new(vec![c0, c1.clone()]).unwrap();
    tt.shift_orthogonal_left(0).unwrap();
    assert!(rel_err_slice(tt.core(1).as_slice(), c1.as_slice()) < 1e-15);
    let ortho = TTCore::new(2, 2, 2, data).unwrap();
    assert!(ortho.is_left_orthogonal());
}

#[test]
fn orthogonality_check_matches_explicit_gram() {
    let mut r = rng(13);
    let core = TTCore::new(2, 3, 2, random_vec(&mut r, 12)).unwrap();
    let mut gram = DMatrix::<f64>::zeros(2, 2);
    for i in 0..3 {
        let s = core.slice(i);
        gram += s.transpose() * &s;
    }
    let resid = (gram - DMatrix::identity(2, 2)).amax();
    assert!((resid - core.left_gram_residual()).abs() < 1e-14);
    assert_eq!(core.is_left_orthogonal(), resid <= ORTHO_TOL);
    assert!(!core.is_left_orthogonal());
}

#[test]
fn gauge_transformation_leaves_entries_unchanged() {
    let mut r = rng(14);
    for _ in 0..10 {
        let tt = random_train(&mut r, &[3, 2, 3, 2], 3);
        let k = r.random_range(0..3);
        let rk = tt.core(k).r_right();
        let (q, _) = ttclass::linalg::qr_positive(DMatrix::from_fn(rk, rk, |_, _| r.random_range(-1.0..1.0)));
        let mut cores = tt.cores().to_vec();
        let left = cores[k].left_unfolding() * &q;
        let (rl, n, rr) = cores[k].shape();
        cores[k] = TTCore::new(rl, n, rr, left.as_slice().to_vec()).unwrap();
        let right = q.transpose() * cores[k + 1].right_unfolding();
        let (rl, n, rr) = cores[k + 1].shape();
        cores[k + 1] = TTCore::new(rl, n, rr, right.as_slice().to_vec()).unwrap();
        let gauged = TensorTrain::new(cores).unwrap();
        let a = tt.to_dense().unwrap();
        let b = gauged.to_dense().unwrap();
        let scale = a.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = a.as_slice().iter().zip(b.as_slice()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-12 * scale.max(1.0));
    }
}

#[test]
fn storage_bound_for_uniform_trains() {
    for (d, n, rk) in [(2, 3, 2), (5, 2, 3), (8, 3, 4), (10, 4, 5)] {
        let tt = TensorTrain::zeros(&vec![n; d], &RankVector::uniform(rk, d).unwrap()).unwrap();
        assert!(tt.storage() <= d * n * rk * rk + 2 * n * rk);
    }
}

#[test]
fn zero_train_and_unit_rank_one() {
    let tt = TensorTrain::zeros(&[2, 3], &RankVector::uniform(2, 2).unwrap()).unwrap();
    assert_eq!(tt.norm(), 0.0);
    let unit = TensorTrain::rank_one(&[vec![0.6, 0.8], vec![0.0, 1.0, 0.0]]).unwrap();
    assert!((unit.norm() - 1.0).abs() < 1e-15);
}
