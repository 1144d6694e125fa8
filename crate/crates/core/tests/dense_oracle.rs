mod common;

use common::{rel_err, rel_err_slice, random_vec, rng};
use nalgebra::DMatrix;
use rand::Rng;
use ttclass::dense::{frobenius_norm, inner_product, kron, outer_product, vandermonde};
use ttclass::poly::{feature_map, poly_eval_dense, poly_to_tensor};
use ttclass::{DegreeVector, DenseTensor, SparsePolynomial};

fn random_tensor(r: &mut rand_chacha::ChaCha8Rng, dims: &[usize]) -> DenseTensor {
    let len = dims.iter().product();
    DenseTensor::from_vec(dims, random_vec(r, len)).unwrap()
}

#[test]
fn mode_product_matches_triple_loop() {
    let mut r = rng(1);
    let a = random_tensor(&mut r, &[2, 2, 2]);
    let u = DMatrix::from_fn(3, 2, |_, _| r.random_range(-1.0..1.0));
    let b = a.mode_product(&u, 0).unwrap();
    assert_eq!(b.dims(), &[3, 2, 2]);
    for i in 0..3 {
        for j in 0..2 {
            for k in 0..2 {
                let expect: f64 = (0..2).map(|l| u[(i, l)] * a.get(&[l, j, k]).unwrap()).sum();
                assert!((b.get(&[i, j, k]).unwrap() - expect).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn inner_product_is_dot_of_linearizations() {
    let mut r = rng(2);
    for _ in 0..10 {
        let a = random_tensor(&mut r, &[3, 2, 4]);
        let b = random_tensor(&mut r, &[3, 2, 4]);
        let dot: f64 = a.vectorize().iter().zip(b.vectorize()).map(|(x, y)| x * y).sum();
        let ip = inner_product(&a, &b).unwrap();
        assert!(rel_err(ip, dot) < 1e-14);
        assert_eq!(ip, inner_product(&b, &a).unwrap());
        let n = frobenius_norm(&a);
        assert!(rel_err(n * n, inner_product(&a, &a).unwrap()) < 1e-12);
    }
    let z = DenseTensor::zeros(&[2, 3]).unwrap();
    assert_eq!(inner_product(&z, &z).unwrap(), 0.0);
    assert!(inner_product(&z, &DenseTensor::zeros(&[3, 2]).unwrap()).is_err());
}

#[test]
fn example_two_norm() {
    let f: SparsePolynomial = "4*x1 + 1*x1^3 - 2*x1 x2 x3 - 7*x2 x3^2".parse().unwrap();
    let a = poly_to_tensor(&f, &DegreeVector::new(vec![3, 1, 2]).unwrap()).unwrap();
    assert!((frobenius_norm(&a) - 70f64.sqrt()).abs() < 1e-14);
    let mut single = DenseTensor::zeros(&[2, 2]).unwrap();
    single.set(&[1, 0], 3.0).unwrap();
    assert_eq!(frobenius_norm(&single), 3.0);
}

#[test]
fn vectorize_round_trip() {
    let mut r = rng(3);
    let a = random_tensor(&mut r, &[3, 2, 2]);
    let v = a.vectorize();
    let back = DenseTensor::from_vec(&[3, 2, 2], v.clone()).unwrap();
    assert_eq!(back, a);
    for (lin, x) in v.iter().enumerate() {
        let idx = a.multi_index(lin).unwrap();
        assert_eq!(a.get(&idx).unwrap(), *x);
    }
}

#[test]
fn outer_product_vectorizes_to_reversed_kronecker_chain() {
    let mut r = rng(4);
    for d in 1..=5 {
        let vs: Vec<Vec<f64>> = (0..d).map(|_| {
            let n = r.random_range(1..4);
            random_vec(&mut r, n)
        }).collect();
        let t = outer_product(&vs).unwrap();
        let mut chain = vec![1.0];
        for v in &vs {
            chain = kron(v, &chain);
        }
        assert_eq!(t.vectorize(), chain, "d = {d}");
    }
    let e = outer_product(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(e.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
    assert!(outer_product(&[]).is_err());
}

#[test]
fn vandermonde_examples() {
    assert_eq!(vandermonde(3.7, 0), vec![1.0]);
    assert_eq!(vandermonde(2.0, 3), vec![1.0, 2.0, 4.0, 8.0]);
    assert_eq!(vandermonde(1.0, 5), vec![1.0; 6]);
}

#[test]
fn feature_map_is_outer_product_of_vandermonde_vectors() {
    let mut r = rng(5);
    let deg = DegreeVector::new(vec![2, 1, 3]).unwrap();
    let x = random_vec(&mut r, 3);
    let t = feature_map(&x, &deg).unwrap();
    let o = outer_product(&deg.vandermonde_vectors(&x).unwrap()).unwrap();
    assert_eq!(t, o);
    let ones = feature_map(&[1.0, 1.0, 1.0], &deg).unwrap();
    assert!(ones.as_slice().iter().all(|&v| v == 1.0));
}

#[test]
fn poly_eval_dense_is_inner_product_with_feature_map() {
    let mut r = rng(6);
    let deg = DegreeVector::new(vec![2, 3, 1]).unwrap();
    for _ in 0..20 {
        let a = random_tensor(&mut r, &deg.dims());
        let x = random_vec(&mut r, 3);
        let direct = poly_eval_dense(&a, &x).unwrap();
        let ip = inner_product(&feature_map(&x, &deg).unwrap(), &a).unwrap();
        assert!(rel_err(direct, ip) < 1e-12);
    }
    let a = random_tensor(&mut r, &deg.dims());
    assert_eq!(poly_eval_dense(&a, &[0.0; 3]).unwrap(), a.get(&[0, 0, 0]).unwrap());
    assert!(poly_eval_dense(&a, &[0.0; 2]).is_err());
}

#[test]
fn example_two_evaluates_to_minus_four() {
    let f: SparsePolynomial = "4*x1 + 1*x1^3 - 2*x1 x2 x3 - 7*x2 x3^2".parse().unwrap();
    let a = poly_to_tensor(&f, &DegreeVector::new(vec![3, 1, 2]).unwrap()).unwrap();
    assert_eq!(poly_eval_dense(&a, &[1.0, 1.0, 1.0]).unwrap(), -4.0);
    let x = [0.3, -1.2, 0.7];
    assert!(rel_err(poly_eval_dense(&a, &x).unwrap(), f.eval(&x).unwrap()) < 1e-14);
}

#[test]
fn kron_orders_second_factor_fastest() {
    assert_eq!(kron(&[1.0, 2.0], &[1.0, 10.0, 100.0]), vec![1.0, 10.0, 100.0, 2.0, 20.0, 200.0]);
    let a = [0.5, -1.0];
    assert!(rel_err_slice(&kron(&a, &[1.0]), &a) == 0.0);
}
