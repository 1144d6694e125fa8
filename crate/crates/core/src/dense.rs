//! Explicit d-way arrays.
//!
//! Entries are stored with the first index varying fastest: the multi-index
//! `(i_1, ..., i_d)` (0-based) lives at `i_1 + i_2*n_1 + i_3*n_1*n_2 + ...`.
//! Every matricization and Kronecker ordering elsewhere in the crate follows
//! this convention. Dense tensors are only meant for small problems and test
//! oracles, so construction is capped at [`MAX_DENSE_ENTRIES`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest number of entries a [`DenseTensor`] may hold.
pub const MAX_DENSE_ENTRIES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::Empty("tensor dimensions"));
    }
    if dims.contains(&0) {
        return Err(Error::DimensionMismatch(format!(
            "tensor dimensions must be positive, got {dims:?}"
        )));
    }
    let mut len = 1usize;
    for &n in dims {
        len = len.saturating_mul(n);
        if len > MAX_DENSE_ENTRIES {
            return Err(Error::TooLarge {
                entries: len,
                limit: MAX_DENSE_ENTRIES,
            });
        }
    }
    Ok(len)
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = checked_len(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor from entries already in linearized order.
    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = checked_len(dims)?;
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for dimensions {dims:?} ({len} expected)",
                data.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for slot in t.data.iter_mut() {
            *slot = f(&idx);
            increment(&mut idx, dims);
        }
        Ok(t)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Linear position of a 0-based multi-index.
    pub fn linear_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "multi-index of length {} for an order-{} tensor",
                idx.len(),
                self.dims.len()
            )));
        }
        let mut lin = 0;
        let mut stride = 1;
        for (k, (&i, &n)) in idx.iter().zip(&self.dims).enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange(format!(
                    "index {i} in mode {k} of size {n}"
                )));
            }
            lin += i * stride;
            stride *= n;
        }
        Ok(lin)
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    pub fn multi_index(&self, mut lin: usize) -> Result<Vec<usize>> {
        if lin >= self.data.len() {
            return Err(Error::IndexOutOfRange(format!(
                "linear index {lin} for {} entries",
                self.data.len()
            )));
        }
        Ok(self
            .dims
            .iter()
            .map(|&n| {
                let i = lin % n;
                lin /= n;
                i
            })
            .collect())
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.linear_index(idx)?])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        let lin = self.linear_index(idx)?;
        self.data[lin] = value;
        Ok(())
    }

    /// `vec(A)`: the entries in linearized order.
    pub fn vectorize(&self) -> Vec<f64> {
        self.data.clone()
    }

    /// The k-mode product `A ×_k U` with `U` of shape `n' × n_k` (k is 0-based).
    pub fn mode_product(&self, u: &DMatrix<f64>, k: usize) -> Result<Self> {
        if k >= self.dims.len() {
            return Err(Error::IndexOutOfRange(format!(
                "mode {k} of an order-{} tensor",
                self.dims.len()
            )));
        }
        let nk = self.dims[k];
        if u.ncols() != nk {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, mode {k} has size {nk}",
                u.ncols()
            )));
        }
        let mut dims = self.dims.clone();
        dims[k] = u.nrows();
        let mut out = Self::zeros(&dims)?;

        // View the tensor as (inner, n_k, outer) with inner = prod of dims before k.
        let inner: usize = self.dims[..k].iter().product();
        let outer: usize = self.dims[k + 1..].iter().product();
        let rows = u.nrows();
        for o in 0..outer {
            for j in 0..rows {
                let dst = &mut out.data[(o * rows + j) * inner..(o * rows + j + 1) * inner];
                for i in 0..nk {
                    let w = u[(j, i)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &self.data[(o * nk + i) * inner..(o * nk + i + 1) * inner];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Contracts every mode with a vector: `A ×_1 v_1ᵀ ×_2 ... ×_d v_dᵀ`.
    pub fn contract_all(&self, vectors: &[Vec<f64>]) -> Result<f64> {
        if vectors.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} vectors for an order-{} tensor",
                vectors.len(),
                self.dims.len()
            )));
        }
        // Contract the last mode first so the remaining data stays contiguous.
        let mut cur = self.data.clone();
        for (k, v) in vectors.iter().enumerate().rev() {
            let nk = self.dims[k];
            if v.len() != nk {
                return Err(Error::DimensionMismatch(format!(
                    "vector {k} has length {}, mode size is {nk}",
                    v.len()
                )));
            }
            let inner = cur.len() / nk;
            let mut next = vec![0.0; inner];
            for (i, &w) in v.iter().enumerate() {
                for (n, c) in next.iter_mut().zip(&cur[i * inner..(i + 1) * inner]) {
                    *n += w * c;
                }
            }
            cur = next;
        }
        Ok(cur[0])
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }
}

fn increment(idx: &mut [usize], dims: &[usize]) {
    for (i, &n) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < n {
            return;
        }
        *i = 0;
    }
}

/// `⟨A, B⟩`, the sum of entrywise products.
pub fn inner_product(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch(format!(
            "inner product of {:?} and {:?}",
            a.dims, b.dims
        )));
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

pub fn frobenius_norm(a: &DenseTensor) -> f64 {
    a.data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `x¹ ∘ x² ∘ ... ∘ x^d`.
pub fn outer_product(vectors: &[Vec<f64>]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(Error::Empty("outer product needs at least one vector"));
    }
    let dims: Vec<usize> = vectors.iter().map(Vec::len).collect();
    let len = checked_len(&dims)?;
    // First index fastest: grow the array by prepending nothing, appending modes.
    let mut data = Vec::with_capacity(len);
    data.extend_from_slice(&vectors[0]);
    for v in &vectors[1..] {
        let prev = std::mem::take(&mut data);
        data.reserve(prev.len() * v.len());
        for &w in v {
            data.extend(prev.iter().map(|p| p * w));
        }
    }
    DenseTensor::from_vec(&dims, data)
}

/// Kronecker product of two vectors, `a ⊗ b` (index of `b` fastest).
pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// `(1, x, x², ..., x^degree)`.
pub fn vandermonde(x: f64, degree: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(degree + 1);
    let mut p = 1.0;
    for _ in 0..=degree {
        v.push(p);
        p *= x;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_tensor() -> DenseTensor {
        DenseTensor::from_fn(&[4, 3, 2], |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64).unwrap()
    }

    #[test]
    fn multi_and_linear_index_agree() {
        let t = fig1_tensor();
        for lin in 0..t.len() {
            let idx = t.multi_index(lin).unwrap();
            assert_eq!(t.linear_index(&idx).unwrap(), lin);
            assert_eq!(t.get(&idx).unwrap(), t.as_slice()[lin]);
        }
        assert!(t.linear_index(&[4, 0, 0]).is_err());
        assert!(t.linear_index(&[0, 0]).is_err());
        assert!(t.multi_index(24).is_err());
    }

    #[test]
    fn guard_rejects_huge_tensor() {
        let err = DenseTensor::zeros(&[10; 8]).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
        assert!(DenseTensor::zeros(&[]).is_err());
        assert!(DenseTensor::zeros(&[3, 0]).is_err());
    }

    #[test]
    fn mode_product_identity_is_noop() {
        let t = fig1_tensor();
        for k in 0..3 {
            let id = DMatrix::identity(t.dims()[k], t.dims()[k]);
            assert_eq!(t.mode_product(&id, k).unwrap(), t);
        }
    }

    #[test]
    fn mode_product_with_ones_row_sums_mode() {
        let t = fig1_tensor();
        let ones = DMatrix::from_element(1, 3, 1.0);
        let s = t.mode_product(&ones, 1).unwrap();
        assert_eq!(s.dims(), &[4, 1, 2]);
        for i in 0..4 {
            for l in 0..2 {
                let expect: f64 = (0..3).map(|j| t.get(&[i, j, l]).unwrap()).sum();
                assert_eq!(s.get(&[i, 0, l]).unwrap(), expect);
            }
        }
    }

    #[test]
    fn mode_product_rejects_bad_shape() {
        let t = fig1_tensor();
        assert!(t.mode_product(&DMatrix::zeros(2, 2), 0).is_err());
        assert!(t.mode_product(&DMatrix::zeros(2, 2), 3).is_err());
    }

    #[test]
    fn vectorize_is_column_order() {
        // [[a, c], [b, d]] with a=1, b=2, c=3, d=4
        let t = DenseTensor::from_fn(&[2, 2], |i| [[1.0, 3.0], [2.0, 4.0]][i[0]][i[1]]).unwrap();
        assert_eq!(t.vectorize(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn outer_product_basics() {
        let v = vec![1.5, -2.0, 0.25];
        let t = outer_product(std::slice::from_ref(&v)).unwrap();
        assert_eq!(t.dims(), &[3]);
        assert_eq!(t.vectorize(), v);

        let t = outer_product(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(t.get(&[0, 1]).unwrap(), 1.0);
        assert_eq!(t.as_slice().iter().filter(|&&x| x != 0.0).count(), 1);

        assert!(outer_product(&[]).is_err());
    }

    #[test]
    fn norm_and_inner_product() {
        let z = DenseTensor::zeros(&[2, 3]).unwrap();
        assert_eq!(inner_product(&z, &z).unwrap(), 0.0);
        assert_eq!(frobenius_norm(&z), 0.0);
        let mut one = DenseTensor::zeros(&[2, 2]).unwrap();
        one.set(&[1, 0], 3.0).unwrap();
        assert_eq!(frobenius_norm(&one), 3.0);
        assert!(inner_product(&z, &one).is_err());
    }

    #[test]
    fn vandermonde_vectors() {
        assert_eq!(vandermonde(7.3, 0), vec![1.0]);
        assert_eq!(vandermonde(2.0, 3), vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(vandermonde(1.0, 5), vec![1.0; 6]);
    }

    #[test]
    fn contract_all_matches_mode_products() {
        let t = fig1_tensor();
        let vs = vec![vec![1.0, -1.0, 0.5, 2.0], vec![0.3, 0.2, 0.1], vec![-1.0, 4.0]];
        let mut cur = t.clone();
        for (k, v) in vs.iter().enumerate() {
            let row = DMatrix::from_row_slice(1, v.len(), v);
            cur = cur.mode_product(&row, k).unwrap();
        }
        let direct = t.contract_all(&vs).unwrap();
        assert!((cur.as_slice()[0] - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }
}
