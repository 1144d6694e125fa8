//! Tensors in tensor-train (TT) format.
//!
//! A `d`-way tensor is stored as a chain of 3-way cores `G_k` of shape
//! `r_{k-1} × n_k × r_k` with `r_0 = r_d = 1`, and each entry is the matrix
//! product `G_1(i_1) G_2(i_2) ... G_d(i_d)` of core slices. All indices in this
//! module are 0-based.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::linalg::{identity_residual, qr_positive};
use crate::poly::{DegreeVector, SparsePolynomial};

/// Tolerance used by the orthogonality predicates.
pub const ORTHO_TOL: f64 = 1e-10;

/// One TT-core, entries linearized with `r_left` fastest, then `n`, then `r_right`.
#[derive(Debug, Clone, PartialEq)]
pub struct TTCore {
    r_left: usize,
    n: usize,
    r_right: usize,
    data: Vec<f64>,
}

impl TTCore {
    pub fn new(r_left: usize, n: usize, r_right: usize, data: Vec<f64>) -> Result<Self> {
        if r_left == 0 || n == 0 || r_right == 0 {
            return Err(Error::DimensionMismatch(format!(
                "core shape {r_left}x{n}x{r_right} must be positive"
            )));
        }
        if data.len() != r_left * n * r_right {
            return Err(Error::DimensionMismatch(format!(
                "core {r_left}x{n}x{r_right} given {} entries",
                data.len()
            )));
        }
        Ok(Self {
            r_left,
            n,
            r_right,
            data,
        })
    }

    pub fn zeros(r_left: usize, n: usize, r_right: usize) -> Self {
        Self {
            r_left,
            n,
            r_right,
            data: vec![0.0; r_left * n * r_right],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.r_left, self.n, self.r_right)
    }

    pub fn r_left(&self) -> usize {
        self.r_left
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_right(&self) -> usize {
        self.r_right
    }

    /// `vec(G)`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[a + self.r_left * (i + self.n * b)]
    }

    /// The `r_left × r_right` matrix `G(i)`.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.r_left, self.r_right, |a, b| self.get(a, i, b))
    }

    /// Reshape to `(r_left·n) × r_right`.
    pub fn left_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.r_left * self.n, self.r_right, &self.data)
    }

    /// Reshape to `r_left × (n·r_right)`.
    pub fn right_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.r_left, self.n * self.r_right, &self.data)
    }

    /// `Σ_i v_i G(i)`, an `r_left × r_right` matrix.
    pub fn contract_mode(&self, v: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.r_left, self.r_right);
        let rl = self.r_left;
        for b in 0..self.r_right {
            let col = out.column_mut(b);
            let col = col.data.into_slice_mut();
            for (i, &w) in v.iter().enumerate() {
                let src = &self.data[rl * (i + self.n * b)..rl * (i + self.n * b) + rl];
                for (c, s) in col.iter_mut().zip(src) {
                    *c += w * s;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// `Σ_i G(i)ᵀ G(i) = I` within [`ORTHO_TOL`].
    pub fn is_left_orthogonal(&self) -> bool {
        self.left_gram_residual() <= ORTHO_TOL
    }

    /// `Σ_i G(i) G(i)ᵀ = I` within [`ORTHO_TOL`].
    pub fn is_right_orthogonal(&self) -> bool {
        self.right_gram_residual() <= ORTHO_TOL
    }

    /// `max |Σ_i G(i)ᵀ G(i) - I|`.
    pub fn left_gram_residual(&self) -> f64 {
        let u = self.left_unfolding();
        identity_residual(&(u.transpose() * u))
    }

    /// `max |Σ_i G(i) G(i)ᵀ - I|`.
    pub fn right_gram_residual(&self) -> f64 {
        let m = self.right_unfolding();
        identity_residual(&(&m * m.transpose()))
    }

    fn from_left_unfolding(r_left: usize, n: usize, u: &DMatrix<f64>) -> Self {
        debug_assert_eq!(u.nrows(), r_left * n);
        Self {
            r_left,
            n,
            r_right: u.ncols(),
            data: u.as_slice().to_vec(),
        }
    }

    fn from_right_unfolding(n: usize, r_right: usize, m: &DMatrix<f64>) -> Self {
        debug_assert_eq!(m.ncols(), n * r_right);
        Self {
            r_left: m.nrows(),
            n,
            r_right,
            data: m.as_slice().to_vec(),
        }
    }
}

/// Interior TT-ranks `(r_1, ..., r_{d-1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.contains(&0) {
            return Err(Error::InvalidConfig("TT-ranks must be positive".into()));
        }
        Ok(Self(ranks))
    }

    /// The same cap for all `d - 1` interior ranks.
    pub fn uniform(r: usize, d: usize) -> Result<Self> {
        Self::new(vec![r; d.saturating_sub(1)])
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    /// Clips to `r_k <= min(∏_{i<=k} n_i, ∏_{i>k} n_i)` and to what the
    /// neighbouring ranks can support (`r_k <= r_{k-1} n_k`, `r_{k-1} <= n_k r_k`),
    /// so that every left and right unfolding is at least as tall as it is wide.
    pub fn clipped(&self, dims: &[usize]) -> Result<Self> {
        let d = dims.len();
        if self.0.len() + 1 != d {
            return Err(Error::DimensionMismatch(format!(
                "{} ranks for {d} modes",
                self.0.len()
            )));
        }
        let mut r = self.0.clone();
        // forward: r_k <= r_{k-1} * n_k  (this also enforces the left product bound)
        let mut prev = 1usize;
        for k in 0..d - 1 {
            r[k] = r[k].min(prev.saturating_mul(dims[k]));
            prev = r[k];
        }
        // backward: r_{k} <= n_{k+1} * r_{k+1}
        let mut next = 1usize;
        for k in (0..d - 1).rev() {
            r[k] = r[k].min(dims[k + 1].saturating_mul(next));
            next = r[k];
        }
        if r != self.0 {
            log::info!("TT-ranks {:?} clipped to {:?} for mode sizes {:?}", self.0, r, dims);
        }
        Ok(Self(r))
    }
}

/// A tensor in TT format.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<TTCore>,
}

impl TensorTrain {
    pub fn new(cores: Vec<TTCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Empty("tensor train needs at least one core"));
        }
        if cores[0].r_left != 1 || cores[cores.len() - 1].r_right != 1 {
            return Err(Error::DimensionMismatch(
                "boundary TT-ranks must equal 1".into(),
            ));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].r_right != w[1].r_left {
                return Err(Error::DimensionMismatch(format!(
                    "core {k} has right rank {} but core {} has left rank {}",
                    w[0].r_right,
                    k + 1,
                    w[1].r_left
                )));
            }
        }
        Ok(Self { cores })
    }

    /// All-zero train with the given mode sizes and (unclipped) interior ranks.
    pub fn zeros(dims: &[usize], ranks: &RankVector) -> Result<Self> {
        let r = full_ranks(dims, ranks)?;
        Self::new(
            dims.iter()
                .enumerate()
                .map(|(k, &n)| TTCore::zeros(r[k], n, r[k + 1]))
                .collect(),
        )
    }

    /// Rank-1 train `v_1 ∘ ... ∘ v_d`.
    pub fn rank_one(vectors: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            vectors
                .iter()
                .map(|v| TTCore::new(1, v.len(), 1, v.clone()))
                .collect::<Result<_>>()?,
        )
    }

    /// Exact TT of a sparse polynomial's coefficient tensor: each monomial is a
    /// rank-1 train of unit vectors and the terms are summed block-diagonally,
    /// so the ranks equal the number of terms.
    pub fn from_polynomial(f: &SparsePolynomial, degree: &DegreeVector) -> Result<Self> {
        let dims = degree.dims();
        let d = dims.len();
        let terms = f.terms();
        if terms.is_empty() {
            return Self::zeros(&dims, &RankVector::uniform(1, d)?);
        }
        for (exps, _) in terms {
            if exps.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "monomial {exps:?} for a degree vector of length {d}"
                )));
            }
            for (var, (&e, &deg)) in exps.iter().zip(degree.degrees()).enumerate() {
                if e > deg {
                    return Err(Error::DegreeExceeded {
                        var: var + 1,
                        exponent: e,
                        degree: deg,
                    });
                }
            }
        }
        let t = terms.len();
        if d == 1 {
            let mut core = TTCore::zeros(1, dims[0], 1);
            for (exps, c) in terms {
                core.data[exps[0]] += c;
            }
            return Self::new(vec![core]);
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let rl = if k == 0 { 1 } else { t };
            let rr = if k == d - 1 { 1 } else { t };
            let mut core = TTCore::zeros(rl, dims[k], rr);
            for (j, (exps, c)) in terms.iter().enumerate() {
                let a = if k == 0 { 0 } else { j };
                let b = if k == d - 1 { 0 } else { j };
                let w = if k == 0 { *c } else { 1.0 };
                core.data[a + rl * (exps[k] + dims[k] * b)] = w;
            }
            cores.push(core);
        }
        Self::new(cores)
    }

    /// Random train: standard-normal cores, right-orthogonalized, then each
    /// core rescaled to unit Frobenius norm. Ranks are clipped first.
    pub fn random(dims: &[usize], ranks: &RankVector, seed: u64) -> Result<Self> {
        let mut tt = Self::random_right_orthogonal(dims, ranks, seed)?;
        for core in &mut tt.cores {
            let nrm = core.frobenius_norm();
            if nrm > 0.0 {
                core.scale(1.0 / nrm);
            }
        }
        Ok(tt)
    }

    /// [`random`](Self::random) without the final per-core rescale: cores
    /// `1..d` are right-orthogonal.
    pub fn random_right_orthogonal(dims: &[usize], ranks: &RankVector, seed: u64) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Empty("mode sizes"));
        }
        let ranks = ranks.clipped(dims)?;
        let r = full_ranks(dims, &ranks)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cores = dims
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let len = r[k] * n * r[k + 1];
                let data = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
                TTCore::new(r[k], n, r[k + 1], data)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut tt = Self::new(cores)?;
        for k in (1..tt.order()).rev() {
            tt.shift_orthogonal_right(k)?;
        }
        Ok(tt)
    }

    pub fn cores(&self) -> &[TTCore] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &TTCore {
        &self.cores[k]
    }

    /// Replaces the entries of core `k`, keeping its shape.
    pub fn set_core_data(&mut self, k: usize, data: Vec<f64>) -> Result<()> {
        let core = self
            .cores
            .get_mut(k)
            .ok_or_else(|| Error::IndexOutOfRange(format!("core {k}")))?;
        if data.len() != core.data.len() {
            return Err(Error::DimensionMismatch(format!(
                "core {k} holds {} entries, {} supplied",
                core.data.len(),
                data.len()
            )));
        }
        core.data = data;
        Ok(())
    }

    pub fn into_cores(self) -> Vec<TTCore> {
        self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    /// Interior ranks `(r_1, ..., r_{d-1})`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1]
            .iter()
            .map(|c| c.r_right)
            .collect()
    }

    /// Total number of stored core entries.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// `G_1(i_1) ... G_d(i_d)`.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.cores.len() {
            return Err(Error::DimensionMismatch(format!(
                "multi-index of length {} for {} cores",
                idx.len(),
                self.cores.len()
            )));
        }
        let mut row = vec![1.0];
        for (k, (core, &i)) in self.cores.iter().zip(idx).enumerate() {
            if i >= core.n {
                return Err(Error::IndexOutOfRange(format!(
                    "index {i} in mode {k} of size {}",
                    core.n
                )));
            }
            let mut next = vec![0.0; core.r_right];
            for (b, nb) in next.iter_mut().enumerate() {
                *nb = row
                    .iter()
                    .enumerate()
                    .map(|(a, &ra)| ra * core.get(a, i, b))
                    .sum();
            }
            row = next;
        }
        Ok(row[0])
    }

    /// Expands to a dense tensor (subject to the dense size limit).
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let dims = self.dims();
        // Build left partial products: a (prod n_<=k) × r_k matrix, rows in
        // first-index-fastest order.
        DenseTensor::zeros(&dims)?;
        let first = &self.cores[0];
        let mut acc = first.left_unfolding();
        for core in &self.cores[1..] {
            let rows = acc.nrows();
            let mut next = DMatrix::zeros(rows * core.n, core.r_right);
            for i in 0..core.n {
                let prod = &acc * core.slice(i);
                next.rows_mut(i * rows, rows).copy_from(&prod);
            }
            acc = next;
        }
        DenseTensor::from_vec(&dims, acc.as_slice().to_vec())
    }

    /// Fast contraction with one vector per mode: forms `V_k = Σ_i v_i G_k(i)`
    /// for every core (in parallel for larger trains), then multiplies the
    /// `V_k` left to right.
    pub fn contract(&self, vectors: &[Vec<f64>]) -> Result<f64> {
        if vectors.len() != self.cores.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} vectors for {} cores",
                vectors.len(),
                self.cores.len()
            )));
        }
        for (k, (v, core)) in vectors.iter().zip(&self.cores).enumerate() {
            if v.len() != core.n {
                return Err(Error::DimensionMismatch(format!(
                    "vector {k} has length {}, mode size is {}",
                    v.len(),
                    core.n
                )));
            }
        }
        let mats: Vec<DMatrix<f64>> = if self.storage() >= 1 << 14 {
            self.cores
                .par_iter()
                .zip(vectors.par_iter())
                .map(|(c, v)| c.contract_mode(v))
                .collect()
        } else {
            self.cores
                .iter()
                .zip(vectors)
                .map(|(c, v)| c.contract_mode(v))
                .collect()
        };
        let mut f = mats[0].clone();
        for m in &mats[1..] {
            f *= m;
        }
        Ok(f[(0, 0)])
    }

    /// `⟨T(x), A⟩` for the polynomial with this coefficient train.
    pub fn eval_polynomial(&self, x: &[f64], degree: &DegreeVector) -> Result<f64> {
        self.contract(&degree.vandermonde_vectors(x)?)
    }

    /// Frobenius norm, by left-orthogonalizing a copy of all but the last core.
    pub fn norm(&self) -> f64 {
        let mut t = self.clone();
        for k in 0..t.order() - 1 {
            t.shift_orthogonal_left(k)
                .expect("shift index is in range");
        }
        t.cores[t.order() - 1].frobenius_norm()
    }

    /// QR of the left unfolding of core `k`; `Q` replaces core `k` and `R` is
    /// absorbed into core `k + 1`. Requires `k + 1 < d`.
    pub fn shift_orthogonal_left(&mut self, k: usize) -> Result<()> {
        if k + 1 >= self.cores.len() {
            return Err(Error::IndexOutOfRange(format!(
                "left shift at core {k} of {}",
                self.cores.len()
            )));
        }
        let core = &self.cores[k];
        let (rl, n) = (core.r_left, core.n);
        let (q, r) = qr_positive(core.left_unfolding());
        self.cores[k] = TTCore::from_left_unfolding(rl, n, &q);
        let next = &self.cores[k + 1];
        let merged = r * next.right_unfolding();
        self.cores[k + 1] = TTCore::from_right_unfolding(next.n, next.r_right, &merged);
        Ok(())
    }

    /// Mirror of [`shift_orthogonal_left`](Self::shift_orthogonal_left): core
    /// `k` becomes right-orthogonal and the triangular factor moves into core
    /// `k - 1`. Requires `k >= 1`.
    pub fn shift_orthogonal_right(&mut self, k: usize) -> Result<()> {
        if k == 0 || k >= self.cores.len() {
            return Err(Error::IndexOutOfRange(format!(
                "right shift at core {k} of {}",
                self.cores.len()
            )));
        }
        let core = &self.cores[k];
        let (n, rr) = (core.n, core.r_right);
        let (q, r) = qr_positive(core.right_unfolding().transpose());
        self.cores[k] = TTCore::from_right_unfolding(n, rr, &q.transpose());
        let prev = &self.cores[k - 1];
        let merged = prev.left_unfolding() * r.transpose();
        self.cores[k - 1] = TTCore::from_left_unfolding(prev.r_left, prev.n, &merged);
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.cores[0].scale(factor);
    }
}

/// `(1, r_1, ..., r_{d-1}, 1)`.
fn full_ranks(dims: &[usize], ranks: &RankVector) -> Result<Vec<usize>> {
    if dims.is_empty() {
        return Err(Error::Empty("mode sizes"));
    }
    if ranks.0.len() + 1 != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranks for {} modes",
            ranks.0.len(),
            dims.len()
        )));
    }
    let mut r = Vec::with_capacity(dims.len() + 1);
    r.push(1);
    r.extend_from_slice(&ranks.0);
    r.push(1);
    Ok(r)
}
