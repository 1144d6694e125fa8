//! Per-sample partial contractions and the core-local design matrix.
//!
//! For a train with cores `G_1..G_d` and a sample `x`, the score
//! `⟨T(x), A⟩` is linear in any single core:
//!
//! ```text
//! score = (q_k(x)ᵀ ⊗ v(x_k)ᵀ ⊗ p_k(x)) vec(G_k)
//! ```
//!
//! where `p_k` is the product of the contracted cores left of `k` and `q_k`
//! the product of those right of `k`. [`SweepState`] keeps both sets of
//! partial products for all samples and updates them incrementally as the
//! sweep moves.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::DegreeVector;
use crate::tt::{TTCore, TensorTrain};

use super::LabeledData;

/// Samples per rayon task when walking over the data set.
const SAMPLE_CHUNK: usize = 256;

/// Vandermonde vectors of every sample and every feature, precomputed once.
#[derive(Debug, Clone)]
pub struct VandermondeTable {
    n_samples: usize,
    offsets: Vec<usize>,
    dims: Vec<usize>,
    stride: usize,
    data: Vec<f64>,
}

impl VandermondeTable {
    pub fn new(data: &LabeledData, degree: &DegreeVector) -> Result<Self> {
        if data.dim() != degree.len() {
            return Err(Error::DimensionMismatch(format!(
                "data has {} features, degree vector has {} entries",
                data.dim(),
                degree.len()
            )));
        }
        let dims = degree.dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut stride = 0;
        for &n in &dims {
            offsets.push(stride);
            stride += n;
        }
        let mut table = vec![0.0; stride * data.len()];
        table
            .par_chunks_mut(stride.max(1))
            .enumerate()
            .for_each(|(j, row)| {
                let x = data.sample(j);
                for (k, &n) in dims.iter().enumerate() {
                    let mut p = 1.0;
                    for slot in &mut row[offsets[k]..offsets[k] + n] {
                        *slot = p;
                        p *= x[k];
                    }
                }
            });
        Ok(Self {
            n_samples: data.len(),
            offsets,
            dims,
            stride,
            data: table,
        })
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// `v(x_k)` of sample `j`.
    pub fn get(&self, j: usize, k: usize) -> &[f64] {
        let start = j * self.stride + self.offsets[k];
        &self.data[start..start + self.dims[k]]
    }
}

/// Sweep direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

/// Cached `p_k(x^{(j)})` rows and `q_k(x^{(j)})` columns for the current core.
///
/// `left[k]` holds `p_k` for every sample (sample-major, `r_{k-1}` values
/// each) and is valid for `k <= position`; `right[k]` holds `q_k`
/// (`r_k` values each) and is valid for `k >= position`.
#[derive(Debug, Clone)]
pub struct SweepState {
    position: usize,
    direction: Direction,
    n_samples: usize,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

impl SweepState {
    /// Caches for position 0: `p_1 = 1` and every `q_k` computed from the right.
    pub fn new(tt: &TensorTrain, table: &VandermondeTable) -> Result<Self> {
        check_table(tt, table)?;
        let d = tt.order();
        let n = table.len();
        let mut left = vec![Vec::new(); d];
        let mut right = vec![Vec::new(); d];
        left[0] = vec![1.0; n];
        right[d - 1] = vec![1.0; n];
        for k in (1..d).rev() {
            right[k - 1] = contract_right(tt.core(k), &right[k], table, k);
        }
        Ok(Self {
            position: 0,
            direction: Direction::LeftToRight,
            n_samples: n,
            left,
            right,
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }

    /// `p_k` of sample `j` at the current position.
    pub fn p_row(&self, j: usize) -> &[f64] {
        let p = &self.left[self.position];
        let r = p.len() / self.n_samples;
        &p[j * r..(j + 1) * r]
    }

    /// `q_k` of sample `j` at the current position.
    pub fn q_col(&self, j: usize) -> &[f64] {
        let q = &self.right[self.position];
        let r = q.len() / self.n_samples;
        &q[j * r..(j + 1) * r]
    }

    /// Moves one core in `direction` using the (already updated) core at the
    /// current position: `p_{k+1} = G_k ×_1 p_k ×_2 v(x_k)ᵀ` going right,
    /// `q_{k-1} = G_k ×_2 v(x_k)ᵀ ×_3 q_kᵀ` going left.
    pub fn advance(
        &mut self,
        tt: &TensorTrain,
        table: &VandermondeTable,
        direction: Direction,
    ) -> Result<()> {
        check_table(tt, table)?;
        let k = self.position;
        match direction {
            Direction::LeftToRight => {
                if k + 1 >= tt.order() {
                    return Err(Error::IndexOutOfRange(format!(
                        "cannot advance right past core {k}"
                    )));
                }
                self.left[k + 1] = contract_left(tt.core(k), &self.left[k], table, k);
                self.position = k + 1;
            }
            Direction::RightToLeft => {
                if k == 0 {
                    return Err(Error::IndexOutOfRange(
                        "cannot advance left past core 0".into(),
                    ));
                }
                self.right[k - 1] = contract_right(tt.core(k), &self.right[k], table, k);
                self.position = k - 1;
            }
        }
        self.direction = direction;
        Ok(())
    }

    /// Row-major `N × r_{k-1}` copy of the current `p_k` rows.
    pub fn p_rows(&self) -> &[f64] {
        &self.left[self.position]
    }

    /// Row-major `N × r_k` copy of the current `q_k` columns.
    pub fn q_cols(&self) -> &[f64] {
        &self.right[self.position]
    }
}

fn check_table(tt: &TensorTrain, table: &VandermondeTable) -> Result<()> {
    if tt.order() != table.order() || tt.dims() != table.dims {
        return Err(Error::DimensionMismatch(format!(
            "train mode sizes {:?} do not match feature map {:?}",
            tt.dims(),
            table.dims
        )));
    }
    Ok(())
}

/// `p_{k+1}` for all samples.
fn contract_left(core: &TTCore, p: &[f64], table: &VandermondeTable, k: usize) -> Vec<f64> {
    let (rl, n, rr) = core.shape();
    let g = core.as_slice();
    let mut out = vec![0.0; table.len() * rr];
    out.par_chunks_mut(rr * SAMPLE_CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (o, dst) in chunk.chunks_mut(rr).enumerate() {
                let j = c * SAMPLE_CHUNK + o;
                let pj = &p[j * rl..(j + 1) * rl];
                let v = table.get(j, k);
                for (b, d) in dst.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (i, &vi) in v.iter().enumerate() {
                        let col = &g[rl * (i + n * b)..rl * (i + n * b) + rl];
                        let dot: f64 = pj.iter().zip(col).map(|(x, y)| x * y).sum();
                        acc += vi * dot;
                    }
                    *d = acc;
                }
            }
        });
    out
}

/// `q_{k-1}` for all samples.
fn contract_right(core: &TTCore, q: &[f64], table: &VandermondeTable, k: usize) -> Vec<f64> {
    let (rl, n, rr) = core.shape();
    let g = core.as_slice();
    let mut out = vec![0.0; table.len() * rl];
    out.par_chunks_mut(rl * SAMPLE_CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (o, dst) in chunk.chunks_mut(rl).enumerate() {
                let j = c * SAMPLE_CHUNK + o;
                let qj = &q[j * rr..(j + 1) * rr];
                let v = table.get(j, k);
                dst.iter_mut().for_each(|x| *x = 0.0);
                for (b, &qb) in qj.iter().enumerate() {
                    for (i, &vi) in v.iter().enumerate() {
                        let w = qb * vi;
                        let col = &g[rl * (i + n * b)..rl * (i + n * b) + rl];
                        for (d, &gv) in dst.iter_mut().zip(col) {
                            *d += w * gv;
                        }
                    }
                }
            }
        });
    out
}

/// `qᵀ ⊗ vᵀ ⊗ p`, ordered like a core's linearization (`p` index fastest),
/// so that `row · vec(G_k)` is the score.
pub fn design_row(p: &[f64], v: &[f64], q: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(p.len() * v.len() * q.len());
    for &qb in q {
        for &vi in v {
            let w = qb * vi;
            row.extend(p.iter().map(|&pa| w * pa));
        }
    }
    row
}

/// The transpose of the core-local design matrix `C_k`: an `m × N` matrix
/// whose column `j` is the [`design_row`] of sample `j`, with
/// `m = r_{k-1} n_k r_k`.
pub fn assemble_ck_transposed(
    table: &VandermondeTable,
    state: &SweepState,
    tt: &TensorTrain,
    k: usize,
) -> Result<DMatrix<f64>> {
    check_table(tt, table)?;
    if state.position() != k {
        return Err(Error::InvalidConfig(format!(
            "sweep caches are positioned at core {}, not {k}",
            state.position()
        )));
    }
    if state.len() != table.len() {
        return Err(Error::DimensionMismatch(format!(
            "caches hold {} samples, feature table {}",
            state.len(),
            table.len()
        )));
    }
    let (rl, n, rr) = tt.core(k).shape();
    let m = rl * n * rr;
    let nsamp = table.len();
    let mut data = vec![0.0; m * nsamp];
    data.par_chunks_mut(m * SAMPLE_CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (o, col) in chunk.chunks_mut(m).enumerate() {
                let j = c * SAMPLE_CHUNK + o;
                let (p, v, q) = (state.p_row(j), table.get(j, k), state.q_col(j));
                let mut idx = 0;
                for &qb in q {
                    for &vi in v {
                        let w = qb * vi;
                        for &pa in p {
                            col[idx] = w * pa;
                            idx += 1;
                        }
                    }
                }
            }
        });
    Ok(DMatrix::from_vec(m, nsamp, data))
}

/// `C_k` itself (`N × m`).
pub fn assemble_ck(
    table: &VandermondeTable,
    state: &SweepState,
    tt: &TensorTrain,
    k: usize,
) -> Result<DMatrix<f64>> {
    Ok(assemble_ck_transposed(table, state, tt, k)?.transpose())
}

/// From-scratch `p_k` of one sample (slow path, for checks).
pub fn p_from_scratch(tt: &TensorTrain, x_vandermonde: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut row = DMatrix::from_element(1, 1, 1.0);
    for (core, v) in tt.cores()[..k].iter().zip(x_vandermonde) {
        row *= core.contract_mode(v);
    }
    row.as_slice().to_vec()
}

/// From-scratch `q_k` of one sample (slow path, for checks).
pub fn q_from_scratch(tt: &TensorTrain, x_vandermonde: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut col = DMatrix::from_element(1, 1, 1.0);
    for (core, v) in tt.cores()[k + 1..].iter().zip(&x_vandermonde[k + 1..]).rev() {
        col = core.contract_mode(v) * col;
    }
    col.as_slice().to_vec()
}
