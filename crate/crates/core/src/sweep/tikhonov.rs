//! The matrix `D_k` with `∇_{G_k} ½⟨A, A⟩ = D_k vec(G_k)`.
//!
//! Writing `a_k = ∏_{l<k} Σ_i G_l(i) ⊗ G_l(i)` (a `1 × r_{k-1}²` row) and
//! `b_k = ∏_{l>k} Σ_i G_l(i) ⊗ G_l(i)` (an `r_k² × 1` column), the row of
//! `D_k` for the core entry `(α, j, β)` is `b_k^{(β)ᵀ} ⊗ e_jᵀ ⊗ a_k^{(α)}`.
//! Reshaped, `a_k` and `b_k` are symmetric Gram matrices and
//! `D_k = B_k ⊗ I_{n_k} ⊗ A_k`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tt::{TTCore, TensorTrain};

/// `a_k` reshaped to `r_{k-1} × r_{k-1}`: entry `(α, α')` is
/// `Σ_{i_1..i_{k-1}} P(α) P(α')` with `P = G_1(i_1)...G_{k-1}(i_{k-1})`.
pub fn left_self_contraction(tt: &TensorTrain, k: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::from_element(1, 1, 1.0);
    for core in &tt.cores()[..k] {
        acc = push_left(&acc, core);
    }
    acc
}

/// `b_k` reshaped to `r_k × r_k`: entry `(β, β')` is `Σ Q(β) Q(β')` with
/// `Q = G_{k+1}(i_{k+1})...G_d(i_d)`.
pub fn right_self_contraction(tt: &TensorTrain, k: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::from_element(1, 1, 1.0);
    for core in tt.cores()[k + 1..].iter().rev() {
        acc = push_right(&acc, core);
    }
    acc
}

/// `Σ_i G(i)ᵀ A G(i)`.
fn push_left(a: &DMatrix<f64>, core: &TTCore) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(core.r_right(), core.r_right());
    for i in 0..core.n() {
        let g = core.slice(i);
        out += g.transpose() * a * &g;
    }
    out
}

/// `Σ_i G(i) B G(i)ᵀ`.
fn push_right(b: &DMatrix<f64>, core: &TTCore) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(core.r_left(), core.r_left());
    for i in 0..core.n() {
        let g = core.slice(i);
        out += &g * b * g.transpose();
    }
    out
}

/// `D_k` (size `r_{k-1} n_k r_k` square).
pub fn tikhonov_dk(tt: &TensorTrain, k: usize) -> Result<DMatrix<f64>> {
    if k >= tt.order() {
        return Err(Error::IndexOutOfRange(format!(
            "core {k} of {}",
            tt.order()
        )));
    }
    let a = left_self_contraction(tt, k);
    let b = right_self_contraction(tt, k);
    let (rl, n, rr) = tt.core(k).shape();
    let m = rl * n * rr;
    let mut d = DMatrix::zeros(m, m);
    for beta in 0..rr {
        for beta2 in 0..rr {
            let bb = b[(beta, beta2)];
            if bb == 0.0 {
                continue;
            }
            for j in 0..n {
                for alpha in 0..rl {
                    let row = alpha + rl * (j + n * beta);
                    for alpha2 in 0..rl {
                        let col = alpha2 + rl * (j + n * beta2);
                        d[(row, col)] = bb * a[(alpha, alpha2)];
                    }
                }
            }
        }
    }
    Ok(d)
}
