//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Thin QR with the diagonal of `R` forced nonnegative.
///
/// For an `m × n` input returns `Q` (`m × min(m,n)`) and `R` (`min(m,n) × n`).
pub fn qr_positive(a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Outcome of [`solve_spd`].
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: DVector<f64>,
    /// True when the system was too ill-conditioned and the minimum-norm
    /// least-squares solution was returned instead.
    pub min_norm: bool,
}

/// Condition number above which [`solve_spd`] switches to the minimum-norm solution.
pub const MAX_CONDITION: f64 = 1e12;

/// Solves `A x = b` for symmetric positive semidefinite `A`.
///
/// Uses a Cholesky factorization when the estimated 1-norm condition number
/// is at most [`MAX_CONDITION`], otherwise returns `pinv(A) b` from a
/// symmetric eigendecomposition.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<SpdSolution> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "system {}x{} with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("linear system"));
    }
    if let Some(chol) = a.clone().cholesky() {
        let cond = one_norm(a) * inverse_one_norm_estimate(&chol);
        if cond.is_finite() && cond <= MAX_CONDITION {
            return Ok(SpdSolution {
                x: chol.solve(b),
                min_norm: false,
            });
        }
    }
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    Ok(SpdSolution {
        x: pinv_apply(&eig, b, max * 1e-12),
        min_norm: true,
    })
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's estimate of `‖A⁻¹‖₁` for symmetric `A` from its Cholesky factor.
fn inverse_one_norm_estimate(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let n = chol.l_dirty().nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = chol.solve(&x);
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let sign = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = chol.solve(&sign);
        let (j, zmax) = z.iter().map(|v| v.abs()).enumerate().fold((0, 0.0), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    est
}

fn pinv_apply(eig: &SymmetricEigen<f64, nalgebra::Dyn>, b: &DVector<f64>, cutoff: f64) -> DVector<f64> {
    let coords = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_iterator(
        coords.len(),
        coords.iter().zip(eig.eigenvalues.iter()).map(|(&c, &l)| {
            if l > cutoff && l > 0.0 {
                c / l
            } else {
                0.0
            }
        }),
    );
    &eig.eigenvectors * scaled
}

/// `max |A - I|` over all entries.
pub fn identity_residual(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((a[(i, j)] - target).abs());
        }
    }
    worst
}
