//! Single-core subproblems.
//!
//! With every other core fixed, the score of each sample is `C_k g` where
//! `g = vec(G_k)`, and the regularizer is `½ gᵀ D_k g`. The least-squares
//! loss gives a linear system; the logistic loss is convex in `g` and is
//! minimized by damped Newton iterations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

use super::blocks::{accumulate_blocks, BlockProducts};
use super::Loss;

/// The data of one core update: `C_kᵀ`, the regularization matrix and the
/// row-block partition used for accumulation.
#[derive(Debug, Clone)]
pub struct CoreProblem {
    /// `m × N`, column `j` is the design row of sample `j`.
    pub ct: DMatrix<f64>,
    pub dk: DMatrix<f64>,
    pub blocks: Vec<usize>,
}

impl CoreProblem {
    pub fn size(&self) -> usize {
        self.ct.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.ct.ncols()
    }

    /// `C_k g`.
    pub fn scores(&self, g: &DVector<f64>) -> DVector<f64> {
        self.ct.tr_mul(g)
    }

    /// `J(g) + γ ½ gᵀ D_k g`.
    pub fn objective(&self, loss: Loss, labels: &[f64], gamma: f64, g: &DVector<f64>) -> f64 {
        let s = self.scores(g);
        let data_term = match loss {
            Loss::LeastSquares => least_squares_loss(s.as_slice(), labels),
            Loss::Logistic => logistic_loss(s.as_slice(), labels),
        };
        data_term + 0.5 * gamma * g.dot(&(&self.dk * g))
    }
}

/// Result of a core update.
#[derive(Debug, Clone)]
pub struct CoreUpdate {
    pub core: DVector<f64>,
    /// Regularized objective at `core`.
    pub objective: f64,
    /// Max-norm of the regularized gradient at `core`.
    pub grad_norm: f64,
    /// Least squares: the minimum-norm fallback was used. Logistic: unused.
    pub min_norm: bool,
    /// Newton iterations taken (0 for least squares).
    pub iterations: usize,
}

pub fn least_squares_loss(scores: &[f64], labels: &[f64]) -> f64 {
    let n = scores.len().max(1) as f64;
    scores
        .iter()
        .zip(labels)
        .map(|(s, y)| (s - y) * (s - y))
        .sum::<f64>()
        / n
}

/// `σ(z)` evaluated without overflow for any finite `z`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `-ln σ(s)` for label +1, `-ln(1 - σ(s))` for label -1.
pub fn logistic_cost(score: f64, label: f64) -> f64 {
    if label > 0.0 {
        softplus(-score)
    } else {
        softplus(score)
    }
}

pub fn logistic_loss(scores: &[f64], labels: &[f64]) -> f64 {
    let n = scores.len().max(1) as f64;
    scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| logistic_cost(s, y))
        .sum::<f64>()
        / n
}

/// Mean logistic loss, `h = σ(scores)` and the Hessian weights `h(1-h)`.
#[derive(Debug, Clone)]
pub struct LogisticPieces {
    pub loss: f64,
    pub h: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn logistic_pieces(scores: &[f64], labels: &[f64]) -> LogisticPieces {
    let h: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
    let weights = h.iter().map(|&p| p * (1.0 - p)).collect();
    LogisticPieces {
        loss: logistic_loss(scores, labels),
        h,
        weights,
    }
}

/// Solves `(CᵀC + (N/2) γ D_k) g = Cᵀy`.
pub fn ttls_update_core(problem: &CoreProblem, labels: &[f64], gamma: f64) -> Result<CoreUpdate> {
    check(problem, labels, gamma)?;
    let n = problem.n_samples() as f64;
    let BlockProducts { gram, rhs } = accumulate_blocks(&problem.ct, None, labels, &problem.blocks)?;
    let system = &gram + &problem.dk * (0.5 * n * gamma);
    let sol = solve_spd(&system, &rhs)?;
    let g = sol.x;
    // ∇J̃ = (2/N)(CᵀC g - Cᵀy) + γ D g
    let grad = (&gram * &g - &rhs) * (2.0 / n) + &problem.dk * &g * gamma;
    Ok(CoreUpdate {
        objective: problem.objective(Loss::LeastSquares, labels, gamma, &g),
        grad_norm: grad.amax(),
        core: g,
        min_norm: sol.min_norm,
        iterations: 0,
    })
}

/// `∇J = (1/N) Cᵀ(h - (y + 1)/2)` (unregularized logistic gradient).
pub fn logistic_gradient(problem: &CoreProblem, labels: &[f64], g: &DVector<f64>) -> DVector<f64> {
    let s = problem.scores(g);
    let n = problem.n_samples() as f64;
    let resid: Vec<f64> = s
        .iter()
        .zip(labels)
        .map(|(&si, &y)| sigmoid(si) - 0.5 * (y + 1.0))
        .collect();
    (&problem.ct * DVector::from_vec(resid)) / n
}

/// `∇²J = (1/N) Cᵀ D_A C` (unregularized logistic Hessian).
pub fn logistic_hessian(problem: &CoreProblem, g: &DVector<f64>) -> Result<DMatrix<f64>> {
    let s = problem.scores(g);
    let pieces = logistic_pieces(s.as_slice(), &vec![1.0; s.len()]);
    let n = problem.n_samples() as f64;
    let zeros = vec![0.0; s.len()];
    let p = accumulate_blocks(&problem.ct, Some(&pieces.weights), &zeros, &problem.blocks)?;
    Ok(p.gram / n)
}

/// Newton parameters for the logistic core update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// `λ = damping · trace(H) / m` is added to the diagonal of the Hessian.
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            grad_tol: 1e-8,
            damping: 1e-8,
        }
    }
}

/// Largest number of step halvings tried per Newton iteration.
const MAX_HALVINGS: usize = 40;

/// Minimizes `J(g) + γ ½ gᵀ D_k g` for the logistic loss by damped Newton
/// steps from `warm`, halving a step until the objective does not increase.
/// The returned objective is never above the one at `warm`.
pub fn ttlr_update_core(
    problem: &CoreProblem,
    labels: &[f64],
    gamma: f64,
    warm: &DVector<f64>,
    newton: &NewtonConfig,
) -> Result<CoreUpdate> {
    check(problem, labels, gamma)?;
    if warm.len() != problem.size() {
        return Err(Error::DimensionMismatch(format!(
            "warm start of length {} for a core of size {}",
            warm.len(),
            problem.size()
        )));
    }
    let n = problem.n_samples() as f64;
    let m = problem.size();
    let objective = |g: &DVector<f64>| problem.objective(Loss::Logistic, labels, gamma, g);

    let mut g = warm.clone();
    let mut obj = objective(&g);
    if !obj.is_finite() {
        return Err(Error::NonFinite("logistic objective at warm start"));
    }
    let mut grad_norm;
    let mut iterations = 0;
    loop {
        let s = problem.scores(&g);
        let pieces = logistic_pieces(s.as_slice(), labels);
        let resid: Vec<f64> = pieces
            .h
            .iter()
            .zip(labels)
            .map(|(&h, &y)| h - 0.5 * (y + 1.0))
            .collect();
        let p = accumulate_blocks(&problem.ct, Some(&pieces.weights), &resid, &problem.blocks)?;
        let dg = &problem.dk * &g;
        let grad = p.rhs / n + &dg * gamma;
        if grad.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("logistic gradient"));
        }
        grad_norm = grad.amax();
        if grad_norm <= newton.grad_tol || iterations >= newton.max_iters {
            break;
        }
        let mut hess = p.gram / n + &problem.dk * gamma;
        let lambda = newton.damping * hess.trace() / m as f64;
        for i in 0..m {
            hess[(i, i)] += lambda;
        }
        let step = solve_spd(&hess, &grad)?.x;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &g - &step * t;
            let c_obj = objective(&cand);
            if c_obj.is_finite() && c_obj <= obj {
                accepted = Some((cand, c_obj));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((cand, c_obj)) => {
                let stalled = c_obj == obj;
                g = cand;
                obj = c_obj;
                if stalled {
                    break;
                }
            }
            None => break,
        }
    }
    Ok(CoreUpdate {
        core: g,
        objective: obj,
        grad_norm,
        min_norm: false,
        iterations,
    })
}

fn check(problem: &CoreProblem, labels: &[f64], gamma: f64) -> Result<()> {
    if labels.len() != problem.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} design rows",
            labels.len(),
            problem.n_samples()
        )));
    }
    if problem.dk.nrows() != problem.size() || problem.dk.ncols() != problem.size() {
        return Err(Error::DimensionMismatch("regularization matrix size".into()));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidConfig(format!("gamma must be finite and nonnegative, got {gamma}")));
    }
    if problem.ct.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(1e4) == 1.0 && sigmoid(-1e4) == 0.0);
        assert!((logistic_cost(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
        assert!((logistic_cost(0.0, -1.0) - 2f64.ln()).abs() < 1e-15);
        assert!(logistic_cost(1e4, 1.0) < 1e-300);
        assert!((logistic_cost(-1e4, 1.0) - 1e4).abs() < 1e-9);
        assert!(logistic_cost(50.0, 1.0) < 1e-20);
    }

    #[test]
    fn sigmoid_derivative_identity() {
        for &z in &[-8.0, -1.3, 0.0, 0.4, 3.7, 12.0] {
            let h = 1e-5;
            let fd = (sigmoid(z + h) - sigmoid(z - h)) / (2.0 * h);
            let p = logistic_pieces(&[z], &[1.0]);
            assert!((p.weights[0] - fd).abs() <= 1e-8, "z={z}");
        }
    }

    fn problem(ct: DMatrix<f64>) -> CoreProblem {
        let m = ct.nrows();
        let n = ct.ncols();
        CoreProblem {
            ct,
            dk: DMatrix::identity(m, m),
            blocks: vec![n],
        }
    }

    #[test]
    fn ls_interpolates_square_system() {
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.0, 3.0]);
        let y = [1.0, -1.0, 1.0];
        let p = problem(c.transpose());
        let u = ttls_update_core(&p, &y, 0.0).unwrap();
        let fit = &c * &u.core;
        for (f, t) in fit.iter().zip(&y) {
            assert!((f - t).abs() < 1e-12);
        }
        assert!(u.objective < 1e-24);
    }

    #[test]
    fn large_gamma_shrinks_to_zero() {
        let c = DMatrix::from_fn(10, 4, |i, j| ((i + 2 * j) as f64).cos());
        let y: Vec<f64> = (0..10).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let p = problem(c.transpose());
        let ls = ttls_update_core(&p, &y, 1e12).unwrap();
        assert!(ls.core.amax() < 1e-10);
        let lr = ttlr_update_core(&p, &y, 1e8, &DVector::from_element(4, 0.3), &NewtonConfig::default()).unwrap();
        assert!(lr.core.amax() < 1e-6);
    }

    #[test]
    fn scalar_logistic_matches_golden_section() {
        // one sample, one variable: minimize ln(1 + e^{-c g}) + γ/2 g²
        let c = 1.7;
        let gamma = 0.3;
        let f = |g: f64| logistic_cost(c * g, 1.0) + 0.5 * gamma * g * g;
        let (mut a, mut b) = (-10.0f64, 10.0f64);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let oracle = 0.5 * (a + b);
        let p = problem(DMatrix::from_element(1, 1, c));
        let u = ttlr_update_core(&p, &[1.0], gamma, &DVector::from_element(1, 0.0), &NewtonConfig::default()).unwrap();
        assert!((u.core[0] - oracle).abs() < 1e-7, "{} vs {oracle}", u.core[0]);
        assert!(u.grad_norm <= 1e-8);
    }

    #[test]
    fn logistic_update_never_worse_than_warm_start() {
        let c = DMatrix::from_fn(30, 5, |i, j| ((i * 7 + j * 3) as f64).sin());
        let y: Vec<f64> = (0..30).map(|i| if (i * 5) % 7 < 3 { 1.0 } else { -1.0 }).collect();
        let p = problem(c.transpose());
        let warm = DVector::from_fn(5, |i, _| i as f64 - 2.0);
        let before = p.objective(Loss::Logistic, &y, 0.01, &warm);
        let u = ttlr_update_core(&p, &y, 0.01, &warm, &NewtonConfig { max_iters: 1, ..Default::default() }).unwrap();
        assert!(u.objective <= before);
    }

    #[test]
    fn non_finite_design_is_rejected() {
        let mut ct = DMatrix::from_element(2, 3, 1.0);
        ct[(1, 2)] = f64::NAN;
        let p = problem(ct);
        assert!(ttls_update_core(&p, &[1.0, -1.0, 1.0], 0.0).is_err());
    }
}
