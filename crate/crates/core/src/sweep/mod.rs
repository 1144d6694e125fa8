//! Alternating-sweep training of a tensor-train polynomial classifier.
//!
//! Cores are updated one at a time in the order `1 → 2 → ... → d → d-1 → ... → 1`.
//! After each update the core is orthogonalized by a QR decomposition and the
//! triangular factor is pushed into the next core in the sweep direction, so
//! the cores left of the active one stay left-orthogonal and those right of
//! it right-orthogonal.

mod blocks;
mod cache;
mod core_update;
mod tikhonov;

use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::DegreeVector;
use crate::tt::{RankVector, TensorTrain};

pub use blocks::{accumulate_blocks, even_partition, BlockProducts};
pub use cache::{
    assemble_ck, assemble_ck_transposed, design_row, p_from_scratch, q_from_scratch, Direction,
    SweepState, VandermondeTable,
};
pub use core_update::{
    least_squares_loss, logistic_cost, logistic_gradient, logistic_hessian, logistic_loss,
    logistic_pieces, sigmoid, ttlr_update_core, ttls_update_core, CoreProblem, CoreUpdate,
    LogisticPieces, NewtonConfig,
};
pub use tikhonov::{left_self_contraction, right_self_contraction, tikhonov_dk};

/// Loss minimized by the core updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Mean squared error against the ±1 labels.
    LeastSquares,
    /// Mean logistic cost.
    Logistic,
}

/// Training set with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<f64>,
}

impl LabeledData {
    /// `features` is row-major `N × d`; every label must be `-1` or `+1`.
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values for {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidLabels(format!(
                "labels must be -1 or +1, found {bad}"
            )));
        }
        Ok(Self {
            features,
            dim,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("rows of unequal length".into()));
        }
        Self::new(rows.concat(), dim, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.features[j * self.dim..(j + 1) * self.dim]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut f = Vec::with_capacity(indices.len() * self.dim);
        let mut l = Vec::with_capacity(indices.len());
        for &i in indices {
            f.extend_from_slice(self.sample(i));
            l.push(self.labels[i]);
        }
        Self::new(f, self.dim, l)
    }
}

/// Hyperparameters of [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub degree: DegreeVector,
    pub ranks: RankVector,
    pub loss: Loss,
    /// Tikhonov weight γ.
    pub gamma: f64,
    /// One sweep is a left-to-right pass followed by a right-to-left pass.
    pub max_sweeps: usize,
    /// Stop when the relative change of the objective over one sweep is at most this.
    pub rel_tol: f64,
    pub newton: NewtonConfig,
    pub seed: u64,
    /// Number of row blocks used to accumulate the normal-equation products.
    /// Results depend on this value but not on the number of threads.
    pub blocks: usize,
}

impl TrainConfig {
    /// Defaults: 4 sweeps, relative tolerance `1e-2`, γ = 0, least squares.
    pub fn new(degree: DegreeVector, max_rank: usize) -> Result<Self> {
        let d = degree.len();
        Ok(Self {
            ranks: RankVector::uniform(max_rank, d)?,
            degree,
            loss: Loss::LeastSquares,
            gamma: 0.0,
            max_sweeps: 4,
            rel_tol: 1e-2,
            newton: NewtonConfig::default(),
            seed: 0,
            blocks: 8,
        })
    }

    pub fn with_loss(mut self, loss: Loss) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = sweeps;
        self
    }

    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // negated so NaN is rejected
    pub fn validate(&self) -> Result<()> {
        if self.ranks.ranks().len() + 1 != self.degree.len() {
            return Err(Error::InvalidConfig(format!(
                "{} ranks for {} variables",
                self.ranks.ranks().len(),
                self.degree.len()
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!("gamma = {}", self.gamma)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_tol must be positive".into()));
        }
        if self.newton.max_iters == 0 || !(self.newton.grad_tol > 0.0) || !(self.newton.damping >= 0.0) {
            return Err(Error::InvalidConfig("invalid Newton parameters".into()));
        }
        if self.blocks == 0 {
            return Err(Error::InvalidConfig("blocks must be positive".into()));
        }
        Ok(())
    }
}

/// One core update. `core` is 1-based in the textual form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    pub sweep: usize,
    /// 0-based core index.
    pub core: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sweep={} core={} objective={:.12e} grad_norm={:.6e}",
            self.sweep,
            self.core + 1,
            self.objective,
            self.grad_norm
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
    /// Objective of the initial train followed by the value after each sweep.
    pub sweep_objectives: Vec<f64>,
    pub converged: bool,
}

impl TrainLog {
    pub fn sweeps(&self) -> usize {
        self.sweep_objectives.len().saturating_sub(1)
    }
}

/// `J(A) + γ ½ ⟨A, A⟩` with scores from full train contractions.
pub fn objective(tt: &TensorTrain, data: &LabeledData, degree: &DegreeVector, loss: Loss, gamma: f64) -> Result<f64> {
    let scores = scores(tt, data, degree)?;
    let j = match loss {
        Loss::LeastSquares => least_squares_loss(&scores, data.labels()),
        Loss::Logistic => logistic_loss(&scores, data.labels()),
    };
    let nrm = tt.norm();
    Ok(j + 0.5 * gamma * nrm * nrm)
}

/// `⟨T(x^{(j)}), A⟩` for every sample.
pub fn scores(tt: &TensorTrain, data: &LabeledData, degree: &DegreeVector) -> Result<Vec<f64>> {
    if data.dim() != degree.len() || tt.dims() != degree.dims() {
        return Err(Error::DimensionMismatch(format!(
            "data dimension {}, degree vector {:?}, train modes {:?}",
            data.dim(),
            degree.degrees(),
            tt.dims()
        )));
    }
    (0..data.len())
        .into_par_iter()
        .map(|j| tt.eval_polynomial(data.sample(j), degree))
        .collect()
}

/// Builds the subproblem for the core at the state's position.
pub fn core_problem(
    tt: &TensorTrain,
    table: &VandermondeTable,
    state: &SweepState,
    blocks: usize,
) -> Result<CoreProblem> {
    let k = state.position();
    Ok(CoreProblem {
        ct: assemble_ck_transposed(table, state, tt, k)?,
        dk: tikhonov_dk(tt, k)?,
        blocks: even_partition(table.len(), blocks),
    })
}

/// Runs alternating sweeps from [`TensorTrain::random`].
pub fn train(data: &LabeledData, config: &TrainConfig) -> Result<(TensorTrain, TrainLog)> {
    train_with_observer(data, config, |_| {})
}

/// [`train`] that reports every core update to `observer` as it happens.
pub fn train_with_observer(
    data: &LabeledData,
    config: &TrainConfig,
    observer: impl FnMut(&LogEntry),
) -> Result<(TensorTrain, TrainLog)> {
    config.validate()?;
    let dims = config.degree.dims();
    let init = TensorTrain::random(&dims, &config.ranks, config.seed)?;
    train_from(data, config, init, observer)
}

/// Sweeps starting from a given train (useful for warm starts and tests).
pub fn train_from(
    data: &LabeledData,
    config: &TrainConfig,
    init: TensorTrain,
    mut observer: impl FnMut(&LogEntry),
) -> Result<(TensorTrain, TrainLog)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if data.dim() != config.degree.len() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} features, degree vector has {} entries",
            data.dim(),
            config.degree.len()
        )));
    }
    if init.dims() != config.degree.dims() {
        return Err(Error::DimensionMismatch("initial train does not match degree vector".into()));
    }
    let table = VandermondeTable::new(data, &config.degree)?;
    let labels = data.labels();
    let mut tt = init;
    let d = tt.order();
    let mut state = SweepState::new(&tt, &table)?;
    let mut log = TrainLog::default();
    let mut current = objective(&tt, data, &config.degree, config.loss, config.gamma)?;
    log.sweep_objectives.push(current);

    for sweep in 1..=config.max_sweeps {
        let order: Vec<(usize, Option<Direction>)> = if d == 1 {
            vec![(0, None)]
        } else {
            (0..d - 1)
                .map(|k| (k, Some(Direction::LeftToRight)))
                .chain((1..d).rev().map(|k| (k, Some(Direction::RightToLeft))))
                .collect()
        };
        for (k, dir) in order {
            debug_assert_eq!(state.position(), k);
            let problem = core_problem(&tt, &table, &state, config.blocks)?;
            let update = match config.loss {
                Loss::LeastSquares => ttls_update_core(&problem, labels, config.gamma)?,
                Loss::Logistic => {
                    let warm = DVector::from_column_slice(tt.core(k).as_slice());
                    ttlr_update_core(&problem, labels, config.gamma, &warm, &config.newton)?
                }
            };
            tt.set_core_data(k, update.core.as_slice().to_vec())?;
            match dir {
                Some(Direction::LeftToRight) => tt.shift_orthogonal_left(k)?,
                Some(Direction::RightToLeft) => tt.shift_orthogonal_right(k)?,
                None => {}
            }
            if let Some(dir) = dir {
                state.advance(&tt, &table, dir)?;
            }
            let entry = LogEntry {
                sweep,
                core: k,
                objective: update.objective,
                grad_norm: update.grad_norm,
            };
            observer(&entry);
            log.entries.push(entry);
            current = update.objective;
        }
        let previous = *log.sweep_objectives.last().expect("initial objective recorded");
        log.sweep_objectives.push(current);
        let change = (current - previous).abs() / previous.abs().max(f64::MIN_POSITIVE);
        if change <= config.rel_tol {
            log.converged = true;
            break;
        }
    }
    Ok((tt, log))
}
