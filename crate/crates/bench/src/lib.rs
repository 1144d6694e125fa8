//! Fixtures shared by the benchmarks.

use ttclass::sweep::{Direction, SweepState, VandermondeTable};
use ttclass::synth::planted_binary;
use ttclass::{DegreeVector, LabeledData, RankVector, TensorTrain};

/// A planted binary problem with `d` variables of degree `p`, planted rank 3,
/// plus a random start train of rank `r`.
pub struct Fixture {
    pub degree: DegreeVector,
    pub data: LabeledData,
    pub start: TensorTrain,
}

impl Fixture {
    pub fn new(d: usize, p: usize, r: usize, n: usize) -> Self {
        let degree = DegreeVector::uniform(p, d).unwrap();
        let (_, data) = planted_binary(&degree, &RankVector::uniform(3, d).unwrap(), n, 0.0, 1).unwrap();
        let start = TensorTrain::random_right_orthogonal(&degree.dims(), &RankVector::uniform(r, d).unwrap(), 2).unwrap();
        Self { degree, data, start }
    }

    /// Vandermonde table and the sweep state moved to core `k`.
    pub fn state_at(&self, k: usize) -> (VandermondeTable, SweepState) {
        let table = VandermondeTable::new(&self.data, &self.degree).unwrap();
        let mut state = SweepState::new(&self.start, &table).unwrap();
        for _ in 0..k {
            state.advance(&self.start, &table, Direction::LeftToRight).unwrap();
        }
        (table, state)
    }
}
