//! Multivariate polynomial classifiers whose coefficient tensor is kept in
//! tensor-train format and learned by alternating single-core sweeps.
//!
//! * [`dense`] and [`poly`]: explicit tensors and the polynomial ↔ tensor map.
//! * [`tt`]: the tensor-train structure, contraction and orthogonalization.
//! * [`sweep`]: least-squares and logistic core updates and the sweep driver.
//! * [`classifier`]: binary and multiclass decision rules, cross-validation.
//! * [`data`]: CSV / IDX ingestion, PCA and the model file.

pub mod classifier;
pub mod data;
pub mod dense;
pub mod error;
pub mod linalg;
pub mod poly;
pub mod sweep;
pub mod synth;
pub mod tt;

pub use nalgebra;
pub use classifier::{BinaryTTClassifier, MulticlassModel, Strategy};
pub use data::{Dataset, ModelFile, Pca};
pub use dense::DenseTensor;
pub use error::{Error, Result};
pub use poly::{DegreeVector, SparsePolynomial};
pub use sweep::{LabeledData, Loss, TrainConfig};
pub use tt::{RankVector, TTCore, TensorTrain};
