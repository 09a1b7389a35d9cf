//! Sensitivity indices for models with vector outputs.
//!
//! For `Y = f(X_1, ..., X_p)` in `R^k` with independent inputs, a subset `u`
//! of inputs and a `k x k` weighting matrix `M`, the index
//!
//! ```text
//!   S^u(M; f) = Tr(M C_u) / Tr(M Sigma)
//! ```
//!
//! compares the covariance `C_u` of `E[Y | X_u]` with the covariance `Sigma`
//! of `Y`. With `M = Id` it is invariant under orthogonal maps and nonzero
//! scalings of the output.
//!
//! The crate provides
//!
//! * [`model`], [`space`], [`subset`]: models, input laws and subsets;
//! * [`oracle`]: exact covariance triples (closed form, enumeration,
//!   quadrature, large Monte Carlo) and exact indices;
//! * [`pickfreeze`]: designs, paired evaluations and estimators;
//! * [`inference`]: delta-method and bootstrap intervals, replication studies;
//! * [`config`], [`run`], [`report`]: the batch front end used by the `mvsens` binary.

// `!(x > t)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod inference;
pub mod model;
pub mod oracle;
pub mod pickfreeze;
pub mod report;
pub mod rng;
pub mod run;
pub mod space;
pub mod subset;
pub mod table;
pub mod tabulated;

pub use error::{Error, Result};
pub use model::{apply_transform, eval_model, OutputTransform, ProjectionMatrix, VectorModel};
pub use oracle::{exact_index, CovarianceTriple, ExactIndex};
pub use pickfreeze::{
    empirical_covariances, estimate_index, estimate_index_general, evaluate_pairs, generate_design,
    PickFreezeDesign, PickFreezeSample,
};
pub use space::{sample_inputs, InputSpace, Marginal};
pub use subset::SubsetIndex;
pub use table::RowMatrix;
