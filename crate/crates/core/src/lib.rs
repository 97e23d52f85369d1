//! Design-matrix-free penalized estimation for generalized linear array
//! models.
//!
//! The design is a sum of tensor products of small marginal matrices and is
//! never formed. All products with it go through the `ρ` transform.

pub mod array;
pub mod basis;
pub mod error;
pub mod family;
pub mod inner;
pub mod oracle;
pub mod outer;
pub mod path;
pub mod penalty;

pub use array::{
    g_map, h_map, linear_index, multi_index, rho, xtwx_apply, ArrayDims, CoefficientBlocks, DenseArray,
    MarginalMatrix, TensorDesign, TensorWeights,
};
pub use error::{GlamError, Result};
pub use family::{Family, FamilySpec, Link, ObservationData};
pub use inner::{fista_solve, InnerConfig, InnerProblem, InnerResult};
pub use outer::{outer_solve, OuterConfig, OuterFit, OuterStatus, OuterTrace, WeightMode};
pub use path::{fit_path, fit_path_with_lambdas, lambda_sequence, mse_heldout, predict, FitPath, PathConfig};
pub use penalty::{lambda_max, PenaltyKind, PenaltySpec};
