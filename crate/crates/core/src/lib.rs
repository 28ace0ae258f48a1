//! Regression with network-valued responses.
//!
//! Networks on a fixed node set are represented by their graph Laplacians.
//! Responses are compared through the power metric
//! `d(L1, L2) = ||F(L1) - F(L2)||_F` with `F(L) = U diag(xi^alpha) U^T`,
//! averaged with Nadaraya-Watson weights in the tangent space of `F`, and
//! mapped back onto the Laplacian cone by Frobenius projection.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod laplacian;
pub mod pipeline;
pub mod projection;
pub mod regression;
pub mod spectral;
pub mod tangent;
pub mod trend;

pub use error::{Error, Result};
pub use laplacian::{
    euclidean_distance, laplacian_from_network, trace_normalize, validate_laplacian,
    GraphLaplacian, SymmetricMatrix, ValidationReport, WeightedNetwork,
};
pub use projection::{
    pipeline_to_laplacian, project_to_laplacian, ProjectionOptions, ProjectionResult,
};
pub use regression::{
    fit_curve, kernel_eval, loocv_bandwidth, nw_estimate_euclidean, nw_estimate_power, nw_weights,
    reverse_nw, KernelConfig, NetworkDataset,
};
pub use spectral::{inverse_power_map, power_distance, power_map, spectral_decompose, PowerConfig};
pub use tangent::{from_tangent, to_tangent, HelmertBasis, TangentVector};
