//! Comparison methods: kernel mean matching, transfer component analysis,
//! and the confidence-weighted vote that aggregates per-source scores.

mod kernel;
mod kmm;
mod tca;
mod vote;

pub use kernel::{rbf_kernel, resolve_bandwidth, Bandwidth, KernelConfig};
pub use kmm::{kmm_weights, resample_weighted, KmmConfig, KmmResult};
pub use tca::{centering_matrix, mmd_coefficient_matrix, tca_fit_transform, TcaConfig, TcaResult};
pub use vote::confidence_vote;
