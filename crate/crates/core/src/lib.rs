//! Multi-source unsupervised domain adaptation.
//!
//! The learner is given `k` labeled source datasets and one unlabeled target
//! dataset, all sharing a feature space but drawn from different
//! distributions. A global classifier `g`, trained on the pooled sources,
//! provides an approximate labeling of the target; that labeling is then used
//! to fit, for every source, a transformation `phi_i` that aligns the target
//! to the source so the per-source classifier `f_i` transfers. The final
//! hypothesis is the sign of the summed adapted scores.
//!
//! Crate layout:
//!
//! - [`nn`] — a small dense feed-forward network engine with backpropagation,
//!   squared-error training on ±1 targets, and per-layer weight freezing.
//! - [`alm`] — approximate label matching: global/local training, transform
//!   fitting (free linear or rotation-constrained), consensus prediction.
//! - [`baselines`] — RBF-kernel mean matching (KMM) with weighted resampling,
//!   transfer component analysis (TCA), and confidence-weighted voting.
//! - [`data`] — synthetic benchmark generators, CSV ingestion, TF-IDF, PCA,
//!   and k-fold splitting.
//! - [`experiment`] — the hold-one-domain-out harness producing per-domain
//!   error tables.
//!
//! All randomized operations are deterministic functions of their explicit
//! seeds; models are immutable once built and safe to share across threads.

pub mod alm;
pub mod baselines;
pub mod data;
mod domain;
mod error;
pub mod experiment;
pub mod nn;
mod seed;

pub use domain::{Domain, MultiDomainSet};
pub use error::{Error, Result};
