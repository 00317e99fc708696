//! RBF kernel matrices and bandwidth resolution.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Fixed seed for the median-heuristic pair subsample; the heuristic is a
/// deterministic function of its input data.
const MEDIAN_SAMPLE_SEED: u64 = 0x6d65_6469_616e;

/// Maximum number of pairwise distances evaluated by the median heuristic.
const MEDIAN_MAX_PAIRS: usize = 2000;

/// RBF bandwidth: a fixed scale or the median heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise Euclidean distance over the stacked rows of both
    /// inputs (subsampled to at most 2000 pairs).
    Median,
}

/// Kernel configuration shared by KMM and TCA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub bandwidth: Bandwidth,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::Median,
        }
    }
}

impl KernelConfig {
    pub fn fixed(sigma: f64) -> Self {
        Self {
            bandwidth: Bandwidth::Fixed(sigma),
        }
    }
}

/// Resolves the configured bandwidth against the stacked rows of `a` and `b`.
pub fn resolve_bandwidth(a: &DMatrix<f64>, b: &DMatrix<f64>, cfg: &KernelConfig) -> Result<f64> {
    let sigma = match cfg.bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Median => median_pairwise_distance(a, b)?,
    };
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Domain(format!(
            "resolved kernel bandwidth must be positive, got {sigma}"
        )));
    }
    Ok(sigma)
}

fn row_distance(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    i: usize,
    j: usize,
) -> f64 {
    // Index into the virtual stack [a; b].
    let d = a.ncols();
    let mut sq = 0.0;
    for c in 0..d {
        let vi = if i < a.nrows() { a[(i, c)] } else { b[(i - a.nrows(), c)] };
        let vj = if j < a.nrows() { a[(j, c)] } else { b[(j - a.nrows(), c)] };
        let diff = vi - vj;
        sq += diff * diff;
    }
    sq.sqrt()
}

fn median_pairwise_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows() + b.nrows();
    if n < 2 {
        return Err(Error::Domain(
            "median heuristic needs at least two rows".into(),
        ));
    }
    let total_pairs = n * (n - 1) / 2;
    let mut dists = Vec::with_capacity(total_pairs.min(MEDIAN_MAX_PAIRS));
    if total_pairs <= MEDIAN_MAX_PAIRS {
        for i in 0..n {
            for j in (i + 1)..n {
                dists.push(row_distance(a, b, i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(MEDIAN_SAMPLE_SEED);
        while dists.len() < MEDIAN_MAX_PAIRS {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i != j {
                dists.push(row_distance(a, b, i, j));
            }
        }
    }
    dists.sort_by(|x, y| x.total_cmp(y));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if median <= 0.0 {
        return Err(Error::Domain(
            "median pairwise distance is zero; set a fixed bandwidth".into(),
        ));
    }
    Ok(median)
}

/// The RBF kernel matrix `K_ij = exp(−‖a_i − b_j‖² / (2σ²))` between the rows
/// of `a` and `b`.
pub fn rbf_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "kernel inputs have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let sigma = resolve_bandwidth(a, b, cfg)?;
    Ok(rbf_kernel_with_sigma(a, b, sigma))
}

/// RBF kernel with an already-resolved bandwidth (shared by the KMM blocks).
pub(crate) fn rbf_kernel_with_sigma(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma: f64,
) -> DMatrix<f64> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut k = DMatrix::zeros(a.nrows(), b.nrows());
    for i in 0..a.nrows() {
        for j in 0..b.nrows() {
            let mut sq = 0.0;
            for c in 0..a.ncols() {
                let diff = a[(i, c)] - b[(j, c)];
                sq += diff * diff;
            }
            k[(i, j)] = (-sq * inv).exp();
        }
    }
    k
}
