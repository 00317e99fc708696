//! Transfer component analysis: project source and target into a shared
//! space that minimizes the maximum mean discrepancy while preserving
//! variance.
//!
//! With `K` the RBF kernel over the stacked rows, `L` the MMD coefficient
//! matrix and `H` the centering matrix, the components are the top
//! eigenvectors of `(KLK + μI)⁻¹ KHK`. The inverse is formed explicitly by
//! dense LU; eigenpairs come from power iteration with deflation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernel::{rbf_kernel, KernelConfig};
use crate::{Error, Result};

/// Fixed seed for the power-iteration start vectors; the solve is a
/// deterministic function of its inputs.
const POWER_ITERATION_SEED: u64 = 0x7463_6131;

const MAX_POWER_ITERS: usize = 10_000;
const POWER_TOL: f64 = 1e-8;
/// Residual bound enforced on every returned eigenpair.
const RESIDUAL_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TcaConfig {
    pub kernel: KernelConfig,
    /// Number of transfer components; `None` uses `min(d, 20)`.
    pub num_components: Option<usize>,
    /// Regularizer μ added to the MMD quadratic form.
    pub mu: f64,
}

impl Default for TcaConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            num_components: None,
            mu: 1.0,
        }
    }
}

/// The fitted projection and the projected data.
#[derive(Debug, Clone)]
pub struct TcaResult {
    /// Eigenvector matrix, one column per component, (m+n) × c.
    pub components: DMatrix<f64>,
    pub projected_source: DMatrix<f64>,
    pub projected_target: DMatrix<f64>,
    /// Eigenvalues in extraction (descending) order.
    pub eigenvalues: DVector<f64>,
    /// Residuals `‖Aw − λw‖` of the returned eigenpairs.
    pub residuals: Vec<f64>,
}

/// The MMD coefficient matrix: `1/m²` on source-source entries, `1/n²` on
/// target-target entries, `−1/(mn)` across.
pub fn mmd_coefficient_matrix(m: usize, n: usize) -> DMatrix<f64> {
    let size = m + n;
    DMatrix::from_fn(size, size, |i, j| match (i < m, j < m) {
        (true, true) => 1.0 / (m * m) as f64,
        (false, false) => 1.0 / (n * n) as f64,
        _ => -1.0 / (m * n) as f64,
    })
}

/// The centering matrix `H = I − (1/size)·11ᵀ`.
pub fn centering_matrix(size: usize) -> DMatrix<f64> {
    let mut h = DMatrix::from_element(size, size, -1.0 / size as f64);
    for i in 0..size {
        h[(i, i)] += 1.0;
    }
    h
}

/// Fits the transfer components for one source/target pair and projects both
/// datasets: `projected = K·W` split into the source and target blocks.
pub fn tca_fit_transform(
    xs: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    cfg: &TcaConfig,
) -> Result<TcaResult> {
    if xs.ncols() != xt.ncols() {
        return Err(Error::Dimension(format!(
            "source has {} columns, target {}",
            xs.ncols(),
            xt.ncols()
        )));
    }
    if xs.nrows() == 0 || xt.nrows() == 0 {
        return Err(Error::Domain("TCA needs at least one row on each side".into()));
    }
    if !(cfg.mu.is_finite() && cfg.mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {}", cfg.mu)));
    }
    let m = xs.nrows();
    let n = xt.nrows();
    let size = m + n;
    let d = xs.ncols();
    let components = cfg.num_components.unwrap_or_else(|| d.min(20));
    if components == 0 {
        return Err(Error::Domain("num_components must be positive".into()));
    }
    if components > size {
        return Err(Error::Domain(format!(
            "num_components {components} exceeds m+n = {size}"
        )));
    }

    let mut stacked = DMatrix::zeros(size, d);
    stacked.rows_mut(0, m).copy_from(xs);
    stacked.rows_mut(m, n).copy_from(xt);
    let k = rbf_kernel(&stacked, &stacked, &cfg.kernel)?;

    let l = mmd_coefficient_matrix(m, n);
    let h = centering_matrix(size);

    // Regularized MMD form M = KLK + μI and variance form N = KHK.
    let klk = &k * &l * &k;
    let khk = &k * &h * &k;
    let mut regularized = klk;
    for i in 0..size {
        regularized[(i, i)] += cfg.mu;
    }

    let inverse = regularized
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("KLK + μI is singular".into()))?;
    let a = &inverse * &khk;

    let pairs = top_eigenpairs(&a, &regularized, components)?;

    let mut w = DMatrix::zeros(size, components);
    let mut eigenvalues = DVector::zeros(components);
    let mut residuals = Vec::with_capacity(components);
    for (c, (lambda, vector)) in pairs.iter().enumerate() {
        w.column_mut(c).copy_from(vector);
        eigenvalues[c] = *lambda;
        let residual = (&a * vector - *lambda * vector).norm();
        if residual.is_nan() || residual > RESIDUAL_LIMIT {
            return Err(Error::Numeric(format!(
                "eigenpair {c} residual {residual:.3e} exceeds {RESIDUAL_LIMIT:.1e} \
                 after {MAX_POWER_ITERS} iterations"
            )));
        }
        residuals.push(residual);
    }

    let projected = &k * &w;
    Ok(TcaResult {
        components: w,
        projected_source: projected.rows(0, m).into_owned(),
        projected_target: projected.rows(m, n).into_owned(),
        eigenvalues,
        residuals,
    })
}

/// Top eigenpairs of `a = M⁻¹N` (similar to a symmetric PSD matrix) by power
/// iteration; deflation uses the left eigenvector `u = M·w` of each extracted
/// pair.
fn top_eigenpairs(
    a: &DMatrix<f64>,
    m_form: &DMatrix<f64>,
    count: usize,
) -> Result<Vec<(f64, DVector<f64>)>> {
    let size = a.nrows();
    let mut deflated = a.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut pairs = Vec::with_capacity(count);

    for _ in 0..count {
        let mut v = DVector::from_fn(size, |_, _| rng.gen_range(-1.0..1.0));
        v /= v.norm();
        let mut lambda = 0.0;
        for _ in 0..MAX_POWER_ITERS {
            let av = &deflated * &v;
            let norm = av.norm();
            if norm <= f64::MIN_POSITIVE {
                // Remaining spectrum is numerically zero; the current vector
                // already has a tiny residual.
                lambda = 0.0;
                break;
            }
            let next = &av / norm;
            lambda = next.dot(&(&deflated * &next));
            let residual = (&deflated * &next - lambda * &next).norm();
            v = next;
            if residual <= POWER_TOL {
                break;
            }
        }
        // Deflate: A ← A − λ·w·uᵀ/(uᵀw) with left eigenvector u = M·w.
        let u = m_form * &v;
        let denom = u.dot(&v);
        if denom.abs() > f64::MIN_POSITIVE {
            let scale = lambda / denom;
            deflated.ger(-scale, &v, &u, 1.0);
        }
        pairs.push((lambda, v));
    }
    Ok(pairs)
}
