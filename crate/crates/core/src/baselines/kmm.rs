//! Kernel mean matching: reweight source points so the weighted source mean
//! matches the target mean in the kernel feature space.
//!
//! The weights minimize
//!
//! ```text
//! J(β) = (1/m²) βᵀ K_ss β − (2/(mn)) βᵀ K_st 1
//! ```
//!
//! over `0 ≤ β_i ≤ B`, `|mean(β) − 1| ≤ ε`, by projected gradient descent
//! with a backtracking step so the objective trace is non-increasing.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kernel::{rbf_kernel_with_sigma, resolve_bandwidth, KernelConfig};
use crate::{Domain, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KmmConfig {
    pub kernel: KernelConfig,
    /// Per-point weight cap B (must be ≥ 1).
    pub weight_cap: f64,
    /// Slack ε on `|mean(β) − 1|`; `None` uses `(√m − 1)/√m`.
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    /// Gradient step; `None` uses `1/L` with `L = λ_max(K_ss)/m²` estimated
    /// by power iteration.
    pub step: Option<f64>,
    pub seed: u64,
}

impl Default for KmmConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            weight_cap: 1000.0,
            epsilon: None,
            max_iters: 500,
            step: None,
            seed: 0,
        }
    }
}

impl KmmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.weight_cap.is_finite() && self.weight_cap >= 1.0) {
            return Err(Error::Domain(format!(
                "weight cap must be >= 1, got {}",
                self.weight_cap
            )));
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
                return Err(Error::Domain(format!(
                    "epsilon must be in [0, 1), got {eps}"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be positive".into()));
        }
        if let Some(s) = self.step {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Domain(format!("step must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Weights produced by [`kmm_weights`].
#[derive(Debug, Clone)]
pub struct KmmResult {
    /// Per-source-point weights in `[0, B]` with mean within ε of 1.
    pub beta: DVector<f64>,
    /// Objective value at the start and after each accepted step;
    /// non-increasing.
    pub objective_trace: Vec<f64>,
    /// False when the iteration cap was reached before the step shrank to
    /// stationarity; the best iterate is still returned.
    pub converged: bool,
}

/// The box/slack feasible set of the KMM program.
struct FeasibleSet {
    cap: f64,
    epsilon: f64,
}

impl FeasibleSet {
    /// Clip to the box, then rescale the mean into the ε-band; repeat until
    /// both hold (rescaling up may push entries over the cap again). A zero
    /// ε can leave the rescale an ulp short of the target forever, so the
    /// loop is capped and followed by a direct snap onto the band edge.
    fn project(&self, beta: &mut DVector<f64>) {
        for _ in 0..100 {
            for b in beta.iter_mut() {
                *b = b.clamp(0.0, self.cap);
            }
            let mean = beta.mean();
            if mean == 0.0 {
                beta.fill((1.0 - self.epsilon).min(self.cap));
                continue;
            }
            if mean > 1.0 + self.epsilon {
                *beta *= (1.0 + self.epsilon) / mean;
            } else if mean < 1.0 - self.epsilon {
                *beta *= (1.0 - self.epsilon) / mean;
            }
            if self.contains(beta) {
                return;
            }
        }
        let mean = beta.mean();
        let target = mean.clamp(1.0 - self.epsilon, 1.0 + self.epsilon);
        let shift = target - mean;
        for b in beta.iter_mut() {
            *b = (*b + shift).clamp(0.0, self.cap);
        }
        if !self.contains(beta) && (1.0 - self.epsilon) <= self.cap {
            // Uniform band-edge point, always representable.
            beta.fill((1.0 - self.epsilon).min(self.cap).max(0.0));
        }
    }

    fn contains(&self, beta: &DVector<f64>) -> bool {
        let mean = beta.mean();
        beta.iter().all(|&b| (0.0..=self.cap).contains(&b))
            && (mean - 1.0).abs() <= self.epsilon
    }
}

/// Estimates the largest eigenvalue of a symmetric PSD matrix by power
/// iteration.
fn largest_eigenvalue(k: &DMatrix<f64>, seed: u64) -> f64 {
    let n = k.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let norm = v.norm();
    if norm == 0.0 {
        v.fill(1.0);
    } else {
        v /= norm;
    }
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = k * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        w /= norm;
        let next = w.dot(&(k * &w));
        let done = (next - lambda).abs() <= 1e-10 * next.abs().max(1.0);
        lambda = next;
        v = w;
        if done {
            break;
        }
    }
    lambda
}

/// Solves the KMM program for source rows `xs` against target rows `xt`.
///
/// Starts from the uniform weights β = 1 and never accepts an uphill step,
/// so the returned objective is at most the objective of uniform weighting.
/// Hitting `max_iters` is not an error; the result carries a convergence
/// flag.
pub fn kmm_weights(xs: &DMatrix<f64>, xt: &DMatrix<f64>, cfg: &KmmConfig) -> Result<KmmResult> {
    cfg.validate()?;
    if xs.nrows() == 0 || xt.nrows() == 0 {
        return Err(Error::Domain("KMM needs at least one row on each side".into()));
    }
    if xs.ncols() != xt.ncols() {
        return Err(Error::Dimension(format!(
            "source has {} columns, target {}",
            xs.ncols(),
            xt.ncols()
        )));
    }
    let m = xs.nrows();
    let n = xt.nrows();

    let sigma = resolve_bandwidth(xs, xt, &cfg.kernel)?;
    let k_ss = rbf_kernel_with_sigma(xs, xs, sigma);
    let k_st = rbf_kernel_with_sigma(xs, xt, sigma);

    let m2 = (m * m) as f64;
    let mn = (m * n) as f64;
    // J(β) = (1/m²) βᵀ K_ss β − qᵀβ with q = (2/(mn)) K_st 1.
    let q = (2.0 / mn) * (&k_st * DVector::from_element(n, 1.0));
    let objective = |beta: &DVector<f64>, k_beta: &DVector<f64>| -> f64 {
        beta.dot(k_beta) / m2 - q.dot(beta)
    };

    let feasible = FeasibleSet {
        cap: cfg.weight_cap,
        epsilon: cfg
            .epsilon
            .unwrap_or(((m as f64).sqrt() - 1.0) / (m as f64).sqrt()),
    };

    let mut step = match cfg.step {
        Some(s) => s,
        None => {
            let lambda = largest_eigenvalue(&k_ss, cfg.seed);
            if lambda <= 0.0 {
                1.0
            } else {
                m2 / lambda
            }
        }
    };

    let mut beta = DVector::from_element(m, 1.0);
    feasible.project(&mut beta);
    let mut k_beta = &k_ss * &beta;
    let mut value = objective(&beta, &k_beta);
    let mut trace = vec![value];

    let min_step = step * 2f64.powi(-60);
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        // ∇J = (2/m²) K_ss β − q.
        let grad = (2.0 / m2) * &k_beta - &q;
        let mut accepted = false;
        while step >= min_step {
            let mut candidate = &beta - step * &grad;
            feasible.project(&mut candidate);
            let k_candidate = &k_ss * &candidate;
            let candidate_value = objective(&candidate, &k_candidate);
            if candidate_value <= value {
                let moved = (&candidate - &beta).amax() > 1e-12;
                beta = candidate;
                k_beta = k_candidate;
                value = candidate_value;
                trace.push(value);
                accepted = true;
                if !moved {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }

    debug_assert!(feasible.contains(&beta));
    Ok(KmmResult {
        beta,
        objective_trace: trace,
        converged,
    })
}

/// Builds a new domain of `n_out` rows drawn i.i.d. (with replacement) from
/// `domain`, row `i` with probability `beta_i / Σβ`.
pub fn resample_weighted(
    domain: &Domain,
    beta: &DVector<f64>,
    n_out: usize,
    seed: u64,
) -> Result<Domain> {
    if beta.len() != domain.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} rows",
            beta.len(),
            domain.len()
        )));
    }
    if n_out == 0 {
        return Err(Error::Domain("n_out must be positive".into()));
    }
    if beta.iter().any(|&b| !b.is_finite() || b < 0.0) {
        return Err(Error::Domain("weights must be finite and nonnegative".into()));
    }
    let total: f64 = beta.iter().sum();
    if total <= 0.0 {
        return Err(Error::Domain("weights sum to zero".into()));
    }

    let mut cumulative = Vec::with_capacity(beta.len());
    let mut acc = 0.0;
    for &b in beta.iter() {
        acc += b;
        cumulative.push(acc);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<usize> = (0..n_out)
        .map(|_| {
            let u: f64 = rng.gen_range(0.0..total);
            cumulative.partition_point(|&c| c <= u).min(beta.len() - 1)
        })
        .collect();
    Ok(domain.select(&rows))
}
