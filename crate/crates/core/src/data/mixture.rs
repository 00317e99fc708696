//! Rotated-and-translated Gaussian-mixture benchmark.
//!
//! One fixed two-class mixture (two Gaussian components per class in 2-D)
//! serves as the shared concept; every domain sees it through its own random
//! rotation and translation. Linear alignment is exactly what adaptation
//! must recover here.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Domain, Error, Result};

/// Component centers of the shared mixture: two per class, mirrored through
/// the origin, separable by the line x₂ = −x₁.
const POSITIVE_CENTERS: [(f64, f64); 2] = [(1.6, 0.4), (0.4, 1.6)];

/// Generator parameters; defaults are the reference six-domain benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureBenchConfig {
    pub num_domains: usize,
    pub points_per_domain: usize,
    /// Each domain's rotation angle is uniform in ±this many degrees.
    pub rotation_limit_deg: f64,
    /// Each domain's translation is uniform in ±this per coordinate.
    pub translation_limit: f64,
    /// Isotropic Gaussian scale of every mixture component.
    pub cluster_spread: f64,
    pub seed: u64,
}

impl Default for MixtureBenchConfig {
    fn default() -> Self {
        Self {
            num_domains: 6,
            points_per_domain: 300,
            rotation_limit_deg: 90.0,
            translation_limit: 0.8,
            cluster_spread: 0.55,
            seed: 0,
        }
    }
}

impl MixtureBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_domains == 0 || self.points_per_domain == 0 {
            return Err(Error::Domain(
                "num_domains and points_per_domain must be positive".into(),
            ));
        }
        if !(self.cluster_spread.is_finite() && self.cluster_spread > 0.0) {
            return Err(Error::Domain(format!(
                "cluster_spread must be positive, got {}",
                self.cluster_spread
            )));
        }
        if !(self.rotation_limit_deg.is_finite() && self.rotation_limit_deg >= 0.0) {
            return Err(Error::Domain("rotation_limit_deg must be >= 0".into()));
        }
        if !(self.translation_limit.is_finite() && self.translation_limit >= 0.0) {
            return Err(Error::Domain("translation_limit must be >= 0".into()));
        }
        Ok(())
    }
}

/// Generates the benchmark domains: balanced ±1 classes, each point drawn
/// from a random component of its class and mapped through the domain's
/// rotation and translation. Deterministic given the seed.
pub fn gen_mixture_domains(cfg: &MixtureBenchConfig) -> Result<Vec<Domain>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut domains = Vec::with_capacity(cfg.num_domains);
    for _ in 0..cfg.num_domains {
        let theta = rng
            .gen_range(-cfg.rotation_limit_deg..=cfg.rotation_limit_deg)
            .to_radians();
        let (sin, cos) = theta.sin_cos();
        let tx = rng.gen_range(-cfg.translation_limit..=cfg.translation_limit);
        let ty = rng.gen_range(-cfg.translation_limit..=cfg.translation_limit);

        let n = cfg.points_per_domain;
        let mut x = DMatrix::zeros(n, 2);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            let (mut cx, mut cy) = POSITIVE_CENTERS[rng.gen_range(0..POSITIVE_CENTERS.len())];
            if label < 0.0 {
                cx = -cx;
                cy = -cy;
            }
            let e1: f64 = StandardNormal.sample(&mut rng);
            let e2: f64 = StandardNormal.sample(&mut rng);
            let px = cx + cfg.cluster_spread * e1;
            let py = cy + cfg.cluster_spread * e2;
            x[(i, 0)] = cos * px - sin * py + tx;
            x[(i, 1)] = sin * px + cos * py + ty;
            y[i] = label;
        }
        domains.push(Domain::labeled(x, y)?);
    }
    Ok(domains)
}
