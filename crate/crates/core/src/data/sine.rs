//! Sine-wave benchmark generator: Gaussian clusters centered at random
//! points along a sine curve, labeled by which side of the curve they fall
//! on.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Domain, Error, Result};

/// Generator parameters. The defaults are the reference benchmark
/// configuration: five sources of a thousand 2-D points each, unit sine,
/// cluster spread 0.7, centers anywhere in one full period on each side of
/// the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SineBenchConfig {
    pub num_sources: usize,
    pub points_per_source: usize,
    /// Sine amplitude a in the dichotomizer `x₂ > a·sin(f·x₁)`.
    pub amplitude: f64,
    /// Sine frequency f.
    pub frequency: f64,
    /// Cluster centers are drawn uniformly from this x₁ interval, on the
    /// curve.
    pub center_range: (f64, f64),
    /// Isotropic Gaussian scale of each cluster.
    pub cluster_spread: f64,
    pub seed: u64,
}

impl Default for SineBenchConfig {
    fn default() -> Self {
        Self {
            num_sources: 5,
            points_per_source: 1000,
            amplitude: 1.0,
            frequency: 1.0,
            center_range: (-2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI),
            cluster_spread: 0.7,
            seed: 0,
        }
    }
}

impl SineBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sources == 0 || self.points_per_source == 0 {
            return Err(Error::Domain(
                "num_sources and points_per_source must be positive".into(),
            ));
        }
        for (name, v) in [
            ("amplitude", self.amplitude),
            ("frequency", self.frequency),
            ("cluster_spread", self.cluster_spread),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.center_range.0.is_finite()
            && self.center_range.1.is_finite()
            && self.center_range.0 < self.center_range.1)
        {
            return Err(Error::Domain(format!(
                "center_range must be a nonempty interval, got {:?}",
                self.center_range
            )));
        }
        Ok(())
    }

    /// The labeling rule: +1 strictly above the sine curve, −1 otherwise.
    pub fn label_of(&self, x1: f64, x2: f64) -> f64 {
        if x2 > self.amplitude * (self.frequency * x1).sin() {
            1.0
        } else {
            -1.0
        }
    }
}

/// Generates `num_sources` labeled domains. Each source draws a center
/// uniformly along the sine curve, scatters isotropic Gaussian points of
/// scale `cluster_spread` around it, and labels them against the curve.
/// Deterministic given the seed.
pub fn gen_sine_domains(cfg: &SineBenchConfig) -> Result<Vec<Domain>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut domains = Vec::with_capacity(cfg.num_sources);
    for _ in 0..cfg.num_sources {
        let cx = rng.gen_range(cfg.center_range.0..cfg.center_range.1);
        let cy = cfg.amplitude * (cfg.frequency * cx).sin();
        let n = cfg.points_per_source;
        let mut x = DMatrix::zeros(n, 2);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let e1: f64 = StandardNormal.sample(&mut rng);
            let e2: f64 = StandardNormal.sample(&mut rng);
            let p1 = cx + cfg.cluster_spread * e1;
            let p2 = cy + cfg.cluster_spread * e2;
            x[(i, 0)] = p1;
            x[(i, 1)] = p2;
            y[i] = cfg.label_of(p1, p2);
        }
        domains.push(Domain::labeled(x, y)?);
    }
    Ok(domains)
}
