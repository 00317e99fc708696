//! Principal component analysis with a variance-coverage stopping rule.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// A fitted PCA projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: DVector<f64>,
    /// Orthonormal principal directions, one column per kept component.
    components: DMatrix<f64>,
    /// Fraction of total variance captured by each kept component,
    /// non-increasing.
    explained_variance_ratio: DVector<f64>,
}

impl PcaModel {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance_ratio(&self) -> &DVector<f64> {
        &self.explained_variance_ratio
    }

    pub fn num_components(&self) -> usize {
        self.components.ncols()
    }

    /// Projects rows of `x` onto the kept components.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "data has {} columns, PCA was fitted on {}",
                x.ncols(),
                self.mean.len()
            )));
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * &self.components)
    }

    /// Maps projected rows back to the original space.
    pub fn inverse_transform(&self, projected: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if projected.ncols() != self.num_components() {
            return Err(Error::Dimension(format!(
                "projected data has {} columns, model keeps {}",
                projected.ncols(),
                self.num_components()
            )));
        }
        let mut out = projected * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(out)
    }
}

/// Fits PCA on `x` and keeps the smallest number of leading components whose
/// cumulative explained-variance ratio reaches `variance_target`; returns the
/// model and the projected data.
pub fn pca_fit_transform(x: &DMatrix<f64>, variance_target: f64) -> Result<(PcaModel, DMatrix<f64>)> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::Domain(format!(
            "variance_target must be in (0, 1], got {variance_target}"
        )));
    }
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::Domain("PCA needs at least two rows".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in PCA input".into()));
    }

    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let covariance = centered.transpose() * &centered / (n as f64 - 1.0);

    let eig = SymmetricEigen::new(covariance);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let total: f64 = eig.eigenvalues.iter().map(|&v| v.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::Numeric("data has zero total variance".into()));
    }

    let mut kept = 0;
    let mut cumulative = 0.0;
    let mut ratios = Vec::new();
    for &i in &order {
        let ratio = eig.eigenvalues[i].max(0.0) / total;
        if ratio <= 0.0 {
            break;
        }
        ratios.push(ratio);
        cumulative += ratio;
        kept += 1;
        if cumulative >= variance_target {
            break;
        }
    }
    if kept == 0 {
        return Err(Error::Numeric("no components with positive variance".into()));
    }

    let mut components = DMatrix::zeros(d, kept);
    for (c, &i) in order.iter().take(kept).enumerate() {
        components.column_mut(c).copy_from(&eig.eigenvectors.column(i));
    }

    let model = PcaModel {
        mean,
        components,
        explained_variance_ratio: DVector::from_vec(ratios),
    };
    let projected = centered * &model.components;
    Ok((model, projected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Data lying exactly in a 2-D subspace of R⁵.
    fn planar_data(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DVector::from_vec(vec![1.0, 0.0, 2.0, 0.0, -1.0]);
        let v = DVector::from_vec(vec![0.0, 1.0, -1.0, 3.0, 0.5]);
        let mut x = DMatrix::zeros(n, 5);
        for i in 0..n {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            let row = a * &u + b * &v;
            x.row_mut(i).copy_from(&row.transpose());
        }
        x
    }

    #[test]
    fn rank_two_data_keeps_two_components() {
        let x = planar_data(60, 3);
        let (model, projected) = pca_fit_transform(&x, 0.95).unwrap();
        assert_eq!(model.num_components(), 2);
        assert_eq!(projected.shape(), (60, 2));
    }

    #[test]
    fn variance_target_is_a_sharp_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(80, 6, |_, j| {
            let scale = 1.0 / (j + 1) as f64;
            rng.gen_range(-scale..scale)
        });
        let (model, _) = pca_fit_transform(&x, 0.95).unwrap();
        let ratios = model.explained_variance_ratio();
        let kept: f64 = ratios.iter().sum();
        assert!(kept >= 0.95);
        let without_last: f64 = ratios.iter().take(ratios.len() - 1).sum();
        assert!(without_last < 0.95);
    }

    #[test]
    fn components_are_orthonormal() {
        let x = planar_data(50, 5);
        let (model, _) = pca_fit_transform(&x, 0.99).unwrap();
        let gram = model.components().transpose() * model.components();
        let dev = (&gram - DMatrix::identity(gram.nrows(), gram.ncols()))
            .abs()
            .max();
        assert!(dev < 1e-10, "orthonormality deviation {dev}");
    }

    #[test]
    fn ratios_are_positive_and_non_increasing() {
        let x = planar_data(50, 7);
        let (model, _) = pca_fit_transform(&x, 1.0).unwrap();
        let r = model.explained_variance_ratio();
        assert!(r.iter().all(|&v| v > 0.0));
        for w in r.as_slice().windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn exact_rank_r_data_reconstructs_to_1e8() {
        let x = planar_data(40, 11);
        let (model, projected) = pca_fit_transform(&x, 0.95).unwrap();
        let rebuilt = model.inverse_transform(&projected).unwrap();
        assert!((&rebuilt - &x).abs().max() < 1e-8);
    }

    #[test]
    fn rejects_bad_target_and_tiny_data() {
        let x = planar_data(10, 1);
        assert!(matches!(
            pca_fit_transform(&x, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            pca_fit_transform(&x, 1.5),
            Err(Error::Domain(_))
        ));
        let one_row = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(
            pca_fit_transform(&one_row, 0.95),
            Err(Error::Domain(_))
        ));
    }
}
