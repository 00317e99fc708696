use nalgebra::{DMatrix, DVector};

use crate::seed::StableHasher;
use crate::{Error, Result};

/// One dataset drawn from a single distribution: a feature matrix plus
/// optional ±1 labels. Sources carry labels; the target does not.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    features: DMatrix<f64>,
    labels: Option<DVector<f64>>,
}

impl Domain {
    /// Builds a labeled domain. Labels must be exactly ±1 and match the row
    /// count; features must be finite.
    pub fn labeled(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                features.nrows()
            )));
        }
        for (i, &y) in labels.iter().enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(Error::Domain(format!("label at row {i} is {y}, expected +1 or -1")));
            }
        }
        Self::check_finite(&features)?;
        Ok(Self {
            features,
            labels: Some(labels),
        })
    }

    /// Builds an unlabeled domain (a target).
    pub fn unlabeled(features: DMatrix<f64>) -> Result<Self> {
        Self::check_finite(&features)?;
        Ok(Self {
            features,
            labels: None,
        })
    }

    fn check_finite(features: &DMatrix<f64>) -> Result<()> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        Ok(())
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Feature dimension d.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&DVector<f64>> {
        self.labels.as_ref()
    }

    /// Labels, or a domain error when the domain is unlabeled.
    pub fn labels_required(&self) -> Result<&DVector<f64>> {
        self.labels
            .as_ref()
            .ok_or_else(|| Error::Domain("operation requires a labeled domain".into()))
    }

    /// The same domain with labels dropped.
    pub fn without_labels(&self) -> Domain {
        Domain {
            features: self.features.clone(),
            labels: None,
        }
    }

    /// The sub-domain made of the given rows (duplicates allowed).
    pub fn select(&self, rows: &[usize]) -> Domain {
        let d = self.dim();
        let mut features = DMatrix::zeros(rows.len(), d);
        for (out, &r) in rows.iter().enumerate() {
            features.row_mut(out).copy_from(&self.features.row(r));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|y| DVector::from_fn(rows.len(), |i, _| y[rows[i]]));
        Domain { features, labels }
    }

    /// A content fingerprint: shape, feature bits, and label bits, hashed
    /// with a pinned algorithm so it is stable across platforms and
    /// releases.
    ///
    /// Used to tie per-source sub-seeds to source identity rather than list
    /// position.
    pub fn content_hash(&self) -> u64 {
        let mut h = StableHasher::new();
        h.write_u64(self.features.nrows() as u64);
        h.write_u64(self.features.ncols() as u64);
        for v in self.features.iter() {
            h.write_u64(v.to_bits());
        }
        match &self.labels {
            Some(y) => {
                h.write_u64(1);
                for v in y.iter() {
                    h.write_u64(v.to_bits());
                }
            }
            None => h.write_u64(0),
        }
        h.finish()
    }
}

/// The multi-source adaptation input: `k >= 1` labeled sources and one
/// unlabeled target, all sharing the feature dimension.
#[derive(Debug, Clone)]
pub struct MultiDomainSet {
    sources: Vec<Domain>,
    target: Domain,
}

impl MultiDomainSet {
    pub fn new(sources: Vec<Domain>, target: Domain) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Domain("need at least one source domain".into()));
        }
        if target.labels().is_some() {
            return Err(Error::Domain(
                "target must be unlabeled; strip labels with Domain::without_labels".into(),
            ));
        }
        let d = target.dim();
        for (i, s) in sources.iter().enumerate() {
            if s.labels().is_none() {
                return Err(Error::Domain(format!("source {i} is unlabeled")));
            }
            if s.dim() != d {
                return Err(Error::Dimension(format!(
                    "source {i} has dimension {}, target has {d}",
                    s.dim()
                )));
            }
            if s.is_empty() {
                return Err(Error::Domain(format!("source {i} is empty")));
            }
        }
        Ok(Self { sources, target })
    }

    pub fn sources(&self) -> &[Domain] {
        &self.sources
    }

    pub fn target(&self) -> &Domain {
        &self.target
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }
}
