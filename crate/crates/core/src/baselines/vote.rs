use crate::{Error, Result};

/// Aggregates per-source classifier scores into one ±1 label: the sign of
/// the raw-score sum, each score's magnitude acting as its confidence.
/// A sum of exactly zero votes +1.
pub fn confidence_vote(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Domain("confidence_vote needs at least one score".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score in vote".into()));
    }
    let sum: f64 = scores.iter().sum();
    Ok(if sum >= 0.0 { 1.0 } else { -1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_confidence_wins() {
        assert_eq!(confidence_vote(&[0.9, -0.1, -0.1]).unwrap(), 1.0);
        assert_eq!(confidence_vote(&[-0.9, 0.2, 0.2]).unwrap(), -1.0);
        assert_eq!(confidence_vote(&[0.5, -0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(confidence_vote(&[-0.3, -0.3]).unwrap(), -1.0);
    }

    #[test]
    fn exact_tie_votes_positive() {
        assert_eq!(confidence_vote(&[0.2, -0.2]).unwrap(), 1.0);
        assert_eq!(confidence_vote(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn invariant_to_positive_scaling_and_permutation() {
        let scores = [0.4, -0.7, 0.2, 0.5];
        let base = confidence_vote(&scores).unwrap();
        let scaled: Vec<f64> = scores.iter().map(|s| 2.0 * s).collect();
        assert_eq!(confidence_vote(&scaled).unwrap(), base);
        let permuted = [0.5, 0.2, -0.7, 0.4];
        assert_eq!(confidence_vote(&permuted).unwrap(), base);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(confidence_vote(&[]), Err(Error::Domain(_))));
        assert!(matches!(
            confidence_vote(&[0.1, f64::NAN]),
            Err(Error::Numeric(_))
        ));
    }
}
