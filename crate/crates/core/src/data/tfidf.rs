//! TF-IDF re-weighting of term-count matrices.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Converts raw term counts (documents × vocabulary) into TF-IDF values:
/// `tf = count / document_total`, `idf = ln(N / df)` with `df` the number of
/// documents containing the term. Documents with no terms become zero rows;
/// a term appearing in every document gets idf 0 (and an absent term a zero
/// column).
pub fn tfidf_transform(term_counts: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if term_counts.iter().any(|&c| !c.is_finite() || c < 0.0) {
        return Err(Error::Domain("term counts must be finite and nonnegative".into()));
    }
    let (docs, vocab) = term_counts.shape();
    let n = docs as f64;

    let mut idf = vec![0.0; vocab];
    for (t, idf_t) in idf.iter_mut().enumerate() {
        let df = (0..docs).filter(|&i| term_counts[(i, t)] > 0.0).count();
        if df > 0 {
            *idf_t = (n / df as f64).ln();
        }
    }

    let mut out = DMatrix::zeros(docs, vocab);
    for i in 0..docs {
        let total: f64 = term_counts.row(i).iter().sum();
        if total == 0.0 {
            continue;
        }
        for t in 0..vocab {
            out[(i, t)] = term_counts[(i, t)] / total * idf[t];
        }
    }
    Ok(out)
}
