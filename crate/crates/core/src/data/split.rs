//! Seeded k-fold splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Domain, Error, Result};

/// Splits a labeled domain into `k` (train, test) pairs: a seeded shuffle
/// followed by contiguous folds whose sizes differ by at most one. The test
/// folds partition the domain.
pub fn split_kfold(domain: &Domain, k: usize, seed: u64) -> Result<Vec<(Domain, Domain)>> {
    domain.labels_required()?;
    let m = domain.len();
    if k == 0 || k > m {
        return Err(Error::Domain(format!(
            "k must be in 1..={m} for {m} samples, got {k}"
        )));
    }

    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let base = m / k;
    let extra = m % k;
    let mut splits = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let test_rows = &order[start..start + size];
        let train_rows: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        splits.push((domain.select(&train_rows), domain.select(test_rows)));
        start += size;
    }
    Ok(splits)
}
