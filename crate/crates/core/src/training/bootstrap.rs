//! Bootstrap resampling for bagging.

use rand::Rng;

use crate::error::{Error, Result};

/// `n` indices drawn uniformly with replacement from `0..n`.
pub fn bootstrap_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot resample an empty dataset".into()));
    }
    Ok((0..n).map(|_| rng.gen_range(0..n)).collect())
}

/// A resample of `items` of the same size, duplicates allowed.
pub fn bootstrap_sample<T: Clone, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> Result<Vec<T>> {
    Ok(bootstrap_indices(items.len(), rng)?
        .into_iter()
        .map(|i| items[i].clone())
        .collect())
}
