use rand::seq::SliceRandom;

use super::dataset::{Dataset, Sample};
use crate::rng::{derive_seed, rng_for, stream};

/// Indices of one epoch: a seeded permutation cut into `batch_size` chunks,
/// the final short chunk included.
pub fn epoch_batches(len: usize, batch_size: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng_for(seed, stream::BATCHES, 0));
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Single-consumer stream of batches; each epoch reshuffles with a seed derived
/// from `(seed, epoch)`. The stream never ends, so bound it with `take`.
pub struct BatchStream<'a, T> {
    ds: &'a Dataset<T>,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    pending: std::vec::IntoIter<Vec<usize>>,
}

impl<'a, T> BatchStream<'a, T> {
    pub fn epoch(&self) -> u64 {
        self.epoch
    }
}

impl<'a, T: crate::Scalar> Iterator for BatchStream<'a, T> {
    type Item = Vec<&'a Sample<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.ds.is_empty() {
            return None;
        }
        loop {
            if let Some(batch) = self.pending.next() {
                return Some(batch.into_iter().map(|i| &self.ds.samples[i]).collect());
            }
            self.epoch += 1;
            self.pending = epoch_batches(
                self.ds.len(),
                self.batch_size,
                derive_seed(self.seed, stream::BATCHES, self.epoch),
            )
            .into_iter();
        }
    }
}

pub fn iterate_batches<T: crate::Scalar>(ds: &Dataset<T>, batch_size: usize, seed: u64) -> BatchStream<'_, T> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    BatchStream {
        ds,
        batch_size,
        seed,
        epoch: 0,
        pending: epoch_batches(ds.len(), batch_size, derive_seed(seed, stream::BATCHES, 0)).into_iter(),
    }
}
