//! Seeded random streams and the chunked parallel driver.
//!
//! Every experiment is driven by one 64-bit master seed. The stream used for
//! chunk `k` of a computation tagged `tag` is
//!
//! ```text
//! key    = splitmix64(seed ^ splitmix64(fnv1a(tag)))
//! stream = ChaCha8(seed_from_u64(key)), word-stream index k
//! ```
//!
//! so the numbers consumed by a chunk depend only on `(seed, tag, k)` and
//! never on which worker happens to run it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream number `index` of the family keyed by `(seed, tag)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> Stream {
    let key = splitmix64(seed ^ splitmix64(fnv1a(tag.as_bytes())));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

/// Uniform draw on `(0, 1]`, never zero, so `ln` and negative powers are safe.
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Chunked, seed-deterministic parallel execution.
///
/// Work of `total` units is cut into chunks of `chunk_size`; chunk `k` gets
/// [`stream`]`(seed, tag, k)`. Results come back in chunk order, so any fold
/// over them is independent of `workers`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parallel {
    pub seed: u64,
    pub chunk_size: usize,
    pub workers: usize,
}

impl Parallel {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            chunk_size: 10_000,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size.max(1);
        self
    }

    /// Independent driver for sub-task `index` (same chunking and workers).
    pub fn fork(&self, index: u64) -> Parallel {
        Parallel {
            seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(1))),
            ..self.clone()
        }
    }

    /// Single stream for work that is not split (e.g. a pilot estimate).
    pub fn stream(&self, tag: &str) -> Stream {
        stream(self.seed, tag, u64::MAX)
    }

    /// Chunk lengths covering `total`.
    pub fn chunk_lengths(&self, total: usize) -> Vec<usize> {
        let size = self.chunk_size.max(1);
        let mut out = vec![size; total / size];
        if total % size != 0 {
            out.push(total % size);
        }
        out
    }

    pub fn map_chunks<A, F>(&self, tag: &str, total: usize, f: F) -> Vec<A>
    where
        A: Send,
        F: Fn(&mut Stream, usize) -> A + Sync,
    {
        let chunks = self.chunk_lengths(total);
        let job = |(k, len): (usize, &usize)| {
            let mut rng = stream(self.seed, tag, k as u64);
            f(&mut rng, *len)
        };
        if self.workers <= 1 {
            return chunks.iter().enumerate().map(job).collect();
        }
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
        {
            Ok(pool) => pool.install(|| chunks.par_iter().enumerate().map(job).collect()),
            Err(_) => chunks.iter().enumerate().map(job).collect(),
        }
    }

    /// [`map_chunks`](Self::map_chunks) followed by an in-order fold.
    pub fn fold_chunks<A, F, M>(&self, tag: &str, total: usize, f: F, merge: M) -> Option<A>
    where
        A: Send,
        F: Fn(&mut Stream, usize) -> A + Sync,
        M: FnMut(A, A) -> A,
    {
        self.map_chunks(tag, total, f).into_iter().reduce(merge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_by_tag_and_index() {
        let a: u64 = stream(7, "tail", 0).random();
        let b: u64 = stream(7, "tail", 1).random();
        let c: u64 = stream(7, "cdf", 0).random();
        let a2: u64 = stream(7, "tail", 0).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn open_unit_in_range() {
        let mut rng = stream(1, "u", 0);
        for _ in 0..10_000 {
            let u = open_unit(&mut rng);
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn chunk_results_independent_of_workers() {
        let run = |workers| {
            Parallel::new(99)
                .with_chunk_size(37)
                .with_workers(workers)
                .map_chunks("t", 1000, |rng, len| {
                    (0..len).map(|_| rng.random::<f64>()).sum::<f64>()
                })
        };
        let one = run(1);
        assert_eq!(one.len(), 28);
        assert_eq!(one, run(3));
    }

    #[test]
    fn chunk_lengths_cover_total() {
        let p = Parallel::new(0).with_chunk_size(10);
        assert_eq!(p.chunk_lengths(25), vec![10, 10, 5]);
        assert_eq!(p.chunk_lengths(20), vec![10, 10]);
        assert!(p.chunk_lengths(0).is_empty());
    }
}
