//! Counter-addressed normal draws.
//!
//! The draw for `(seed, path, step)` is the `step`-th standard normal of the
//! ChaCha8 keystream selected by `seed` with stream id `path`. It does not
//! depend on how paths are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalSource {
    seed: u64,
}

impl NormalSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Writes the first `out.len()` draws of path `path` into `out`.
    pub fn fill_path(&self, path: u64, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        for z in out.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
    }

    pub fn path(&self, path: u64, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill_path(path, &mut v);
        v
    }
}
