//! Deterministic fan-out: results come back in index order whether the work
//! ran on the rayon pool or inline, so parallel and sequential builds produce
//! identical bytes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn indexed_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Counter-based substream: one independent generator per work item.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn normal_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    use rand::Rng;
    (0..d).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
}
