//! Shared inputs for the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stradic::verify::{random_projection_instance, ProjectionInstance};

/// Reproducible batch of random projection instances.
pub fn projection_batch(count: usize, seed: u64) -> Vec<ProjectionInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_projection_instance(&mut rng)).collect()
}
