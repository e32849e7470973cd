//! Seeded random streams.
//!
//! Every random draw in the workbench comes from a ChaCha8 generator keyed by
//! the master seed, with the ChaCha stream id selecting an independent
//! sequence. Identical (seed, stream) pairs reproduce bit-identical draws on
//! every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// What a client-side stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Mini-batches for local SGD.
    Batches = 0,
    /// Auxiliary batches of the meta-learning step.
    MetaBatches = 1,
    /// The single fine-tuning pass.
    FineTune = 2,
    /// ALA subsample selection.
    AlaSubsample = 3,
    /// Shapley background selection.
    Background = 4,
}

const PURPOSES: u64 = 8;
const INIT_STREAM: u64 = u64::MAX;

/// Generator seeded from `seed` on an explicit stream.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-client generator for one purpose.
pub fn client_stream(seed: u64, client_id: usize, purpose: Purpose) -> Rng {
    stream(seed, client_id as u64 * PURPOSES + purpose as u64)
}

/// Generator for the initial global model.
pub fn init_stream(seed: u64) -> Rng {
    stream(seed, INIT_STREAM)
}

/// Seed for the data-preparation steps of one client, decorrelated from the
/// master seed with a splitmix64 finalizer.
pub fn derive_seed(seed: u64, client_id: usize) -> u64 {
    let mut z = seed ^ (client_id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
