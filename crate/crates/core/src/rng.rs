//! Deterministic random substreams.
//!
//! Every consumer of randomness derives its own ChaCha8 stream from the master
//! seed, a domain tag and a counter. Changing how many items one domain draws
//! never perturbs another domain, and item `k` of a domain is the same no
//! matter how many items follow it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Randomness domains. The discriminant is mixed into the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Split = 1,
    CrossValidation = 2,
    Design = 3,
    Coefficients = 4,
    Noise = 5,
    Engine = 6,
}

// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream `index` of `domain` under `seed`.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(domain as u64)));
    rng.set_stream(index);
    rng
}

/// A child seed, for handing a whole seed to a nested component.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    mix(mix(seed ^ mix(domain as u64)).wrapping_add(index))
}
