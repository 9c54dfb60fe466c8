//! Deterministic seed derivation. Every random stream in the crate is keyed
//! from a master seed plus stable identifiers, never from a global RNG.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::ChannelConfig;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `master` one word at a time.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Stable per-config key: ion name plus width and molarity quantized to
/// 1e-6 nm / 1e-6 M. Independent of where the config sits in a grid.
pub fn config_key(config: &ChannelConfig) -> [u64; 3] {
    [
        fnv1a(config.species.name.as_bytes()),
        (config.width * 1e6).round() as i64 as u64,
        (config.molarity * 1e6).round() as i64 as u64,
    ]
}

pub fn config_seed(master: u64, config: &ChannelConfig) -> u64 {
    derive_seed(master, &config_key(config))
}

/// Seed for a named stream (e.g. `"mlp"`) under `master`.
pub fn stream_seed(master: u64, tag: &str) -> u64 {
    derive_seed(master, &[fnv1a(tag.as_bytes())])
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
