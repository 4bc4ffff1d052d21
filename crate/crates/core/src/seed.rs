//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose 256-bit key
//! is `SHA-256(seed as little-endian u64 || label)`. ChaCha is a counter-mode
//! generator, so a stream is fully determined by `(seed, label)` and independent
//! of thread scheduling. Gaussian variates use `rand_distr::StandardNormal`
//! (ziggurat).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Opens the named stream of `seed`.
pub fn stream(seed: u64, label: &str) -> StreamRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// Derives a 64-bit child seed from a parent seed and a canonical coordinate string.
pub fn child_seed(parent: u64, coordinates: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(b"child:");
    h.update(coordinates.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}
