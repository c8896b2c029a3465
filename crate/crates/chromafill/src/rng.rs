//! Seeded random-number streams.
//!
//! Every random choice in the crate flows from a single run seed. Independent
//! consumers (mask strokes, per-level weight init, benchmark mask draws) each
//! get their own stream labelled by a string, so adding a consumer never
//! shifts the values another one sees.
//!
//! The generator is ChaCha with 8 rounds seeded from the run seed; the stream
//! id is the FNV-1a hash of the label. Both algorithms are fully specified,
//! so identical `(seed, label)` pairs reproduce identical sequences on any
//! machine and platform.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, 64 bit. Stable across builds, unlike `std`'s `DefaultHasher`.
fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the RNG stream for `label` from the run seed.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}
