//! Seeded random streams.
//!
//! Every random choice in the crate is drawn from a ChaCha8 stream
//! ([`rand_chacha::ChaCha8Rng`]). Independent streams are derived from a base
//! seed and a list of labels with [`derive_seed`]:
//!
//! 1. FNV-1a (64 bit) over the label bytes, with a `0xff` separator after each label;
//! 2. XOR with the base seed;
//! 3. the SplitMix64 finalizer.
//!
//! Because labels, not positions, feed the hash, adding a method or a problem
//! to a sweep never shifts the seeds of the other cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SolverRng = ChaCha8Rng;

/// Human-readable name of the generator, recorded in run metadata.
pub const GENERATOR_NAME: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut v: u64) -> u64 {
    v = v.wrapping_add(0x9e37_79b9_7f4a_7c15);
    v = (v ^ (v >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    v = (v ^ (v >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    v ^ (v >> 31)
}

/// Derives an independent seed from `base` and a sequence of labels.
pub fn derive_seed(base: u64, labels: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for label in labels {
        for &byte in label.as_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(FNV_PRIME);
        }
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h ^ base)
}

/// Seed for trial `trial` of a labelled experiment.
pub fn trial_seed(base: u64, labels: &[&str], trial: usize) -> u64 {
    let t = trial.to_string();
    let mut all: Vec<&str> = labels.to_vec();
    all.push(&t);
    derive_seed(base, &all)
}

pub fn stream(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}
