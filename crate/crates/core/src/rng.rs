//! Per-replica random streams.
//!
//! Each replica owns a generator seeded from `(base_seed, replica_index)`
//! through the SplitMix64 finalizer, so a replica's stream does not depend on
//! which worker runs it or in what order.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type ReplicaRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function (Steele, Lea & Flood).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn replica_seed(base_seed: u64, replica_index: u64) -> u64 {
    mix64(base_seed.wrapping_add(mix64(replica_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))))
}

pub fn replica_rng(base_seed: u64, replica_index: u64) -> ReplicaRng {
    Xoshiro256PlusPlus::seed_from_u64(replica_seed(base_seed, replica_index))
}
