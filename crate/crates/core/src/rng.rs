//! Seedable RNG streams.
//!
//! Every randomized operation in the crate draws from a ChaCha generator
//! keyed by a 64-bit seed plus a stream index. Distinct concerns
//! (sequences, positions, activity, channels, solver permutations, trials)
//! use distinct streams of the same seed, so changing e.g. the antenna
//! count re-draws channels without perturbing the instance itself.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream indices for instance generation.
pub mod stream {
    /// Signature sequence entries.
    pub const SEQUENCES: u64 = 0;
    /// Device positions.
    pub const POSITIONS: u64 = 1;
    /// Activity ground truth.
    pub const ACTIVITY: u64 = 2;
    /// Rayleigh channels and receiver noise.
    pub const CHANNELS: u64 = 3;
    /// Coordinate permutations inside solvers.
    pub const PERMUTATIONS: u64 = 4;
}

/// A deterministic substream of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives the seed of trial `trial` from a run-level seed.
///
/// SplitMix64 finalizer; decorrelates consecutive trial indices.
pub fn trial_seed(run_seed: u64, trial: u64) -> u64 {
    let mut z = run_seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(trial.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
