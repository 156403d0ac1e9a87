//! Deterministic seed derivation.
//!
//! # Overview
//! Every sampler in this crate takes a bare `u64` seed. When one logical
//! seed has to fan out into several independent streams (dictionary,
//! coefficients, noise, trials...), callers derive child seeds with
//! [`derive_seed`], a SplitMix64 finalizer chain. The exact function is part
//! of the reproducibility contract: any implementation in any language can
//! re-derive the same partition.
//!
//! ```text
//! mix(z) = { z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
//!            z ^= z >> 27; z *= 0x94d049bb133111eb;
//!            z ^= z >> 31; z }
//! derive_seed(seed, tag) = mix(seed ^ tag)
//! ```

/// SplitMix64 finalizer; bijective on `u64`, breaks up structured inputs.
#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z
}

/// Child seed for stream `tag` under `seed`.
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64_mix(seed ^ tag)
}
