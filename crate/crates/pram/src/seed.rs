//! Counter-based seed splitting.
//!
//! Every random decision in the crate is keyed by `(master_seed, index)`
//! through an SplitMix64 mix, so work units (records, trials, grid points)
//! can be processed in any order — serial or parallel — with identical
//! results.

/// SplitMix64 output function.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a master seed and a counter.
pub(crate) fn derive(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xA5A5_A5A5_A5A5_A5A5)))
}
