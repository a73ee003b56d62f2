//! Deterministic per-trial seeds.

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`. Distinct indices give unrelated
/// streams; the same pair always gives the same seed.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}
