//! Root-seed splitting. Every stochastic stage derives its own stream from
//! one root seed and a stage index, so a whole experiment replays from a
//! single `u64`.

/// SplitMix64 finalizer over `root + stage`: well-mixed, stateless, stable.
pub fn derive_seed(root: u64, stage: u64) -> u64 {
    let mut z = root.wrapping_add(stage.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
