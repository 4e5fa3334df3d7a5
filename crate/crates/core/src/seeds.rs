//! Deterministic seed derivation. One experiment seed fans out to every
//! codebook, trial and synthetic writer through these mixers.

/// SplitMix64 finalizer applied to `seed` combined with `tag`.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a label, stable across platforms and releases.
pub fn label_tag(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn mix_all(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(seed, |s, &t| mix_seed(s, t))
}
