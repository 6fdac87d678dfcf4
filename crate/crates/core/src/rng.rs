//! Named random streams derived from a single root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a per-component seed from `(root, label)`.
///
/// Stable across platforms and Rust versions (FNV-1a over the label, mixed
/// with SplitMix64), so CSV outputs stay byte-identical.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(root ^ splitmix64(h))
}

/// Seed for the `index`-th item of a labelled stream.
pub fn derive_indexed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(root, label).wrapping_add(splitmix64(index)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(root: u64, label: &str) -> Rng {
    rng_from_seed(derive_seed(root, label))
}

pub fn indexed_stream(root: u64, label: &str, index: u64) -> Rng {
    rng_from_seed(derive_indexed(root, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_label_sensitive() {
        assert_eq!(derive_seed(7, "adm"), derive_seed(7, "adm"));
        assert_ne!(derive_seed(7, "adm"), derive_seed(7, "ess"));
        assert_ne!(derive_seed(7, "adm"), derive_seed(8, "adm"));
        assert_ne!(derive_indexed(7, "adm", 0), derive_indexed(7, "adm", 1));
    }
}
