//! Deterministic seed derivation.
//!
//! All randomness in this crate flows through ChaCha generators seeded from
//! a user-supplied base seed.  Substreams (per trial, per sampling
//! direction, per slice, …) are derived by folding tag words into the base
//! seed with the splitmix64 permutation, so that every substream is stable
//! across platforms and independent of evaluation order.

/// One splitmix64 step: a bijective 64-bit mix with good avalanche.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a substream seed by folding `tags` into `base`, one at a time.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    let mut z = splitmix64(base);
    for &t in tags {
        z = splitmix64(z ^ t.wrapping_mul(0xff51_afd7_ed55_8ccd));
    }
    z
}

/// Tag words for the distinct consumers of derived seeds.
pub mod tag {
    pub const SAMPLING: u64 = 1;
    pub const TENSOR: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const TRIAL: u64 = 4;
    pub const CONTROL: u64 = 5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable() {
        // Frozen values: a change here breaks reproducibility of every
        // sample set and experiment in the wild.
        assert_eq!(derive(0, &[]), 16294208416658607535);
        assert_eq!(derive(1, &[2, 3]), 1466326241515225814);
    }

    #[test]
    fn tags_matter_and_order_matters() {
        assert_ne!(derive(7, &[1, 2]), derive(7, &[2, 1]));
        assert_ne!(derive(7, &[1]), derive(8, &[1]));
        assert_ne!(derive(7, &[0]), derive(7, &[]));
    }
}
