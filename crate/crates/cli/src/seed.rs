//! Child seeds for per-trajectory rng streams.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output for state `master + GOLDEN·(index + 1)`.
///
/// The finalizer is a bijection on `u64` and the state map is injective for
/// `index < 2⁶⁴`, so children of one master never collide.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
