/// Derives an independent RNG seed from a base seed and a salt.
///
/// Used wherever one configured seed fans out into several RNG streams
/// (per tree, per fold, per generated app) so that parallel and serial
/// execution consume identical randomness. SplitMix64 over the combined
/// words; the constants are the standard SplitMix64 increments.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
