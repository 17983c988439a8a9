use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator behind every seeded stream in the crate. ChaCha8 output is
/// specified bit-for-bit, so corpora and checkpoints reproduce across platforms.
pub type SeededRng = ChaCha8Rng;

/// Name and version of the stream algorithm, recorded in corpus manifests.
pub const RNG_ALGORITHM: &str = "chacha8-rand_chacha-0.3";

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a parent seed with a stream index (splitmix64 finalizer) so that
/// per-utterance or per-worker streams are independent of iteration order.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
