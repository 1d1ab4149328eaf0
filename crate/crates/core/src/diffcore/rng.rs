use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The one generator used everywhere. ChaCha is counter based, portable, and
/// supports independent streams under a single seed.
pub type Rng = ChaCha8Rng;

/// Stream identifiers, so that components seeded from the same run seed never
/// share random draws.
pub mod stream {
    pub const SYNTH: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const INIT_TIER1: u64 = 3;
    pub const INIT_TIER2: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const EVAL_PARTITION: u64 = 6;
}

pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Platform-independent seed derived from a bag identifier.
pub fn bag_seed(bag_id: &str) -> u64 {
    let digest = Sha256::digest(bag_id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
