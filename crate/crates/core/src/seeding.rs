//! Replica seed derivation.
//!
//! Replica `i` of sweep cell `c` is seeded with `SHA-256(master || c || i)`,
//! so every `(cell, replica)` pair owns an independent ChaCha stream family.
//! Within a replica, stream 0 draws the initial configuration and stream 1
//! drives the Brownian increments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type ReplicaRng = ChaCha8Rng;

const INITIAL_STREAM: u64 = 0;
const DYNAMICS_STREAM: u64 = 1;

/// 256-bit seed owned by one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReplicaSeed(pub [u8; 32]);

impl ReplicaSeed {
    pub fn derive(master_seed: u64, cell: u64, replica: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"kslab/replica");
        hasher.update(master_seed.to_le_bytes());
        hasher.update(cell.to_le_bytes());
        hasher.update(replica.to_le_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&hasher.finalize());
        ReplicaSeed(out)
    }

    pub fn initial_rng(&self) -> ReplicaRng {
        self.stream(INITIAL_STREAM)
    }

    pub fn dynamics_rng(&self) -> ReplicaRng {
        self.stream(DYNAMICS_STREAM)
    }

    pub fn stream(&self, stream: u64) -> ReplicaRng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(stream);
        rng
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// Convenience for library users seeding with a plain integer.
pub fn rng_from_u64(seed: u64) -> ReplicaRng {
    ChaCha8Rng::seed_from_u64(seed)
}
