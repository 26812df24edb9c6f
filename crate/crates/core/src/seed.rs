//! Deterministic child-seed derivation.
//!
//! Every random stream in a run is seeded from `(master, index, label)`
//! through SHA-256, so streams never share state and results do not depend on
//! thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Random stream labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Graph process sampling along a trajectory.
    Graph,
    /// Initial node states.
    Init,
    /// Randomised row selection at the nodes.
    Rows,
    /// Problem data generation.
    Problem,
    /// Sample space, transition matrix and other process parameters.
    Space,
}

impl Stream {
    pub fn label(self) -> &'static str {
        match self {
            Stream::Graph => "graph",
            Stream::Init => "init",
            Stream::Rows => "rows",
            Stream::Problem => "problem",
            Stream::Space => "space",
        }
    }
}

pub fn derive_seed(master: u64, index: u64, stream: Stream) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    hasher.update(stream.label().as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream_rng(master: u64, index: u64, stream: Stream) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, index, stream))
}
