use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic sub-stream derivation from a 64-bit root seed.
///
/// Stream indices partition the generator space: the same (seed, stream)
/// always yields bit-identical draws, and distinct streams are independent,
/// so replicates can run in any order or in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Experiment-level stream (MAF sampling, fixed effect draws).
    pub fn experiment(seed: u64) -> Self {
        RngStream::new(seed, 0)
    }

    /// Stream for replicate `r` (0-based).
    pub fn replicate(seed: u64, r: u64) -> Self {
        RngStream::new(seed, 1 + r)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}
