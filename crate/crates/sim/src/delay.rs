use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Per-message latency: `base + U[0, jitter]`, in microseconds.
#[derive(Clone, Debug)]
pub struct DelayModel {
    base_us: u64,
    jitter_us: u64,
    rng: ChaCha20Rng,
}

impl DelayModel {
    pub const DEFAULT_BASE_MS: u64 = 50;
    pub const DEFAULT_JITTER_MS: u64 = 20;

    pub fn new(base_ms: u64, jitter_ms: u64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(1);
        DelayModel { base_us: base_ms * 1000, jitter_us: jitter_ms * 1000, rng }
    }

    pub fn sample(&mut self) -> u64 {
        self.base_us + self.rng.gen_range(0..=self.jitter_us)
    }

    /// Upper bound on any single delivery.
    pub fn max_us(&self) -> u64 {
        self.base_us + self.jitter_us
    }
}
