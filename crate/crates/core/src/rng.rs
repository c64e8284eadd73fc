//! Small deterministic RNG for seeded fault injection and batch replay.
//!
//! Every stochastic decision in this crate flows through [`SimRng`] so that a
//! run is reproducible from its seed alone, on any platform. The generator is
//! splitmix64 for seeding and xorshift64* for the stream; both are stable,
//! well-studied mixers with no dependency on OS entropy.

/// Deterministic pseudo-random generator.
///
/// Not cryptographic. Streams with different seeds are independent for the
/// purposes of fault injection and Monte-Carlo estimation.
#[derive(Debug, Clone)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    /// Creates a generator from a seed. Any seed is valid; zero is remapped
    /// internally because xorshift has a zero fixed point.
    #[must_use]
    pub fn new(seed: u64) -> Self {
        let mut state = splitmix64(seed);
        if state == 0 {
            state = 0x9e37_79b9_7f4a_7c15;
        }
        SimRng { state }
    }

    /// Next raw 64-bit value (xorshift64*).
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    /// Uniform float in `[0, 1)` built from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Bernoulli draw. `p` outside `[0, 1]` saturates.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        if p <= 0.0 {
            return false;
        }
        self.next_f64() < p
    }

    /// Uniform index in `[0, n)`. `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is negligible for the fixture-sized `n` used here.
        (self.next_u64() % n as u64) as usize
    }
}

/// Derives an independent child seed from a parent seed and a stream id.
///
/// Used to give each batch run, and each agent role within a run, its own
/// reproducible stream.
#[must_use]
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
