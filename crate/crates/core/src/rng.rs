//! Deterministic RNG used everywhere randomness is needed.
//!
//! All simulation outputs must be bit-identical across runs and platforms for
//! a given seed, so the generator is pinned here instead of depending on an
//! external crate whose stream could change between versions. The algorithm is
//! SplitMix64 (Steele, Lea & Flood's `splitmix64` finalizer), which has a full
//! 2^64 period, no lockup state, and passes standard statistical batteries for
//! the volumes drawn here.
//!
//! Independent substreams are derived by hashing a label into the seed
//! (FNV-1a over the label bytes), so per-signature streams never shift when
//! other signatures are added to a schedule.

/// SplitMix64 generator with a single 64-bit state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// FNV-1a 64-bit hash; stable across platforms, used only for stream derivation.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Substream keyed by a string label (e.g. a signature id).
    pub fn substream(seed: u64, label: &str) -> Self {
        let mut rng = Rng::new(seed ^ fnv1a(label.as_bytes()));
        // One warm-up step decorrelates nearby seeds.
        rng.next_u64();
        rng
    }

    /// Substream keyed by numeric components (e.g. a sweep cell).
    pub fn substream_n(seed: u64, parts: &[u64]) -> Self {
        let mut s = seed;
        for &p in parts {
            s = Rng::new(s ^ p.wrapping_mul(GOLDEN_GAMMA)).next_u64();
        }
        Rng::new(s)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
    #[inline]
    pub fn range_usize(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
