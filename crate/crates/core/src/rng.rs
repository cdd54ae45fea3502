//! Deterministic pseudo-random streams for sample generation.
//!
//! SplitMix64 (Steele, Lea, Flood 2014) seeds and mixes; xoshiro256**
//! (Blackman, Vigna 2018) produces the streams. Both are implemented here
//! so that every shard is a pure function of `(master_seed, replication,
//! machine)` regardless of library versions, and replications can run in
//! parallel without shared state. Not cryptographic.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// One SplitMix64 step applied to `z`: a bijective 64-bit mixer.
fn mix64(z: u64) -> u64 {
    SplitMix64::new(z).next_u64()
}

/// Substream seed for machine `machine` in replication `rep`.
///
/// The chain of bijective mixes keeps distinct `(rep, machine)` pairs on
/// distinct streams for a fixed master seed:
/// `mix64(mix64(mix64(master) ^ rep) ^ machine)`.
pub fn substream_seed(master_seed: u64, rep: u64, machine: u64) -> u64 {
    mix64(mix64(mix64(master_seed) ^ rep) ^ machine)
}

/// xoshiro256** generator, state seeded from SplitMix64 as recommended by
/// its authors.
#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self {
            s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw on the open interval (0, 1) with 53 bits of mantissa.
    ///
    /// The grid value 0 would map to the lower endpoint of a tail quantile
    /// function (a zero observation), and the top value `1 - 2^-53` would map
    /// a Pareto(1) variable to 2^53; both are rejected and redrawn.
    pub fn next_uniform_open(&mut self) -> f64 {
        const MAX: u64 = (1 << 53) - 1;
        loop {
            let j = self.next_u64() >> 11;
            if j != 0 && j != MAX {
                return (j as f64) * (0.5f64).powi(53);
            }
        }
    }
}
