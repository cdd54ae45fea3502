//! Small numeric helpers shared across the crate: exact decimal round-trips
//! for `f64` and compensated summation.

/// Formats a float with 17 significant digits, the minimal decimal length
/// that round-trips every IEEE double exactly through [`parse17`].
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{x:.16e}")
}

/// Parses a decimal float previously written by [`fmt17`] (or any decimal
/// accepted by Rust's correctly rounded `f64` parser).
pub fn parse17(s: &str) -> Result<f64, std::num::ParseFloatError> {
    s.parse::<f64>()
}

/// Neumaier-compensated summation. Used wherever a documented, order-fixed
/// reduction has to stay reproducible and accurate (aggregation over
/// machines, Monte Carlo moments).
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator in its iteration order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// 64-bit FNV-1a over a byte string. Stable across runs and platforms;
/// used to fingerprint experiment configurations.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
