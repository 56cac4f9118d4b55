//! Labeled random-number substreams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! ChaCha stream id taken from a hash of the label. Streams with different
//! labels therefore never share keystream, and a stream's draws do not depend
//! on how many draws any other stream has made.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::SimError;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer; used to derive child seeds from a parent seed.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a seed from a parent seed and an ordinal, e.g. a replication index.
pub fn derive_seed(parent: u64, ordinal: u64) -> u64 {
    mix64(mix64(parent) ^ ordinal.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// `-ln(u) / rate`, the inverse-CDF transform for `u` in (0, 1].
pub fn exponential_from_uniform(u: f64, rate: f64) -> Result<f64, SimError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SimError::NonPositiveRate(rate));
    }
    // ln(1) is exactly 0; keep it from printing as -0.
    Ok((-u.ln() / rate).max(0.0))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    label: String,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(label_hash(&label));
        RngStream { label, rng }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on (0, 1] with 53 bits of resolution.
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64, SimError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SimError::NonPositiveRate(rate));
        }
        let u = self.uniform_open_closed();
        exponential_from_uniform(u, rate)
    }

    /// Uniform integer in `[0, k)`. Draws falling in the final partial block
    /// of the 64-bit range are rejected so every index has probability 1/k.
    pub fn uniform_index(&mut self, k: usize) -> Result<usize, SimError> {
        if k == 0 {
            return Err(SimError::ZeroRange);
        }
        let k = k as u64;
        let zone = u64::MAX - (u64::MAX % k);
        loop {
            let x = self.next_u64();
            if x < zone {
                return Ok((x % k) as usize);
            }
        }
    }
}
