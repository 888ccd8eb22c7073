//! Named pseudo-random streams.
//!
//! Every consumer of randomness draws from its own stream, keyed by the
//! scenario seed, a stream name and an index. Streams never share state, so
//! adding draws to one subsystem cannot perturb another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::time::SimDuration;
use rand::Rng;
use serde::{Deserialize, Serialize};

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Builds the generator for `(seed, name, index)`.
pub fn stream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(seed) ^ fnv1a(name.as_bytes()));
    ChaCha8Rng::seed_from_u64(splitmix(key ^ index.wrapping_mul(0x2545_f491_4f6c_dd1d)))
}

/// Latency distributions the scripted operator may use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Latency {
    Constant(f64),
    Uniform([f64; 2]),
}

impl Latency {
    pub fn zero() -> Self {
        Latency::Constant(0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Latency::Constant(c) if c.is_finite() && c >= 0.0 => Ok(()),
            Latency::Uniform([lo, hi]) if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi => Ok(()),
            other => Err(format!("invalid latency {other:?}")),
        }
    }

    /// Draws one value. Constant latencies consume no randomness.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> SimDuration {
        match *self {
            Latency::Constant(c) => SimDuration::from_secs(c),
            Latency::Uniform([lo, hi]) if lo == hi => SimDuration::from_secs(lo),
            Latency::Uniform([lo, hi]) => SimDuration::from_secs(rng.gen_range(lo..=hi)),
        }
    }
}
