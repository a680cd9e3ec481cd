//! Seedable, platform-stable random streams.
//!
//! A stream is a ChaCha8 keystream keyed by `seed` and positioned on the
//! 64-bit ChaCha stream selector `stream_id`. Distinct stream ids give
//! non-overlapping keystreams, so replicates can be drawn in any order or
//! in parallel without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream identified by `index` under this stream.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019))),
        }
    }

    /// Child stream addressed by a path of indices, e.g. `(tag, realization, projection)`.
    pub fn derive(&self, path: &[u64]) -> Self {
        path.iter().fold(*self, |s, &i| s.substream(i))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
