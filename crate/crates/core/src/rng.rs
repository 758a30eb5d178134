//! Named, reproducible random streams.
//!
//! Every run owns one stream per purpose (batch sampling, iterate selection,
//! data generation, ...). Each stream is a ChaCha8 generator keyed by the run
//! seed with the purpose as its stream id, so drawing more or fewer numbers
//! from one purpose never shifts another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Data,
    Batch,
    Tau,
    Direction,
    Probe,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Data => 1,
            Stream::Batch => 2,
            Stream::Tau => 3,
            Stream::Direction => 4,
            Stream::Probe => 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream.id());
        Rng { inner }
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Vector with i.i.d. N(0, 1) entries.
    pub fn normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.standard_normal()).collect()
    }

    /// Uniformly distributed direction on the unit sphere.
    pub fn unit_direction(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v = self.normal_vec(dim);
            let norm = crate::linalg::norm(&v);
            if norm > 0.0 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Derives the seed of replicate `index` from a base seed (splitmix64).
pub fn replicate_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The streams a solver run consumes.
#[derive(Clone, Debug)]
pub struct RunStreams {
    pub batch: Rng,
    pub tau: Rng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        RunStreams {
            batch: Rng::new(seed, Stream::Batch),
            tau: Rng::new(seed, Stream::Tau),
        }
    }
}
