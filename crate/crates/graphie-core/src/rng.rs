//! Deterministic random streams.
//!
//! One xorshift64* generator per purpose, so that e.g. drawing extra
//! dropout masks never shifts parameter initialization. Stream states
//! are derived from the run seed with splitmix64, which also guarantees
//! a nonzero xorshift state.

/// What a stream is used for; each purpose gets an independent state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Init,
    Dropout,
    Shuffle,
    GraphRandom,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x494e4954,        // "INIT"
            Purpose::Dropout => 0x44524f50,     // "DROP"
            Purpose::Shuffle => 0x53485546,     // "SHUF"
            Purpose::GraphRandom => 0x47524150, // "GRAP"
        }
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// xorshift64* stream (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D).
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        Self::with_tags(seed, purpose, &[])
    }

    /// Derives a sub-stream, e.g. per (epoch) or per (split, unit).
    pub fn with_tags(seed: u64, purpose: Purpose, tags: &[u64]) -> Self {
        let mut s = splitmix64(seed ^ purpose.tag());
        for &t in tags {
            s = splitmix64(s ^ t);
        }
        if s == 0 {
            s = 0x9e3779b97f4a7c15; // xorshift state must be nonzero
        }
        Stream { state: s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Modulo bias is negligible for the
    /// desk-scale ranges used here.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Stream::new(7, Purpose::Init);
        let mut b = Stream::new(7, Purpose::Init);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn purposes_are_independent() {
        let mut a = Stream::new(7, Purpose::Init);
        let mut b = Stream::new(7, Purpose::Dropout);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut s = Stream::new(3, Purpose::Init);
        for _ in 0..1000 {
            let v = s.uniform(-0.05, 0.05);
            assert!((-0.05..0.05).contains(&v));
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut s = Stream::new(11, Purpose::Shuffle);
        let mut xs: Vec<usize> = (0..20).collect();
        s.shuffle(&mut xs);
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn tagged_streams_differ() {
        let mut a = Stream::with_tags(7, Purpose::Shuffle, &[0]);
        let mut b = Stream::with_tags(7, Purpose::Shuffle, &[1]);
        assert_ne!(a.next_u64(), b.next_u64());
    }
}
