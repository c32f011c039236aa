//! Counter-based random streams.
//!
//! A stream is identified by `(seed, stream_id)` and backed by ChaCha8, whose
//! output depends only on the key, the stream word and the block counter.
//! Two streams never share state, so draws are reproducible no matter how
//! work is scheduled across threads. Every non-uniform draw is built from
//! [`RandomStream::uniform01`].

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::normal::quantile_unchecked;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// A fresh stream keyed by this stream's identity and `salt`.
    ///
    /// Used to give independent purposes (data generation, fold splitting)
    /// their own streams for the same repetition index.
    pub fn derive(&self, salt: u64) -> RandomStream {
        let mixed = splitmix64(self.seed ^ splitmix64(salt));
        RandomStream::new(mixed, self.stream_id)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion of a uniform draw.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        quantile_unchecked(self.uniform01())
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform01() < p
    }

    /// Uniform integer in `0..bound` (bound > 0).
    #[inline]
    pub fn below(&mut self, bound: usize) -> usize {
        ((self.uniform01() * bound as f64) as usize).min(bound - 1)
    }

    pub fn uniforms(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.uniform01()).collect()
    }

    pub fn normals(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.standard_normal()).collect()
    }

    pub fn bernoullis(&mut self, p: f64, count: usize) -> Result<Vec<bool>> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("bernoulli probability {p} outside [0, 1]")));
        }
        Ok((0..count).map(|_| self.bernoulli(p)).collect())
    }

    /// Uniformly random permutation of `0..n` (Fisher–Yates).
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i + 1);
            out.swap(i, j);
        }
        out
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_identity_same_draws() {
        let a = RandomStream::new(42, 7).uniforms(100);
        let b = RandomStream::new(42, 7).uniforms(100);
        assert_eq!(a, b);
        let c = RandomStream::new(42, 8).uniforms(100);
        assert_ne!(a, c);
    }

    #[test]
    fn streams_do_not_interfere() {
        let mut a = RandomStream::new(1, 0);
        let mut b = RandomStream::new(1, 1);
        let interleaved: Vec<f64> = (0..50)
            .map(|_| {
                b.uniform01();
                a.uniform01()
            })
            .collect();
        assert_eq!(interleaved, RandomStream::new(1, 0).uniforms(50));
    }

    #[test]
    fn bernoulli_mean() {
        // 3σ for 10⁶ fair coin flips is 0.0015.
        let draws = RandomStream::new(9, 0).bernoullis(0.5, 1_000_000).unwrap();
        let mean = draws.iter().filter(|&&b| b).count() as f64 / draws.len() as f64;
        assert!((mean - 0.5).abs() < 0.002, "{mean}");
    }

    #[test]
    fn bernoulli_rejects_bad_probability() {
        assert!(RandomStream::new(0, 0).bernoullis(1.5, 3).is_err());
    }

    #[test]
    fn permutation_is_bijection() {
        let mut s = RandomStream::new(3, 3);
        for n in [0, 1, 2, 17, 1000] {
            let mut p = s.permutation(n);
            p.sort_unstable();
            assert_eq!(p, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn uniforms_stay_open() {
        let mut s = RandomStream::new(5, 0);
        assert!(s.uniforms(10_000).iter().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn normal_moments() {
        let z = RandomStream::new(11, 2).normals(200_000);
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let v = z.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (z.len() - 1) as f64;
        // 4σ bounds: mean sd 0.0022, variance sd 0.0032.
        assert!(m.abs() < 0.009, "{m}");
        assert!((v - 1.0).abs() < 0.013, "{v}");
    }

    #[test]
    fn derived_streams_differ() {
        let base = RandomStream::new(1, 4);
        let a = base.derive(1).uniforms(10);
        let b = base.derive(2).uniforms(10);
        assert_ne!(a, b);
        assert_eq!(base.derive(1).stream_id(), 4);
    }
}
