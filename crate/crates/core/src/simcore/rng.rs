use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::SimError;

/// A named, independently seeded random stream.
///
/// The pair `(seed, label)` fully determines the sequence, so giving each
/// concern (ECMP salt, workload, attacker, coflow) its own label keeps a change
/// in one from perturbing the others.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    label: String,
    rng: ChaCha8Rng,
}

/// Distribution requested from [`RngStream::draw`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Draw {
    Uniform01,
    /// Integer in `[lo, hi)`.
    UniformInt { lo: u64, hi: u64 },
    Bernoulli(f64),
    /// Rate in events per unit; mean is `1 / rate`.
    Exponential(f64),
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// splitmix64 finalizer; used to combine seeds with labels.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let derived = mix64(seed ^ mix64(fnv1a(label.as_bytes())));
        RngStream {
            seed,
            label: label.to_string(),
            rng: ChaCha8Rng::seed_from_u64(derived),
        }
    }

    /// A sub-stream such as `"coflow/trial/17"`.
    pub fn child(&self, suffix: &str) -> Self {
        RngStream::new(self.seed, &format!("{}/{}", self.label, suffix))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_int(&mut self, lo: u64, hi: u64) -> Result<u64, SimError> {
        if lo >= hi {
            return Err(SimError::InvalidParameter(format!(
                "empty integer range [{lo}, {hi})"
            )));
        }
        Ok(self.rng.random_range(lo..hi))
    }

    /// Uniform index in `[0, n)`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.rng.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> Result<bool, SimError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::InvalidParameter(format!(
                "bernoulli probability {p} outside [0, 1]"
            )));
        }
        Ok(self.uniform01() < p)
    }

    pub fn exponential(&mut self, rate: f64) -> Result<f64, SimError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SimError::InvalidParameter(format!(
                "exponential rate {rate} must be positive and finite"
            )));
        }
        let exp = Exp::new(rate).map_err(|e| SimError::InvalidParameter(e.to_string()))?;
        Ok(exp.sample(&mut self.rng))
    }

    /// Single entry point covering every supported distribution.
    pub fn draw(&mut self, kind: Draw) -> Result<f64, SimError> {
        match kind {
            Draw::Uniform01 => Ok(self.uniform01()),
            Draw::UniformInt { lo, hi } => self.uniform_int(lo, hi).map(|v| v as f64),
            Draw::Bernoulli(p) => self.bernoulli(p).map(|b| if b { 1.0 } else { 0.0 }),
            Draw::Exponential(rate) => self.exponential(rate),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Raw generator, for algorithms from `rand` (index sampling, shuffles).
    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_label_reproduce() {
        let mut a = RngStream::new(7, "ecmp");
        let mut b = RngStream::new(7, "ecmp");
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn labels_give_distinct_streams() {
        let mut a = RngStream::new(7, "workload");
        let mut b = RngStream::new(7, "attacker");
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn bernoulli_extremes() {
        let mut r = RngStream::new(1, "t");
        for _ in 0..10_000 {
            assert!(!r.bernoulli(0.0).unwrap());
            assert!(r.bernoulli(1.0).unwrap());
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut r = RngStream::new(1, "t");
        assert!(r.bernoulli(1.5).is_err());
        assert!(r.bernoulli(-0.1).is_err());
        assert!(r.exponential(0.0).is_err());
        assert!(r.exponential(f64::NAN).is_err());
        assert!(r.uniform_int(5, 5).is_err());
        assert!(r.draw(Draw::Exponential(-2.0)).is_err());
    }

    #[test]
    fn exponential_mean_matches_rate() {
        // mean of 1e6 Exp(10/s) draws is 0.1 s; relative sd of the mean is 1e-3
        let mut r = RngStream::new(2024, "exp");
        let n = 1_000_000;
        let sum: f64 = (0..n).map(|_| r.exponential(10.0).unwrap()).sum();
        let mean = sum / n as f64;
        assert!((mean - 0.1).abs() <= 0.001, "mean {mean}");
    }

    #[test]
    fn uniform_int_stays_in_range() {
        let mut r = RngStream::new(3, "u");
        for _ in 0..1000 {
            let v = r.uniform_int(10, 13).unwrap();
            assert!((10..13).contains(&v));
        }
    }
}
