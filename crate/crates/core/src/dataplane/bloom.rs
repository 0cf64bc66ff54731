use crate::simcore::mix64;

/// Bit-array bloom filter over 64-bit keys, using double hashing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomFilter {
    bits: Vec<u64>,
    m_bits: usize,
    hashes: u32,
    inserted: u64,
}

impl BloomFilter {
    pub fn new(m_bits: usize, hashes: u32) -> BloomFilter {
        let m_bits = m_bits.max(64);
        BloomFilter {
            bits: vec![0; m_bits.div_ceil(64)],
            m_bits,
            hashes: hashes.max(1),
            inserted: 0,
        }
    }

    pub fn m_bits(&self) -> usize {
        self.m_bits
    }

    pub fn hashes(&self) -> u32 {
        self.hashes
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    fn positions(&self, key: u64) -> impl Iterator<Item = usize> + '_ {
        let h1 = mix64(key);
        let h2 = mix64(h1 ^ 0x9e37_79b9_7f4a_7c15) | 1;
        (0..self.hashes as u64).map(move |i| (h1.wrapping_add(i.wrapping_mul(h2)) % self.m_bits as u64) as usize)
    }

    pub fn insert(&mut self, key: u64) {
        let pos: Vec<usize> = self.positions(key).collect();
        for p in pos {
            self.bits[p / 64] |= 1 << (p % 64);
        }
        self.inserted += 1;
    }

    pub fn contains(&self, key: u64) -> bool {
        self.positions(key).all(|p| self.bits[p / 64] & (1 << (p % 64)) != 0)
    }

    /// Textbook false-positive rate (1 − e^(−h·n/m))^h for the current fill.
    pub fn expected_fp_rate(&self) -> f64 {
        let h = self.hashes as f64;
        let exp = (-h * self.inserted as f64 / self.m_bits as f64).exp();
        (1.0 - exp).powf(h)
    }
}

impl Default for BloomFilter {
    fn default() -> Self {
        BloomFilter::new(1 << 16, 4)
    }
}
