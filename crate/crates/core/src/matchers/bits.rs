use crate::rng;
use rand::Rng as _;

/// Ordered binary payload. Each element is 0 or 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitStream {
    bits: Vec<u8>,
}

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    pub fn random(n: usize, rng: &mut rng::Rng) -> Self {
        Self {
            bits: (0..n).map(|_| rng.random::<bool>() as u8).collect(),
        }
    }

    /// `width` bits of `value`, most significant first.
    pub fn from_u128(value: u128, width: usize) -> Self {
        Self {
            bits: (0..width)
                .rev()
                .map(|i| {
                    if i >= 128 {
                        0
                    } else {
                        ((value >> i) & 1) as u8
                    }
                })
                .collect(),
        }
    }

    /// Interprets the stream as an unsigned integer, most significant first.
    pub fn to_u128(&self) -> Option<u128> {
        if self.bits.len() > 128 {
            return None;
        }
        Some(
            self.bits
                .iter()
                .fold(0u128, |acc, &b| (acc << 1) | b as u128),
        )
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn push(&mut self, b: u8) {
        self.bits.push(b & 1);
    }

    pub fn truncate(&mut self, n: usize) {
        self.bits.truncate(n);
    }
}

impl From<Vec<u8>> for BitStream {
    fn from(bits: Vec<u8>) -> Self {
        Self::new(bits)
    }
}
