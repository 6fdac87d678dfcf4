use crate::constellation::entropy_bits;
use crate::error::{Error, Result};

/// Joint law over fixed-length blocks, read sequentially with the context
/// reset at every block boundary (the blockwise baseline).
#[derive(Clone, Debug)]
pub struct BlockModel {
    alphabet: usize,
    length: usize,
    joint: Vec<f64>,
}

impl BlockModel {
    /// `joint` is indexed by the block read as a base-`alphabet` number,
    /// first symbol most significant.
    pub fn new(alphabet: usize, length: usize, joint: Vec<f64>) -> Result<Self> {
        let n = alphabet
            .checked_pow(length as u32)
            .ok_or_else(|| Error::usage("block space overflows"))?;
        if joint.len() != n {
            return Err(Error::usage(format!(
                "joint has {} entries, expected {n}",
                joint.len()
            )));
        }
        let s: f64 = joint.iter().sum();
        if joint.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > 1e-10 {
            return Err(Error::domain("joint is not a probability vector"));
        }
        Ok(Self {
            alphabet,
            length,
            joint,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Law of the first `t` symbols.
    fn prefix_law(&self, t: usize) -> Vec<f64> {
        let tail = self.alphabet.pow((self.length - t) as u32);
        self.joint.chunks(tail).map(|c| c.iter().sum()).collect()
    }

    /// `p(a_t | a_1..a_{t-1})` for the prefix `prefix` (len t-1).
    pub fn conditional(&self, prefix: &[usize]) -> Vec<f64> {
        let t = prefix.len();
        let law = self.prefix_law(t + 1);
        let base = prefix.iter().fold(0, |acc, &s| acc * self.alphabet + s) * self.alphabet;
        let row = &law[base..base + self.alphabet];
        let z: f64 = row.iter().sum();
        if z == 0.0 {
            vec![1.0 / self.alphabet as f64; self.alphabet]
        } else {
            row.iter().map(|x| x / z).collect()
        }
    }

    /// Marginal law of position `t` (0-based).
    pub fn position_marginal(&self, t: usize) -> Vec<f64> {
        let a = self.alphabet;
        let tail = a.pow((self.length - t - 1) as u32);
        let mut m = vec![0.0; a];
        for (i, p) in self.joint.iter().enumerate() {
            m[(i / tail) % a] += p;
        }
        m
    }

    /// Block entropy through the chain rule of the sequential conditionals.
    pub fn block_entropy_sequential(&self) -> f64 {
        let a = self.alphabet;
        let mut h = 0.0;
        for t in 0..self.length {
            let prefix_law = self.prefix_law(t);
            for (idx, &w) in prefix_law.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let prefix = super::context_symbols(idx, a, t);
                h += w * entropy_bits(&self.conditional(&prefix));
            }
        }
        h
    }

    /// `(1/N) Σ_t H(a_t) - H(block)/N`, bits per symbol.
    pub fn rate_loss(&self) -> f64 {
        let n = self.length as f64;
        let marg: f64 = (0..self.length)
            .map(|t| entropy_bits(&self.position_marginal(t)))
            .sum();
        (marg - self.block_entropy_sequential()) / n
    }
}
