//! Enumerative sphere shaping over odd-integer amplitude levels.
//!
//! `T(r, e)` counts length-`r` amplitude sequences with energy `Σ a² ≤ e`.
//! Indices `0..2^k` map to the `2^k` lexicographically smallest admissible
//! sequences (levels ordered by increasing amplitude), `k = ⌊log2 T(N, E_max)⌋`.

use super::BitStream;
use crate::constellation::{entropy_bits, Constellation};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EssCoder {
    blocklength: usize,
    levels: Vec<u32>,
    e_max: u64,
    /// `trellis[r * (e_max + 1) + e] = T(r, e)`.
    trellis: Vec<u128>,
    index_bits: usize,
}

pub fn ess_build(blocklength: usize, levels: &[u32], e_max: u64) -> Result<EssCoder> {
    EssCoder::new(blocklength, levels, e_max)
}

impl EssCoder {
    pub fn new(blocklength: usize, levels: &[u32], e_max: u64) -> Result<Self> {
        if blocklength == 0 {
            return Err(Error::domain("ESS blocklength must be at least 1"));
        }
        if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(
                "ESS levels must be nonempty and strictly increasing",
            ));
        }
        let min_e = blocklength as u64 * (levels[0] as u64).pow(2);
        if e_max < min_e {
            return Err(Error::domain(format!(
                "E_max {e_max} below minimum feasible energy {min_e}"
            )));
        }
        let width = e_max as usize + 1;
        let mut trellis = vec![0u128; (blocklength + 1) * width];
        trellis[..width].iter_mut().for_each(|t| *t = 1);
        for r in 1..=blocklength {
            for e in 0..width {
                let mut acc: u128 = 0;
                for &a in levels {
                    let ea = (a as usize) * (a as usize);
                    if ea <= e {
                        acc = acc
                            .checked_add(trellis[(r - 1) * width + e - ea])
                            .ok_or_else(|| Error::domain("ESS trellis count exceeds 128 bits"))?;
                    }
                }
                trellis[r * width + e] = acc;
            }
        }
        let total = trellis[blocklength * width + e_max as usize];
        let index_bits = 127 - total.leading_zeros() as usize;
        Ok(Self {
            blocklength,
            levels: levels.to_vec(),
            e_max,
            trellis,
            index_bits,
        })
    }

    pub fn blocklength(&self) -> usize {
        self.blocklength
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn e_max(&self) -> u64 {
        self.e_max
    }

    /// Index width `k`.
    pub fn index_bits(&self) -> usize {
        self.index_bits
    }

    /// `T(r, e)`; zero for negative energies.
    pub fn count(&self, remaining: usize, energy: i64) -> u128 {
        if energy < 0 {
            return 0;
        }
        let e = (energy as u64).min(self.e_max) as usize;
        self.trellis[remaining * (self.e_max as usize + 1) + e]
    }

    pub fn total(&self) -> u128 {
        self.count(self.blocklength, self.e_max as i64)
    }

    /// Shaping rate `k / N` in bits per amplitude.
    pub fn rate(&self) -> f64 {
        self.index_bits as f64 / self.blocklength as f64
    }

    fn energy(&self, level: usize) -> i64 {
        (self.levels[level] as i64).pow(2)
    }

    /// Lexicographic unranking of `index` to level indices.
    pub fn encode_index(&self, index: u128) -> Result<Vec<usize>> {
        if self.index_bits < 128 && index >> self.index_bits != 0 {
            return Err(Error::domain(format!(
                "ESS index {index} needs more than {} bits",
                self.index_bits
            )));
        }
        Ok(self.unrank(index))
    }

    fn unrank(&self, mut index: u128) -> Vec<usize> {
        let mut e = self.e_max as i64;
        let mut out = Vec::with_capacity(self.blocklength);
        for j in 0..self.blocklength {
            let rem = self.blocklength - j - 1;
            for lv in 0..self.levels.len() {
                let c = self.count(rem, e - self.energy(lv));
                if index < c {
                    out.push(lv);
                    e -= self.energy(lv);
                    break;
                }
                index -= c;
            }
        }
        out
    }

    pub fn encode(&self, index: &BitStream) -> Result<Vec<usize>> {
        if index.len() != self.index_bits {
            return Err(Error::usage(format!(
                "ESS index must have {} bits, got {}",
                self.index_bits,
                index.len()
            )));
        }
        self.encode_index(index.to_u128().unwrap_or(0))
    }

    /// Lexicographic rank of a level sequence.
    pub fn decode_index(&self, seq: &[usize]) -> Result<u128> {
        if seq.len() != self.blocklength || seq.iter().any(|&l| l >= self.levels.len()) {
            return Err(Error::usage("sequence has wrong length or level"));
        }
        let mut e = self.e_max as i64;
        let mut rank = 0u128;
        for (j, &lv) in seq.iter().enumerate() {
            let rem = self.blocklength - j - 1;
            for smaller in 0..lv {
                rank += self.count(rem, e - self.energy(smaller));
            }
            e -= self.energy(lv);
            if e < 0 {
                return Err(Error::domain("sequence exceeds the energy bound"));
            }
        }
        if self.index_bits < 128 && rank >> self.index_bits != 0 {
            return Err(Error::domain("sequence lies outside the indexed subset"));
        }
        Ok(rank)
    }

    pub fn decode(&self, seq: &[usize]) -> Result<BitStream> {
        Ok(BitStream::from_u128(
            self.decode_index(seq)?,
            self.index_bits,
        ))
    }

    pub fn sequence_energy(&self, seq: &[usize]) -> u64 {
        seq.iter().map(|&l| self.energy(l) as u64).sum()
    }

    /// Exact per-position level marginals over the `2^k` indexed sequences.
    ///
    /// The indexed set is a union of at most `N·|levels|` subtrees whose
    /// suffix is free up to a remaining energy budget; a free suffix of
    /// length `r` with budget `e` has level `b` at any fixed position in
    /// `T(r-1, e - b²)` of its members.
    pub fn position_marginals(&self) -> Vec<Vec<f64>> {
        let n = self.blocklength;
        let nl = self.levels.len();
        let mut counts = vec![vec![0u128; nl]; n];
        let bound: u128 = if self.index_bits >= 127 {
            u128::MAX
        } else {
            1u128 << self.index_bits
        };

        let mut add_subtree = |prefix: &[usize], level: usize, budget: i64| {
            let j = prefix.len();
            let rem = n - j - 1;
            let size = self.count(rem, budget);
            if size == 0 {
                return;
            }
            for (pos, &lv) in prefix.iter().enumerate() {
                counts[pos][lv] += size;
            }
            counts[j][level] += size;
            for row in counts.iter_mut().skip(j + 1) {
                for (b, slot) in row.iter_mut().enumerate() {
                    *slot += self.count(rem - 1, budget - self.energy(b));
                }
            }
        };

        if bound >= self.total() {
            for lv in 0..nl {
                add_subtree(&[], lv, self.e_max as i64 - self.energy(lv));
            }
        } else {
            // walk the path of rank 2^k; everything to its left is indexed
            let mut index = bound;
            let mut e = self.e_max as i64;
            let mut prefix = Vec::with_capacity(n);
            for j in 0..n {
                let rem = n - j - 1;
                for lv in 0..nl {
                    let budget = e - self.energy(lv);
                    let c = self.count(rem, budget);
                    if index < c {
                        prefix.push(lv);
                        e = budget;
                        break;
                    }
                    add_subtree(&prefix, lv, budget);
                    index -= c;
                }
            }
        }
        let total: f64 = 2f64.powi(self.index_bits as i32);
        counts
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64 / total).collect())
            .collect()
    }

    /// Mean over positions of the per-position amplitude entropy, bits.
    pub fn mean_position_entropy(&self) -> f64 {
        let m = self.position_marginals();
        m.iter().map(|p| entropy_bits(p)).sum::<f64>() / self.blocklength as f64
    }

    /// Position-averaged level marginal.
    pub fn average_marginal(&self) -> Vec<f64> {
        let m = self.position_marginals();
        let mut avg = vec![0.0; self.levels.len()];
        for row in &m {
            avg.iter_mut().zip(row).for_each(|(a, p)| *a += p);
        }
        avg.iter_mut().for_each(|a| *a /= self.blocklength as f64);
        avg
    }

    /// Rate loss `(1/N) Σ_j H(a_j) - k/N`, bits per amplitude.
    pub fn rate_loss(&self) -> f64 {
        self.mean_position_entropy() - self.rate()
    }

    /// Payload bits carried by `symbols` unsigned 2D symbols (I and Q streams).
    pub fn iq_payload_bits(&self, symbols: usize) -> Result<usize> {
        if symbols == 0 || !symbols.is_multiple_of(self.blocklength) {
            return Err(Error::usage(format!(
                "{symbols} symbols is not a positive multiple of the ESS blocklength {}",
                self.blocklength
            )));
        }
        Ok(2 * (symbols / self.blocklength) * self.index_bits)
    }

    fn check_levels(&self, c: &Constellation) -> Result<()> {
        if c.amp_levels_int() != self.levels {
            return Err(Error::config(
                "ESS levels do not match the constellation amplitudes",
            ));
        }
        Ok(())
    }

    /// Maps a payload to unsigned 2D symbols. The first half of the bits drives
    /// the in-phase amplitudes and the second half the quadrature amplitudes,
    /// each as concatenated independent ESS blocks.
    pub fn encode_iq(&self, payload: &BitStream, c: &Constellation) -> Result<Vec<usize>> {
        self.check_levels(c)?;
        let k = self.index_bits;
        if k == 0 || !payload.len().is_multiple_of(2 * k) || payload.is_empty() {
            return Err(Error::usage(format!(
                "payload of {} bits does not split into ESS blocks of {k} bits",
                payload.len()
            )));
        }
        let half = payload.len() / 2;
        let stream = |bits: &[u8]| -> Result<Vec<usize>> {
            let mut out = Vec::with_capacity(bits.len() / k * self.blocklength);
            for block in bits.chunks(k) {
                out.extend(self.encode(&BitStream::new(block.to_vec()))?);
            }
            Ok(out)
        };
        let i = stream(&payload.bits()[..half])?;
        let q = stream(&payload.bits()[half..])?;
        Ok(i.iter()
            .zip(&q)
            .map(|(&ki, &kq)| c.amp_index_from_pair(ki, kq))
            .collect())
    }

    /// Inverse of [`EssCoder::encode_iq`].
    pub fn decode_iq(&self, symbols: &[usize], c: &Constellation) -> Result<BitStream> {
        self.check_levels(c)?;
        self.iq_payload_bits(symbols.len())?;
        if symbols.iter().any(|&a| a >= c.amp_alphabet_size()) {
            return Err(Error::usage("unsigned symbol index out of range"));
        }
        let (i, q): (Vec<usize>, Vec<usize>) = symbols.iter().map(|&a| c.amp_pair(a)).unzip();
        let mut bits = Vec::new();
        for stream in [i, q] {
            for block in stream.chunks(self.blocklength) {
                bits.extend_from_slice(self.decode(block)?.bits());
            }
        }
        Ok(BitStream::new(bits))
    }
}

/// Result of scanning `E_max` for a target shaping rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssTarget {
    pub e_max: u64,
    pub index_bits: usize,
    pub rate: f64,
}

/// Scans every feasible `E_max` and returns the one whose rate `k/N` is
/// closest to `target` (smallest energy on ties).
pub fn ess_find_emax(blocklength: usize, levels: &[u32], target: f64) -> Result<EssTarget> {
    let lo = blocklength as u64 * (levels[0] as u64).pow(2);
    let hi = blocklength as u64 * (*levels.last().unwrap() as u64).pow(2);
    let full = EssCoder::new(blocklength, levels, hi)?;
    let mut best: Option<EssTarget> = None;
    for e in lo..=hi {
        let total = full.count(blocklength, e as i64);
        let k = 127 - total.leading_zeros() as usize;
        let rate = k as f64 / blocklength as f64;
        let better = match best {
            None => true,
            Some(b) => (rate - target).abs() < (b.rate - target).abs(),
        };
        if better {
            best = Some(EssTarget {
                e_max: e,
                index_bits: k,
                rate,
            });
        }
    }
    best.ok_or_else(|| Error::domain("no feasible E_max"))
}
