//! Arithmetic distribution matching.
//!
//! The payload `u_1..u_n` is read as the binary fraction `z = 0.u_1..u_n 1`,
//! the midpoint of the dyadic interval `I_u` of width `2^-n`. Symbols are
//! produced by arithmetic *decoding* of `z` against the model's conditionals,
//! and production stops at the first symbol after which the interval of the
//! emitted sequence lies inside `I_u`. In the integer coder that is exactly
//! the moment the number of settled (emitted, non-pending) code bits reaches
//! `n`. The inverse runs an ordinary arithmetic encoder over the symbols and
//! keeps the first `n` settled bits.
//!
//! Intervals live in 63-bit registers; every conditional is floored at
//! `2^-20`, renormalised and quantised to 32-bit frequencies, so the
//! narrowest sub-interval after renormalisation is `2^41` wide.

use super::BitStream;
use crate::constellation::entropy_bits;
use crate::error::{Error, Result};
use crate::source::{
    context_index, context_symbols, next_context, rate_loss_with, stationary_law, ConditionalModel,
};

pub const FREQ_BITS: u32 = 32;
pub const PROB_FLOOR: f64 = 1.0 / (1u64 << 20) as f64;

const FREQ_TOTAL: u64 = 1 << FREQ_BITS;
const MIN_FREQ: u64 = FREQ_TOTAL >> 20;
const TOP: u64 = 1 << 63;
const HALF: u64 = 1 << 62;
const QUARTER: u64 = 1 << 61;

/// Floors, renormalises and quantises a distribution to cumulative counts
/// summing to `2^32`.
pub(crate) fn quantize(p: &[f64]) -> Vec<u64> {
    let floored: Vec<f64> = p.iter().map(|&x| x.max(PROB_FLOOR)).collect();
    let z: f64 = floored.iter().sum();
    let mut freq: Vec<u64> = floored
        .iter()
        .map(|&x| ((x / z * FREQ_TOTAL as f64).floor() as u64).max(MIN_FREQ))
        .collect();
    let big = freq
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let total: u64 = freq.iter().sum();
    if total <= FREQ_TOTAL {
        freq[big] += FREQ_TOTAL - total;
    } else {
        freq[big] -= total - FREQ_TOTAL;
    }
    let mut cum = Vec::with_capacity(p.len() + 1);
    cum.push(0);
    let mut acc = 0;
    for f in freq {
        acc += f;
        cum.push(acc);
    }
    cum
}

#[derive(Clone, Copy, Debug)]
struct Interval {
    low: u64,
    high: u64,
}

impl Interval {
    fn full() -> Self {
        Self {
            low: 0,
            high: TOP - 1,
        }
    }

    fn range(&self) -> u128 {
        (self.high - self.low) as u128 + 1
    }

    fn narrow(&mut self, cum_lo: u64, cum_hi: u64, position: usize) -> Result<()> {
        let r = self.range();
        let lo = self.low + ((r * cum_lo as u128) >> FREQ_BITS) as u64;
        let hi = self.low + ((r * cum_hi as u128) >> FREQ_BITS) as u64;
        if hi <= lo {
            return Err(Error::Coder {
                position,
                reason: "interval collapsed below register precision".into(),
            });
        }
        self.low = lo;
        self.high = hi - 1;
        Ok(())
    }

    /// Symbol whose sub-interval contains `value`.
    fn locate(&self, value: u64, cum: &[u64]) -> usize {
        let count = (((value - self.low) as u128 + 1) * FREQ_TOTAL as u128 - 1) / self.range();
        cum.partition_point(|&c| (c as u128) <= count) - 1
    }
}

/// One renormalisation step. `Some(Some(b))` settles bit `b` (plus pending),
/// `Some(None)` defers a bit, `None` means the interval is wide enough.
fn renorm_step(iv: &mut Interval) -> Option<(Option<u8>, u64)> {
    let (settled, shift) = if iv.high < HALF {
        (Some(0), 0)
    } else if iv.low >= HALF {
        (Some(1), HALF)
    } else if iv.low >= QUARTER && iv.high < HALF + QUARTER {
        (None, QUARTER)
    } else {
        return None;
    };
    iv.low = (iv.low - shift) << 1;
    iv.high = ((iv.high - shift) << 1) | 1;
    Some((settled, shift))
}

/// Fixed-precision ADM bound to one conditional model.
#[derive(Clone, Debug)]
pub struct AdmCoder {
    alphabet: usize,
    memory: usize,
    contexts: usize,
    cum: Vec<u64>,
    boot: Vec<u64>,
    marginal_entropy: f64,
    rate_loss_theory: f64,
}

impl AdmCoder {
    pub fn new(model: &dyn ConditionalModel) -> Result<Self> {
        let a = model.alphabet_size();
        let memory = model.memory();
        let contexts = model.context_count();
        let law = stationary_law(model)?;
        let mut row = vec![0.0; a];
        let mut cum = Vec::with_capacity(contexts * (a + 1));
        for c in 0..contexts {
            model.conditional_by_index(c, &mut row);
            cum.extend(quantize(&row));
        }
        let boot = if memory > 0 {
            quantize(&law.context_probs)
        } else {
            Vec::new()
        };
        Ok(Self {
            alphabet: a,
            memory,
            contexts,
            cum,
            boot,
            marginal_entropy: entropy_bits(&law.marginal),
            rate_loss_theory: rate_loss_with(model, &law),
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Entropy of the stationary marginal, bits per symbol.
    pub fn marginal_entropy(&self) -> f64 {
        self.marginal_entropy
    }

    /// Ideal-matcher rate loss of the underlying model, bits per symbol.
    pub fn rate_loss_theory(&self) -> f64 {
        self.rate_loss_theory
    }

    fn row(&self, ctx: usize) -> &[u64] {
        &self.cum[ctx * (self.alphabet + 1)..(ctx + 1) * (self.alphabet + 1)]
    }

    fn start_context(&self, context: Option<&[usize]>) -> Result<Option<usize>> {
        match context {
            Some(c) => {
                if c.len() != self.memory || c.iter().any(|&s| s >= self.alphabet) {
                    return Err(Error::usage("initial context has wrong length or symbols"));
                }
                Ok(Some(context_index(c, self.alphabet)))
            }
            None if self.memory == 0 => Ok(Some(0)),
            None => Ok(None),
        }
    }

    /// Maps `payload` to symbols; the first μ symbols are drawn from the
    /// stationary context law.
    pub fn encode(&self, payload: &BitStream) -> Result<Vec<usize>> {
        self.encode_after(payload, None)
    }

    /// Maps `payload` to symbols continuing from `context` (the last μ symbols
    /// already transmitted), or from the stationary law when `None`.
    pub fn encode_after(
        &self,
        payload: &BitStream,
        context: Option<&[usize]>,
    ) -> Result<Vec<usize>> {
        let n = payload.len();
        if n == 0 {
            return Err(Error::usage("ADM payload must be nonempty"));
        }
        let zbit = |i: usize| -> u64 {
            match i.cmp(&n) {
                std::cmp::Ordering::Less => payload.get(i) as u64,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Greater => 0,
            }
        };
        let mut iv = Interval::full();
        let mut value: u64 = (0..63).fold(0, |acc, i| (acc << 1) | zbit(i));
        let mut zpos = 63;
        let mut settled = 0usize;
        let mut pending = 0usize;
        let max_len = 64 * n + 4096;
        let mut out = Vec::with_capacity(n);

        let mut renorm = |iv: &mut Interval, value: &mut u64, settled: &mut usize| {
            while let Some((bit, shift)) = renorm_step(iv) {
                match bit {
                    Some(_) => {
                        *settled += 1 + pending;
                        pending = 0;
                    }
                    None => pending += 1,
                }
                *value = ((*value - shift) << 1) | zbit(zpos);
                zpos += 1;
            }
        };

        let mut ctx = match self.start_context(context)? {
            Some(c) => c,
            None => {
                let c = iv.locate(value, &self.boot);
                iv.narrow(self.boot[c], self.boot[c + 1], 0)?;
                out.extend(context_symbols(c, self.alphabet, self.memory));
                renorm(&mut iv, &mut value, &mut settled);
                c
            }
        };
        while settled < n {
            if out.len() >= max_len {
                return Err(Error::Coder {
                    position: out.len(),
                    reason: "output length guard exceeded".into(),
                });
            }
            let cum = self.row(ctx);
            let s = iv.locate(value, cum);
            iv.narrow(cum[s], cum[s + 1], out.len())?;
            out.push(s);
            ctx = next_context(ctx, s, self.alphabet, self.contexts);
            renorm(&mut iv, &mut value, &mut settled);
        }
        Ok(out)
    }

    pub fn decode(&self, symbols: &[usize], payload_length: usize) -> Result<BitStream> {
        self.decode_after(symbols, payload_length, None)
    }

    /// Recovers the payload. Fails if the stream ends before `payload_length`
    /// bits are settled, or continues after they are.
    pub fn decode_after(
        &self,
        symbols: &[usize],
        payload_length: usize,
        context: Option<&[usize]>,
    ) -> Result<BitStream> {
        let n = payload_length;
        if n == 0 {
            return Err(Error::usage("payload length must be positive"));
        }
        let mut iv = Interval::full();
        let mut bits = BitStream::default();
        let mut pending = 0usize;
        let mut renorm = |iv: &mut Interval, bits: &mut BitStream| {
            while let Some((bit, _)) = renorm_step(iv) {
                match bit {
                    Some(b) => {
                        bits.push(b);
                        (0..pending).for_each(|_| bits.push(1 - b));
                        pending = 0;
                    }
                    None => pending += 1,
                }
            }
        };
        if let Some(&bad) = symbols.iter().find(|&&s| s >= self.alphabet) {
            let position = symbols.iter().position(|&s| s == bad).unwrap_or(0);
            return Err(Error::Decode {
                position,
                reason: format!("symbol {bad} outside alphabet"),
            });
        }
        let (mut ctx, start) = match self.start_context(context)? {
            Some(c) => (c, 0),
            None => {
                if symbols.len() < self.memory {
                    return Err(Error::Decode {
                        position: symbols.len(),
                        reason: "stream shorter than the boot context".into(),
                    });
                }
                let c = context_index(&symbols[..self.memory], self.alphabet);
                iv.narrow(self.boot[c], self.boot[c + 1], 0)?;
                renorm(&mut iv, &mut bits);
                (c, self.memory)
            }
        };
        if bits.len() >= n && start < symbols.len() {
            return Err(Error::Decode {
                position: start,
                reason: "stream continues after the payload is determined".into(),
            });
        }
        for (i, &s) in symbols.iter().enumerate().skip(start) {
            let cum = self.row(ctx);
            iv.narrow(cum[s], cum[s + 1], i)?;
            ctx = next_context(ctx, s, self.alphabet, self.contexts);
            renorm(&mut iv, &mut bits);
            if bits.len() >= n && i + 1 < symbols.len() {
                return Err(Error::Decode {
                    position: i + 1,
                    reason: "stream continues after the payload is determined".into(),
                });
            }
        }
        if bits.len() < n {
            return Err(Error::Decode {
                position: symbols.len(),
                reason: format!("stream ends after {} of {n} payload bits", bits.len()),
            });
        }
        bits.truncate(n);
        Ok(bits)
    }
}

pub fn adm_encode(coder: &AdmCoder, payload: &BitStream) -> Result<Vec<usize>> {
    coder.encode(payload)
}

pub fn adm_decode(coder: &AdmCoder, symbols: &[usize], payload_length: usize) -> Result<BitStream> {
    coder.decode(symbols, payload_length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::source::{LogitModel, TableModel};

    fn mb_like(a: usize) -> TableModel {
        let p: Vec<f64> = (0..a).map(|i| (-0.3 * i as f64).exp()).collect();
        let z: f64 = p.iter().sum();
        TableModel::iid(&p.iter().map(|x| x / z).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn quantization_is_exact_and_floored() {
        let cum = quantize(&[1.0, 0.0, 0.0]);
        assert_eq!(*cum.last().unwrap(), FREQ_TOTAL);
        assert!(cum.windows(2).all(|w| w[1] - w[0] >= MIN_FREQ));
        let cum = quantize(&[0.5, 0.5]);
        assert_eq!(cum, vec![0, 1 << 31, 1 << 32]);
    }

    #[test]
    fn uniform_binary_adm_is_identity() {
        let coder = AdmCoder::new(&TableModel::uniform(2, 0)).unwrap();
        let mut r = rng::rng_from_seed(1);
        for n in [1, 7, 64, 300] {
            let p = BitStream::random(n, &mut r);
            let s = coder.encode(&p).unwrap();
            assert_eq!(s.len(), n);
            assert!(s.iter().zip(p.bits()).all(|(&a, &b)| a == b as usize));
            assert_eq!(coder.decode(&s, n).unwrap(), p);
        }
    }

    #[test]
    fn roundtrip_iid_and_memory_models() {
        let mut lm = LogitModel::zeros(4, 2);
        lm.logits
            .iter_mut()
            .enumerate()
            .for_each(|(i, l)| *l = ((i * 7919) % 13) as f64 * 0.4 - 2.0);
        let models = [mb_like(16), lm.to_table(), TableModel::uniform(3, 1)];
        let mut r = rng::rng_from_seed(2);
        for m in &models {
            let coder = AdmCoder::new(m).unwrap();
            for n in [1, 2, 5, 64, 257] {
                for _ in 0..50 {
                    let p = BitStream::random(n, &mut r);
                    let s = coder.encode(&p).unwrap();
                    assert_eq!(coder.decode(&s, n).unwrap(), p);
                }
            }
        }
    }

    #[test]
    fn chained_context_roundtrip() {
        let m = TableModel::new(2, 1, vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let coder = AdmCoder::new(&m).unwrap();
        let mut r = rng::rng_from_seed(3);
        let p = BitStream::random(100, &mut r);
        let s = coder.encode_after(&p, Some(&[1])).unwrap();
        assert_eq!(coder.decode_after(&s, 100, Some(&[1])).unwrap(), p);
    }

    #[test]
    fn truncated_or_extended_streams_are_rejected() {
        let coder = AdmCoder::new(&mb_like(8)).unwrap();
        let mut r = rng::rng_from_seed(4);
        let p = BitStream::random(128, &mut r);
        let s = coder.encode(&p).unwrap();
        assert!(matches!(
            coder.decode(&s[..s.len() - 1], 128),
            Err(Error::Decode { .. })
        ));
        let mut longer = s.clone();
        longer.push(0);
        assert!(matches!(
            coder.decode(&longer, 128),
            Err(Error::Decode { .. })
        ));
        assert!(matches!(coder.decode(&[9], 1), Err(Error::Decode { .. })));
        assert!(coder.encode(&BitStream::default()).is_err());
    }

    #[test]
    fn output_length_tracks_entropy() {
        let m = mb_like(16);
        let coder = AdmCoder::new(&m).unwrap();
        let h = coder.marginal_entropy();
        let mut r = rng::rng_from_seed(5);
        let n = 2048;
        let trials = 200;
        let total: usize = (0..trials)
            .map(|_| coder.encode(&BitStream::random(n, &mut r)).unwrap().len())
            .sum();
        let l_bar = total as f64 / trials as f64;
        assert!(l_bar > n as f64 / h, "{l_bar}");
        assert!(l_bar < n as f64 / h + 4.0, "{l_bar}");
    }
}
