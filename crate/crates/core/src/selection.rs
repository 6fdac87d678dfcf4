//! Sequence selection on top of ESS.
//!
//! One ESS output per block is scrambled into `C` candidates by fixed,
//! seed-derived position permutations (candidate 0 is the identity). Symbols
//! only move within their own ESS block, so every candidate keeps the
//! composition and energy of each ESS block and only the temporal order differs.
//! The candidate with the smallest predicted nonlinear interference is sent
//! and its index costs `log2(C)` bits per block of side information.
//!
//! The score is a kernel proxy, not the additive-multiplicative metric from the
//! literature: the mean of `E|Δ_t|²` over the block, where `Δ` is the
//! first-order perturbation term and the expectation runs over the uniform,
//! independent I and Q signs of every symbol.

use rand::seq::SliceRandom;

use crate::channel::PerturbationKernel;
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::matchers::{BitStream, EssCoder};
use crate::par::Execution;
use crate::rng;
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SelectionMetric {
    /// Sign-averaged first-order perturbation power.
    #[default]
    NlinProxy,
    /// Every candidate scores zero, so candidate 0 is always sent.
    Constant,
}

impl SelectionMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMetric::NlinProxy => "nlin-proxy",
            SelectionMetric::Constant => "constant",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nlin-proxy" => Ok(SelectionMetric::NlinProxy),
            "constant" => Ok(SelectionMetric::Constant),
            other => Err(Error::config(format!("unknown selection metric '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionConfig {
    /// Selection block length in 2D symbols.
    pub blocklength: usize,
    /// Candidate count `C`, a power of two.
    pub candidates: usize,
    pub metric: SelectionMetric,
    /// Kernel memory used for scoring (the kernel is truncated to it).
    pub metric_memory: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            blocklength: 64,
            candidates: 16,
            metric: SelectionMetric::NlinProxy,
            metric_memory: 6,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates < 2 || !self.candidates.is_power_of_two() {
            return Err(Error::config(format!(
                "candidate count {} must be a power of two and at least 2",
                self.candidates
            )));
        }
        if self.candidates > 64 {
            return Err(Error::config("more than 64 candidates is not supported"));
        }
        if self.blocklength <= 2 * self.metric_memory {
            return Err(Error::config(format!(
                "selection blocklength {} must exceed twice the metric memory {}",
                self.blocklength, self.metric_memory
            )));
        }
        Ok(())
    }

    /// Side information `log2(C) / blocklength`, bits per 2D symbol.
    pub fn side_information_rate(&self) -> f64 {
        (self.candidates as f64).log2() / self.blocklength as f64
    }
}

/// Sign-averaged first-order perturbation power of an unsigned block.
///
/// `block` holds first-quadrant points `a + jb`; each transmitted symbol is
/// `±a ± jb` with independent uniform signs. With cyclic indexing,
/// `Δ_t = Σ_{k,l} C[k,l] x_{t+k} x_{t+l} x*_{t+k+l}` is multilinear in the sign
/// variables, so `E|Δ_t|²` is the sum of its squared Walsh coefficients.
/// Returns the mean over `t`. Panics if the block is not longer than twice the
/// kernel memory.
pub fn nlin_metric(block: &[C64], kernel: &PerturbationKernel) -> f64 {
    let n = block.len();
    assert!(
        n > 2 * kernel.k_mem(),
        "block of length {n} too short for kernel memory {}",
        kernel.k_mem()
    );
    let km = kernel.k_mem() as isize;
    let w = kernel.width();
    let coeffs = kernel.coeffs();
    let j = C64::new(0.0, 1.0);
    let pos = |i: isize| i.rem_euclid(n as isize) as usize;
    // Sign variable 2p is the in-phase sign of symbol p, 2p + 1 the quadrature one.
    let factors = |p: usize, conj: bool| {
        let b = if conj { -j } else { j } * block[p].im;
        [(C64::new(block[p].re, 0.0), 2 * p), (b, 2 * p + 1)]
    };

    let mut terms: Vec<(u64, C64)> = Vec::with_capacity(8 * w * w);
    let mut total = 0.0;
    for t in 0..n as isize {
        terms.clear();
        for k in -km..=km {
            let fp = factors(pos(t + k), false);
            for l in -km..=km {
                let c = coeffs[((k + km) as usize) * w + (l + km) as usize];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let fq = factors(pos(t + l), false);
                let fr = factors(pos(t + k + l), true);
                for &(vp, ip) in &fp {
                    for &(vq, iq) in &fq {
                        for &(vr, ir) in &fr {
                            terms.push((monomial(ip, iq, ir), c * vp * vq * vr));
                        }
                    }
                }
            }
        }
        terms.sort_unstable_by_key(|&(key, _)| key);
        let mut i = 0;
        while i < terms.len() {
            let key = terms[i].0;
            let mut acc = C64::new(0.0, 0.0);
            while i < terms.len() && terms[i].0 == key {
                acc += terms[i].1;
                i += 1;
            }
            total += acc.norm_sqr();
        }
    }
    total / n as f64
}

/// Canonical key of a product of three sign variables, using `s² = 1`.
fn monomial(a: usize, b: usize, c: usize) -> u64 {
    let mut v = [a as u64, b as u64, c as u64];
    v.sort_unstable();
    let odd: &[u64] = if v[0] == v[1] {
        &v[2..]
    } else if v[1] == v[2] {
        &v[..1]
    } else {
        &v
    };
    odd.iter()
        .enumerate()
        .fold(0, |key, (slot, &id)| key | (id + 1) << (21 * slot))
}

/// Position permutation of candidate `index`, shuffling each window of
/// `window` positions independently; candidate 0 is the identity.
pub fn candidate_permutation(
    blocklength: usize,
    window: usize,
    index: usize,
    seed: u64,
) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..blocklength).collect();
    if index > 0 {
        let mut r = rng::indexed_stream(seed, "selection-candidate", index as u64);
        perm.chunks_mut(window.max(1))
            .for_each(|w| w.shuffle(&mut r));
    }
    perm
}

/// Outcome of selecting one block.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Transmitted unsigned symbols.
    pub symbols: Vec<usize>,
    pub candidate: usize,
    /// Metric of every candidate, in candidate order.
    pub metrics: Vec<f64>,
}

impl Selection {
    pub fn selected_metric(&self) -> f64 {
        self.metrics[self.candidate]
    }
}

/// Scrambler and scorer shared by all blocks of one configuration.
#[derive(Clone, Debug)]
pub struct Selector {
    cfg: SelectionConfig,
    perms: Vec<Vec<usize>>,
    kernel: PerturbationKernel,
    constellation: Constellation,
    coder: EssCoder,
}

impl Selector {
    pub fn new(
        cfg: &SelectionConfig,
        coder: &EssCoder,
        constellation: &Constellation,
        kernel: &PerturbationKernel,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        coder.iq_payload_bits(cfg.blocklength)?;
        let perms = (0..cfg.candidates)
            .map(|i| candidate_permutation(cfg.blocklength, coder.blocklength(), i, seed))
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            perms,
            kernel: kernel.truncated(cfg.metric_memory),
            constellation: constellation.clone(),
            coder: coder.clone(),
        })
    }

    pub fn config(&self) -> &SelectionConfig {
        &self.cfg
    }

    /// Payload bits per selection block.
    pub fn block_bits(&self) -> usize {
        self.coder
            .iq_payload_bits(self.cfg.blocklength)
            .unwrap_or(0)
    }

    pub fn score(&self, symbols: &[usize]) -> f64 {
        match self.cfg.metric {
            SelectionMetric::Constant => 0.0,
            SelectionMetric::NlinProxy => {
                let block: Vec<C64> = symbols
                    .iter()
                    .map(|&a| self.constellation.amp_point(a))
                    .collect();
                nlin_metric(&block, &self.kernel)
            }
        }
    }

    fn candidate(&self, base: &[usize], index: usize) -> Vec<usize> {
        self.perms[index].iter().map(|&p| base[p]).collect()
    }

    /// Encodes one block of payload and keeps the lowest-scoring candidate
    /// (lowest index on ties).
    pub fn select(&self, payload: &BitStream, exec: Execution) -> Result<Selection> {
        if payload.len() != self.block_bits() {
            return Err(Error::usage(format!(
                "selection block takes {} payload bits, got {}",
                self.block_bits(),
                payload.len()
            )));
        }
        let base = self.coder.encode_iq(payload, &self.constellation)?;
        let metrics = exec.map(self.cfg.candidates, |i| {
            self.score(&self.candidate(&base, i))
        });
        let candidate =
            metrics
                .iter()
                .enumerate()
                .fold(0, |best, (i, &m)| if m < metrics[best] { i } else { best });
        Ok(Selection {
            symbols: self.candidate(&base, candidate),
            candidate,
            metrics,
        })
    }

    /// Undoes the scrambling of a received block and decodes its payload.
    pub fn deselect(&self, symbols: &[usize], candidate: usize) -> Result<BitStream> {
        if symbols.len() != self.cfg.blocklength || candidate >= self.cfg.candidates {
            return Err(Error::usage("block length or candidate index out of range"));
        }
        let mut base = vec![0; symbols.len()];
        for (j, &p) in self.perms[candidate].iter().enumerate() {
            base[p] = symbols[j];
        }
        self.coder.decode_iq(&base, &self.constellation)
    }

    /// Selects every block of a payload spanning whole blocks. Blocks run
    /// concurrently; candidates within a block are scored in order.
    pub fn select_frame(&self, payload: &BitStream, exec: Execution) -> Result<Vec<Selection>> {
        let bits = self.block_bits();
        if payload.is_empty() || !payload.len().is_multiple_of(bits) {
            return Err(Error::usage(format!(
                "payload of {} bits is not a whole number of {bits}-bit blocks",
                payload.len()
            )));
        }
        let blocks: Vec<&[u8]> = payload.bits().chunks(bits).collect();
        exec.map(blocks.len(), |b| {
            self.select(&BitStream::new(blocks[b].to_vec()), Execution::Sequential)
        })
        .into_iter()
        .collect()
    }
}

/// Selects one block: builds the candidates from `payload` and returns the one
/// with the smallest metric.
pub fn select_sequence(
    payload: &BitStream,
    cfg: &SelectionConfig,
    coder: &EssCoder,
    constellation: &Constellation,
    kernel: &PerturbationKernel,
    seed: u64,
) -> Result<Selection> {
    Selector::new(cfg, coder, constellation, kernel, seed)?.select(payload, Execution::default())
}
