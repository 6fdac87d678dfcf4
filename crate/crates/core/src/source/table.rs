use super::ConditionalModel;
use crate::error::{Error, Result};

/// Row-stochastic table over `A^μ` contexts.
#[derive(Clone, Debug, PartialEq)]
pub struct TableModel {
    alphabet: usize,
    memory: usize,
    probs: Vec<f64>,
}

impl TableModel {
    pub fn new(alphabet: usize, memory: usize, probs: Vec<f64>) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::usage("alphabet must have at least two symbols"));
        }
        let contexts = alphabet
            .checked_pow(memory as u32)
            .ok_or_else(|| Error::usage("context space overflows"))?;
        if probs.len() != contexts * alphabet {
            return Err(Error::usage(format!(
                "table has {} entries, expected {}",
                probs.len(),
                contexts * alphabet
            )));
        }
        for (c, row) in probs.chunks(alphabet).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (s - 1.0).abs() > 1e-10 {
                return Err(Error::domain(format!(
                    "row {c} is not a probability vector (sum {s})"
                )));
            }
        }
        Ok(Self {
            alphabet,
            memory,
            probs,
        })
    }

    /// Memoryless model with marginal `p`.
    pub fn iid(p: &[f64]) -> Result<Self> {
        Self::new(p.len(), 0, p.to_vec())
    }

    pub fn uniform(alphabet: usize, memory: usize) -> Self {
        let n = alphabet.pow(memory as u32) * alphabet;
        Self {
            alphabet,
            memory,
            probs: vec![1.0 / alphabet as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, context: usize) -> &[f64] {
        &self.probs[context * self.alphabet..(context + 1) * self.alphabet]
    }
}

impl ConditionalModel for TableModel {
    fn alphabet_size(&self) -> usize {
        self.alphabet
    }

    fn memory(&self) -> usize {
        self.memory
    }

    fn conditional_by_index(&self, context: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(context));
    }
}

/// Trainable table: logits of shape `A^μ × A`, probabilities by row softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitModel {
    pub alphabet: usize,
    pub memory: usize,
    pub logits: Vec<f64>,
}

impl LogitModel {
    pub fn zeros(alphabet: usize, memory: usize) -> Self {
        Self {
            alphabet,
            memory,
            logits: vec![0.0; alphabet.pow(memory as u32) * alphabet],
        }
    }

    /// Logits reproducing a memoryless marginal in every context.
    pub fn from_marginal(marginal: &[f64], memory: usize) -> Self {
        let a = marginal.len();
        let row: Vec<f64> = marginal.iter().map(|p| p.max(1e-300).ln()).collect();
        let contexts = a.pow(memory as u32);
        Self {
            alphabet: a,
            memory,
            logits: (0..contexts).flat_map(|_| row.iter().copied()).collect(),
        }
    }

    pub fn from_table(model: &TableModel) -> Self {
        Self {
            alphabet: model.alphabet,
            memory: model.memory,
            logits: model.probs.iter().map(|p| p.max(1e-300).ln()).collect(),
        }
    }

    pub fn context_count(&self) -> usize {
        self.alphabet.pow(self.memory as u32)
    }

    pub fn to_table(&self) -> TableModel {
        let mut probs = vec![0.0; self.logits.len()];
        for (row, out) in self
            .logits
            .chunks(self.alphabet)
            .zip(probs.chunks_mut(self.alphabet))
        {
            softmax_into(row, out);
        }
        TableModel {
            alphabet: self.alphabet,
            memory: self.memory,
            probs,
        }
    }
}

pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - m).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}
