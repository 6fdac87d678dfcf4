//! Finite-memory autoregressive sources over unsigned QAM symbols.
//!
//! A [`ConditionalModel`] gives `p(a_t | a_{t-μ}, ..., a_{t-1})` with the same
//! rule at every position. Contexts are addressed by a mixed-radix index with
//! the oldest symbol most significant, so appending a symbol maps context `c`
//! to `(c * A + a) mod A^μ`.

mod block;
mod io;
mod stationary;
mod table;

pub use block::BlockModel;
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub(crate) use stationary::{dense_rows, solve_dense, DENSE_LIMIT};
pub use stationary::{
    entropy_rate, entropy_rate_with, rate_loss_theoretical, rate_loss_with, sample_sequence,
    stationary_law, StationaryLaw,
};
pub(crate) use table::softmax_into;
pub use table::{LogitModel, TableModel};

use crate::error::{Error, Result};

/// Next-symbol law with finite context.
pub trait ConditionalModel: Send + Sync {
    fn alphabet_size(&self) -> usize;

    /// Conditioning memory μ.
    fn memory(&self) -> usize;

    /// Writes `p(· | context)` into `out` for a context given by its index.
    fn conditional_by_index(&self, context: usize, out: &mut [f64]);

    /// Number of distinct contexts, `A^μ`.
    fn context_count(&self) -> usize {
        self.alphabet_size().pow(self.memory() as u32)
    }

    fn next_distribution(&self, context: &[usize]) -> Result<Vec<f64>> {
        let a = self.alphabet_size();
        if context.len() != self.memory() {
            return Err(Error::usage(format!(
                "context length {} does not match memory {}",
                context.len(),
                self.memory()
            )));
        }
        if let Some(&bad) = context.iter().find(|&&s| s >= a) {
            return Err(Error::usage(format!(
                "context symbol {bad} outside alphabet {a}"
            )));
        }
        let mut out = vec![0.0; a];
        self.conditional_by_index(context_index(context, a), &mut out);
        Ok(out)
    }
}

/// Mixed-radix index of a context, oldest symbol first.
pub fn context_index(context: &[usize], alphabet: usize) -> usize {
    context.iter().fold(0, |acc, &s| acc * alphabet + s)
}

/// Inverse of [`context_index`].
pub fn context_symbols(mut index: usize, alphabet: usize, memory: usize) -> Vec<usize> {
    let mut out = vec![0; memory];
    for slot in out.iter_mut().rev() {
        *slot = index % alphabet;
        index /= alphabet;
    }
    out
}

/// Context reached after emitting `symbol` in context `index`.
#[inline]
pub fn next_context(index: usize, symbol: usize, alphabet: usize, context_count: usize) -> usize {
    if context_count == 1 {
        0
    } else {
        (index * alphabet + symbol) % context_count
    }
}
