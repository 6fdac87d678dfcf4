//! Exact derivatives of stationary-law functionals of a table model.
//!
//! For an objective `J(p, π(p))` with `π` the stationary context law,
//! `π (I - P) = 0`, the adjoint `v` solves `(I - P) v = g - (π·g) 1` where
//! `g = ∂J/∂π`; the implicit part of `∂J/∂p(a|c)` is then `π(c) v(next(c, a))`.

use crate::constellation::entropy_bits;
use crate::error::{Error, Result};
use crate::source::{
    dense_rows, next_context, rate_loss_with, solve_dense, stationary_law, LogitModel,
    StationaryLaw, DENSE_LIMIT,
};
use std::f64::consts::LN_2;

/// Table probabilities of a logit model and their stationary law.
#[derive(Clone, Debug)]
pub struct SourceState {
    pub alphabet: usize,
    pub contexts: usize,
    /// Row-major `p(a|c)`.
    pub probs: Vec<f64>,
    pub law: StationaryLaw,
}

impl SourceState {
    pub fn new(model: &LogitModel) -> Result<Self> {
        let table = model.to_table();
        let law = stationary_law(&table)?;
        Ok(Self {
            alphabet: model.alphabet,
            contexts: model.context_count(),
            probs: dense_rows(&table),
            law,
        })
    }

    pub fn marginal(&self) -> &[f64] {
        &self.law.marginal
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.probs[c * self.alphabet..(c + 1) * self.alphabet]
    }

    /// `H(p̄)` in bits per unsigned symbol.
    pub fn marginal_entropy(&self) -> f64 {
        entropy_bits(&self.law.marginal)
    }

    pub fn rate_loss(&self) -> f64 {
        let table =
            crate::source::TableModel::new(self.alphabet, memory_of(self), self.probs.clone())
                .expect("softmax rows are normalized");
        rate_loss_with(&table, &self.law)
    }

    /// `KL(p̄ ‖ target)` in bits.
    pub fn kl_to(&self, target: &[f64]) -> f64 {
        self.law
            .marginal
            .iter()
            .zip(target)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, q)| p * (p / q).log2())
            .sum()
    }
}

fn memory_of(s: &SourceState) -> usize {
    let mut m = 0;
    let mut c = 1;
    while c < s.contexts {
        c *= s.alphabet;
        m += 1;
    }
    m
}

/// Sensitivities of an objective with respect to the source quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceGrad {
    /// `∂J/∂p̄(a)`.
    pub marginal: Vec<f64>,
    /// Extra `∂J/∂π(c)` not routed through the marginal.
    pub context: Vec<f64>,
    /// Explicit `∂J/∂p(a|c)` at fixed `π`.
    pub table: Vec<f64>,
}

impl SourceGrad {
    pub fn zeros(state: &SourceState) -> Self {
        Self {
            marginal: vec![0.0; state.alphabet],
            context: vec![0.0; state.contexts],
            table: vec![0.0; state.contexts * state.alphabet],
        }
    }

    /// Adds `w · ∂H(p̄)/∂·`.
    pub fn add_marginal_entropy(&mut self, state: &SourceState, w: f64) {
        for (g, p) in self.marginal.iter_mut().zip(state.marginal()) {
            *g += w * (-p.max(1e-300).log2() - 1.0 / LN_2);
        }
    }

    /// Adds `w · ∂R_loss/∂·` with `R_loss = H(p̄) - Σ_c π(c) H(p(·|c))`.
    pub fn add_rate_loss(&mut self, state: &SourceState, w: f64) {
        self.add_marginal_entropy(state, w);
        let a = state.alphabet;
        for c in 0..state.contexts {
            let row = state.row(c);
            self.context[c] -= w * entropy_bits(row);
            let pi = state.law.context_probs[c];
            for (k, p) in row.iter().enumerate() {
                self.table[c * a + k] += w * pi * (p.max(1e-300).log2() + 1.0 / LN_2);
            }
        }
    }

    /// Adds `w · ∂KL(p̄ ‖ target)/∂·` (bits).
    pub fn add_kl(&mut self, state: &SourceState, target: &[f64], w: f64) {
        for ((g, p), q) in self.marginal.iter_mut().zip(state.marginal()).zip(target) {
            *g += w * ((p.max(1e-300) / q).log2() + 1.0 / LN_2);
        }
    }
}

/// Total `∂J/∂p(a|c)`, including the implicit dependence through `π`.
pub fn table_gradient(state: &SourceState, grad: &SourceGrad) -> Result<Vec<f64>> {
    let a = state.alphabet;
    let s = state.contexts;
    let pi = &state.law.context_probs;
    let mut out = grad.table.clone();
    for c in 0..s {
        for k in 0..a {
            out[c * a + k] += pi[c] * grad.marginal[k];
        }
    }
    if s > 1 {
        let g: Vec<f64> = (0..s)
            .map(|c| {
                grad.context[c]
                    + state
                        .row(c)
                        .iter()
                        .zip(&grad.marginal)
                        .map(|(p, m)| p * m)
                        .sum::<f64>()
            })
            .collect();
        let v = adjoint(state, &g)?;
        for c in 0..s {
            for k in 0..a {
                out[c * a + k] += pi[c] * v[next_context(c, k, a, s)];
            }
        }
    }
    Ok(out)
}

fn adjoint(state: &SourceState, g: &[f64]) -> Result<Vec<f64>> {
    let a = state.alphabet;
    let s = state.contexts;
    let pi = &state.law.context_probs;
    let mean: f64 = pi.iter().zip(g).map(|(p, x)| p * x).sum();
    let h: Vec<f64> = g.iter().map(|x| x - mean).collect();
    if s <= DENSE_LIMIT {
        // (I - P + 1 π^T) v = h has the unique solution with π·v = 0.
        let mut m = vec![0.0; s * s];
        for c in 0..s {
            m[c * s + c] += 1.0;
            for (k, p) in state.row(c).iter().enumerate() {
                m[c * s + next_context(c, k, a, s)] -= p;
            }
            for (j, pj) in pi.iter().enumerate() {
                m[c * s + j] += pj;
            }
        }
        if let Some(v) = solve_dense(m, s, h.clone()) {
            return Ok(v);
        }
    }
    adjoint_neumann(state, h)
}

/// Neumann series `v = Σ Pⁿ h`, shifted so that `π·v = 0`.
fn adjoint_neumann(state: &SourceState, h: Vec<f64>) -> Result<Vec<f64>> {
    let a = state.alphabet;
    let s = state.contexts;
    let pi = &state.law.context_probs;
    let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut v = h.clone();
    let mut term = h;
    let mut next = vec![0.0; s];
    for _ in 0..200_000 {
        for c in 0..s {
            next[c] = state
                .row(c)
                .iter()
                .enumerate()
                .map(|(k, p)| p * term[next_context(c, k, a, s)])
                .sum();
        }
        std::mem::swap(&mut term, &mut next);
        let size = term.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v.iter_mut().zip(&term).for_each(|(x, t)| *x += t);
        if size < 1e-15 * scale {
            let shift: f64 = pi.iter().zip(&v).map(|(p, x)| p * x).sum();
            v.iter_mut().for_each(|x| *x -= shift);
            return Ok(v);
        }
    }
    Err(Error::Numerical {
        what: "stationary adjoint did not converge".into(),
        residual: f64::NAN,
    })
}

/// Chains a table gradient through the row softmax to the logits.
pub fn softmax_chain(state: &SourceState, table_grad: &[f64]) -> Vec<f64> {
    let a = state.alphabet;
    let mut out = vec![0.0; table_grad.len()];
    for c in 0..state.contexts {
        let row = state.row(c);
        let g = &table_grad[c * a..(c + 1) * a];
        let dot: f64 = row.iter().zip(g).map(|(p, x)| p * x).sum();
        for k in 0..a {
            out[c * a + k] = row[k] * (g[k] - dot);
        }
    }
    out
}

/// Gradient with respect to the logits of everything recorded in `grad`.
pub fn logit_gradient(state: &SourceState, grad: &SourceGrad) -> Result<Vec<f64>> {
    Ok(softmax_chain(state, &table_gradient(state, grad)?))
}
