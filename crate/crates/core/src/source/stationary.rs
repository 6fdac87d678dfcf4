use super::{context_index, next_context, ConditionalModel};
use crate::constellation::entropy_bits;
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng as _;

const TV_TOL: f64 = 1e-12;
const MAX_ITERS: usize = 200_000;
/// Context counts up to this size are solved directly.
pub(crate) const DENSE_LIMIT: usize = 256;

/// Stationary distribution of the context chain and the induced marginal.
#[derive(Clone, Debug)]
pub struct StationaryLaw {
    /// π over the `A^μ` contexts.
    pub context_probs: Vec<f64>,
    /// Marginal `p(a) = Σ_c π(c) p(a|c)`.
    pub marginal: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn dense_rows(model: &dyn ConditionalModel) -> Vec<f64> {
    let a = model.alphabet_size();
    let s = model.context_count();
    let mut rows = vec![0.0; s * a];
    for (c, row) in rows.chunks_mut(a).enumerate() {
        model.conditional_by_index(c, row);
    }
    rows
}

/// Pushes a context distribution one step through the chain.
pub(crate) fn push_forward(rows: &[f64], alphabet: usize, pi: &[f64], out: &mut [f64]) {
    let s = pi.len();
    out.iter_mut().for_each(|x| *x = 0.0);
    for (c, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = &rows[c * alphabet..(c + 1) * alphabet];
        for (sym, &p) in row.iter().enumerate() {
            out[next_context(c, sym, alphabet, s)] += w * p;
        }
    }
}

pub(crate) fn marginal_of(rows: &[f64], alphabet: usize, pi: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; alphabet];
    for (c, &w) in pi.iter().enumerate() {
        for (sym, &p) in rows[c * alphabet..(c + 1) * alphabet].iter().enumerate() {
            m[sym] += w * p;
        }
    }
    m
}

/// Solves `m x = rhs` (row-major `n × n`) by Gaussian elimination with partial
/// pivoting; `None` when the matrix is numerically singular.
pub(crate) fn solve_dense(mut m: Vec<f64>, n: usize, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv =
            (col..n).max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))?;
        if m[piv * n + col].abs() < 1e-13 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            rhs.swap(piv, col);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    m[r * n + k] -= f * m[col * n + k];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r * n + k] * x[k]).sum();
        x[r] = (rhs[r] - s) / m[r * n + r];
    }
    Some(x)
}

/// Direct solve of `π (I - P) = 0`, `Σ π = 1`.
fn stationary_direct(rows: &[f64], a: usize, s: usize) -> Option<Vec<f64>> {
    // Transposed system: row i holds the balance equation for context i.
    let mut m = vec![0.0; s * s];
    for i in 0..s {
        m[i * s + i] = 1.0;
    }
    for c in 0..s {
        for (sym, &p) in rows[c * a..(c + 1) * a].iter().enumerate() {
            let to = next_context(c, sym, a, s);
            m[to * s + c] -= p;
        }
    }
    m[(s - 1) * s..].iter_mut().for_each(|x| *x = 1.0);
    let mut rhs = vec![0.0; s];
    rhs[s - 1] = 1.0;
    let pi = solve_dense(m, s, rhs)?;
    if pi.iter().any(|&x| x < -1e-12 || !x.is_finite()) {
        return None;
    }
    let mut pi: Vec<f64> = pi.into_iter().map(|x| x.max(0.0)).collect();
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= z);
    let mut check = vec![0.0; s];
    push_forward(rows, a, &pi, &mut check);
    let tv = 0.5
        * pi.iter()
            .zip(&check)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>();
    (tv < TV_TOL).then_some(pi)
}

/// Fixed point of the context-transition operator: direct solve for small
/// context spaces, power iteration otherwise.
pub fn stationary_law(model: &dyn ConditionalModel) -> Result<StationaryLaw> {
    let a = model.alphabet_size();
    let rows = dense_rows(model);
    stationary_from_rows(&rows, a, model.context_count())
}

pub(crate) fn stationary_from_rows(rows: &[f64], a: usize, s: usize) -> Result<StationaryLaw> {
    if s == 1 {
        return Ok(StationaryLaw {
            context_probs: vec![1.0],
            marginal: rows.to_vec(),
            iterations: 0,
        });
    }
    if s <= DENSE_LIMIT {
        if let Some(pi) = stationary_direct(rows, a, s) {
            let marginal = marginal_of(rows, a, &pi);
            return Ok(StationaryLaw {
                context_probs: pi,
                marginal,
                iterations: 0,
            });
        }
    }
    stationary_power(rows, a, s)
}

fn stationary_power(rows: &[f64], a: usize, s: usize) -> Result<StationaryLaw> {
    let mut pi = vec![1.0 / s as f64; s];
    let mut next = vec![0.0; s];
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERS {
        push_forward(rows, a, &pi, &mut next);
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= z);
        residual = 0.5
            * pi.iter()
                .zip(&next)
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>();
        std::mem::swap(&mut pi, &mut next);
        if residual < TV_TOL {
            let marginal = marginal_of(rows, a, &pi);
            return Ok(StationaryLaw {
                context_probs: pi,
                marginal,
                iterations: it,
            });
        }
    }
    Err(Error::Numerical {
        what: format!("stationary law did not converge in {MAX_ITERS} iterations"),
        residual,
    })
}

/// Entropy rate in bits per symbol.
pub fn entropy_rate(model: &dyn ConditionalModel) -> Result<f64> {
    let law = stationary_law(model)?;
    Ok(entropy_rate_with(model, &law))
}

pub fn entropy_rate_with(model: &dyn ConditionalModel, law: &StationaryLaw) -> f64 {
    let a = model.alphabet_size();
    let mut row = vec![0.0; a];
    law.context_probs
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(c, &w)| {
            model.conditional_by_index(c, &mut row);
            w * entropy_bits(&row)
        })
        .sum()
}

/// Ideal-matcher rate loss `H(marginal) - entropy rate`, bits per unsigned symbol.
///
/// With uniform independent sign bits the loss over full labels is the same
/// number, since the signs add equal entropy to both terms.
pub fn rate_loss_theoretical(model: &dyn ConditionalModel) -> Result<f64> {
    let law = stationary_law(model)?;
    Ok(rate_loss_with(model, &law))
}

pub fn rate_loss_with(model: &dyn ConditionalModel, law: &StationaryLaw) -> f64 {
    entropy_bits(&law.marginal) - entropy_rate_with(model, law)
}

fn draw(rng: &mut rng::Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Ancestral sampling.
///
/// With `boot_context = Some(ctx)`, `ctx` is the history preceding the
/// output. With `None`, the first μ output symbols are drawn jointly from the
/// stationary context law so the sequence is stationary from its start.
pub fn sample_sequence(
    model: &dyn ConditionalModel,
    length: usize,
    seed: u64,
    boot_context: Option<&[usize]>,
) -> Result<Vec<usize>> {
    let a = model.alphabet_size();
    let mu = model.memory();
    let s = model.context_count();
    let mut rng = rng::rng_from_seed(seed);
    let mut out = Vec::with_capacity(length);
    let mut ctx = match boot_context {
        Some(c) => {
            if c.len() != mu || c.iter().any(|&x| x >= a) {
                return Err(Error::usage("boot context has wrong length or symbols"));
            }
            context_index(c, a)
        }
        None if mu == 0 => 0,
        None => {
            let law = stationary_law(model)?;
            let c = draw(&mut rng, &law.context_probs);
            out.extend(super::context_symbols(c, a, mu));
            c
        }
    };
    out.truncate(length);
    let mut row = vec![0.0; a];
    while out.len() < length {
        model.conditional_by_index(ctx, &mut row);
        let sym = draw(&mut rng, &row);
        out.push(sym);
        ctx = next_context(ctx, sym, a, s);
    }
    Ok(out)
}
