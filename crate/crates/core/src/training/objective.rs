use super::gumbel::sample_with;
use super::pipeline::{eval_sequence, Env, TrainSetup};
use super::source_grad::{logit_gradient, SourceGrad, SourceState};
use super::train::Objective;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::source::{next_context, LogitModel};
use crate::C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Transmitted sequences with their relaxed samples and channel noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub length: usize,
    pub temperature: f64,
    /// Constellation point indices per sequence.
    pub tx: Vec<Vec<usize>>,
    /// Context index in force before each symbol.
    pub contexts: Vec<Vec<usize>>,
    /// Relaxed samples, `length × A` per sequence; empty when the batch was
    /// not drawn by Gumbel-Softmax.
    pub soft: Vec<Vec<f64>>,
    pub noise: Vec<Vec<C64>>,
    /// Sequence weights; uniform when `None`.
    pub weights: Option<Vec<f64>>,
}

impl Batch {
    /// Fixed sequences without relaxed samples (no sample-path gradient).
    pub fn from_sequences(
        tx: Vec<Vec<usize>>,
        noise: Vec<Vec<C64>>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let length = tx.first().map_or(0, |s| s.len());
        if tx.iter().any(|s| s.len() != length)
            || noise.len() != tx.len()
            || noise.iter().any(|n| n.len() != length)
        {
            return Err(Error::usage("ragged batch"));
        }
        if let Some(w) = &weights {
            if w.len() != tx.len() {
                return Err(Error::usage("weight count differs from batch size"));
            }
        }
        Ok(Self {
            length,
            temperature: 1.0,
            contexts: vec![Vec::new(); tx.len()],
            soft: vec![Vec::new(); tx.len()],
            tx,
            noise,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.tx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx.is_empty()
    }

    fn weight(&self, s: usize) -> f64 {
        self.weights
            .as_ref()
            .map_or(1.0 / self.tx.len() as f64, |w| w[s])
    }
}

/// Draws `batch` sequences by Gumbel-Softmax from the model, each started
/// from a stationary context, with uniform signs and surrogate noise.
pub fn sample_batch(
    model: &LogitModel,
    setup: &TrainSetup,
    batch: usize,
    length: usize,
    temperature: f64,
    seed: u64,
) -> Result<Batch> {
    if !(temperature > 0.0) {
        return Err(Error::domain("temperature must be positive"));
    }
    let state = SourceState::new(model)?;
    let a = model.alphabet;
    let s = state.contexts;
    let c = &setup.constellation;
    if c.amp_alphabet_size() != a {
        return Err(Error::usage(format!(
            "model alphabet {a} does not match constellation amplitude alphabet {}",
            c.amp_alphabet_size()
        )));
    }
    let sd = (0.5 * setup.surrogate.noise_variance).sqrt();
    let seqs = Execution::default().map(batch, |b| {
        let mut rng = crate::rng::indexed_stream(seed, "batch", b as u64);
        let u: f64 = rng.random();
        let mut ctx = {
            let mut acc = 0.0;
            let pi = &state.law.context_probs;
            pi.iter()
                .position(|p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or(s - 1)
        };
        let mut tx = Vec::with_capacity(length);
        let mut contexts = Vec::with_capacity(length);
        let mut soft = Vec::with_capacity(length * a);
        let mut noise = Vec::with_capacity(length);
        for _ in 0..length {
            let g = sample_with(&model.logits[ctx * a..(ctx + 1) * a], temperature, &mut rng);
            let quadrant = rng.random_range(0..4);
            contexts.push(ctx);
            tx.push(c.recompose(quadrant, g.hard));
            soft.extend_from_slice(&g.soft);
            ctx = next_context(ctx, g.hard, a, s);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            noise.push(C64::new(sd * re, sd * im));
        }
        (tx, contexts, soft, noise)
    });
    let mut out = Batch {
        length,
        temperature,
        tx: Vec::with_capacity(batch),
        contexts: Vec::with_capacity(batch),
        soft: Vec::with_capacity(batch),
        noise: Vec::with_capacity(batch),
        weights: None,
    };
    for (tx, ctx, soft, noise) in seqs {
        out.tx.push(tx);
        out.contexts.push(ctx);
        out.soft.push(soft);
        out.noise.push(noise);
    }
    Ok(out)
}

/// Terms of the objectives on one batch, bits per 2D symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    /// Value of the selected objective.
    pub objective: f64,
    /// `L = Σ_i E[BCE_i] - H(b)`.
    pub l: f64,
    pub bce: f64,
    /// `H(b)`, including the two sign bits.
    pub marginal_entropy: f64,
    pub r_bmd: f64,
    pub r_loss: f64,
    pub kl: f64,
    pub noise_var: f64,
    pub clamped: usize,
}

/// Evaluates the objective on a batch, and optionally its gradient with
/// respect to the logits. The value never depends on `with_grad`.
pub fn evaluate(
    batch: &Batch,
    model: &LogitModel,
    setup: &TrainSetup,
    objective: Objective,
    lambda: f64,
    with_grad: bool,
) -> Result<(LossBreakdown, Option<Vec<f64>>)> {
    let state = SourceState::new(model)?;
    let mut env = Env::new(setup, &state);
    let exec = Execution::default();
    let xs: Vec<Vec<C64>> = batch
        .tx
        .iter()
        .map(|s| s.iter().map(|&i| env.tx(i)).collect())
        .collect();
    let ys: Vec<Vec<C64>> = exec
        .map(batch.len(), |b| {
            setup.surrogate.propagate(&xs[b], &batch.noise[b])
        })
        .into_iter()
        .collect::<Result<_>>()?;

    if setup.demapper.derotate {
        let mut corr = C64::new(0.0, 0.0);
        for b in 0..batch.len() {
            let w = batch.weight(b);
            corr += xs[b]
                .iter()
                .zip(&ys[b])
                .map(|(x, y)| y * x.conj())
                .sum::<C64>()
                * w;
        }
        if corr.norm() > 0.0 {
            env.derot = (corr / corr.norm()).conj();
        }
    }
    if setup.demapper.noise_var.is_none() {
        let mut mse = 0.0;
        for b in 0..batch.len() {
            let w = batch.weight(b);
            mse += w * xs[b]
                .iter()
                .zip(&ys[b])
                .map(|(x, y)| (y * env.derot - x).norm_sqr())
                .sum::<f64>()
                / batch.length as f64;
        }
        env.sigma2 = mse.max(1e-9);
    }

    let evals = exec
        .map(batch.len(), |b| {
            eval_sequence(&env, &xs[b], &ys[b], &batch.tx[b], with_grad)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let t = batch.length as f64;
    let mut bce = 0.0;
    let mut clamped = 0;
    for (b, e) in evals.iter().enumerate() {
        bce += batch.weight(b) * e.loss / t;
        clamped += e.clamped;
    }
    let h_b = state.marginal_entropy() + 2.0;
    let l = bce - h_b;
    let r_loss = state.rate_loss();
    let kl = state.kl_to(&setup.mb_target);
    let value = match objective {
        Objective::L => l,
        Objective::Lpp => l + r_loss + lambda * kl,
    };
    let breakdown = LossBreakdown {
        objective: value,
        l,
        bce,
        marginal_entropy: h_b,
        r_bmd: h_b - bce,
        r_loss,
        kl,
        noise_var: env.sigma2,
        clamped,
    };
    if !with_grad {
        return Ok((breakdown, None));
    }

    let mut sg = SourceGrad::zeros(&state);
    for (b, e) in evals.iter().enumerate() {
        let w = batch.weight(b) / t;
        sg.marginal
            .iter_mut()
            .zip(&e.g_pbar)
            .for_each(|(g, x)| *g += w * x);
    }
    sg.add_marginal_entropy(&state, -1.0);
    if objective == Objective::Lpp {
        sg.add_rate_loss(&state, 1.0);
        sg.add_kl(&state, &setup.mb_target, lambda);
    }
    let mut grad = logit_gradient(&state, &sg)?;

    // Sample path: straight-through from x_t back to the relaxed samples. The
    // transmitted labels are targets and carry no gradient.
    let a = model.alphabet;
    let c = &setup.constellation;
    let st: Vec<Vec<f64>> = exec.map(batch.len(), |b| {
        let mut g = vec![0.0; model.logits.len()];
        if batch.soft[b].is_empty() {
            return g;
        }
        let w = batch.weight(b) / t;
        let tau = batch.temperature;
        let mut gs = vec![0.0; a];
        for (tt, gx) in evals[b].g_x.iter().enumerate() {
            let (quadrant, _) = c.decompose(batch.tx[b][tt]);
            for (k, gk) in gs.iter_mut().enumerate() {
                *gk = w * (gx.conj() * env.tx(c.recompose(quadrant, k))).re;
            }
            let soft = &batch.soft[b][tt * a..(tt + 1) * a];
            let dot: f64 = soft.iter().zip(&gs).map(|(s, g)| s * g).sum();
            let row = batch.contexts[b][tt] * a;
            for k in 0..a {
                g[row + k] += soft[k] * (gs[k] - dot) / tau;
            }
        }
        g
    });
    for g in &st {
        grad.iter_mut().zip(g).for_each(|(x, y)| *x += y);
    }
    Ok((breakdown, Some(grad)))
}

/// `L` on a batch.
pub fn loss_l(batch: &Batch, model: &LogitModel, setup: &TrainSetup) -> Result<f64> {
    Ok(evaluate(batch, model, setup, Objective::L, 0.0, false)?.0.l)
}

/// `L⁺⁺ = L + R_loss + λ KL(p̄ ‖ p_MB)` on a batch, with all terms.
pub fn loss_lpp(
    batch: &Batch,
    model: &LogitModel,
    setup: &TrainSetup,
    lambda: f64,
) -> Result<LossBreakdown> {
    Ok(evaluate(batch, model, setup, Objective::Lpp, lambda, false)?.0)
}
