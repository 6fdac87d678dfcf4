//! Finite-difference validation of the analytic gradients.
//!
//! The smoothed objective replaces Gumbel sampling by the exact expectation
//! over every symbol sequence of a tiny instance (fixed start context, fixed
//! sign and noise draws), so it is a smooth function of the logits. Its
//! gradient is the score-function term plus the exact pathwise terms through
//! the demapper, the channel and the stationary law.

use super::objective::{evaluate, Batch};
use super::pipeline::TrainSetup;
use super::source_grad::{logit_gradient, SourceGrad, SourceState};
use super::train::Objective;
use crate::error::{Error, Result};
use crate::source::{next_context, LogitModel};
use crate::C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub sequence_length: usize,
    pub lambda: f64,
    pub start_context: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            sequence_length: 6,
            lambda: 0.5,
            start_context: 0,
            step: 1e-5,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|numeric|, 1e-3·max|numeric|)` for the full objective.
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub rate_loss_rel_error: f64,
    pub kl_rel_error: f64,
    pub coordinates: usize,
    pub sequences: usize,
}

impl GradCheckReport {
    pub fn passes(&self, full_tol: f64, exact_tol: f64) -> bool {
        self.max_rel_error < full_tol
            && self.rate_loss_rel_error < exact_tol
            && self.kl_rel_error < exact_tol
    }
}

fn rel_errors(an: &[f64], num: &[f64]) -> (f64, usize) {
    let scale = num.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = (1e-3 * scale).max(1e-12);
    an.iter()
        .zip(num)
        .map(|(a, f)| (a - f).abs() / f.abs().max(floor))
        .enumerate()
        .fold(
            (0.0, 0),
            |(m, i), (j, e)| if e > m { (e, j) } else { (m, i) },
        )
}

fn central_difference<F: Fn(&LogitModel) -> Result<f64>>(
    model: &LogitModel,
    h: f64,
    f: F,
) -> Result<Vec<f64>> {
    (0..model.logits.len())
        .map(|i| {
            let mut p = model.clone();
            let mut m = model.clone();
            p.logits[i] += h;
            m.logits[i] -= h;
            Ok((f(&p)? - f(&m)?) / (2.0 * h))
        })
        .collect()
}

/// All amplitude sequences from the start context with fixed quadrants, weighted
/// by their model probability.
fn exhaustive_batch(
    model: &LogitModel,
    setup: &TrainSetup,
    cfg: &GradCheckConfig,
    quadrants: &[usize],
    noise: &[C64],
) -> Result<(Batch, Vec<Vec<usize>>)> {
    let state = SourceState::new(model)?;
    let a = model.alphabet;
    let t = cfg.sequence_length;
    let total = a.pow(t as u32);
    let mut tx = Vec::with_capacity(total);
    let mut amps_all = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for code in 0..total {
        let mut rem = code;
        let mut amps = vec![0; t];
        for slot in amps.iter_mut().rev() {
            *slot = rem % a;
            rem /= a;
        }
        let mut ctx = cfg.start_context;
        let mut w = 1.0;
        for &s in &amps {
            w *= state.row(ctx)[s];
            ctx = next_context(ctx, s, a, state.contexts);
        }
        tx.push(
            amps.iter()
                .zip(quadrants)
                .map(|(&s, &q)| setup.constellation.recompose(q, s))
                .collect(),
        );
        amps_all.push(amps);
        weights.push(w);
    }
    let batch = Batch::from_sequences(tx, vec![noise.to_vec(); total], Some(weights))?;
    Ok((batch, amps_all))
}

fn draws(setup: &TrainSetup, cfg: &GradCheckConfig) -> (Vec<usize>, Vec<C64>) {
    let mut rng = crate::rng::stream(cfg.seed, "gradcheck");
    let sd = (0.5 * setup.surrogate.noise_variance).sqrt();
    let q = (0..cfg.sequence_length)
        .map(|_| rng.random_range(0..4))
        .collect();
    let n = (0..cfg.sequence_length)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(sd * re, sd * im)
        })
        .collect();
    (q, n)
}

fn smoothed_value(
    model: &LogitModel,
    setup: &TrainSetup,
    cfg: &GradCheckConfig,
    q: &[usize],
    n: &[C64],
) -> Result<f64> {
    let (batch, _) = exhaustive_batch(model, setup, cfg, q, n)?;
    Ok(
        evaluate(&batch, model, setup, Objective::Lpp, cfg.lambda, false)?
            .0
            .objective,
    )
}

fn smoothed_gradient(
    model: &LogitModel,
    setup: &TrainSetup,
    cfg: &GradCheckConfig,
    q: &[usize],
    n: &[C64],
) -> Result<Vec<f64>> {
    let (batch, amps) = exhaustive_batch(model, setup, cfg, q, n)?;
    let (_, grad) = evaluate(&batch, model, setup, Objective::Lpp, cfg.lambda, true)?;
    let mut grad = grad.expect("gradient requested");
    // Score-function term: Σ_s w_s ℓ_s ∇ log w_s.
    let state = SourceState::new(model)?;
    let a = model.alphabet;
    let per_seq: Vec<f64> = (0..batch.len())
        .map(|s| {
            let single = Batch::from_sequences(
                vec![batch.tx[s].clone()],
                vec![batch.noise[s].clone()],
                Some(vec![1.0]),
            )?;
            let (lb, _) = evaluate(&single, model, setup, Objective::L, 0.0, false)?;
            Ok(lb.bce)
        })
        .collect::<Result<_>>()?;
    let weights = batch.weights.as_ref().expect("weighted batch");
    for (s, seq) in amps.iter().enumerate() {
        let coef = weights[s] * per_seq[s];
        let mut ctx = cfg.start_context;
        for &sym in seq {
            let row = state.row(ctx);
            for k in 0..a {
                let ind = if k == sym { 1.0 } else { 0.0 };
                grad[ctx * a + k] += coef * (ind - row[k]);
            }
            ctx = next_context(ctx, sym, a, state.contexts);
        }
    }
    Ok(grad)
}

/// Compares analytic and central finite-difference gradients of the rate
/// loss, the KL term and the full smoothed `L⁺⁺`.
///
/// The setup must fix the demapper variance and disable derotation, since
/// those are treated as constants by the analytic gradient.
pub fn gradient_check(
    model: &LogitModel,
    setup: &TrainSetup,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if model.alphabet > 4 || model.memory > 1 {
        return Err(Error::domain("gradient check needs A ≤ 4 and μ ≤ 1"));
    }
    if setup.demapper.noise_var.is_none() || setup.demapper.derotate {
        return Err(Error::usage(
            "gradient check needs a fixed demapper variance and no derotation",
        ));
    }
    if cfg.start_context >= model.context_count() {
        return Err(Error::usage("start context out of range"));
    }
    let h = cfg.step;
    let state = SourceState::new(model)?;

    let mut g = SourceGrad::zeros(&state);
    g.add_rate_loss(&state, 1.0);
    let an = logit_gradient(&state, &g)?;
    let num = central_difference(model, h, |m| Ok(SourceState::new(m)?.rate_loss()))?;
    let (rate_loss_rel_error, _) = rel_errors(&an, &num);

    let mut g = SourceGrad::zeros(&state);
    g.add_kl(&state, &setup.mb_target, 1.0);
    let an = logit_gradient(&state, &g)?;
    let num = central_difference(model, h, |m| {
        Ok(SourceState::new(m)?.kl_to(&setup.mb_target))
    })?;
    let (kl_rel_error, _) = rel_errors(&an, &num);

    let (q, n) = draws(setup, cfg);
    let an = smoothed_gradient(model, setup, cfg, &q, &n)?;
    let num = central_difference(model, h, |m| smoothed_value(m, setup, cfg, &q, &n))?;
    let (max_rel_error, worst_coordinate) = rel_errors(&an, &num);

    Ok(GradCheckReport {
        max_rel_error,
        worst_coordinate,
        rate_loss_rel_error,
        kl_rel_error,
        coordinates: model.logits.len(),
        sequences: model.alphabet.pow(cfg.sequence_length as u32),
    })
}
