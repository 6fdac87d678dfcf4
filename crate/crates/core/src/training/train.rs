use super::objective::{evaluate, sample_batch};
use super::pipeline::TrainSetup;
use crate::error::{Error, Result};
use crate::source::LogitModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Adjusted cross-entropy only.
    L,
    /// Cross-entropy plus rate loss plus λ·KL to the MB target.
    Lpp,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::L => "L",
            Objective::Lpp => "L++",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub objective: Objective,
    pub lambda: f64,
    pub temperature_start: f64,
    pub temperature_end: f64,
    /// Sequences per step.
    pub batch: usize,
    pub sequence_length: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub steps: usize,
    pub seed: u64,
    pub launch_power_dbm: f64,
    /// Gradients with a larger Euclidean norm are rescaled to this norm.
    pub max_grad_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Lpp,
            lambda: 0.1,
            temperature_start: 1.0,
            temperature_end: 0.3,
            batch: 32,
            sequence_length: 256,
            learning_rate: 0.5,
            momentum: 0.9,
            steps: 300,
            seed: 1,
            launch_power_dbm: 3.0,
            max_grad_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature_start > 0.0 && self.temperature_end > 0.0) {
            return Err(Error::config("temperatures must be positive"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config("lambda must be finite and nonnegative"));
        }
        if self.batch == 0 || self.sequence_length == 0 || self.steps == 0 {
            return Err(Error::config(
                "batch, sequence_length and steps must be positive",
            ));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(
                "learning_rate must be positive and momentum in [0, 1)",
            ));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::config("max_grad_norm must be positive"));
        }
        Ok(())
    }

    /// Geometric schedule from `temperature_start` to `temperature_end`.
    pub fn temperature(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.temperature_start;
        }
        let f = step as f64 / (self.steps - 1) as f64;
        self.temperature_start * (self.temperature_end / self.temperature_start).powf(f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub temperature: f64,
    pub loss: f64,
    pub l: f64,
    pub r_bmd: f64,
    pub r_loss: f64,
    pub kl: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
    /// Reason the loop stopped early, if it did.
    pub aborted: Option<String>,
}

pub const TRACE_CSV_HEADER: &str = "step,temperature,loss,L,R_bmd,R_loss,KL,grad_norm";

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.6},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                r.step, r.temperature, r.loss, r.l, r.r_bmd, r.r_loss, r.kl, r.grad_norm
            ));
        }
        out
    }
}

/// Momentum gradient descent on the logits. A non-finite loss or gradient
/// stops the loop; the model from before that step is returned and the
/// trace records the reason.
pub fn train(
    cfg: &TrainConfig,
    model: LogitModel,
    setup: &TrainSetup,
) -> Result<(LogitModel, TrainTrace)> {
    cfg.validate()?;
    if (setup.surrogate.launch_power_dbm - cfg.launch_power_dbm).abs() > 1e-12 {
        return Err(Error::usage(
            "surrogate launch power differs from the training config",
        ));
    }
    let mut model = model;
    let mut velocity = vec![0.0; model.logits.len()];
    let mut trace = TrainTrace::default();
    for step in 0..cfg.steps {
        let tau = cfg.temperature(step);
        let seed = crate::rng::derive_indexed(cfg.seed, "train-step", step as u64);
        let batch = sample_batch(&model, setup, cfg.batch, cfg.sequence_length, tau, seed)?;
        let (loss, grad) = evaluate(&batch, &model, setup, cfg.objective, cfg.lambda, true)?;
        let mut grad = grad.expect("gradient requested");
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !loss.objective.is_finite() || !norm.is_finite() {
            trace.aborted = Some(format!("non-finite loss or gradient at step {step}"));
            break;
        }
        trace.records.push(TrainRecord {
            step,
            temperature: tau,
            loss: loss.objective,
            l: loss.l,
            r_bmd: loss.r_bmd,
            r_loss: loss.r_loss,
            kl: loss.kl,
            grad_norm: norm,
        });
        if norm > cfg.max_grad_norm {
            let s = cfg.max_grad_norm / norm;
            grad.iter_mut().for_each(|g| *g *= s);
        }
        for ((v, g), th) in velocity.iter_mut().zip(&grad).zip(model.logits.iter_mut()) {
            *v = cfg.momentum * *v - cfg.learning_rate * g;
            *th += *v;
        }
    }
    Ok((model, trace))
}
