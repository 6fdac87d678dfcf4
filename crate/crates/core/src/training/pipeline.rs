//! Differentiable transmitter → surrogate channel → Gaussian demapper.

use super::source_grad::SourceState;
use crate::channel::{
    dbm_to_watts, nonlinear_term, nonlinear_term_backward, FiberConfig, PerturbationKernel,
};
use crate::constellation::Constellation;
use crate::error::Result;
use crate::metrics::bce_bits;
use crate::par::Execution;
use crate::C64;

/// Perturbation channel in normalized units: `y = x + jγP Δ(x) + n`.
#[derive(Clone, Debug)]
pub struct Surrogate {
    pub kernel: PerturbationKernel,
    pub launch_power_dbm: f64,
    /// Noise variance relative to the launch power.
    pub noise_variance: f64,
}

impl Surrogate {
    /// Noise from the link's ASE at the given launch power.
    pub fn from_fiber(
        cfg: &FiberConfig,
        kernel: PerturbationKernel,
        launch_power_dbm: f64,
    ) -> Self {
        let noise = if cfg.edfa && cfg.ase_noise {
            cfg.ase_power_in_band() / dbm_to_watts(launch_power_dbm)
        } else {
            0.0
        };
        Self {
            kernel,
            launch_power_dbm,
            noise_variance: noise,
        }
    }

    pub fn coefficient(&self) -> C64 {
        self.kernel
            .normalized_coefficient(dbm_to_watts(self.launch_power_dbm))
    }

    pub fn propagate(&self, x: &[C64], noise: &[C64]) -> Result<Vec<C64>> {
        let d = nonlinear_term(x, &self.kernel, Execution::Sequential)?;
        let k = self.coefficient();
        Ok(x.iter()
            .zip(&d)
            .zip(noise)
            .map(|((xi, di), ni)| xi + k * di + ni)
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemapperSettings {
    /// Fixed demapper variance; `None` uses the batch mean `|y - x|²`.
    pub noise_var: Option<f64>,
    /// Remove the batch-average phase rotation before demapping.
    pub derotate: bool,
}

impl Default for DemapperSettings {
    fn default() -> Self {
        Self {
            noise_var: None,
            derotate: true,
        }
    }
}

/// Everything the objective needs besides the model.
#[derive(Clone, Debug)]
pub struct TrainSetup {
    pub constellation: Constellation,
    pub surrogate: Surrogate,
    pub demapper: DemapperSettings,
    /// Maxwell–Boltzmann law over unsigned symbols.
    pub mb_target: Vec<f64>,
}

/// Quantities fixed during one evaluation (gradients treat σ² and the
/// derotation phase as constants).
pub(crate) struct Env<'a> {
    pub c: &'a Constellation,
    pub kernel: &'a PerturbationKernel,
    pub coeff: C64,
    pub kappa: f64,
    pub pbar: Vec<f64>,
    /// `log(p̄(a)/4)` per constellation point.
    pub log_prior: Vec<f64>,
    pub shaped: Vec<C64>,
    pub sigma2: f64,
    /// `e^{-jφ}` applied to received symbols.
    pub derot: C64,
}

impl<'a> Env<'a> {
    pub fn new(setup: &'a TrainSetup, state: &SourceState) -> Self {
        let c = &setup.constellation;
        let pbar = state.marginal().to_vec();
        let kappa = c.normalization_for(&pbar);
        let a = c.amp_alphabet_size();
        let log_prior = (0..c.order())
            .map(|i| (pbar[i % a].max(1e-300) / 4.0).ln())
            .collect();
        let shaped = c.points().iter().map(|p| p * kappa).collect();
        Self {
            c,
            kernel: &setup.surrogate.kernel,
            coeff: setup.surrogate.coefficient(),
            kappa,
            pbar,
            log_prior,
            shaped,
            sigma2: setup.demapper.noise_var.unwrap_or(1.0),
            derot: C64::new(1.0, 0.0),
        }
    }

    pub fn tx(&self, index: usize) -> C64 {
        self.shaped[index]
    }
}

/// Per-sequence value and gradients.
pub(crate) struct SeqEval {
    /// `Σ_t Σ_i BCE`, bits.
    pub loss: f64,
    pub clamped: usize,
    /// `∂loss/∂p̄` through the demapper prior and the power normalization.
    pub g_pbar: Vec<f64>,
    /// `∂loss/∂x_t`, complex convention `∂/∂Re + j ∂/∂Im`.
    pub g_x: Vec<C64>,
}

const LLR_LIMIT: f64 = 1e3;

/// Demapper loss of one symbol and its sensitivities to the received value,
/// the per-point log-prior and κ (through the demapper points).
fn symbol_loss(
    env: &Env,
    y: C64,
    label: u32,
    grad: bool,
    g_logp: &mut [f64],
    g_kappa: &mut f64,
) -> (f64, C64, bool) {
    let n = env.shaped.len();
    let bits = env.c.bits_per_symbol();
    let labels = env.c.labels();
    let mut d = [0.0f64; 256];
    let d = &mut d[..n];
    for ((di, q), lp) in d.iter_mut().zip(&env.shaped).zip(&env.log_prior) {
        *di = lp - (y - q).norm_sqr() / env.sigma2;
    }
    let mut loss = 0.0;
    let mut clamped = false;
    let mut g_d = [0.0f64; 256];
    let g_d = &mut g_d[..n];
    for level in 0..bits {
        let shift = bits - 1 - level;
        let mut m = [f64::NEG_INFINITY; 2];
        for (di, l) in d.iter().zip(labels) {
            let b = ((l >> shift) & 1) as usize;
            m[b] = m[b].max(*di);
        }
        let mut z = [0.0; 2];
        for (di, l) in d.iter().zip(labels) {
            let b = ((l >> shift) & 1) as usize;
            z[b] += (di - m[b]).exp();
        }
        let mut llr = (m[0] + z[0].ln()) - (m[1] + z[1].ln());
        let tx_bit = ((label >> shift) & 1) as u8;
        if !llr.is_finite() || llr.abs() > LLR_LIMIT {
            clamped = true;
            llr = if llr.is_nan() {
                0.0
            } else {
                llr.clamp(-LLR_LIMIT, LLR_LIMIT)
            };
            loss += bce_bits(llr, tx_bit);
            continue;
        }
        loss += bce_bits(llr, tx_bit);
        if grad {
            // d BCE / d llr = -(1-2b) σ(-(1-2b) llr) / ln 2
            let sgn = if tx_bit == 0 { 1.0 } else { -1.0 };
            let sig = 1.0 / (1.0 + (sgn * llr).exp());
            let dl = -sgn * sig / std::f64::consts::LN_2;
            for ((gd, di), l) in g_d.iter_mut().zip(d.iter()).zip(labels) {
                let b = ((l >> shift) & 1) as usize;
                let w = (di - m[b]).exp() / z[b];
                *gd += if b == 0 { dl * w } else { -dl * w };
            }
        }
    }
    let mut g_y = C64::new(0.0, 0.0);
    if grad {
        for i in 0..n {
            let r = (y - env.shaped[i]) * (2.0 / env.sigma2);
            g_y -= r * g_d[i];
            *g_kappa += g_d[i] * (r.conj() * env.c.points()[i]).re;
            g_logp[i] += g_d[i];
        }
    }
    (loss, g_y, clamped)
}

/// Evaluates one transmitted sequence given the received (pre-derotation)
/// symbols and the transmitted point indices.
pub(crate) fn eval_sequence(
    env: &Env,
    x: &[C64],
    y: &[C64],
    tx: &[usize],
    grad: bool,
) -> Result<SeqEval> {
    let n_pts = env.shaped.len();
    let mut g_logp = vec![0.0; n_pts];
    let mut g_kappa = 0.0;
    let mut g_y = vec![C64::new(0.0, 0.0); y.len()];
    let mut loss = 0.0;
    let mut clamped = 0;
    for t in 0..y.len() {
        let yd = y[t] * env.derot;
        let (l, gy, c) = symbol_loss(env, yd, env.c.label(tx[t]), grad, &mut g_logp, &mut g_kappa);
        loss += l;
        clamped += c as usize;
        g_y[t] = gy * env.derot.conj();
    }
    let a = env.c.amp_alphabet_size();
    let mut g_pbar = vec![0.0; a];
    let mut g_x = Vec::new();
    if grad {
        g_x = nonlinear_term_backward(x, env.kernel, env.coeff, &g_y)?;
        // x_t = κ z_t on the transmit side.
        for (t, g) in g_x.iter().enumerate() {
            g_kappa += (g.conj() * env.c.points()[tx[t]]).re;
        }
        for (i, g) in g_logp.iter().enumerate() {
            g_pbar[i % a] += g / env.pbar[i % a].max(1e-300);
        }
        let e = env.c.amp_energies();
        let k3 = env.kappa.powi(3);
        for (gp, ea) in g_pbar.iter_mut().zip(&e) {
            *gp += g_kappa * (-0.5 * k3 * ea);
        }
    }
    Ok(SeqEval {
        loss,
        clamped,
        g_pbar,
        g_x,
    })
}
