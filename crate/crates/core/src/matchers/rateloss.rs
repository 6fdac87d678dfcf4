use super::{AdmCoder, BitStream};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rng;

/// One point of an empirical ADM rate-loss sweep (bits per unsigned symbol).
#[derive(Clone, Debug, PartialEq)]
pub struct RateLossPoint {
    pub n: usize,
    /// Mean output length over the trials.
    pub l_bar: f64,
    /// `H(marginal) - n / L̄`.
    pub r_loss_adm: f64,
    /// Ideal-matcher rate loss of the model.
    pub r_loss_theory: f64,
    /// Standard error of `r_loss_adm` (delta method on `L̄`).
    pub std_err: f64,
    pub trials: usize,
}

pub fn measure_rate_loss_adm(
    coder: &AdmCoder,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<RateLossPoint> {
    measure_rate_loss_adm_with(coder, n, trials, seed, Execution::default())
}

/// Empirical ADM rate loss over `trials` uniform random payloads of `n` bits.
///
/// Trial `i` draws its payload from its own stream, so the result does not
/// depend on the execution mode.
pub fn measure_rate_loss_adm_with(
    coder: &AdmCoder,
    n: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<RateLossPoint> {
    if trials < 100 {
        return Err(Error::usage(
            "rate-loss measurement needs at least 100 trials",
        ));
    }
    let lengths = exec.map(trials, |i| -> Result<usize> {
        let mut r = rng::indexed_stream(seed, "adm-payload", i as u64);
        let payload = BitStream::random(n, &mut r);
        Ok(coder.encode(&payload)?.len())
    });
    let lengths: Vec<f64> = lengths
        .into_iter()
        .map(|l| l.map(|x| x as f64))
        .collect::<Result<_>>()?;
    let t = trials as f64;
    let l_bar = lengths.iter().sum::<f64>() / t;
    let var = lengths.iter().map(|l| (l - l_bar).powi(2)).sum::<f64>() / (t - 1.0);
    let se_l = (var / t).sqrt();
    Ok(RateLossPoint {
        n,
        l_bar,
        r_loss_adm: coder.marginal_entropy() - n as f64 / l_bar,
        r_loss_theory: coder.rate_loss_theory(),
        std_err: n as f64 / (l_bar * l_bar) * se_l,
        trials,
    })
}

/// CSV with columns `n,L_bar,R_loss_adm,R_loss_theory`.
pub fn rate_loss_csv(points: &[RateLossPoint]) -> String {
    let mut out = String::from("n,L_bar,R_loss_adm,R_loss_theory\n");
    for p in points {
        out.push_str(&format!(
            "{},{:.6},{:.8},{:.8}\n",
            p.n, p.l_bar, p.r_loss_adm, p.r_loss_theory
        ));
    }
    out
}
