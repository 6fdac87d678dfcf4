use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::C64;

/// Magnitude given to LLRs when one bit value has no prior mass.
pub const LLR_CLAMP: f64 = 50.0;

/// Per-symbol LLRs (natural log, positive favors bit 0) with the transmitted labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrFrame {
    /// Row-major `symbols × bits`.
    pub llrs: Vec<f64>,
    pub tx_labels: Vec<u32>,
    pub bits: usize,
    pub noise_variance_estimate: f64,
    /// Number of LLRs clamped because a bit value had zero prior mass.
    pub clamped: usize,
}

impl LlrFrame {
    pub fn len(&self) -> usize {
        self.tx_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tx_labels.is_empty()
    }

    pub fn symbol(&self, t: usize) -> &[f64] {
        &self.llrs[t * self.bits..(t + 1) * self.bits]
    }

    /// Transmitted bit at `level` (0 is the label MSB).
    pub fn tx_bit(&self, t: usize, level: usize) -> u8 {
        ((self.tx_labels[t] >> (self.bits - 1 - level)) & 1) as u8
    }
}

/// Constellation points rescaled to unit mean energy under `prior`.
pub fn shaped_points(c: &Constellation, prior: &[f64]) -> Vec<C64> {
    let e: f64 = prior
        .iter()
        .zip(c.points())
        .map(|(p, x)| p * x.norm_sqr())
        .sum();
    let k = 1.0 / e.sqrt();
    c.points().iter().map(|x| x * k).collect()
}

fn validate_prior(prior: &[f64], order: usize) -> Result<()> {
    if prior.len() != order {
        return Err(Error::usage(format!(
            "prior has {} entries for {order} points",
            prior.len()
        )));
    }
    if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0))
        || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::domain("prior is not a probability vector"));
    }
    Ok(())
}

/// Max-stabilized log-sum-exp over the metrics with a given bit value.
fn split_lse(metric: &[f64], labels: &[u32], shift: usize) -> (f64, f64) {
    let mut m = [f64::NEG_INFINITY; 2];
    for (d, l) in metric.iter().zip(labels) {
        let b = ((l >> shift) & 1) as usize;
        m[b] = m[b].max(*d);
    }
    let mut s = [0.0; 2];
    for (d, l) in metric.iter().zip(labels) {
        let b = ((l >> shift) & 1) as usize;
        if d.is_finite() {
            s[b] += (d - m[b]).exp();
        }
    }
    (m[0] + s[0].ln(), m[1] + s[1].ln())
}

/// LLRs for arbitrary points and labels.
pub fn demap_points(
    received: &[C64],
    points: &[C64],
    labels: &[u32],
    bits: usize,
    prior: &[f64],
    noise_var: f64,
) -> Result<(Vec<f64>, usize)> {
    if !(noise_var > 0.0) {
        return Err(Error::domain("noise variance must be positive"));
    }
    validate_prior(prior, points.len())?;
    let log_prior: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let mut llrs = Vec::with_capacity(received.len() * bits);
    let mut clamped = 0;
    let mut metric = vec![0.0; points.len()];
    for y in received {
        for ((m, c), lp) in metric.iter_mut().zip(points).zip(&log_prior) {
            *m = lp - (y - c).norm_sqr() / noise_var;
        }
        for level in 0..bits {
            let (l0, l1) = split_lse(&metric, labels, bits - 1 - level);
            let llr = match (l0.is_finite(), l1.is_finite()) {
                (true, true) => l0 - l1,
                (true, false) => {
                    clamped += 1;
                    LLR_CLAMP
                }
                (false, true) => {
                    clamped += 1;
                    -LLR_CLAMP
                }
                (false, false) => return Err(Error::domain("prior has no mass")),
            };
            llrs.push(llr);
        }
    }
    Ok((llrs, clamped))
}

/// Mismatched Gaussian demapper over the shaped constellation.
pub fn gaussian_demap(
    received: &[C64],
    tx_indices: &[usize],
    c: &Constellation,
    prior: &[f64],
    noise_var: f64,
) -> Result<LlrFrame> {
    if received.len() != tx_indices.len() {
        return Err(Error::usage("received and transmitted lengths differ"));
    }
    validate_prior(prior, c.order())?;
    let points = shaped_points(c, prior);
    let (llrs, clamped) = demap_points(
        received,
        &points,
        c.labels(),
        c.bits_per_symbol(),
        prior,
        noise_var,
    )?;
    Ok(LlrFrame {
        llrs,
        tx_labels: tx_indices.iter().map(|&i| c.label(i)).collect(),
        bits: c.bits_per_symbol(),
        noise_variance_estimate: noise_var,
        clamped,
    })
}

/// Pilot-free noise variance: mean squared distance to the nearest shaped point,
/// refined by expectation-maximization passes under the prior until the
/// relative change drops below 1e-6 (at most 200 passes).
pub fn estimate_noise_variance(received: &[C64], c: &Constellation, prior: &[f64]) -> Result<f64> {
    validate_prior(prior, c.order())?;
    if received.is_empty() {
        return Err(Error::domain("no received symbols"));
    }
    let points = shaped_points(c, prior);
    let n = received.len() as f64;
    let mut var = received
        .iter()
        .map(|y| {
            points
                .iter()
                .zip(prior)
                .filter(|(_, p)| **p > 0.0)
                .map(|(c, _)| (y - c).norm_sqr())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / n;
    var = var.max(1e-12);
    let log_prior: Vec<f64> = prior.iter().map(|p| p.ln()).collect();
    let mut d = vec![0.0; points.len()];
    for _ in 0..200 {
        let mut acc = 0.0;
        for y in received {
            let mut best = f64::NEG_INFINITY;
            for ((m, c), lp) in d.iter_mut().zip(&points).zip(&log_prior) {
                *m = lp - (y - c).norm_sqr() / var;
                best = best.max(*m);
            }
            let (mut num, mut den) = (0.0, 0.0);
            for (m, c) in d.iter().zip(&points) {
                let w = (m - best).exp();
                num += w * (y - c).norm_sqr();
                den += w;
            }
            acc += num / den;
        }
        let next = (acc / n).max(1e-12);
        let done = (next - var).abs() <= 1e-6 * var;
        var = next;
        if done {
            break;
        }
    }
    Ok(var)
}
