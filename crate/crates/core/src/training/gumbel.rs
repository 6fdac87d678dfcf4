use crate::source::LogitModel;
use rand::Rng;

/// Relaxed and hard sample of one categorical draw.
#[derive(Clone, Debug, PartialEq)]
pub struct GumbelSample {
    pub soft: Vec<f64>,
    /// Index of the one-hot forward value.
    pub hard: usize,
}

impl GumbelSample {
    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.soft.len()];
        v[self.hard] = 1.0;
        v
    }
}

fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    -(-u.ln()).ln()
}

pub(crate) fn sample_with<R: Rng + ?Sized>(
    logits: &[f64],
    temperature: f64,
    rng: &mut R,
) -> GumbelSample {
    let z: Vec<f64> = logits
        .iter()
        .map(|l| (l + gumbel(rng)) / temperature)
        .collect();
    let hard = z
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > z[best] { i } else { best });
    let mut soft = vec![0.0; z.len()];
    crate::source::softmax_into(&z, &mut soft);
    GumbelSample { soft, hard }
}

/// `soft = softmax((logits + g) / τ)` with standard Gumbel noise `g`;
/// `hard = argmax soft`. The forward value is the one-hot of `hard`.
pub fn gumbel_softmax_sample(
    logits: &[f64],
    temperature: f64,
    seed: u64,
) -> crate::Result<GumbelSample> {
    if !(temperature > 0.0) {
        return Err(crate::Error::Domain("temperature must be positive".into()));
    }
    let mut rng = crate::rng::stream(seed, "gumbel");
    Ok(sample_with(logits, temperature, &mut rng))
}

/// Straight-through backward: the gradient with respect to the one-hot value
/// is passed to the soft sample, `∂/∂logits = (1/τ) s ⊙ (g - ⟨s, g⟩)`.
pub fn straight_through_backward(
    sample: &GumbelSample,
    temperature: f64,
    grad_one_hot: &[f64],
) -> Vec<f64> {
    let dot: f64 = sample
        .soft
        .iter()
        .zip(grad_one_hot)
        .map(|(s, g)| s * g)
        .sum();
    sample
        .soft
        .iter()
        .zip(grad_one_hot)
        .map(|(s, g)| s * (g - dot) / temperature)
        .collect()
}

/// Logits with independent normal entries of standard deviation `spread`.
pub fn random_logits(alphabet: usize, memory: usize, spread: f64, seed: u64) -> LogitModel {
    let mut rng = crate::rng::stream(seed, "init-logits");
    let mut m = LogitModel::zeros(alphabet, memory);
    for l in m.logits.iter_mut() {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        *l = spread * z;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_temperature_concentrates() {
        let logits = [0.1, 2.0, -1.0, 0.5];
        for seed in 0..20 {
            let s = gumbel_softmax_sample(&logits, 1e-4, seed).unwrap();
            assert!(s.soft[s.hard] > 1.0 - 1e-9);
            assert_eq!(s.one_hot().iter().sum::<f64>(), 1.0);
        }
        assert!(gumbel_softmax_sample(&logits, 0.0, 0).is_err());
    }

    #[test]
    fn equal_logits_uniform_frequencies() {
        let a = 5;
        let n = 50_000;
        let mut rng = crate::rng::rng_from_seed(1);
        let mut counts = vec![0usize; a];
        for _ in 0..n {
            counts[sample_with(&vec![0.3; a], 0.7, &mut rng).hard] += 1;
        }
        let p = 1.0 / a as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sd + 1.0);
        }
    }

    #[test]
    fn argmax_frequencies_follow_softmax() {
        let logits = [0.0, 1.0, -0.5];
        let mut p = vec![0.0; 3];
        crate::source::softmax_into(&logits, &mut p);
        let mut rng = crate::rng::rng_from_seed(2);
        let n = 60_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_with(&logits, 2.0, &mut rng).hard] += 1;
        }
        for (c, q) in counts.iter().zip(&p) {
            let sd = (n as f64 * q * (1.0 - q)).sqrt();
            assert!((*c as f64 - n as f64 * q).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn seeded_reproducible() {
        let l = [0.2, -0.3, 1.1];
        assert_eq!(
            gumbel_softmax_sample(&l, 0.5, 9).unwrap(),
            gumbel_softmax_sample(&l, 0.5, 9).unwrap()
        );
    }

    #[test]
    fn straight_through_matches_soft_jacobian() {
        // Two categories: the soft sample is a logistic function of the logit gap.
        let tau = 0.6;
        let s = gumbel_softmax_sample(&[0.4, -0.2], tau, 3).unwrap();
        assert!(s.one_hot().iter().all(|v| *v == 0.0 || *v == 1.0));
        let g = [1.5, -0.5];
        let st = straight_through_backward(&s, tau, &g);
        let s0 = s.soft[0];
        let ds0 = s0 * (1.0 - s0) / tau;
        assert!((st[0] - ds0 * (g[0] - g[1])).abs() < 1e-12);
        assert!((st[1] + ds0 * (g[0] - g[1])).abs() < 1e-12);
    }
}
