use super::LlrFrame;
use crate::error::Result;
use crate::source::{rate_loss_with, stationary_law, ConditionalModel};
use rand::Rng;

/// Symbols per bootstrap block.
pub const BOOTSTRAP_BLOCK: usize = 64;
const BOOTSTRAP_RESAMPLES: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateLossSource {
    /// Ideal-matcher rate loss of the model (marginal entropy minus entropy rate).
    Theoretical,
    /// Rate loss measured on a finite-length matcher.
    Empirical,
}

impl RateLossSource {
    pub fn as_str(self) -> &'static str {
        match self {
            RateLossSource::Theoretical => "theoretical",
            RateLossSource::Empirical => "empirical",
        }
    }
}

/// Source-side terms of the rate, in bits per 2D symbol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateTerms {
    /// `H(b)`: label entropy of the per-symbol marginal (including the two sign bits).
    pub marginal_entropy: f64,
    pub rate_loss: f64,
    pub source: RateLossSource,
}

impl RateTerms {
    /// Terms of an unsigned-symbol model with uniform, independent signs.
    pub fn from_model(model: &dyn ConditionalModel) -> Result<Self> {
        let law = stationary_law(model)?;
        Ok(Self {
            marginal_entropy: crate::constellation::entropy_bits(&law.marginal) + 2.0,
            rate_loss: rate_loss_with(model, &law),
            source: RateLossSource::Theoretical,
        })
    }

    pub fn with_empirical(self, rate_loss: f64) -> Self {
        Self {
            rate_loss,
            source: RateLossSource::Empirical,
            ..self
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AirReport {
    pub marginal_entropy_bits_per_2d: f64,
    /// `Σ_i E[log2(1 + exp(-(1-2b_i) LLR_i))]`, bits per 2D symbol.
    pub conditional_entropy_sum: f64,
    pub r_bmd: f64,
    pub r_loss: f64,
    pub net_air: f64,
    pub confidence_halfwidth: f64,
    pub rate_loss_source: RateLossSource,
    pub symbols: usize,
    /// Fewer than 10⁴ symbols: the confidence interval is not reliable.
    pub low_confidence: bool,
}

/// Binary cross-entropy of one bit in bits, `log2(1 + exp(-(1-2b)·llr))`.
pub fn bce_bits(llr: f64, bit: u8) -> f64 {
    let x = if bit == 0 { -llr } else { llr };
    let sp = if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    };
    sp / std::f64::consts::LN_2
}

/// Monte Carlo bit-metric rate over all frames with a block bootstrap
/// confidence half-width (95%).
pub fn estimate_air(frames: &[LlrFrame], terms: &RateTerms, seed: u64) -> AirReport {
    let per_symbol: Vec<f64> = frames
        .iter()
        .flat_map(|f| {
            (0..f.len()).map(move |t| {
                f.symbol(t)
                    .iter()
                    .enumerate()
                    .map(|(i, l)| bce_bits(*l, f.tx_bit(t, i)))
                    .sum::<f64>()
            })
        })
        .collect();
    let n = per_symbol.len();
    let cond = if n == 0 {
        f64::NAN
    } else {
        per_symbol.iter().sum::<f64>() / n as f64
    };
    let r_bmd = terms.marginal_entropy - cond;
    let net_air = r_bmd - terms.rate_loss;
    assert!(
        !(net_air > terms.marginal_entropy - terms.rate_loss + 1e-12),
        "net AIR above the entropy bound"
    );
    AirReport {
        marginal_entropy_bits_per_2d: terms.marginal_entropy,
        conditional_entropy_sum: cond,
        r_bmd,
        r_loss: terms.rate_loss,
        net_air,
        confidence_halfwidth: bootstrap_halfwidth(&per_symbol, seed),
        rate_loss_source: terms.source,
        symbols: n,
        low_confidence: n < 10_000,
    }
}

fn bootstrap_halfwidth(values: &[f64], seed: u64) -> f64 {
    let blocks: Vec<(f64, usize)> = values
        .chunks(BOOTSTRAP_BLOCK)
        .map(|c| (c.iter().sum::<f64>(), c.len()))
        .collect();
    if blocks.len() < 2 {
        return f64::INFINITY;
    }
    let mut rng = crate::rng::stream(seed, "bootstrap");
    let means: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let (mut s, mut c) = (0.0, 0usize);
            for _ in 0..blocks.len() {
                let (bs, bc) = blocks[rng.random_range(0..blocks.len())];
                s += bs;
                c += bc;
            }
            s / c as f64
        })
        .collect();
    let mu = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    1.96 * var.sqrt()
}

pub fn results_csv_header() -> &'static str {
    "scheme,launch_power_dbm,R_bmd,R_loss,net_air,ci,seed"
}

impl AirReport {
    pub fn csv_row(&self, scheme: &str, launch_power_dbm: f64, seed: u64) -> String {
        format!(
            "{scheme},{launch_power_dbm:.2},{:.6},{:.6},{:.6},{:.6},{seed}",
            self.r_bmd, self.r_loss, self.net_air, self.confidence_halfwidth
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Constellation;
    use crate::metrics::gaussian_demap;
    use crate::source::TableModel;

    #[test]
    fn bce_is_stable_and_symmetric() {
        assert!((bce_bits(0.0, 0) - 1.0).abs() < 1e-15);
        assert!(bce_bits(800.0, 0) < 1e-300);
        assert!((bce_bits(-800.0, 0) - 800.0 / std::f64::consts::LN_2).abs() < 1e-9);
        assert_eq!(bce_bits(3.0, 1), bce_bits(-3.0, 0));
    }

    #[test]
    fn noiseless_channel_gives_full_entropy() {
        let c = Constellation::new(64).unwrap();
        let mut p = vec![0.0; 16];
        for (i, v) in p.iter_mut().enumerate() {
            *v = (1.0 + i as f64) / 136.0;
        }
        let model = TableModel::iid(&p).unwrap();
        let terms = RateTerms::from_model(&model).unwrap();
        let prior = c.symbol_prior(&p);
        let pts = super::super::shaped_points(&c, &prior);
        let idx: Vec<usize> = (0..640).map(|i| i % 64).collect();
        let y: Vec<_> = idx.iter().map(|&i| pts[i]).collect();
        let f = gaussian_demap(&y, &idx, &c, &prior, 1e-5).unwrap();
        let r = estimate_air(&[f], &terms, 1);
        assert!(r.conditional_entropy_sum < 1e-9);
        assert!((r.r_bmd - r.marginal_entropy_bits_per_2d).abs() < 1e-9);
        assert!((r.net_air - (r.r_bmd - r.r_loss)).abs() < 1e-15);
        assert!(r.r_loss.abs() < 1e-12);
        assert!(r.low_confidence);
    }

    #[test]
    fn empirical_flag_recorded() {
        let terms = RateTerms::from_model(&TableModel::uniform(16, 0))
            .unwrap()
            .with_empirical(0.1);
        assert_eq!(terms.source, RateLossSource::Empirical);
        assert!((terms.marginal_entropy - 6.0).abs() < 1e-12);
    }

    #[test]
    fn csv_row_format() {
        let r = AirReport {
            marginal_entropy_bits_per_2d: 6.0,
            conditional_entropy_sum: 1.0,
            r_bmd: 5.0,
            r_loss: 0.25,
            net_air: 4.75,
            confidence_halfwidth: 0.01,
            rate_loss_source: RateLossSource::Theoretical,
            symbols: 100,
            low_confidence: true,
        };
        assert_eq!(
            r.csv_row("ess", -2.0, 7),
            "ess,-2.00,5.000000,0.250000,4.750000,0.010000,7"
        );
    }
}
