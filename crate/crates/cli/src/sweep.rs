//! AIR versus launch power: scheme → matcher → RRC → SSFM → CD compensation →
//! matched filter → static phase correction → Gaussian demapper → AIR.

use pas_core::channel::{transmit_ssfm, FiberConfig, PerturbationKernel};
use pas_core::constellation::{entropy_bits, Constellation};
use pas_core::matchers::{AdmCoder, BitStream, EssCoder};
use pas_core::metrics::{
    estimate_air, estimate_noise_variance, gaussian_demap, AirReport, RateLossSource, RateTerms,
};
use pas_core::par::Execution;
use pas_core::rng;
use pas_core::selection::{SelectionConfig, Selector};
use pas_core::source::TableModel;
use pas_core::C64;
use rand::Rng;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scheme {
    Uniform,
    Ess,
    EssSel,
    SeqNpas,
    SeqNpasPp,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Uniform,
        Scheme::Ess,
        Scheme::EssSel,
        Scheme::SeqNpas,
        Scheme::SeqNpasPp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Ess => "ess",
            Scheme::EssSel => "ess+sel",
            Scheme::SeqNpas => "seq-npas",
            Scheme::SeqNpasPp => "seq-npas++",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown scheme \"{s}\"")))
    }
}

/// Produces unsigned-symbol frames with a known marginal and rate accounting.
pub enum Source {
    Uniform {
        alphabet: usize,
    },
    Ess {
        coder: EssCoder,
    },
    EssSel {
        coder: EssCoder,
        selector: Box<Selector>,
    },
    Model {
        coder: AdmCoder,
        model: TableModel,
    },
}

impl Source {
    pub fn uniform(c: &Constellation) -> Self {
        Source::Uniform {
            alphabet: c.amp_alphabet_size(),
        }
    }

    pub fn ess(coder: EssCoder) -> Self {
        Source::Ess { coder }
    }

    pub fn ess_sel(
        coder: EssCoder,
        cfg: &SelectionConfig,
        c: &Constellation,
        kernel: &PerturbationKernel,
        seed: u64,
    ) -> CliResult<Self> {
        let selector = Selector::new(cfg, &coder, c, kernel, rng::derive_seed(seed, "selection"))?;
        Ok(Source::EssSel {
            coder,
            selector: Box::new(selector),
        })
    }

    pub fn model(model: TableModel) -> CliResult<Self> {
        Ok(Source::Model {
            coder: AdmCoder::new(&model)?,
            model,
        })
    }

    /// Frame lengths must be multiples of this.
    pub fn granularity(&self) -> usize {
        match self {
            Source::Uniform { .. } | Source::Model { .. } => 1,
            Source::Ess { coder } => coder.blocklength(),
            Source::EssSel { selector, .. } => selector.config().blocklength,
        }
    }

    /// Time-averaged marginal over unsigned symbols.
    pub fn marginal(&self, c: &Constellation) -> CliResult<Vec<f64>> {
        match self {
            Source::Uniform { alphabet } => Ok(vec![1.0 / *alphabet as f64; *alphabet]),
            Source::Ess { coder } | Source::EssSel { coder, .. } => {
                let p = coder.average_marginal();
                let l = c.levels_per_dim();
                Ok((0..c.amp_alphabet_size())
                    .map(|a| p[a / l] * p[a % l])
                    .collect())
            }
            Source::Model { model, .. } => Ok(pas_core::source::stationary_law(model)?.marginal),
        }
    }

    /// Marginal entropy and rate loss in bits per 2D symbol.
    pub fn rate_terms(&self, c: &Constellation) -> CliResult<RateTerms> {
        Ok(match self {
            Source::Uniform { alphabet } => RateTerms {
                marginal_entropy: (*alphabet as f64).log2() + 2.0,
                rate_loss: 0.0,
                source: RateLossSource::Theoretical,
            },
            Source::Ess { coder } => ess_terms(coder, c, 0.0),
            Source::EssSel { coder, selector } => {
                ess_terms(coder, c, selector.config().side_information_rate())
            }
            Source::Model { model, .. } => RateTerms::from_model(model)?,
        })
    }

    /// One frame of `n` unsigned symbols from a uniform random payload.
    pub fn frame(&self, c: &Constellation, n: usize, seed: u64) -> CliResult<Vec<usize>> {
        if n == 0 || !n.is_multiple_of(self.granularity()) {
            return Err(CliError::Config(format!(
                "frame length {n} is not a positive multiple of {}",
                self.granularity()
            )));
        }
        let mut r = rng::stream(seed, "payload");
        Ok(match self {
            Source::Uniform { alphabet } => (0..n).map(|_| r.random_range(0..*alphabet)).collect(),
            Source::Ess { coder } => {
                let bits = coder.iq_payload_bits(n)?;
                coder.encode_iq(&BitStream::random(bits, &mut r), c)?
            }
            Source::EssSel { selector, .. } => {
                let bits = selector.block_bits() * (n / selector.config().blocklength);
                selector
                    .select_frame(&BitStream::random(bits, &mut r), Execution::Sequential)?
                    .into_iter()
                    .flat_map(|s| s.symbols)
                    .collect()
            }
            Source::Model { coder, model } => {
                let rate = pas_core::source::entropy_rate(model)?.max(0.05);
                let mut out: Vec<usize> = Vec::with_capacity(n + 64);
                while out.len() < n {
                    let missing = n - out.len();
                    let bits = ((missing as f64 * rate * 1.02).ceil() as usize).max(64);
                    let payload = BitStream::random(bits, &mut r);
                    let context = out.len().checked_sub(coder.memory()).map(|s| &out[s..]);
                    let chunk = coder.encode_after(&payload, context)?;
                    out.extend(chunk);
                }
                out.truncate(n);
                out
            }
        })
    }
}

fn ess_terms(coder: &EssCoder, c: &Constellation, side_information: f64) -> RateTerms {
    let h1 = entropy_bits(&coder.average_marginal());
    debug_assert_eq!(coder.levels().len(), c.levels_per_dim());
    RateTerms {
        marginal_entropy: 2.0 * h1 + 2.0,
        rate_loss: 2.0 * (h1 - coder.rate()) + side_information,
        source: RateLossSource::Empirical,
    }
}

/// Measures one (scheme, power) point over `frames` frames.
///
/// Channel noise depends only on `(seed, power_index, frame)`, so all schemes
/// see the same ASE realizations at a given power.
#[allow(clippy::too_many_arguments)]
pub fn measure_point(
    source: &Source,
    scheme: Scheme,
    c: &Constellation,
    fiber: &FiberConfig,
    launch_power_dbm: f64,
    power_index: usize,
    symbols: usize,
    frames: usize,
    seed: u64,
) -> CliResult<AirReport> {
    let marginal = source.marginal(c)?;
    let prior = c.symbol_prior(&marginal);
    let kappa = c.normalization_for(&marginal);
    let terms = source.rate_terms(c)?;
    let mut llr_frames = Vec::with_capacity(frames);
    for f in 0..frames {
        let key = (power_index * frames + f) as u64;
        let unsigned = source.frame(
            c,
            symbols,
            rng::derive_indexed(seed, &format!("frame/{}", scheme.as_str()), key),
        )?;
        let mut signs = rng::indexed_stream(seed, "signs", key);
        let tx: Vec<usize> = unsigned
            .iter()
            .map(|&a| c.recompose(signs.random_range(0..4), a))
            .collect();
        let x: Vec<C64> = tx.iter().map(|&i| c.point(i) * kappa).collect();
        let y = transmit_ssfm(
            &x,
            fiber,
            launch_power_dbm,
            rng::derive_indexed(seed, "ase", key),
        )?;
        let y = derotate(&y, &x);
        let var = estimate_noise_variance(&y, c, &prior)?;
        llr_frames.push(gaussian_demap(&y, &tx, c, &prior, var)?);
    }
    Ok(estimate_air(
        &llr_frames,
        &terms,
        rng::derive_indexed(seed, "bootstrap", power_index as u64),
    ))
}

/// Removes the mean phase rotation `arg Σ y x*` (data-aided, one value per frame).
pub fn derotate(y: &[C64], x: &[C64]) -> Vec<C64> {
    let corr: C64 = y.iter().zip(x).map(|(a, b)| a * b.conj()).sum();
    let rot = if corr.norm() > 0.0 {
        (corr / corr.norm()).conj()
    } else {
        C64::new(1.0, 0.0)
    };
    y.iter().map(|v| v * rot).collect()
}

/// One CSV row of an AIR sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub launch_power_dbm: f64,
    pub report: AirReport,
    /// `(C, blocklength)` for the selection scheme.
    pub selection: Option<(usize, usize)>,
}

pub const SWEEP_CSV_HEADER: &str =
    "scheme,launch_power_dbm,R_bmd,R_loss,net_air,ci,seed,candidates,blocklength";

pub fn sweep_csv(rows: &[SweepRow], seed: u64) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (cands, block) = match r.selection {
            Some((c, b)) => (c.to_string(), b.to_string()),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{cands},{block}\n",
            r.report
                .csv_row(r.scheme.as_str(), r.launch_power_dbm, seed)
        ));
    }
    out
}

/// Runs every `(scheme, power)` pair as an independent task; rows come back
/// in scheme order, then power order. A failing scheme does not stop the
/// others; its error is returned next to the rows.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    sources: &[(Scheme, Source)],
    c: &Constellation,
    fiber: &FiberConfig,
    powers: &[f64],
    symbols: usize,
    frames: usize,
    seed: u64,
    exec: Execution,
) -> (Vec<SweepRow>, Vec<(Scheme, String)>) {
    let tasks: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|s| (0..powers.len()).map(move |p| (s, p)))
        .collect();
    let results = exec.map(tasks.len(), |i| {
        let (s, p) = tasks[i];
        let (scheme, source) = &sources[s];
        measure_point(
            source, *scheme, c, fiber, powers[p], p, symbols, frames, seed,
        )
    });
    let mut rows = Vec::new();
    let mut failures: Vec<(Scheme, String)> = Vec::new();
    for ((s, p), res) in tasks.into_iter().zip(results) {
        let (scheme, source) = &sources[s];
        match res {
            Ok(report) => rows.push(SweepRow {
                scheme: *scheme,
                launch_power_dbm: powers[p],
                report,
                selection: match source {
                    Source::EssSel { selector, .. } => {
                        Some((selector.config().candidates, selector.config().blocklength))
                    }
                    _ => None,
                },
            }),
            Err(e) => {
                if !failures.iter().any(|(f, _)| f == scheme) {
                    failures.push((*scheme, e.to_string()));
                }
            }
        }
    }
    (rows, failures)
}
