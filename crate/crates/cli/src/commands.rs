use std::path::{Path, PathBuf};

use pas_core::channel::{kernel_from_fiber_with, PerturbationKernel};
use pas_core::constellation::{entropy_bits, mb_fit_entropy, Constellation};
use pas_core::matchers::{
    ess_build, ess_find_emax, measure_rate_loss_adm_with, rate_loss_csv, write_frame, AdmCoder,
    BitStream, EssCoder, MatchedFrame,
};
use pas_core::par::Execution;
use pas_core::rng;
use pas_core::source::{load_model, save_model, TableModel};
use pas_core::training::{
    gradient_check, random_logits, train, DemapperSettings, GradCheckConfig, Objective, Surrogate,
    TrainSetup, TrainTrace,
};

use crate::config::{parse_objective, resolve, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::selftest;
use crate::sweep::{run_sweep, sweep_csv, Scheme, Source};

/// Everything a subcommand needs besides its own config section.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub config: ExperimentConfig,
    /// Relative paths in the config resolve against this file's directory.
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub exec: Execution,
}

impl RunContext {
    pub fn new(config: ExperimentConfig) -> Self {
        let seed = config.seed;
        Self {
            config,
            config_path: None,
            seed,
            out: None,
            exec: Execution::default(),
        }
    }

    fn path(&self, p: &str) -> PathBuf {
        resolve(self.config_path.as_deref(), p)
    }

    fn constellation(&self) -> CliResult<Constellation> {
        Ok(Constellation::new(self.config.constellation.order)?)
    }

    fn kernel(&self) -> CliResult<PerturbationKernel> {
        let k = &self.config.kernel;
        Ok(kernel_from_fiber_with(
            &self.config.fiber.to_core()?,
            k.memory_symbols,
            k.pulse()?,
            self.exec,
        )?)
    }

    fn ess_coder(&self, c: &Constellation) -> CliResult<EssCoder> {
        let e = &self.config.ess;
        let levels = c.amp_levels_int();
        let t = ess_find_emax(e.blocklength, &levels, e.shaping_rate_bits_per_1d)?;
        Ok(ess_build(e.blocklength, &levels, t.e_max)?)
    }
}

/// Result of a subcommand: the CSV contract plus human-readable notes. Any
/// entry in `failures` makes the process exit with the invariant status.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub messages: Vec<String>,
    pub failures: Vec<String>,
}

fn load(path: &Path) -> CliResult<TableModel> {
    if !path.exists() {
        return Err(CliError::Config(format!(
            "model file {} does not exist",
            path.display()
        )));
    }
    load_model(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

pub fn cmd_rateloss(ctx: &RunContext) -> CliResult<Outcome> {
    let sec = &ctx.config.rateloss;
    if sec.model_path.is_empty() {
        return Err(CliError::Config("rateloss.model_path is required".into()));
    }
    if sec.payload_bits.is_empty() {
        return Err(CliError::Config("rateloss.payload_bits is empty".into()));
    }
    let model = load(&ctx.path(&sec.model_path))?;
    let coder = AdmCoder::new(&model)?;
    let points = sec
        .payload_bits
        .iter()
        .map(|&n| {
            measure_rate_loss_adm_with(
                &coder,
                n,
                sec.trials,
                rng::derive_indexed(ctx.seed, "rateloss", n as u64),
                ctx.exec,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Outcome {
        csv: rate_loss_csv(&points),
        messages: vec![format!(
            "theoretical rate loss {:.6} bits/symbol",
            coder.rate_loss_theory()
        )],
        failures: vec![],
    })
}

/// Trains a table model on the perturbation surrogate described by the config.
pub fn train_model(
    ctx: &RunContext,
    objective: Objective,
    kernel: &PerturbationKernel,
) -> CliResult<(TableModel, TrainTrace)> {
    let sec = &ctx.config.train;
    let label = format!("train/{}", objective.as_str());
    let mut tc = sec.to_core(rng::derive_seed(ctx.seed, &label))?;
    tc.objective = objective;
    let c = ctx.constellation()?;
    let fiber = ctx.config.fiber.to_core()?;
    let setup = TrainSetup {
        surrogate: Surrogate::from_fiber(&fiber, kernel.clone(), tc.launch_power_dbm),
        demapper: DemapperSettings {
            noise_var: (sec.demapper_noise_variance > 0.0).then_some(sec.demapper_noise_variance),
            derotate: true,
        },
        mb_target: mb_fit_entropy(&c, sec.mb_entropy_bits_per_1d, 1e-9)?.pair_law(),
        constellation: c,
    };
    let init = random_logits(
        setup.constellation.amp_alphabet_size(),
        sec.memory,
        sec.init_spread,
        rng::derive_seed(ctx.seed, &format!("{label}/init")),
    );
    let (model, trace) = train(&tc, init, &setup)?;
    Ok((model.to_table(), trace))
}

pub fn cmd_train(ctx: &RunContext) -> CliResult<Outcome> {
    let sec = &ctx.config.train;
    let objective = parse_objective(&sec.objective)?;
    let kernel = ctx.kernel()?;
    let (model, trace) = train_model(ctx, objective, &kernel)?;
    let model_path = if !sec.model_out.is_empty() {
        Some(ctx.path(&sec.model_out))
    } else {
        ctx.out.as_ref().map(|o| o.with_extension("model"))
    };
    let mut out = Outcome {
        csv: trace.to_csv(),
        ..Outcome::default()
    };
    if let Some(p) = model_path {
        save_model(&model, &p)?;
        out.messages
            .push(format!("model written to {}", p.display()));
    }
    if let (Some(first), Some(last)) = (trace.records.first(), trace.records.last()) {
        out.messages.push(format!(
            "objective {}: R_loss {:.6} -> {:.6}, R_bmd {:.4} -> {:.4}",
            objective.as_str(),
            first.r_loss,
            last.r_loss,
            first.r_bmd,
            last.r_bmd
        ));
    }
    if let Some(reason) = &trace.aborted {
        out.failures.push(format!("training aborted: {reason}"));
    }
    if trace.records.iter().any(|r| r.r_loss < -1e-12) {
        out.failures
            .push("training: rate loss became negative".into());
    }
    Ok(out)
}

pub fn cmd_airsweep(ctx: &RunContext) -> CliResult<Outcome> {
    let sec = &ctx.config.airsweep;
    let schemes = sec
        .schemes
        .iter()
        .map(|s| Scheme::parse(s))
        .collect::<CliResult<Vec<_>>>()?;
    if schemes.is_empty() || sec.launch_powers_dbm.is_empty() {
        return Err(CliError::Config(
            "airsweep needs at least one scheme and one launch power".into(),
        ));
    }
    if sec.frames == 0 {
        return Err(CliError::Config("airsweep.frames must be positive".into()));
    }
    let c = ctx.constellation()?;
    let fiber = ctx.config.fiber.to_core()?;
    let needs_kernel = schemes.iter().any(|s| match s {
        Scheme::EssSel => true,
        Scheme::SeqNpas => sec.seq_npas_model.is_empty(),
        Scheme::SeqNpasPp => sec.seq_npas_pp_model.is_empty(),
        _ => false,
    });
    let kernel = if needs_kernel {
        Some(ctx.kernel()?)
    } else {
        None
    };
    let mut out = Outcome::default();
    let mut sources = Vec::new();
    for scheme in schemes {
        let built = build_source(ctx, scheme, &c, kernel.as_ref(), &mut out.messages);
        match built {
            Ok(src) => sources.push((scheme, src)),
            Err(e @ CliError::Config(_)) => return Err(e),
            Err(e) => out.failures.push(format!("{}: {e}", scheme.as_str())),
        }
    }
    let (rows, failures) = run_sweep(
        &sources,
        &c,
        &fiber,
        &sec.launch_powers_dbm,
        sec.symbols_per_frame,
        sec.frames,
        ctx.seed,
        ctx.exec,
    );
    out.failures.extend(
        failures
            .into_iter()
            .map(|(s, e)| format!("{}: {e}", s.as_str())),
    );
    out.csv = sweep_csv(&rows, ctx.seed);
    Ok(out)
}

fn build_source(
    ctx: &RunContext,
    scheme: Scheme,
    c: &Constellation,
    kernel: Option<&PerturbationKernel>,
    messages: &mut Vec<String>,
) -> CliResult<Source> {
    let sec = &ctx.config.airsweep;
    let learned = |path: &str, objective: Objective, messages: &mut Vec<String>| {
        if !path.is_empty() {
            return Source::model(load(&ctx.path(path))?);
        }
        let kernel = kernel.expect("kernel is built when a model must be trained");
        let (model, trace) = train_model(ctx, objective, kernel)?;
        if let Some(reason) = trace.aborted {
            return Err(CliError::Invariant(format!("training aborted: {reason}")));
        }
        messages.push(format!(
            "{}: trained with objective {} at {:.1} dBm",
            scheme.as_str(),
            objective.as_str(),
            ctx.config.train.launch_power_dbm
        ));
        Source::model(model)
    };
    match scheme {
        Scheme::Uniform => Ok(Source::uniform(c)),
        Scheme::Ess => Ok(Source::ess(ctx.ess_coder(c)?)),
        Scheme::EssSel => Source::ess_sel(
            ctx.ess_coder(c)?,
            &ctx.config.selection.to_core()?,
            c,
            kernel.expect("kernel is built for selection"),
            ctx.seed,
        ),
        Scheme::SeqNpas => learned(&sec.seq_npas_model, Objective::L, messages),
        Scheme::SeqNpasPp => learned(&sec.seq_npas_pp_model, Objective::Lpp, messages),
    }
}

pub fn cmd_gradcheck(ctx: &RunContext) -> CliResult<Outcome> {
    let g = &ctx.config.gradcheck;
    let c = Constellation::new(g.order)?;
    let fiber = ctx.config.fiber.to_core()?;
    let kernel = kernel_from_fiber_with(
        &fiber,
        g.kernel_memory_symbols,
        ctx.config.kernel.pulse()?,
        ctx.exec,
    )?;
    let per_dim = (c.amp_alphabet_size() as f64).log2() / 2.0;
    let setup = TrainSetup {
        surrogate: Surrogate::from_fiber(&fiber, kernel, g.launch_power_dbm),
        demapper: DemapperSettings {
            noise_var: Some(g.demapper_noise_variance),
            derotate: false,
        },
        mb_target: mb_fit_entropy(&c, 0.9 * per_dim, 1e-9)?.pair_law(),
        constellation: c,
    };
    let model = random_logits(
        setup.constellation.amp_alphabet_size(),
        g.memory,
        g.init_spread,
        rng::derive_seed(ctx.seed, "gradcheck/init"),
    );
    let cfg = GradCheckConfig {
        sequence_length: g.sequence_length,
        lambda: g.lambda,
        start_context: 0,
        step: g.finite_difference_step,
        seed: rng::derive_seed(ctx.seed, "gradcheck"),
    };
    let r = gradient_check(&model, &setup, &cfg)?;
    let checks = [
        ("full_objective", r.max_rel_error, 1e-4),
        ("rate_loss_term", r.rate_loss_rel_error, 1e-6),
        ("kl_term", r.kl_rel_error, 1e-6),
    ];
    let mut out = Outcome {
        csv: String::from("check,max_rel_error,tolerance,pass\n"),
        ..Outcome::default()
    };
    for (name, err, tol) in checks {
        let pass = err < tol;
        out.csv
            .push_str(&format!("{name},{err:.3e},{tol:.0e},{pass}\n"));
        if !pass {
            out.failures.push(format!(
                "gradcheck {name}: relative error {err:.3e} >= {tol:.0e} (worst coordinate {})",
                r.worst_coordinate
            ));
        }
    }
    out.messages.push(format!(
        "max relative error {:.3e} over {} coordinates and {} sequences",
        r.max_rel_error, r.coordinates, r.sequences
    ));
    Ok(out)
}

pub fn cmd_selftest(ctx: &RunContext) -> CliResult<Outcome> {
    let results = selftest::run_all(ctx.seed, ctx.exec);
    let mut out = Outcome {
        csv: String::from("module,invariant,status,detail\n"),
        ..Outcome::default()
    };
    for r in &results {
        let status = if r.passed { "pass" } else { "FAIL" };
        out.csv.push_str(&format!(
            "{},{},{status},{}\n",
            r.module,
            r.invariant,
            r.detail.replace(',', ";")
        ));
        if !r.passed {
            out.failures
                .push(format!("{} / {}: {}", r.module, r.invariant, r.detail));
        }
    }
    out.messages.push(format!(
        "{} of {} checks passed",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    ));
    Ok(out)
}

pub fn cmd_ess_info(ctx: &RunContext) -> CliResult<Outcome> {
    let c = ctx.constellation()?;
    let coder = ctx.ess_coder(&c)?;
    let p = coder.average_marginal();
    let h = entropy_bits(&p);
    let levels = coder.levels();
    let mut csv = String::from(
        "blocklength,e_max,index_bits,shaping_rate_bits_per_1d,marginal_entropy_bits_per_1d,rate_loss_bits_per_1d",
    );
    for l in levels {
        csv.push_str(&format!(",p_{l}"));
    }
    csv.push('\n');
    csv.push_str(&format!(
        "{},{},{},{:.6},{:.6},{:.6}",
        coder.blocklength(),
        coder.e_max(),
        coder.index_bits(),
        coder.rate(),
        h,
        coder.rate_loss()
    ));
    for q in &p {
        csv.push_str(&format!(",{q:.6}"));
    }
    csv.push('\n');
    Ok(Outcome {
        csv,
        messages: vec![format!(
            "target {:.4} bits/1D, achieved {:.4}",
            ctx.config.ess.shaping_rate_bits_per_1d,
            coder.rate()
        )],
        failures: vec![],
    })
}

pub fn cmd_adm_roundtrip(ctx: &RunContext) -> CliResult<Outcome> {
    let sec = &ctx.config.adm_roundtrip;
    let c = ctx.constellation()?;
    let (model, model_id) = if sec.model_path.is_empty() {
        let mb = mb_fit_entropy(&c, sec.mb_entropy_bits_per_1d, 1e-9)?;
        (
            TableModel::iid(&mb.pair_law())?,
            format!("mb-iid-{:.3}", sec.mb_entropy_bits_per_1d),
        )
    } else {
        let p = ctx.path(&sec.model_path);
        let id = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        (load(&p)?, id)
    };
    if sec.trials == 0 || sec.payload_bits.contains(&0) {
        return Err(CliError::Config(
            "adm_roundtrip.trials and payload_bits must be positive".into(),
        ));
    }
    let coder = AdmCoder::new(&model)?;
    let mut out = Outcome {
        csv: String::from("n,trials,failures,mean_symbols\n"),
        ..Outcome::default()
    };
    for &n in &sec.payload_bits {
        let results = ctx.exec.map(sec.trials, |i| {
            let seed = rng::derive_indexed(ctx.seed, &format!("adm-roundtrip/{n}"), i as u64);
            let payload = BitStream::random(n, &mut rng::rng_from_seed(seed));
            let symbols = coder.encode(&payload)?;
            let back = coder.decode(&symbols, n)?;
            Ok::<_, pas_core::Error>((back == payload, symbols.len(), seed, symbols, payload))
        });
        let mut failures = 0usize;
        let mut total = 0usize;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok((ok, len, seed, symbols, _)) => {
                    failures += usize::from(!ok);
                    total += len;
                    if i == 0 && n == sec.payload_bits[0] && !sec.frame_out.is_empty() {
                        let frame = MatchedFrame {
                            model_id: model_id.clone(),
                            payload_bits: n,
                            seed,
                            symbols,
                        };
                        let path = ctx.path(&sec.frame_out);
                        write_file(&path, write_frame(&frame).as_bytes())?;
                        out.messages
                            .push(format!("frame written to {}", path.display()));
                    }
                }
                Err(e) => {
                    failures += 1;
                    out.messages.push(format!("n={n} trial {i}: {e}"));
                }
            }
        }
        out.csv.push_str(&format!(
            "{n},{},{failures},{:.3}\n",
            sec.trials,
            total as f64 / sec.trials as f64
        ));
        if failures > 0 {
            out.failures.push(format!(
                "adm-roundtrip n={n}: {failures} of {} trials failed",
                sec.trials
            ));
        }
    }
    Ok(out)
}
