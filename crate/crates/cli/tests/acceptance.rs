//! End-to-end acceptance run. Prints one line per criterion and exits nonzero
//! if any of them fails.

use std::collections::HashMap;
use std::time::Instant;

use pas_cli::commands::{self, train_model, RunContext};
use pas_cli::config::KernelSection;
use pas_cli::sweep::{derotate, Source};
use pas_cli::ExperimentConfig;
use pas_core::channel::{
    awgn, cd_compensate, dbm_to_watts, kernel_from_fiber, kernel_from_fiber_with,
    perturbation_channel, rrc_shape, ssfm_propagate, transmit_ssfm, FiberConfig,
    PerturbationKernel,
};
use pas_core::constellation::{mb_fit_entropy, Constellation};
use pas_core::matchers::{ess_build, ess_find_emax};
use pas_core::metrics::{
    estimate_air, estimate_noise_variance, gaussian_demap, AirReport, RateTerms,
};
use pas_core::par::Execution;
use pas_core::rng;
use pas_core::source::{rate_loss_theoretical, save_model, TableModel};
use pas_core::training::Objective;
use pas_core::C64;
use rand::Rng;

const LEVELS: [u32; 4] = [1, 3, 5, 7];

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Parses a CSV into rows keyed by header name.
fn rows(csv: &str) -> Vec<HashMap<String, String>> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or(f64::NAN)
}

struct Trained {
    lpp: TableModel,
    l: TableModel,
    dir: tempfile::TempDir,
}

impl Trained {
    fn new() -> Self {
        let ctx = RunContext::new(ExperimentConfig::default());
        let k = &ctx.config.kernel;
        let kernel = kernel_from_fiber_with(
            &ctx.config.fiber.to_core().unwrap(),
            k.memory_symbols,
            k.pulse().unwrap(),
            ctx.exec,
        )
        .unwrap();
        let (lpp, _) = train_model(&ctx, Objective::Lpp, &kernel).unwrap();
        let (l, _) = train_model(&ctx, Objective::L, &kernel).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(&lpp, &dir.path().join("lpp.model")).unwrap();
        save_model(&l, &dir.path().join("l.model")).unwrap();
        Self { lpp, l, dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }
}

fn criterion_1(t: &Trained) -> Verdict {
    let start = Instant::now();
    let mut failures = 0usize;
    let mut total = 0usize;
    for model in ["", "lpp.model"] {
        let mut cfg = ExperimentConfig::default();
        cfg.adm_roundtrip.trials = 10_000;
        cfg.adm_roundtrip.payload_bits = vec![64, 2048];
        if !model.is_empty() {
            cfg.adm_roundtrip.model_path = t.path(model);
        }
        let out = commands::cmd_adm_roundtrip(&RunContext::new(cfg)).map_err(|e| e.to_string())?;
        for r in rows(&out.csv) {
            failures += num(&r, "failures") as usize;
            total += num(&r, "trials") as usize;
        }
    }
    let mut ess_sequences = 0usize;
    for n in 1..=8usize {
        for e_max in [n as u64 + 8, 25 * n as u64, 49 * n as u64] {
            let coder = ess_build(n, &LEVELS, e_max).map_err(|e| e.to_string())?;
            for idx in 0..(1u128 << coder.index_bits()) {
                let s = coder.encode_index(idx).map_err(|e| e.to_string())?;
                ess_sequences += 1;
                if coder.sequence_energy(&s) > e_max
                    || coder.decode_index(&s).map_err(|e| e.to_string())? != idx
                {
                    failures += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        failures == 0 && secs < 120.0,
        format!("{total} ADM + {ess_sequences} ESS roundtrips, {failures} failures, {secs:.1} s"),
    )
}

fn criterion_2(t: &Trained) -> Verdict {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.rateloss.model_path = t.path("lpp.model");
    cfg.rateloss.payload_bits = vec![256, 2048];
    cfg.rateloss.trials = 400;
    let out = commands::cmd_rateloss(&RunContext::new(cfg)).map_err(|e| e.to_string())?;
    let r = rows(&out.csv);
    let gap = |i: usize| num(&r[i], "R_loss_adm") - num(&r[i], "R_loss_theory");
    let (g256, g2048) = (gap(0), gap(1));
    let secs = start.elapsed().as_secs_f64();
    check(
        (-1e-9..0.05).contains(&g2048) && g2048 < g256 && secs < 600.0,
        format!(
            "theory {:.4}, gap {g256:.4} at n=256, {g2048:.4} at n=2048 bits/symbol",
            num(&r[0], "R_loss_theory")
        ),
    )
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let t = ess_find_emax(32, &LEVELS, 1.93).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        (t.rate - 1.93).abs() <= 0.02 && secs < 60.0,
        format!(
            "E_max {} gives {:.4} bits/1D in {secs:.2} s",
            t.e_max, t.rate
        ),
    )
}

fn criterion_4() -> Verdict {
    let c = Constellation::new(64).map_err(|e| e.to_string())?;
    let mb = mb_fit_entropy(&c, 1.93, 1e-10).map_err(|e| e.to_string())?;
    // Brute-force entropy in natural log, converted.
    let h = mb
        .probs
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum::<f64>()
        / std::f64::consts::LN_2;
    check(
        (h - 1.93).abs() <= 1e-6,
        format!("nu {:.6}, H {h:.9} bits/1D", mb.nu),
    )
}

fn qam_symbols(n: usize, seed: u64) -> Vec<C64> {
    let c = Constellation::new(64).unwrap();
    let mut r = rng::rng_from_seed(seed);
    (0..n).map(|_| c.point(r.random_range(0..64))).collect()
}

fn nmse_db(a: &[C64], b: &[C64]) -> f64 {
    let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let s: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    10.0 * (e / s).log10()
}

fn criterion_5() -> Verdict {
    let lossless = FiberConfig {
        attenuation_db_per_km: 0.0,
        edfa: false,
        ase_noise: false,
        ..FiberConfig::default()
    };
    let tx = rrc_shape(&qam_symbols(2048, 1), &lossless, 6.0);
    let rx = ssfm_propagate(&tx, &lossless, 1).map_err(|e| e.to_string())?;
    let energy = (rx.energy() / tx.energy() - 1.0).abs();

    let cd_only = FiberConfig {
        gamma_per_w_km: 0.0,
        ..lossless.clone()
    };
    let tx = rrc_shape(&qam_symbols(2048, 2), &cd_only, 0.0);
    let back = cd_compensate(
        &ssfm_propagate(&tx, &cd_only, 2).map_err(|e| e.to_string())?,
        &cd_only,
    );
    let evm = nmse_db(&tx.samples, &back.samples);

    let noiseless = FiberConfig {
        ase_noise: false,
        ..FiberConfig::default()
    };
    let kernel = kernel_from_fiber(&noiseless, 16).map_err(|e| e.to_string())?;
    let x = qam_symbols(4096, 3);
    let mut nmse = Vec::new();
    for dbm in [-6.0, -9.0, -12.0] {
        let ssfm = transmit_ssfm(&x, &noiseless, dbm, 0).map_err(|e| e.to_string())?;
        let s = dbm_to_watts(dbm).sqrt();
        let pert: Vec<C64> = perturbation_channel(&x, &kernel, dbm, 0.0, 0)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|y| y / s)
            .collect();
        nmse.push(nmse_db(&ssfm, &pert));
    }
    let drops = [nmse[0] - nmse[1], nmse[1] - nmse[2]];
    check(
        energy < 1e-9 && evm < -60.0 && drops.iter().all(|&d| d >= 2.0),
        format!(
            "energy {energy:.1e}, CD EVM {evm:.1} dB, surrogate NMSE {:.1}/{:.1}/{:.1} dB at -6/-9/-12 dBm",
            nmse[0], nmse[1], nmse[2]
        ),
    )
}

/// Gauss–Hermite nodes and weights for `∫ e^{-x²} f(x) dx`, by Newton
/// iteration on the orthonormal Hermite recurrence.
fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut out = vec![(0.0, 0.0); n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * out[0].0,
            3 => 1.91 * z - 0.91 * out[1].0,
            _ => 2.0 * z - out[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j + 1) as f64).sqrt() * p2
                    - (j as f64 / (j + 1) as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 {
                break;
            }
        }
        out[i] = (z, 2.0 / (pp * pp));
        out[n - 1 - i] = (-z, 2.0 / (pp * pp));
    }
    out
}

fn gmi_quadrature(c: &Constellation, snr_db: f64) -> f64 {
    let var = 10f64.powf(-snr_db / 10.0);
    let sigma = var.sqrt();
    let gh = gauss_hermite(40);
    let m = c.bits_per_symbol();
    let order = c.order();
    let mut loss = 0.0;
    for x in 0..order {
        for &(u, wu) in &gh {
            for &(v, wv) in &gh {
                let y = c.point(x) + C64::new(sigma * u, sigma * v);
                let d: Vec<f64> = c
                    .points()
                    .iter()
                    .map(|p| -(y - p).norm_sqr() / var)
                    .collect();
                let mx = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let all: f64 = d.iter().map(|v| (v - mx).exp()).sum();
                for level in 0..m {
                    let b = c.bit(x, level);
                    let same: f64 = (0..order)
                        .filter(|&i| c.bit(i, level) == b)
                        .map(|i| (d[i] - mx).exp())
                        .sum();
                    loss += wu * wv / std::f64::consts::PI * (all / same).log2();
                }
            }
        }
    }
    m as f64 - loss / order as f64
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let c = Constellation::new(64).map_err(|e| e.to_string())?;
    let prior = vec![1.0 / 64.0; 64];
    let terms = RateTerms::from_model(&TableModel::uniform(16, 0)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, snr) in [8.0, 14.0, 20.0].into_iter().enumerate() {
        let mut r = rng::rng_from_seed(100 + i as u64);
        let idx: Vec<usize> = (0..100_000).map(|_| r.random_range(0..64)).collect();
        let x: Vec<C64> = idx.iter().map(|&k| c.point(k)).collect();
        let y = awgn(&x, 10f64.powf(-snr / 10.0), 200 + i as u64);
        let var = estimate_noise_variance(&y, &c, &prior).map_err(|e| e.to_string())?;
        let frame = gaussian_demap(&y, &idx, &c, &prior, var).map_err(|e| e.to_string())?;
        let rep = estimate_air(&[frame], &terms, 7);
        let oracle = gmi_quadrature(&c, snr);
        worst = worst.max((rep.r_bmd - oracle).abs());
        parts.push(format!("{snr} dB {:.4}/{oracle:.4}", rep.r_bmd));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 0.02 && secs < 300.0,
        format!(
            "R_bmd/oracle {}; max deviation {worst:.4} bits/2D",
            parts.join(", ")
        ),
    )
}

fn criterion_7() -> Verdict {
    let out = commands::cmd_gradcheck(&RunContext::new(ExperimentConfig::default()))
        .map_err(|e| e.to_string())?;
    let r = rows(&out.csv);
    let detail = r
        .iter()
        .map(|row| format!("{} {}", row["check"], row["max_rel_error"]))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        r.len() == 3 && r.iter().all(|row| row["pass"] == "true"),
        detail,
    )
}

/// Net AIR of a model on the perturbation surrogate with the link's ASE.
fn surrogate_air(model: &TableModel, kernel: &PerturbationKernel, dbm: f64) -> AirReport {
    let c = Constellation::new(64).unwrap();
    let fiber = FiberConfig::default();
    let source = Source::model(model.clone()).unwrap();
    let marginal = source.marginal(&c).unwrap();
    let prior = c.symbol_prior(&marginal);
    let kappa = c.normalization_for(&marginal);
    let scale = dbm_to_watts(dbm).sqrt();
    let frames: Vec<_> = (0..4u64)
        .map(|f| {
            let unsigned = source.frame(&c, 16_384, 50 + f).unwrap();
            let mut signs = rng::indexed_stream(60, "signs", f);
            let tx: Vec<usize> = unsigned
                .iter()
                .map(|&a| c.recompose(signs.random_range(0..4), a))
                .collect();
            let x: Vec<C64> = tx.iter().map(|&i| c.point(i) * kappa).collect();
            let y: Vec<C64> =
                perturbation_channel(&x, kernel, dbm, fiber.ase_power_in_band(), 70 + f)
                    .unwrap()
                    .into_iter()
                    .map(|v| v / scale)
                    .collect();
            let y = derotate(&y, &x);
            let var = estimate_noise_variance(&y, &c, &prior).unwrap();
            gaussian_demap(&y, &tx, &c, &prior, var).unwrap()
        })
        .collect();
    estimate_air(&frames, &source.rate_terms(&c).unwrap(), 80)
}

fn criterion_8(t: &Trained, train_secs: f64) -> Verdict {
    let cfg = ExperimentConfig::default();
    let kernel = kernel_from_fiber(&FiberConfig::default(), cfg.kernel.memory_symbols)
        .map_err(|e| e.to_string())?;
    let dbm = cfg.train.launch_power_dbm;
    let rl_pp = rate_loss_theoretical(&t.lpp).map_err(|e| e.to_string())?;
    let rl_l = rate_loss_theoretical(&t.l).map_err(|e| e.to_string())?;
    let a_pp = surrogate_air(&t.lpp, &kernel, dbm);
    let a_l = surrogate_air(&t.l, &kernel, dbm);
    let tol = a_pp.confidence_halfwidth + a_l.confidence_halfwidth;
    check(
        rl_pp < rl_l && a_pp.net_air >= a_l.net_air - tol && train_secs < 3600.0,
        format!(
            "R_loss {rl_pp:.4} (L++) vs {rl_l:.4} (L); net AIR {:.4} vs {:.4} ± {tol:.4} at {dbm} dBm; training {train_secs:.0} s",
            a_pp.net_air, a_l.net_air
        ),
    )
}

fn criterion_9(t: &Trained) -> Verdict {
    let mut cfg = ExperimentConfig::default();
    cfg.airsweep.schemes = vec!["ess".into(), "seq-npas".into(), "seq-npas++".into()];
    cfg.airsweep.seq_npas_model = t.path("l.model");
    cfg.airsweep.seq_npas_pp_model = t.path("lpp.model");
    let out = commands::cmd_airsweep(&RunContext::new(cfg)).map_err(|e| e.to_string())?;
    if !out.failures.is_empty() {
        return Err(out.failures.join("; "));
    }
    let all = rows(&out.csv);
    let series = |name: &str| -> Vec<(f64, f64, f64)> {
        all.iter()
            .filter(|r| r["scheme"] == name)
            .map(|r| (num(r, "launch_power_dbm"), num(r, "net_air"), num(r, "ci")))
            .collect()
    };
    let ess = series("ess");
    let pp = series("seq-npas++");
    let l = series("seq-npas");
    // Low-power leg: ESS at least as good, or overlapping intervals.
    let low_ok = [&pp, &l]
        .iter()
        .all(|s| ess[0].1 + ess[0].2 >= s[0].1 - s[0].2);
    let opt = pp
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    let reversed: Vec<f64> = (opt..pp.len())
        .filter(|&i| pp[i].1 > ess[i].1)
        .map(|i| pp[i].0)
        .collect();
    check(
        low_ok && !reversed.is_empty(),
        format!(
            "at {} dBm ESS {:.4} vs seq-npas++ {:.4} / seq-npas {:.4}; seq-npas++ optimum {} dBm ({:.4} vs ESS {:.4}); reversed at {reversed:?} dBm",
            ess[0].0, ess[0].1, pp[0].1, l[0].1, pp[opt].0, pp[opt].1, ess[opt].1
        ),
    )
}

fn criterion_10(t: &Trained) -> Verdict {
    let mut cfg = ExperimentConfig::default();
    cfg.train.steps = 10;
    cfg.train.sequence_length = 64;
    cfg.train.batch = 8;
    cfg.rateloss.model_path = t.path("lpp.model");
    cfg.rateloss.payload_bits = vec![256];
    cfg.rateloss.trials = 100;
    cfg.airsweep.launch_powers_dbm = vec![0.0, 8.0];
    cfg.airsweep.symbols_per_frame = 1024;
    cfg.airsweep.frames = 1;
    cfg.airsweep.seq_npas_model = t.path("l.model");
    cfg.airsweep.seq_npas_pp_model = t.path("lpp.model");
    cfg.adm_roundtrip.trials = 200;
    cfg.kernel = KernelSection {
        memory_symbols: 8,
        ..KernelSection::default()
    };
    type Cmd = fn(&RunContext) -> pas_cli::CliResult<commands::Outcome>;
    let cmds: [(&str, Cmd); 7] = [
        ("rateloss", commands::cmd_rateloss),
        ("airsweep", commands::cmd_airsweep),
        ("train", commands::cmd_train),
        ("gradcheck", commands::cmd_gradcheck),
        ("selftest", commands::cmd_selftest),
        ("ess-info", commands::cmd_ess_info),
        ("adm-roundtrip", commands::cmd_adm_roundtrip),
    ];
    let mut differing = Vec::new();
    for (name, cmd) in cmds {
        let run = |exec| {
            let mut ctx = RunContext::new(cfg.clone());
            ctx.seed = 17;
            ctx.exec = exec;
            cmd(&ctx).map(|o| o.csv).map_err(|e| format!("{name}: {e}"))
        };
        let a = run(Execution::default())?;
        let b = run(Execution::default())?;
        let s = run(Execution::Sequential)?;
        if a.is_empty() || a != b || a != s {
            differing.push(name);
        }
    }
    check(
        differing.is_empty(),
        format!("7 subcommands, repeated and sequential runs; differing: {differing:?}"),
    )
}

fn main() {
    let start = Instant::now();
    let trained = Trained::new();
    let train_secs = start.elapsed().as_secs_f64();
    let results: Vec<(usize, Verdict)> = vec![
        (1, criterion_1(&trained)),
        (2, criterion_2(&trained)),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8(&trained, train_secs)),
        (9, criterion_9(&trained)),
        (10, criterion_10(&trained)),
    ];
    let mut failed = 0;
    for (n, v) in &results {
        match v {
            Ok(d) => println!("criterion {n:>2}: PASS  {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {d}");
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.0} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
