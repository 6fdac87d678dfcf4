//! Quick invariant checks across every module, run by `pas selftest`.

use pas_core::channel::{
    cd_compensate, kernel_from_fiber, perturbation_channel, read_iq, rrc_shape, ssfm_propagate,
    write_iq, FiberConfig, PerturbationKernel,
};
use pas_core::constellation::{Constellation, MbDistribution};
use pas_core::matchers::{ess_build, read_frame, write_frame, AdmCoder, BitStream, MatchedFrame};
use pas_core::metrics::{estimate_air, gaussian_demap, RateTerms};
use pas_core::par::Execution;
use pas_core::rng;
use pas_core::selection::{nlin_metric, select_sequence, SelectionConfig, SelectionMetric};
use pas_core::source::{entropy_rate, rate_loss_theoretical, stationary_law, TableModel};
use pas_core::training::{
    evaluate, gumbel_softmax_sample, loss_l, loss_lpp, random_logits, sample_batch,
    DemapperSettings, Objective, Surrogate, TrainSetup,
};
use pas_core::C64;
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub module: &'static str,
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(u64) -> Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const CHECKS: &[(&str, &str, Check)] = &[
    (
        "constellation",
        "unit energy under uniform input",
        unit_energy,
    ),
    (
        "constellation",
        "gray neighbours differ in one bit",
        gray_neighbours,
    ),
    (
        "constellation",
        "MB with nu = 0 is uniform",
        mb_zero_is_uniform,
    ),
    (
        "source-models",
        "iid stationary marginal equals the row",
        iid_stationary,
    ),
    (
        "source-models",
        "uniform entropy rate is log2 A",
        uniform_entropy_rate,
    ),
    ("source-models", "iid rate loss is zero", iid_rate_loss),
    (
        "matchers",
        "ADM roundtrip on a memory-1 model",
        adm_roundtrip,
    ),
    (
        "matchers",
        "ESS exhaustive roundtrip within energy bound",
        ess_exhaustive,
    ),
    ("matchers", "frame file roundtrip", frame_roundtrip),
    (
        "channel",
        "lossless noiseless SSFM conserves energy",
        ssfm_energy,
    ),
    ("channel", "CD compensation inverts dispersion", cd_inverse),
    ("channel", "IQ file roundtrip", iq_roundtrip),
    (
        "channel",
        "zero gamma surrogate is the identity",
        zero_gamma_identity,
    ),
    (
        "metrics",
        "noiseless channel gives R_bmd = H(b)",
        noiseless_air,
    ),
    (
        "training",
        "straight-through forward value is one-hot",
        one_hot_forward,
    ),
    (
        "training",
        "loss value independent of gradient tracking",
        detached_value,
    ),
    (
        "training",
        "iid model with lambda 0 gives L++ = L",
        lpp_degenerate,
    ),
    (
        "selection",
        "constant metric picks candidate 0",
        constant_metric,
    ),
    ("selection", "zero kernel scores zero", zero_kernel_metric),
];

/// Runs every check; a panic inside a check counts as a failure.
pub fn run_all(seed: u64, exec: Execution) -> Vec<CheckResult> {
    exec.map(CHECKS.len(), |i| {
        let (module, invariant, f) = CHECKS[i];
        let s = rng::derive_indexed(seed, "selftest", i as u64);
        let (passed, detail) = match std::panic::catch_unwind(|| f(s)) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, e),
            Err(_) => (false, "panicked".into()),
        };
        CheckResult {
            module,
            invariant,
            passed,
            detail,
        }
    })
}

fn qam64() -> Result<Constellation, String> {
    Constellation::new(64).map_err(err)
}

fn unit_energy(_: u64) -> Result<(bool, String), String> {
    let mut worst: f64 = 0.0;
    for order in [16, 64, 256] {
        let c = Constellation::new(order).map_err(err)?;
        let a = c.amp_alphabet_size();
        worst = worst.max((c.energy_under(&vec![1.0 / a as f64; a]) - 1.0).abs());
    }
    Ok((worst < 1e-12, format!("max deviation {worst:.1e}")))
}

fn gray_neighbours(_: u64) -> Result<(bool, String), String> {
    let c = qam64()?;
    let d = 2.0 * c.scale();
    let mut bad = 0;
    for i in 0..c.order() {
        for j in i + 1..c.order() {
            if ((c.point(i) - c.point(j)).norm() - d).abs() < 1e-9
                && (c.label(i) ^ c.label(j)).count_ones() != 1
            {
                bad += 1;
            }
        }
    }
    Ok((bad == 0, format!("{bad} neighbour pairs violate")))
}

fn mb_zero_is_uniform(_: u64) -> Result<(bool, String), String> {
    let c = qam64()?;
    let p = MbDistribution::new(&c.amp_alphabet(), 0.0).pair_law();
    let dev = p
        .iter()
        .map(|x| (x - 1.0 / p.len() as f64).abs())
        .fold(0.0, f64::max);
    Ok((dev < 1e-15, format!("max deviation {dev:.1e}")))
}

fn iid_stationary(_: u64) -> Result<(bool, String), String> {
    let p = [0.1, 0.2, 0.3, 0.4];
    let law = stationary_law(&TableModel::iid(&p).map_err(err)?).map_err(err)?;
    let dev = law
        .marginal
        .iter()
        .zip(&p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((dev < 1e-12, format!("max deviation {dev:.1e}")))
}

fn uniform_entropy_rate(_: u64) -> Result<(bool, String), String> {
    let h = entropy_rate(&TableModel::uniform(16, 2)).map_err(err)?;
    Ok(((h - 4.0).abs() < 1e-12, format!("H = {h:.12}")))
}

fn iid_rate_loss(_: u64) -> Result<(bool, String), String> {
    let r = rate_loss_theoretical(&TableModel::iid(&[0.5, 0.3, 0.2]).map_err(err)?).map_err(err)?;
    Ok((r.abs() < 1e-12, format!("R_loss = {r:.1e}")))
}

fn adm_roundtrip(seed: u64) -> Result<(bool, String), String> {
    let model = random_logits(16, 1, 1.0, seed).to_table();
    let coder = AdmCoder::new(&model).map_err(err)?;
    let mut r = rng::rng_from_seed(seed);
    let mut failures = 0;
    for _ in 0..200 {
        let payload = BitStream::random(256, &mut r);
        let s = coder.encode(&payload).map_err(err)?;
        if coder.decode(&s, 256).map_err(err)? != payload {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("{failures} of 200 failed")))
}

fn ess_exhaustive(_: u64) -> Result<(bool, String), String> {
    let coder = ess_build(4, &[1, 3, 5, 7], 60).map_err(err)?;
    let mut failures = 0;
    for idx in 0..(1u128 << coder.index_bits()) {
        let s = coder.encode_index(idx).map_err(err)?;
        if coder.sequence_energy(&s) > coder.e_max() || coder.decode_index(&s).map_err(err)? != idx
        {
            failures += 1;
        }
    }
    Ok((
        failures == 0,
        format!(
            "{failures} of {} indices failed",
            1u128 << coder.index_bits()
        ),
    ))
}

fn frame_roundtrip(seed: u64) -> Result<(bool, String), String> {
    let frame = MatchedFrame {
        model_id: "check".into(),
        payload_bits: 12,
        seed,
        symbols: vec![3, 1, 4, 1, 5, 9, 2, 6],
    };
    let back = read_frame(&write_frame(&frame)).map_err(err)?;
    Ok((back == frame, String::new()))
}

fn random_symbols(n: usize, seed: u64) -> Vec<C64> {
    let c = Constellation::new(64).expect("64-QAM");
    let mut r = rng::rng_from_seed(seed);
    (0..n).map(|_| c.point(r.random_range(0..64))).collect()
}

fn lossless() -> FiberConfig {
    FiberConfig {
        attenuation_db_per_km: 0.0,
        edfa: false,
        ase_noise: false,
        ..FiberConfig::default()
    }
}

fn ssfm_energy(seed: u64) -> Result<(bool, String), String> {
    let cfg = lossless();
    let tx = rrc_shape(&random_symbols(1024, seed), &cfg, 6.0);
    let rx = ssfm_propagate(&tx, &cfg, seed).map_err(err)?;
    let dev = (rx.energy() / tx.energy() - 1.0).abs();
    Ok((dev < 1e-9, format!("relative energy change {dev:.1e}")))
}

fn cd_inverse(seed: u64) -> Result<(bool, String), String> {
    let cfg = FiberConfig {
        gamma_per_w_km: 0.0,
        ..lossless()
    };
    let tx = rrc_shape(&random_symbols(1024, seed), &cfg, 0.0);
    let back = cd_compensate(&ssfm_propagate(&tx, &cfg, seed).map_err(err)?, &cfg);
    let e: f64 = tx
        .samples
        .iter()
        .zip(&back.samples)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let evm = 10.0 * (e / tx.energy()).log10();
    Ok((evm < -60.0, format!("EVM {evm:.1} dB")))
}

fn iq_roundtrip(seed: u64) -> Result<(bool, String), String> {
    let tx = rrc_shape(&random_symbols(64, seed), &FiberConfig::default(), 1.0);
    let back = read_iq(&write_iq(&tx)).map_err(err)?;
    Ok((back == tx, String::new()))
}

fn zero_gamma_identity(seed: u64) -> Result<(bool, String), String> {
    let x = random_symbols(64, seed);
    let k = PerturbationKernel::zeros(4, 0.0);
    let y = perturbation_channel(&x, &k, 0.0, 0.0, seed).map_err(err)?;
    let p = 1e-3f64;
    let dev = y
        .iter()
        .zip(&x)
        .map(|(a, b)| (a - b * p.sqrt()).norm())
        .fold(0.0, f64::max);
    Ok((dev < 1e-15, format!("max deviation {dev:.1e}")))
}

fn noiseless_air(seed: u64) -> Result<(bool, String), String> {
    let c = qam64()?;
    let model = TableModel::uniform(16, 0);
    let terms = RateTerms::from_model(&model).map_err(err)?;
    let prior = c.symbol_prior(&[1.0 / 16.0; 16]);
    let mut r = rng::rng_from_seed(seed);
    let tx: Vec<usize> = (0..2000).map(|_| r.random_range(0..64)).collect();
    let y: Vec<C64> = tx.iter().map(|&i| c.point(i)).collect();
    let frame = gaussian_demap(&y, &tx, &c, &prior, 1e-4).map_err(err)?;
    let rep = estimate_air(&[frame], &terms, seed);
    let dev = (rep.r_bmd - terms.marginal_entropy).abs();
    Ok((dev < 1e-6, format!("R_bmd {:.8}", rep.r_bmd)))
}

fn small_setup() -> Result<TrainSetup, String> {
    let c = qam64()?;
    let kernel = kernel_from_fiber(&FiberConfig::default(), 2).map_err(err)?;
    let mb = MbDistribution::new(&c.amp_alphabet(), 1.0).pair_law();
    Ok(TrainSetup {
        surrogate: Surrogate::from_fiber(&FiberConfig::default(), kernel, 3.0),
        demapper: DemapperSettings::default(),
        mb_target: mb,
        constellation: c,
    })
}

fn one_hot_forward(seed: u64) -> Result<(bool, String), String> {
    let s = gumbel_softmax_sample(&[0.3, -0.2], 0.5, seed).map_err(err)?;
    let h = s.one_hot();
    let ok = h.iter().filter(|&&v| v == 1.0).count() == 1
        && h.iter().all(|&v| v == 0.0 || v == 1.0)
        && (s.soft.iter().sum::<f64>() - 1.0).abs() < 1e-12;
    Ok((ok, format!("hard {}", s.hard)))
}

fn detached_value(seed: u64) -> Result<(bool, String), String> {
    let s = small_setup()?;
    let model = random_logits(16, 1, 0.5, seed);
    let b = sample_batch(&model, &s, 2, 32, 0.7, seed).map_err(err)?;
    let (a, _) = evaluate(&b, &model, &s, Objective::Lpp, 0.2, false).map_err(err)?;
    let (c, _) = evaluate(&b, &model, &s, Objective::Lpp, 0.2, true).map_err(err)?;
    Ok((a == c, format!("objective {:.9}", a.objective)))
}

fn lpp_degenerate(seed: u64) -> Result<(bool, String), String> {
    let s = small_setup()?;
    let model = pas_core::source::LogitModel::from_marginal(&[1.0 / 16.0; 16], 0);
    let b = sample_batch(&model, &s, 2, 32, 1.0, seed).map_err(err)?;
    let l = loss_l(&b, &model, &s).map_err(err)?;
    let lpp = loss_lpp(&b, &model, &s, 0.0).map_err(err)?;
    let dev = (lpp.objective - l).abs();
    Ok((dev < 1e-12, format!("difference {dev:.1e}")))
}

fn constant_metric(seed: u64) -> Result<(bool, String), String> {
    let c = qam64()?;
    let coder = ess_build(32, &[1, 3, 5, 7], 32 * 49).map_err(err)?;
    let cfg = SelectionConfig {
        candidates: 2,
        metric: SelectionMetric::Constant,
        ..SelectionConfig::default()
    };
    let bits = coder.iq_payload_bits(cfg.blocklength).map_err(err)?;
    let payload = BitStream::random(bits, &mut rng::rng_from_seed(seed));
    let k = PerturbationKernel::zeros(6, 1.3);
    let sel = select_sequence(&payload, &cfg, &coder, &c, &k, seed).map_err(err)?;
    Ok((sel.candidate == 0, format!("candidate {}", sel.candidate)))
}

fn zero_kernel_metric(seed: u64) -> Result<(bool, String), String> {
    let m = nlin_metric(
        &random_symbols(32, seed),
        &PerturbationKernel::zeros(4, 1.3),
    );
    Ok((m == 0.0, format!("metric {m}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        let results = run_all(3, Execution::Sequential);
        let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
        assert!(failed.is_empty(), "{failed:?}");
    }
}
