use pas_core::channel::{kernel_from_fiber, FiberConfig, PerturbationKernel};
use pas_core::constellation::{mb_fit_entropy, Constellation};
use pas_core::source::{rate_loss_theoretical, LogitModel};
use pas_core::training::*;
use pas_core::C64;
use std::sync::OnceLock;

fn kernel() -> &'static PerturbationKernel {
    static K: OnceLock<PerturbationKernel> = OnceLock::new();
    K.get_or_init(|| kernel_from_fiber(&FiberConfig::default(), 4).unwrap())
}

fn setup(order: usize, power: f64, gamma_scale: f64, demapper: DemapperSettings) -> TrainSetup {
    let c = Constellation::new(order).unwrap();
    let per_dim = (c.amp_alphabet_size() as f64).log2() / 2.0;
    let mb = mb_fit_entropy(&c, 0.9 * per_dim, 1e-9).unwrap().pair_law();
    let surrogate = Surrogate::from_fiber(
        &FiberConfig::default(),
        kernel().with_gamma_scale(gamma_scale),
        power,
    );
    TrainSetup {
        constellation: c,
        surrogate,
        demapper,
        mb_target: mb,
    }
}

fn fixed(var: f64) -> DemapperSettings {
    DemapperSettings {
        noise_var: Some(var),
        derotate: false,
    }
}

#[test]
fn gradient_contract_on_tiny_instance() {
    let mut s = setup(16, 6.0, 1.0, fixed(0.08));
    s.surrogate.kernel = s.surrogate.kernel.truncated(2);
    for (memory, seed) in [(0, 1), (1, 2)] {
        let model = random_logits(4, memory, 0.7, seed);
        let cfg = GradCheckConfig {
            sequence_length: if memory == 0 { 6 } else { 5 },
            ..GradCheckConfig::default()
        };
        let r = gradient_check(&model, &s, &cfg).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        assert!(
            r.rate_loss_rel_error < 1e-6 && r.kl_rel_error < 1e-6,
            "{r:?}"
        );
    }
}

#[test]
fn transparent_channel_uniform_model_gives_minus_m() {
    let s = TrainSetup {
        surrogate: Surrogate {
            kernel: kernel().with_gamma_scale(0.0),
            launch_power_dbm: 0.0,
            noise_variance: 0.0,
        },
        ..setup(64, 0.0, 0.0, fixed(1e-4))
    };
    let model = LogitModel::zeros(16, 0);
    let batch = sample_batch(&model, &s, 4, 64, 1.0, 3).unwrap();
    let l = loss_l(&batch, &model, &s).unwrap();
    assert!((l + 6.0).abs() < 1e-9, "{l}");
}

#[test]
fn value_independent_of_gradient_tracking() {
    let s = setup(64, 3.0, 1.0, DemapperSettings::default());
    let model = random_logits(16, 1, 0.5, 4);
    let batch = sample_batch(&model, &s, 3, 64, 0.7, 5).unwrap();
    let (a, _) = evaluate(&batch, &model, &s, Objective::Lpp, 0.2, false).unwrap();
    let (b, g) = evaluate(&batch, &model, &s, Objective::Lpp, 0.2, true).unwrap();
    assert_eq!(a, b);
    assert!(g.unwrap().iter().all(|x| x.is_finite()));
}

#[test]
fn lpp_terms_match_oracles() {
    let s = setup(64, 3.0, 1.0, DemapperSettings::default());
    let iid = LogitModel::from_marginal(&[1.0 / 16.0; 16], 0);
    let batch = sample_batch(&iid, &s, 2, 64, 1.0, 6).unwrap();
    let l = loss_l(&batch, &iid, &s).unwrap();
    let lpp = loss_lpp(&batch, &iid, &s, 0.0).unwrap();
    assert!((lpp.objective - l).abs() < 1e-12);

    let mb = LogitModel::from_marginal(&s.mb_target, 0);
    assert!(loss_lpp(&batch, &mb, &s, 3.0).unwrap().kl.abs() < 1e-12);

    let hand = random_logits(16, 1, 1.0, 8);
    let lambda = 0.37;
    let b2 = sample_batch(&hand, &s, 2, 64, 1.0, 9).unwrap();
    let l = loss_l(&b2, &hand, &s).unwrap();
    let lpp = loss_lpp(&b2, &hand, &s, lambda).unwrap();
    let table = hand.to_table();
    let rloss = rate_loss_theoretical(&table).unwrap();
    let law = pas_core::source::stationary_law(&table).unwrap();
    let kl: f64 = law
        .marginal
        .iter()
        .zip(&s.mb_target)
        .map(|(p, q)| p * (p / q).log2())
        .sum();
    assert!((lpp.objective - l - rloss - lambda * kl).abs() < 1e-9);
}

#[test]
fn monte_carlo_loss_matches_enumeration() {
    // Smallest amplitude alphabet (16-QAM), memoryless channel with a single
    // self-phase tap, no noise: the loss is a finite average.
    let mut c = vec![C64::new(0.0, 0.0); 9];
    c[4] = C64::new(3.0, 0.0);
    let k = PerturbationKernel::from_coeffs(1, c, 1.3).unwrap();
    let s = TrainSetup {
        surrogate: Surrogate {
            kernel: k,
            launch_power_dbm: 6.0,
            noise_variance: 0.0,
        },
        ..setup(16, 6.0, 1.0, fixed(0.15))
    };
    let model = LogitModel::from_marginal(&[0.4, 0.3, 0.2, 0.1], 0);
    let table = model.to_table();
    let t = 3;
    let mut tx = Vec::new();
    let mut w = Vec::new();
    for code in 0..(16usize.pow(t as u32)) {
        let mut r = code;
        let mut seq = Vec::new();
        let mut p = 1.0;
        for _ in 0..t {
            let idx = r % 16;
            r /= 16;
            let (_, amp) = s.constellation.decompose(idx);
            p *= table.probs()[amp] / 4.0;
            seq.push(idx);
        }
        tx.push(seq);
        w.push(p);
    }
    let n = tx.len();
    let exact = Batch::from_sequences(tx, vec![vec![C64::new(0.0, 0.0); t]; n], Some(w)).unwrap();
    let l_exact = loss_l(&exact, &model, &s).unwrap();
    let mc = sample_batch(&model, &s, 400_000, t, 1.0, 10).unwrap();
    let l_mc = loss_l(&mc, &model, &s).unwrap();
    assert!((l_exact - l_mc).abs() < 1e-3, "{l_exact} vs {l_mc}");
}

#[test]
fn training_is_deterministic() {
    let s = setup(16, 3.0, 1.0, DemapperSettings::default());
    let cfg = TrainConfig {
        steps: 5,
        batch: 4,
        sequence_length: 32,
        launch_power_dbm: 3.0,
        ..TrainConfig::default()
    };
    let m0 = random_logits(4, 1, 0.5, 1);
    let (a, ta) = train(&cfg, m0.clone(), &s).unwrap();
    let (b, tb) = train(&cfg, m0, &s).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta.to_csv(), tb.to_csv());
    assert!(ta
        .records
        .iter()
        .all(|r| r.r_loss >= -1e-12 && r.loss.is_finite()));
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn marginal(m: &LogitModel) -> Vec<f64> {
    pas_core::source::stationary_law(&m.to_table())
        .unwrap()
        .marginal
}

#[test]
fn large_lambda_on_linear_channel_reaches_mb() {
    let s = setup(64, 0.0, 0.0, DemapperSettings::default());
    let cfg = TrainConfig {
        objective: Objective::Lpp,
        lambda: 20.0,
        steps: 200,
        batch: 8,
        sequence_length: 128,
        launch_power_dbm: 0.0,
        learning_rate: 0.2,
        ..TrainConfig::default()
    };
    let (m, trace) = train(&cfg, random_logits(16, 1, 0.5, 3), &s).unwrap();
    assert!(trace.aborted.is_none());
    let d = tv(&marginal(&m), &s.mb_target);
    assert!(d < 0.02, "TV {d}");
}

#[test]
fn objectives_agree_on_memoryless_channel() {
    let s = setup(64, 0.0, 0.0, DemapperSettings::default());
    // With λ = 0 the only difference is the rate-loss term, which has no
    // bearing on the marginal when the channel has no memory.
    let base = TrainConfig {
        lambda: 0.0,
        steps: 400,
        batch: 32,
        sequence_length: 128,
        learning_rate: 0.2,
        launch_power_dbm: 0.0,
        ..TrainConfig::default()
    };
    let init = random_logits(16, 1, 0.3, 5);
    let (ml, _) = train(
        &TrainConfig {
            objective: Objective::L,
            ..base.clone()
        },
        init.clone(),
        &s,
    )
    .unwrap();
    let (mp, _) = train(
        &TrainConfig {
            objective: Objective::Lpp,
            ..base
        },
        init,
        &s,
    )
    .unwrap();
    let d = tv(&marginal(&ml), &marginal(&mp));
    assert!(d < 0.05, "TV {d}");
    let rl = |m: &LogitModel| rate_loss_theoretical(&m.to_table()).unwrap();
    assert!(rl(&mp) < rl(&ml));
}
