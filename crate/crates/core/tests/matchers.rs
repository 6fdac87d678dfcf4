use pas_core::matchers::*;
use pas_core::rng;
use pas_core::source::{LogitModel, TableModel};
use pas_core::training::random_logits;
use proptest::prelude::*;
use std::collections::HashSet;

const LEVELS: [u32; 4] = [1, 3, 5, 7];

#[test]
fn ess_exhaustive_roundtrip_up_to_eight() {
    for n in 1..=8usize {
        let lo = n as u64;
        let hi = 49 * n as u64;
        for e_max in [lo + 8, (lo + hi) / 2, hi] {
            let coder = ess_build(n, &LEVELS, e_max).unwrap();
            let mut seen = HashSet::new();
            for idx in 0..(1u128 << coder.index_bits()) {
                let s = coder.encode_index(idx).unwrap();
                assert_eq!(s.len(), n);
                assert!(coder.sequence_energy(&s) <= e_max);
                assert_eq!(coder.decode_index(&s).unwrap(), idx);
                assert!(seen.insert(s));
            }
        }
    }
}

#[test]
fn ess_scan_reaches_rate_target() {
    let t = ess_find_emax(32, &LEVELS, 1.93).unwrap();
    assert!((t.rate - 1.93).abs() <= 0.02, "{t:?}");
    let coder = ess_build(32, &LEVELS, t.e_max).unwrap();
    assert!(coder.rate() <= pas_core::constellation::entropy_bits(&coder.average_marginal()));
}

#[test]
fn adm_chained_frames_decode_with_context() {
    let model = random_logits(16, 1, 1.0, 4).to_table();
    let coder = AdmCoder::new(&model).unwrap();
    let mut r = rng::rng_from_seed(9);
    let a = BitStream::random(300, &mut r);
    let b = BitStream::random(300, &mut r);
    let sa = coder.encode(&a).unwrap();
    let ctx = [*sa.last().unwrap()];
    let sb = coder.encode_after(&b, Some(&ctx)).unwrap();
    assert_eq!(coder.decode(&sa, 300).unwrap(), a);
    assert_eq!(coder.decode_after(&sb, 300, Some(&ctx)).unwrap(), b);
}

#[test]
fn adm_marginal_follows_the_model() {
    let p = [0.4, 0.3, 0.2, 0.1];
    let coder = AdmCoder::new(&TableModel::iid(&p).unwrap()).unwrap();
    let mut r = rng::rng_from_seed(2);
    let mut counts = [0usize; 4];
    for _ in 0..50 {
        for s in coder.encode(&BitStream::random(2048, &mut r)).unwrap() {
            counts[s] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    for (c, q) in counts.iter().zip(p) {
        assert!((*c as f64 / total as f64 - q).abs() < 0.01);
    }
}

#[test]
fn frame_file_rejects_bad_magic() {
    assert!(read_frame("PAS-OTHER 1\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adm_is_bijective(
        seed in any::<u64>(),
        memory in 0usize..3,
        alphabet in 2usize..6,
        n in 1usize..600,
        spread in 0.0f64..3.0,
    ) {
        let model = random_logits(alphabet, memory, spread, seed).to_table();
        let coder = AdmCoder::new(&model).unwrap();
        let payload = BitStream::random(n, &mut rng::rng_from_seed(seed ^ 1));
        let symbols = coder.encode(&payload).unwrap();
        prop_assert!(symbols.iter().all(|&s| s < alphabet));
        prop_assert_eq!(coder.decode(&symbols, n).unwrap(), payload);
    }

    #[test]
    fn distinct_payloads_give_distinct_sequences(seed in any::<u64>(), n in 8usize..200) {
        let coder = AdmCoder::new(&LogitModel::zeros(16, 1).to_table()).unwrap();
        let mut r = rng::rng_from_seed(seed);
        let a = BitStream::random(n, &mut r);
        let mut bits = a.bits().to_vec();
        let flip = seed as usize % n;
        bits[flip] ^= 1;
        let b = BitStream::new(bits);
        prop_assert_ne!(coder.encode(&a).unwrap(), coder.encode(&b).unwrap());
    }

    #[test]
    fn frame_file_roundtrip(
        symbols in prop::collection::vec(0usize..16, 0..200),
        seed in any::<u64>(),
        bits in 1usize..5000,
    ) {
        let f = MatchedFrame { model_id: "m1".into(), payload_bits: bits, seed, symbols };
        prop_assert_eq!(read_frame(&write_frame(&f)).unwrap(), f);
    }
}
