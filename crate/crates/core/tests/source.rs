use pas_core::constellation::entropy_bits;
use pas_core::source::*;
use proptest::prelude::*;

fn h2(p: f64) -> f64 {
    entropy_bits(&[p, 1.0 - p])
}

/// Binary first-order chain with flip probabilities `a` (0→1) and `b` (1→0).
fn two_state(a: f64, b: f64) -> TableModel {
    TableModel::new(2, 1, vec![1.0 - a, a, b, 1.0 - b]).unwrap()
}

#[test]
fn two_state_chain_matches_closed_form() {
    let (a, b) = (0.1, 0.3);
    let m = two_state(a, b);
    let law = stationary_law(&m).unwrap();
    let pi0 = b / (a + b);
    assert!((law.marginal[0] - pi0).abs() < 1e-12);
    let h_rate = pi0 * h2(a) + (1.0 - pi0) * h2(b);
    assert!((entropy_rate(&m).unwrap() - h_rate).abs() < 1e-12);
    let r = rate_loss_theoretical(&m).unwrap();
    assert!((r - (h2(pi0) - h_rate)).abs() < 1e-12);
}

#[test]
fn second_order_marginal_matches_long_sample() {
    let probs: Vec<f64> = (0..27)
        .collect::<Vec<_>>()
        .chunks(3)
        .flat_map(|c| {
            let w: Vec<f64> = c.iter().map(|&i| 1.0 + ((i * 7) % 5) as f64).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(move |x| x / s)
        })
        .collect();
    let m = TableModel::new(3, 2, probs).unwrap();
    let law = stationary_law(&m).unwrap();
    let seq = sample_sequence(&m, 200_000, 5, None).unwrap();
    for s in 0..3 {
        let f = seq.iter().filter(|&&x| x == s).count() as f64 / seq.len() as f64;
        assert!(
            (f - law.marginal[s]).abs() < 0.01,
            "{s}: {f} vs {}",
            law.marginal[s]
        );
    }
}

#[test]
fn block_model_rate_loss_is_nonnegative() {
    // Joint law over two binary symbols with strong positive correlation.
    let b = BlockModel::new(2, 2, vec![0.45, 0.05, 0.05, 0.45]).unwrap();
    assert!(b.rate_loss() > 0.0);
    assert!((b.position_marginal(1)[0] - 0.5).abs() < 1e-12);
}

#[test]
fn model_file_rejects_bad_rows() {
    let text = format!("{MODEL_MAGIC}\nalphabet 2\nmemory 0\n0.7 0.7\n");
    assert!(read_model(&text).is_err());
    assert!(read_model("NOT-A-MODEL\n").is_err());
}

proptest! {
    #[test]
    fn rate_loss_is_nonnegative(logits in prop::collection::vec(-3.0f64..3.0, 16 * 4)) {
        let mut lm = LogitModel::zeros(4, 2);
        lm.logits.copy_from_slice(&logits);
        let m = lm.to_table();
        let law = stationary_law(&m).unwrap();
        let r = rate_loss_with(&m, &law);
        prop_assert!(r >= -1e-12);
        prop_assert!(entropy_rate_with(&m, &law) <= entropy_bits(&law.marginal) + 1e-12);
        prop_assert!((law.marginal.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_file_roundtrip(logits in prop::collection::vec(-5.0f64..5.0, 9)) {
        let mut lm = LogitModel::zeros(3, 1);
        lm.logits.copy_from_slice(&logits);
        let m = lm.to_table();
        prop_assert_eq!(read_model(&write_model(&m)).unwrap(), m);
    }
}
