mod common;

use alert_core::alert::Snapshot;
use alert_core::embedder::PatchToken;
use alert_core::grid::PatchId;
use alert_core::head::{argmax, softmax, HeadConfig, HeadWeights, Linear, TransformerHead};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(cls: bool) -> HeadConfig {
    HeadConfig {
        layers: 2,
        heads: 4,
        token_width: 16,
        mlp_ratio: 2,
        num_classes: 5,
        use_class_token: cls,
        final_norm: true,
    }
}

fn tokens(n: usize, c: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..c).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect()
}

#[test]
fn encoder_matches_dense_oracle() {
    for (seed, cls) in [(1, true), (2, false), (3, true)] {
        let c = cfg(cls);
        let w = HeadWeights::random(&c, seed);
        let head = TransformerHead::new(c, w.clone()).unwrap();
        let x = tokens(8, 16, seed + 100);
        let got = head.encode(&x).unwrap();
        let want = common::encode_oracle(&w, c.heads, &x);
        assert_eq!(got.len(), want.len());
        let worst = got
            .iter()
            .flatten()
            .zip(want.iter().flatten())
            .map(|(a, b)| (*a as f64 - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "max deviation {worst}");
    }
}

#[test]
fn zero_weights_are_identity() {
    let c = cfg(false);
    let head = TransformerHead::new(c, HeadWeights::zeros(&c)).unwrap();
    let x = tokens(1, 16, 9);
    assert_eq!(head.encode(&x).unwrap(), x);
    let x = tokens(12, 16, 10);
    assert_eq!(head.encode(&x).unwrap(), x);
}

#[test]
fn output_length_tracks_input() {
    let c = cfg(true);
    let head = TransformerHead::new(c, HeadWeights::random(&c, 4)).unwrap();
    for n in [1, 2, 7, 64] {
        assert_eq!(head.encode(&tokens(n, 16, n as u64)).unwrap().len(), n + 1);
    }
}

#[test]
fn permutation_equivariance() {
    let c = cfg(false);
    let head = TransformerHead::new(c, HeadWeights::random(&c, 5)).unwrap();
    let x = tokens(6, 16, 11);
    let perm = [3, 0, 5, 1, 4, 2];
    let px: Vec<_> = perm.iter().map(|&i| x[i].clone()).collect();
    let out = head.encode(&x).unwrap();
    let pout = head.encode(&px).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        for (a, b) in pout[k].iter().zip(&out[i]) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}

#[test]
fn softmax_shift_invariance_is_exact() {
    // k/256 logits and integer shifts keep every intermediate exact.
    let logits: Vec<f32> = (0..9).map(|k| (k as f32 * 37.0 % 64.0) / 256.0).collect();
    let base = softmax(&logits);
    for shift in [-3.0f32, 1.0, 17.0, 1000.0] {
        let shifted: Vec<f32> = logits.iter().map(|l| l + shift).collect();
        assert_eq!(softmax(&shifted), base);
    }
}

#[test]
fn classify_mean_pooling_and_scaled_classifier() {
    let c = cfg(false);
    let w = HeadWeights::random(&c, 6);
    let head = TransformerHead::new(c, w.clone()).unwrap();
    let snap = Snapshot {
        step: 42,
        time_us: None,
        tokens: tokens(5, 16, 12)
            .into_iter()
            .enumerate()
            .map(|(i, values)| PatchToken {
                patch: PatchId::new(i as u16, 0),
                values,
            })
            .collect(),
    };
    let p = head.classify(&snap).unwrap();
    assert_eq!(p.step, 42);
    assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    assert_eq!(p.class, argmax(&p.probs));
    // scaling weight and bias scales the logits
    for s in [0.5f32, 3.0] {
        let mut w2 = w.clone();
        let cl: &mut Linear = &mut w2.classifier;
        cl.weight.iter_mut().for_each(|v| *v *= s);
        cl.bias.iter_mut().for_each(|v| *v *= s);
        let q = TransformerHead::new(c, w2).unwrap().classify(&snap).unwrap();
        assert_eq!(q.class, p.class);
    }
}

proptest! {
    #[test]
    fn softmax_on_simplex(logits in prop::collection::vec(-50.0f32..50.0, 2..20), shift in -100.0f32..100.0) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f32> = logits.iter().map(|l| l + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn argmax_invariant_under_positive_scale(logits in prop::collection::vec(-10.0f32..10.0, 2..12), s in 0.01f32..100.0) {
        let scaled: Vec<f32> = logits.iter().map(|l| l * s).collect();
        let a = argmax(&softmax(&logits));
        let b = argmax(&softmax(&scaled));
        // distinct maxima only; exact ties after rounding may resolve either way
        let top = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        prop_assume!(logits.iter().filter(|&&l| (l - top).abs() < 1e-3).count() == 1);
        prop_assert_eq!(a, b);
    }
}
