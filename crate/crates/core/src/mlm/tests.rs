use super::*;
use crate::corpus::{Sentence, Vocab, MASK, PAD};
use crate::masking::MaskStrategy;
use crate::rng::seeded;
use rand::Rng as _;

fn tiny_dims() -> Dims {
    Dims {
        vocab: 9,
        hidden: 8,
        heads: 2,
        ffn: 6,
        layers: 2,
        max_len: 6,
    }
}

fn random_batch(rng: &mut crate::rng::Rng, dims: &Dims, items: usize) -> Vec<MlmExample> {
    (0..items)
        .map(|_| {
            let len = rng.random_range(2..=dims.max_len);
            let ids: Vec<usize> = (0..len).map(|_| rng.random_range(4..dims.vocab)).collect();
            let mut input = ids.clone();
            let mut targets = Vec::new();
            for p in 0..len {
                if targets.is_empty() && p == len - 1 || rng.random::<f64>() < 0.3 {
                    input[p] = MASK;
                    targets.push((p, ids[p]));
                }
            }
            MlmExample { input, targets }
        })
        .collect()
}

/// Every coordinate of every tensor against central differences.
fn max_rel_error(model: &TinyMlm, batch: &[MlmExample]) -> (f64, String) {
    let (_, grads) = mlm_loss_and_grad(model, batch).unwrap();
    let h = 1e-5;
    let mut worst = (0.0, String::new());
    let names: Vec<String> = model.params.named().into_iter().map(|(n, _)| n).collect();
    for (ti, name) in names.iter().enumerate() {
        let len = model.params.named()[ti].1.len();
        let analytic = grads.named()[ti].1.clone();
        for k in 0..len {
            let mut plus = model.clone();
            plus.params.tensors_mut()[ti][k] += h;
            let mut minus = model.clone();
            minus.params.tensors_mut()[ti][k] -= h;
            let fd = (mlm_loss(&plus, batch).unwrap() - mlm_loss(&minus, batch).unwrap()) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{k}] analytic {a:e} numeric {fd:e}"));
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let dims = tiny_dims();
    let mut rng = seeded(5);
    for trial in 0..3 {
        let mut model = TinyMlm::new(dims, trial).unwrap();
        // move away from the symmetric init so every path carries signal
        for t in model.params.tensors_mut() {
            t.iter_mut().for_each(|x| *x += 0.1 * (rng.random::<f64>() - 0.5));
        }
        let batch = random_batch(&mut rng, &dims, 2);
        let (rel, at) = max_rel_error(&model, &batch);
        assert!(rel < 1e-4, "trial {trial}: {rel:e} at {at}");
    }
}

#[test]
fn gradient_check_with_padding() {
    let dims = tiny_dims();
    let mut model = TinyMlm::new(dims, 9).unwrap();
    let mut rng = seeded(6);
    for t in model.params.tensors_mut() {
        t.iter_mut().for_each(|x| *x += 0.1 * (rng.random::<f64>() - 0.5));
    }
    let batch = vec![MlmExample {
        input: vec![5, MASK, 7, PAD, PAD],
        targets: vec![(1, 6)],
    }];
    let (rel, at) = max_rel_error(&model, &batch);
    assert!(rel < 1e-4, "{rel:e} at {at}");
}

#[test]
fn outputs_are_normalized_and_near_uniform_at_init() {
    let dims = Dims::small(40, 12);
    let model = TinyMlm::new(dims, 1).unwrap();
    let ids = [4, 5, MASK, 9, 30, 2];
    for p in model.forward_mlm(&ids).unwrap() {
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        let max = p.iter().cloned().fold(0.0, f64::max);
        assert!(max < 5.0 / 40.0, "max prob {max}");
    }
}

#[test]
fn pad_positions_do_not_leak() {
    let dims = tiny_dims();
    let mut model = TinyMlm::new(dims, 2).unwrap();
    let mut rng = seeded(2);
    for t in model.params.tensors_mut() {
        t.iter_mut().for_each(|x| *x += 0.3 * (rng.random::<f64>() - 0.5));
    }
    // Swap the positional rows of the two PAD slots: only PAD rows change.
    let a = model.forward_mlm(&[5, MASK, 6, PAD, PAD]).unwrap();
    let d = dims.hidden;
    let mut swapped = model.clone();
    for c in 0..d {
        swapped.params.pos_emb.swap(3 * d + c, 4 * d + c);
    }
    let b = swapped.forward_mlm(&[5, MASK, 6, PAD, PAD]).unwrap();
    for t in 0..3 {
        for (x, y) in a[t].iter().zip(&b[t]) {
            assert!((x - y).abs() < 1e-14);
        }
    }
    // A shorter input without the PAD tail gives the same real outputs.
    let c = model.forward_mlm(&[5, MASK, 6]).unwrap();
    for t in 0..3 {
        for (x, y) in a[t].iter().zip(&c[t]) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn loss_limits() {
    let dims = tiny_dims();
    let batch = vec![MlmExample {
        input: vec![4, MASK, 6],
        targets: vec![(1, 7)],
    }];
    let mut uniform = TinyMlm::new(dims, 0).unwrap();
    uniform.params.tok_emb.iter_mut().for_each(|x| *x = 0.0);
    let l = mlm_loss(&uniform, &batch).unwrap();
    assert!((l - (dims.vocab as f64).ln()).abs() < 1e-12);

    let mut rigged = uniform.clone();
    rigged.params.out_bias[7] = 1e3;
    assert!(mlm_loss(&rigged, &batch).unwrap() < 1e-12);
}

#[test]
fn target_must_be_masked() {
    let model = TinyMlm::new(tiny_dims(), 0).unwrap();
    let bad = vec![MlmExample {
        input: vec![4, 5, 6],
        targets: vec![(1, 5)],
    }];
    assert!(matches!(mlm_loss_and_grad(&model, &bad), Err(crate::Error::Target(_))));
    let none = vec![MlmExample {
        input: vec![4, MASK],
        targets: vec![],
    }];
    assert!(mlm_loss_and_grad(&model, &none).is_err());
    assert!(matches!(
        model.encode(&[4; 7]),
        Err(crate::Error::TooLong { len: 7, max_len: 6 })
    ));
}

#[test]
fn positional_permutation_equivariance() {
    // Permuting positional rows together with input positions leaves the loss unchanged.
    let dims = tiny_dims();
    let mut model = TinyMlm::new(dims, 4).unwrap();
    let mut rng = seeded(4);
    for t in model.params.tensors_mut() {
        t.iter_mut().for_each(|x| *x += 0.2 * (rng.random::<f64>() - 0.5));
    }
    let perm = [2usize, 0, 3, 1];
    let input = vec![4, MASK, 6, 7];
    let batch = vec![MlmExample {
        input: input.clone(),
        targets: vec![(1, 8)],
    }];
    let mut permuted = model.clone();
    let d = dims.hidden;
    // new position k holds old position perm[k]
    for (k, &old) in perm.iter().enumerate() {
        permuted.params.pos_emb[k * d..(k + 1) * d]
            .copy_from_slice(&model.params.pos_emb[old * d..(old + 1) * d]);
    }
    let new_input: Vec<usize> = perm.iter().map(|&old| input[old]).collect();
    let new_pos = perm.iter().position(|&o| o == 1).unwrap();
    let pbatch = vec![MlmExample {
        input: new_input,
        targets: vec![(new_pos, 8)],
    }];
    let a = mlm_loss(&model, &batch).unwrap();
    let b = mlm_loss(&permuted, &pbatch).unwrap();
    assert!((a - b).abs() < 1e-12);
}

fn memorizable_corpus() -> (Vocab, Vec<Sentence>) {
    let words: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
    let vocab = Vocab::from_words(words.iter().cloned());
    let mut rng = seeded(77);
    let sents = (0..50)
        .map(|_| {
            let len = rng.random_range(3..=6);
            let w: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..12)].as_str()).collect();
            Sentence::from_words(&w, &vocab)
        })
        .collect();
    (vocab, sents)
}

#[test]
fn training_is_deterministic() {
    let (vocab, sents) = memorizable_corpus();
    let cfg = TrainConfig {
        epochs: 3,
        seed: 3,
        ..TrainConfig::pretrain()
    };
    let run = || {
        let mut m = TinyMlm::new(Dims::small(vocab.len(), 8), 3).unwrap();
        let r = train_mlm(&mut m, &sents, &MaskStrategy::uniform(0.15).unwrap(), &cfg).unwrap();
        (r.loss_curve, m)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(a, b);
    assert_eq!(ma, mb);
}

#[test]
fn memorizes_a_small_corpus() {
    let (vocab, sents) = memorizable_corpus();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 10,
        seed: 1,
        lr: 3e-4,
        ..TrainConfig::pretrain()
    };
    let mut m = TinyMlm::new(Dims::small(vocab.len(), 8), 1).unwrap();
    // one masked slot per sentence, so each target's context is fully observed
    let strategy = MaskStrategy::mixture(0.0).unwrap();
    let report = train_mlm(&mut m, &sents, &strategy, &cfg).unwrap();
    let ln_v = (vocab.len() as f64).ln();
    let last = *report.loss_curve.last().unwrap();
    assert!(last < 0.1 * ln_v, "final loss {last}, ln|V| {ln_v}");
    // smoothed curve is non-increasing
    let smooth: Vec<f64> = report.loss_curve.chunks(10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    for w in smooth.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{smooth:?}");
    }
}

#[test]
fn finetune_learns_a_separable_task() {
    let words: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
    let vocab = Vocab::from_words(words.iter().cloned());
    let mut rng = seeded(8);
    let key = vocab.lookup("t0");
    let mut make = |n: usize| -> Vec<(Sentence, usize)> {
        (0..n)
            .map(|_| {
                let len = rng.random_range(3..=6);
                let y = rng.random_range(0..2usize);
                let mut ids: Vec<usize> = (0..len).map(|_| 5 + rng.random_range(0..9)).collect();
                if y == 1 {
                    let p = rng.random_range(0..len);
                    ids[p] = key;
                }
                (Sentence::from_ids(ids, &vocab), y)
            })
            .collect()
    };
    let train = make(300);
    let dev = make(200);
    let cfg = TrainConfig {
        epochs: 10,
        lr: 1e-3,
        ..TrainConfig::finetune()
    };
    let mut m = TinyMlm::new(Dims::small(vocab.len(), 8), 2).unwrap();
    let r = finetune(&mut m, &train, &dev, 2, &cfg, false).unwrap();
    assert!(r.dev_accuracy > 0.95, "dev accuracy {}", r.dev_accuracy);
    assert!(accuracy(&m, &r.head, &dev).unwrap() == r.dev_accuracy);

    let single: Vec<(Sentence, usize)> = train.iter().map(|(s, _)| (s.clone(), 0)).collect();
    assert!(matches!(
        finetune(&mut m, &single, &dev, 2, &cfg, false),
        Err(crate::Error::SingleClass)
    ));
}

#[test]
fn single_position_inference_matches_full_pass() {
    let dims = Dims::small(30, 10);
    let model = TinyMlm::new(dims, 12).unwrap();
    let ids = [4, 9, MASK, 20, PAD, 11];
    let full = model.forward_mlm(&ids).unwrap();
    for pos in 0..ids.len() {
        let one = model.predict_position(&ids, pos).unwrap();
        for (a, b) in one.iter().zip(&full[pos]) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
