use super::*;
use crate::corpus::{Sentence, Vocab, CLS, PAD, UNK};
use crate::masking::MaskStrategy;
use crate::mlm::{train_mlm, Dims, TrainConfig};
use crate::rng::{seeded, split};
use rand::Rng as _;

struct Uniform(usize);

impl ConditionalModel for Uniform {
    fn vocab_size(&self) -> usize {
        self.0
    }
    fn conditional(&self, _: &[usize], _: usize) -> Result<Vec<f64>> {
        Ok(vec![1.0 / self.0 as f64; self.0])
    }
}

/// Always predicts token 5.
struct OneHot;

impl ConditionalModel for OneHot {
    fn vocab_size(&self) -> usize {
        8
    }
    fn conditional(&self, _: &[usize], _: usize) -> Result<Vec<f64>> {
        let mut p = vec![0.0; 8];
        p[5] = 1.0;
        Ok(p)
    }
}

/// Transformer whose attention output is zeroed: each position only sees
/// itself.
fn blind_model(vocab: usize, seed: u64) -> TinyMlm {
    let mut m = TinyMlm::new(Dims::small(vocab, 8), seed).unwrap();
    for l in &mut m.params.layers {
        l.wo.iter_mut().for_each(|w| *w = 0.0);
    }
    m
}

fn tiny_model(vocab: usize, seed: u64, sharpen: f64) -> TinyMlm {
    let dims = Dims {
        vocab,
        hidden: 16,
        heads: 2,
        ffn: 16,
        layers: 2,
        max_len: 8,
    };
    let mut m = TinyMlm::new(dims, seed).unwrap();
    for t in m.params.tensors_mut() {
        t.iter_mut().for_each(|w| *w *= sharpen);
    }
    m
}

fn random_table(len: usize, k: usize, seed: u64) -> TableModel {
    let mut rng = seeded(seed);
    let raw: Vec<f64> = (0..k.pow(len as u32))
        .map(|_| rng.random::<f64>().powi(3) + 1e-3)
        .collect();
    let z: f64 = raw.iter().sum();
    TableModel::new(len, k, raw.into_iter().map(|p| p / z).collect()).unwrap()
}

/// I(x_i; x_j | rest = ctx) by summing the joint table.
fn enumerated_cond_mi(t: &TableModel, ctx: &[usize], i: usize, j: usize) -> f64 {
    let k = t.n_types();
    let mut joint = vec![vec![0.0; k]; k];
    for (idx, &p) in t.probs().iter().enumerate() {
        let cell = t.decode(idx);
        let ok = (0..ctx.len()).all(|q| q == i || q == j || cell[q] == ctx[q]);
        if ok {
            joint[cell[i] - FIRST_TOKEN][cell[j] - FIRST_TOKEN] += p;
        }
    }
    let z: f64 = joint.iter().flatten().sum();
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() / z).collect();
    let pb: Vec<f64> = (0..k).map(|b| joint.iter().map(|r| r[b]).sum::<f64>() / z).collect();
    let mut mi = 0.0;
    for a in 0..k {
        for b in 0..k {
            let p = joint[a][b] / z;
            if p > 0.0 {
                mi += p * (p / (pa[a] * pb[b])).ln();
            }
        }
    }
    mi
}

#[test]
fn table_conditionals_marginalize_masks() {
    // two binary positions, perfectly correlated
    let t = TableModel::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
    assert_eq!(t.conditional(&[MASK, 4], 0).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    assert_eq!(t.conditional(&[MASK, MASK], 0).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);
    assert!(t.conditional(&[4, 4], 0).is_err());
    assert!(matches!(
        TableModel::new(2, 2, vec![0.5, 0.1, 0.0, 0.5]),
        Err(Error::Unnormalized(_))
    ));
    assert_eq!(t.encode(&t.decode(3)), 3);
}

#[test]
fn uniform_model_gives_uniform_marginals() {
    let model = Uniform(9);
    // structural symbols PAD, CLS, MASK are never sampled
    let support: Vec<usize> = (0..9).filter(|&v| ![PAD, CLS, MASK].contains(&v)).collect();
    let mut cache = ProbCache::new();
    let ids = vec![4, 5, 6, 7];
    let t = 10_000;
    let chain = gibbs_chain(&model, &mut cache, &ids, 0, 2, t, 0, &mut seeded(1)).unwrap();
    assert_eq!(chain.samples.len(), t);
    assert_eq!(chain.context, vec![MASK, 5, MASK, 7]);
    for side in 0..2 {
        let mut counts = vec![0usize; 9];
        for &(a, b) in &chain.samples {
            counts[if side == 0 { a } else { b }] += 1;
        }
        let e = t as f64 / support.len() as f64;
        let chi2: f64 = support
            .iter()
            .map(|&v| (counts[v] as f64 - e).powi(2) / e)
            .sum();
        // chi-square critical value, 5 degrees of freedom, p = 0.01
        assert!(chi2 < 15.086, "chi2 = {chi2}, counts {counts:?}");
        assert_eq!(counts[PAD] + counts[CLS] + counts[MASK], 0);
        assert!(counts[UNK] > 0);
    }
}

#[test]
fn one_hot_model_gives_constant_chain() {
    let mut cache = ProbCache::new();
    let chain = gibbs_chain(&OneHot, &mut cache, &[4, 6, 7], 0, 1, 500, 0, &mut seeded(2)).unwrap();
    assert!(chain.samples.iter().all(|&s| s == (5, 5)));
}

#[test]
fn chains_are_reproducible() {
    let m = tiny_model(10, 4, 8.0);
    let ids = vec![4, 5, 6, 7, 8];
    let run = |seed| {
        let mut cache = ProbCache::new();
        gibbs_chain(&m, &mut cache, &ids, 1, 3, 300, 5, &mut seeded(seed)).unwrap()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn range_and_step_errors() {
    let m = Uniform(6);
    let mut c = ProbCache::new();
    let ids = [4, 5, 4];
    assert!(matches!(
        cond_pmi(&m, &mut c, &ids, 0, 3),
        Err(Error::OutOfRange { pos: 3, len: 3 })
    ));
    assert!(cond_pmi(&m, &mut c, &ids, 1, 1).is_err());
    assert!(cond_mi(&m, &mut c, &ids, 0, 1, 0, 0, &mut seeded(0)).is_err());
}

#[test]
fn blind_model_scores_zero() {
    let m = blind_model(10, 3);
    let ids = vec![4, 7, 9, 5, 6];
    let mut c = ProbCache::new();
    for (i, j) in [(0, 1), (2, 4), (4, 0)] {
        let pmi = cond_pmi(&m, &mut c, &ids, i, j).unwrap();
        assert!(pmi.abs() < 1e-9, "cond pmi {pmi}");
        let t = 2000;
        let mi = cond_mi(&m, &mut c, &ids, i, j, t, 0, &mut seeded(i as u64)).unwrap();
        assert!(mi.abs() <= 3.0 / (t as f64).sqrt(), "cond mi {mi}");
    }
}

#[test]
fn cond_pmi_bounded_by_surprisal() {
    for seed in 0..10 {
        let m = tiny_model(12, seed, 8.0);
        let mut rng = seeded(100 + seed);
        let ids: Vec<usize> = (0..6).map(|_| rng.random_range(4..12)).collect();
        let mut c = ProbCache::new();
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    continue;
                }
                let v = cond_pmi(&m, &mut c, &ids, i, j).unwrap();
                let mut x = ids.clone();
                x[i] = MASK;
                x[j] = MASK;
                let p = m.conditional(&x, i).unwrap();
                let real: f64 = p.iter().enumerate().filter(|(k, _)| *k != PAD && *k != CLS && *k != MASK).map(|(_, q)| q).sum();
                let surprisal = -(p[ids[i]] / real).ln();
                assert!(v <= surprisal + 1e-12);
            }
        }
    }
}

#[test]
fn cond_mi_nearly_non_negative_on_random_models() {
    let t = 1000;
    for seed in 0..10 {
        // plain random init; heavily sharpened weights give conditionals that no
        // joint distribution shares, and the estimate then drifts negative
        let m = tiny_model(9, seed, 1.0);
        let mut rng = seeded(200 + seed);
        let ids: Vec<usize> = (0..5).map(|_| rng.random_range(4..9)).collect();
        let mut c = ProbCache::new();
        let mi = cond_mi(&m, &mut c, &ids, 0, 3, t, 0, &mut split(seed, 1)).unwrap();
        assert!(mi >= -5.0 / (t as f64).sqrt(), "seed {seed}: {mi}");
    }
}

#[test]
fn estimator_matches_enumeration() {
    let t = random_table(3, 4, 11);
    let ctx = vec![MASK, 6, MASK];
    let exact = enumerated_cond_mi(&t, &[0, 6, 0], 0, 2);
    let mut c = ProbCache::new();
    let est = cond_mi(&t, &mut c, &ctx, 0, 2, 100_000, 0, &mut seeded(5)).unwrap();
    assert!((est - exact).abs() < 0.02, "estimate {est}, exact {exact}");
    // the cache turns 200k conditional queries into a handful of model calls
    assert!(c.misses() <= 16, "{} misses", c.misses());
}

#[test]
fn cond_pmi_detects_a_functional_dependence() {
    let words: Vec<String> = (0..4)
        .flat_map(|k| [format!("p{k}"), format!("q{k}")])
        .chain(["m0".to_string(), "m1".to_string()])
        .collect();
    let vocab = Vocab::from_words(words.iter().cloned());
    let mut rng = seeded(21);
    let corpus: Vec<Sentence> = (0..200)
        .map(|_| {
            let k = rng.random_range(0..4);
            let r = rng.random_range(0..2);
            let w = [format!("p{k}"), format!("m{r}"), format!("q{k}")];
            Sentence::from_words(&w, &vocab)
        })
        .collect();
    let mut m = TinyMlm::new(Dims::small(vocab.len(), 4), 2).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        seed: 2,
        ..TrainConfig::pretrain()
    };
    train_mlm(&mut m, &corpus, &MaskStrategy::uniform(0.4).unwrap(), &cfg).unwrap();
    let mut c = ProbCache::new();
    let s = &corpus[0];
    let dep = cond_pmi(&m, &mut c, &s.ids, 2, 0).unwrap();
    assert!(dep > 1.0, "cond pmi {dep}");
}

#[test]
fn pmi_matrix_delegates_to_table() {
    let v = Vocab::from_words(["a", "b", "c"]);
    let corpus: Vec<Sentence> = ["a b c", "a b", "b c"]
        .iter()
        .map(|l| Sentence::from_words(&l.split(' ').collect::<Vec<_>>(), &v))
        .collect();
    let table = PmiTable::from_corpus(&corpus);
    let s = &corpus[0];
    let m = dependence_matrix(Scorer::Pmi(&table), s, &DependenceConfig::default()).unwrap();
    assert_eq!(m.method, Method::Pmi);
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 0.0 } else { table.pmi(s.ids[i], s.ids[j]) };
            assert_eq!(m.get(i, j), want);
        }
    }
}

#[test]
fn model_matrices_are_exactly_symmetric() {
    let m = tiny_model(10, 8, 8.0);
    let s = Sentence::from_ids(vec![4, 9, 6, 5, 7], &Vocab::from_words(["a", "b", "c", "d", "e", "f"]));
    let cfg = DependenceConfig {
        gibbs_steps: 200,
        ..Default::default()
    };
    for scorer in [Scorer::CondPmi(&m), Scorer::CondMi(&m)] {
        let d = dependence_matrix(scorer, &s, &cfg).unwrap();
        for i in 0..d.n {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..d.n {
                assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }
    let d = dependence_matrix(Scorer::CondMi(&m), &s, &cfg).unwrap();
    assert_eq!(d.meta.gibbs_steps, Some(200));
    let back = DependenceMatrix::from_json(&d.to_json().unwrap()).unwrap();
    assert_eq!(back, d);
    assert!(dependence_matrix(Scorer::CondPmi(&m), &Sentence::from_ids(vec![4], &Vocab::from_words(["a"])), &cfg).is_err());
}

fn sample_matrix(n: usize, seed: u64) -> DependenceMatrix {
    let mut rng = seeded(seed);
    DependenceMatrix::from_fn(n, Method::CondMi, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

#[test]
fn identity_word_map_is_a_no_op() {
    let m = sample_matrix(5, 1);
    assert_eq!(aggregate_words(&m, &[0, 1, 2, 3, 4]).unwrap(), m);
}

#[test]
fn subwords_aggregate_by_max() {
    let m = sample_matrix(3, 2);
    let w = aggregate_words(&m, &[0, 0, 1]).unwrap();
    assert_eq!(w.n, 2);
    assert_eq!(w.get(0, 1), m.get(0, 2).max(m.get(1, 2)));
    assert_eq!(w.get(0, 0), 0.0);
    assert!(matches!(aggregate_words(&m, &[0, 1]), Err(Error::Dimension(_))));
    assert!(aggregate_words(&m, &[0, 2, 2]).is_err());
}

#[test]
fn aggregation_is_monotone() {
    let map = [0, 0, 1, 2, 2, 2];
    for seed in 0..50 {
        let m = sample_matrix(6, seed);
        let base = aggregate_words(&m, &map).unwrap();
        let mut rng = seeded(1000 + seed);
        let (i, j) = (rng.random_range(0..6), rng.random_range(0..6));
        if i == j {
            continue;
        }
        let mut up = m.clone();
        let bump = rng.random_range(0.0..2.0);
        up.scores[i * 6 + j] += bump;
        up.scores[j * 6 + i] += bump;
        let raised = aggregate_words(&up, &map).unwrap();
        for (a, b) in base.scores.iter().zip(&raised.scores) {
            assert!(b >= a);
        }
    }
}

#[test]
fn method_names_round_trip() {
    for m in [Method::Pmi, Method::CondPmi, Method::CondMi] {
        assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
    }
    assert!("mi".parse::<Method>().is_err());
}
