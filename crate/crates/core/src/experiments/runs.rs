use rand::seq::SliceRandom;

use super::config::{Experiment, ExperimentConfig, MaskTask, ParseEvalConfig};
use super::table::ResultTable;
use crate::corpus::{gen_case_study, gen_synthetic, word_name, Lexicon, Sentence, SyntheticCorpus};
use crate::dependence::{dependence_matrix, DependenceConfig, PmiTable, Scorer};
use crate::error::{Error, Result};
use crate::masking::MaskStrategy;
use crate::mlm::{accuracy, finetune, mlm_loss, train_mlm, MlmExample, TinyMlm, TrainConfig};
use crate::oracle::{
    discrete_gen, gaussian_gen, perturb, prop1_check, prop2_check, prop3_check, prop4_check,
    DiscreteSpec, GaussianSpec, PropReport,
};
use crate::parsing::{corpus_uuas, linear_chain, mst, random_tree, relation_recall, ParseTree, RelationReport};
use crate::rng::{self, mix};

const NO_PRETRAIN: &str = "NoPretrain";
const VANILLA: &str = "Vanilla";

// stream tags for seed derivation
const INIT: u64 = 1;
const PRETRAIN: u64 = 2;
const FINETUNE: u64 = 3;
const SPLIT: u64 = 4;
const BASELINE: u64 = 5;
const GIBBS: u64 = 6;

#[derive(Debug, Clone)]
pub struct RelationsOutput {
    pub report: RelationReport,
    pub n_sentences: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub relations: Option<RelationsOutput>,
}

/// Runs whichever experiment `cfg` names.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (table, relations) = match cfg.experiment {
        Experiment::CaseStudy => (run_case_study(cfg)?, None),
        Experiment::MaskCompare => (run_mask_compare(cfg)?, None),
        Experiment::ParseEval => (run_parse_eval(cfg)?, None),
        Experiment::Relations => {
            let (t, r) = run_relations(cfg)?;
            (t, Some(r))
        }
        Experiment::VerifyProps => (run_verify_props(cfg)?, None),
    };
    Ok(RunOutput { table, relations })
}

fn specific(p: f64) -> String {
    format!("Specific-{p}")
}

/// Mixture-p pretraining on label-appended text, then classification
/// finetuning on the plain text of the other half.
pub fn run_case_study(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let cs = &cfg.case_study;
    let mut table = ResultTable::new(Experiment::CaseStudy.name());
    for &seed in &cfg.seeds {
        let corpus = gen_case_study(cs.n_examples, seed)?;
        let (pre, fine) = corpus.examples.split_at(cs.n_examples / 2);
        let pretrain: Vec<Sentence> = pre.iter().map(|e| e.with_label.with_cls()).collect();
        let labeled: Vec<(Sentence, usize)> =
            fine.iter().map(|e| (e.plain.clone(), e.label)).collect();
        let (train, rest) = labeled.split_at(cs.n_finetune);
        let dev = &rest[..cs.n_dev];
        let max_len = pretrain.iter().map(Sentence::len).max().unwrap_or(2);
        let dims = cs.model.dims(corpus.vocab.len(), max_len);

        let mut conditions: Vec<(String, Option<f64>)> = vec![(NO_PRETRAIN.into(), None)];
        conditions.extend(cs.ps.iter().map(|&p| (specific(p), Some(p))));
        for (name, p) in conditions {
            let acc = (|| {
                let mut model = TinyMlm::new(dims, mix(seed, INIT))?;
                if let Some(p) = p {
                    let tc = TrainConfig {
                        seed: mix(seed, PRETRAIN),
                        ..cs.pretrain.clone()
                    };
                    train_mlm(&mut model, &pretrain, &MaskStrategy::mixture(p)?, &tc)?;
                }
                let fc = TrainConfig {
                    seed: mix(seed, FINETUNE),
                    ..cs.finetune.clone()
                };
                Ok(finetune(&mut model, train, dev, 2, &fc, false)?.dev_accuracy)
            })()
            .map_err(|e: Error| e.tagged(format!("{name} seed {seed}")))?;
            table.push(&name, seed, "dev_accuracy", acc)?;
        }
    }
    Ok(table)
}

/// Words of each topic's most probable class; masking them forces the model
/// to infer the topic, which is the downstream label.
pub fn topic_lexicon(corpus: &SyntheticCorpus) -> Result<Lexicon> {
    let g = &corpus.grammar;
    let mut classes: Vec<usize> = g
        .topic_prior
        .iter()
        .map(|row| {
            (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap_or(0)
        })
        .collect();
    classes.sort_unstable();
    classes.dedup();
    let words = classes.iter().flat_map(|&c| {
        (0..g.cfg.vocab_per_class).map(move |w| corpus.vocab.lookup(&word_name(c, w)))
    });
    Lexicon::new("topic", words)
}

/// Second-stage pretraining on unlabeled task text with different masks,
/// then low-resource classification.
pub fn run_mask_compare(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mc = &cfg.mask_compare;
    let pool_size = 5 * (mc.n_finetune + mc.n_dev);
    let total = mc.n_unlabeled + mc.n_test + pool_size;
    let (labeled, lexicon, vocab_len, n_classes) = match mc.task {
        MaskTask::Topic => {
            let corpus = gen_synthetic(&mc.grammar, total)?;
            let labeled: Vec<(Sentence, usize)> = corpus
                .sentences
                .iter()
                .zip(&corpus.topics)
                .map(|((s, _), &z)| (s.clone(), z))
                .collect();
            (labeled, topic_lexicon(&corpus)?, corpus.vocab.len(), mc.grammar.n_topics)
        }
        MaskTask::Sentiment => {
            let corpus = gen_case_study(total, mc.grammar.seed)?;
            let labeled = corpus
                .examples
                .iter()
                .map(|e| (e.plain.clone(), e.label))
                .collect();
            (labeled, corpus.lexicon, corpus.vocab.len(), 2)
        }
    };
    let unlabeled: Vec<Sentence> = labeled[..mc.n_unlabeled]
        .iter()
        .map(|(s, _)| s.with_cls())
        .collect();
    let test = &labeled[mc.n_unlabeled..mc.n_unlabeled + mc.n_test];
    let pool = &labeled[mc.n_unlabeled + mc.n_test..];
    let max_len = labeled.iter().map(|(s, _)| s.len() + 1).max().unwrap_or(2);
    let dims = mc.model.dims(vocab_len, max_len);

    let conditions: Vec<(&str, Option<MaskStrategy>)> = vec![
        (VANILLA, None),
        ("Uniform", Some(MaskStrategy::uniform(mc.uniform_rate)?)),
        ("Cloze", Some(MaskStrategy::cloze(lexicon.clone()))),
        ("NoCloze", Some(MaskStrategy::no_cloze(lexicon))),
    ];
    let mut table = ResultTable::new(Experiment::MaskCompare.name());
    for &seed in &cfg.seeds {
        let mut split_rng = rng::split(seed, SPLIT);
        let (train, dev) = loop {
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            idx.shuffle(&mut split_rng);
            let pick = |r: &[usize]| -> Vec<(Sentence, usize)> { r.iter().map(|&i| pool[i].clone()).collect() };
            let train = pick(&idx[..mc.n_finetune]);
            if train.iter().any(|(_, y)| *y != train[0].1) {
                break (train, pick(&idx[mc.n_finetune..mc.n_finetune + mc.n_dev]));
            }
        };
        for (name, strategy) in &conditions {
            let acc = (|| {
                let mut model = TinyMlm::new(dims, mix(seed, INIT))?;
                if let Some(s) = strategy {
                    let tc = TrainConfig {
                        seed: mix(seed, PRETRAIN),
                        ..mc.pretrain.clone()
                    };
                    train_mlm(&mut model, &unlabeled, s, &tc)?;
                }
                let fc = TrainConfig {
                    seed: mix(seed, FINETUNE),
                    ..mc.finetune.clone()
                };
                let res = finetune(&mut model, &train, &dev, n_classes, &fc, false)?;
                accuracy(&model, &res.head, test)
            })()
            .map_err(|e: Error| e.tagged(format!("{name} seed {seed}")))?;
            table.push(name, seed, "test_accuracy", acc)?;
        }
    }
    Ok(table)
}

/// Mean `-ln p(x_i | X_{\i})` over every position of `sentences`.
pub fn heldout_pseudo_loss(model: &TinyMlm, sentences: &[Sentence]) -> Result<f64> {
    let examples = sentences
        .iter()
        .flat_map(|s| (0..s.len()).map(move |p| MlmExample::from_mask(s, &[p])))
        .collect::<Result<Vec<_>>>()?;
    mlm_loss(model, &examples)
}

struct ParseSetup {
    corpus: SyntheticCorpus,
    train: Vec<Sentence>,
}

fn parse_setup(pe: &ParseEvalConfig) -> Result<ParseSetup> {
    let corpus = gen_synthetic(&pe.grammar, pe.n_train + pe.n_eval)?;
    let train = corpus.sentences[..pe.n_train]
        .iter()
        .map(|(s, _)| s.clone())
        .collect();
    Ok(ParseSetup { corpus, train })
}

fn train_parse_model(pe: &ParseEvalConfig, setup: &ParseSetup, seed: u64) -> Result<TinyMlm> {
    let dims = pe.model.dims(setup.corpus.vocab.len(), pe.grammar.max_len);
    let mut model = TinyMlm::new(dims, mix(seed, INIT))?;
    let tc = TrainConfig {
        seed: mix(seed, PRETRAIN),
        ..pe.train.clone()
    };
    train_mlm(&mut model, &setup.train, &MaskStrategy::uniform(pe.mask_rate)?, &tc)?;
    Ok(model)
}

fn parse_all(scorer: Scorer<'_>, sentences: &[&Sentence], est: &DependenceConfig) -> Result<Vec<ParseTree>> {
    sentences
        .iter()
        .map(|s| mst(&dependence_matrix(scorer, s, est)?))
        .collect()
}

/// UUAS of the baselines and the three dependence measures on held-out
/// synthetic sentences, plus the MLM's held-out loss.
pub fn run_parse_eval(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let pe = &cfg.parse_eval;
    let setup = parse_setup(pe)?;
    let eval = &setup.corpus.sentences[pe.n_train..];
    let sentences: Vec<&Sentence> = eval.iter().map(|(s, _)| s).collect();
    let gold: Vec<_> = eval.iter().map(|(_, g)| g.clone()).collect();
    let pmi = PmiTable::from_corpus(setup.train.iter());
    let eval_text: Vec<Sentence> = sentences.iter().map(|&s| s.clone()).collect();
    let ln_v = (setup.corpus.vocab.len() as f64).ln();

    let mut table = ResultTable::new(Experiment::ParseEval.name());
    for &seed in &cfg.seeds {
        let tag = |name: &'static str| move |e: Error| e.tagged(format!("{name} seed {seed}"));
        let mut rng = rng::split(seed, BASELINE);
        let random = sentences
            .iter()
            .map(|s| random_tree(s.len(), &mut rng))
            .collect::<Result<Vec<_>>>()
            .map_err(tag("Random"))?;
        let chain = sentences
            .iter()
            .map(|s| linear_chain(s.len()))
            .collect::<Result<Vec<_>>>()
            .map_err(tag("LinearChain"))?;
        let est = DependenceConfig {
            seed: mix(pe.estimator.seed, mix(seed, GIBBS)),
            ..pe.estimator
        };
        let pmi_trees = parse_all(Scorer::Pmi(&pmi), &sentences, &est).map_err(tag("PMI"))?;
        let model = train_parse_model(pe, &setup, seed).map_err(tag("MLM"))?;
        let loss = heldout_pseudo_loss(&model, &eval_text).map_err(tag("MLM"))?;
        let cpmi = parse_all(Scorer::CondPmi(&model), &sentences, &est).map_err(tag("CondPMI"))?;
        let cmi = parse_all(Scorer::CondMi(&model), &sentences, &est).map_err(tag("CondMI"))?;

        for (name, trees) in [
            ("Random", &random),
            ("LinearChain", &chain),
            ("PMI", &pmi_trees),
            ("CondPMI", &cpmi),
            ("CondMI", &cmi),
        ] {
            table.push(name, seed, "uuas", corpus_uuas(trees, &gold)?)?;
        }
        table.push("MLM", seed, "heldout_loss", loss)?;
        table.push("MLM", seed, "loss_over_ln_vocab", loss / ln_v)?;
    }
    Ok(table)
}

/// Per-relation recall of CondMI against LinearChain on training sentences,
/// using the first seed's model.
pub fn run_relations(cfg: &ExperimentConfig) -> Result<(ResultTable, RelationsOutput)> {
    let pe = &cfg.parse_eval;
    let seed = cfg.seeds[0];
    let setup = parse_setup(pe)?;
    let n = cfg.relations.n_sentences.min(pe.n_train);
    let part = &setup.corpus.sentences[..n];
    let sentences: Vec<&Sentence> = part.iter().map(|(s, _)| s).collect();
    let gold: Vec<_> = part.iter().map(|(_, g)| g.clone()).collect();
    let tag = |e: Error| e.tagged(format!("CondMI seed {seed}"));
    let model = train_parse_model(pe, &setup, seed).map_err(tag)?;
    let est = DependenceConfig {
        seed: mix(pe.estimator.seed, mix(seed, GIBBS)),
        ..pe.estimator
    };
    let pred = parse_all(Scorer::CondMi(&model), &sentences, &est).map_err(tag)?;
    let report = relation_recall(&pred, &gold)?;
    let chain = sentences
        .iter()
        .map(|s| linear_chain(s.len()))
        .collect::<Result<Vec<_>>>()?;
    let mut table = ResultTable::new(Experiment::Relations.name());
    table.push("CondMI", seed, "uuas", corpus_uuas(&pred, &gold)?)?;
    table.push("LinearChain", seed, "uuas", corpus_uuas(&chain, &gold)?)?;
    Ok((
        table,
        RelationsOutput {
            report,
            n_sentences: n,
        },
    ))
}

/// The four proposition sweeps, each a list of per-trial reports. Instances
/// are derived from the first seed.
pub fn prop_sweep(cfg: &ExperimentConfig) -> Result<Vec<(&'static str, Vec<PropReport>)>> {
    let v = &cfg.verify;
    let base = cfg.seeds[0];
    let trials = |n: usize, f: &dyn Fn(u64) -> Result<PropReport>| -> Result<Vec<PropReport>> {
        (0..n as u64).map(f).collect()
    };
    let prop1 = trials(v.n_prop1, &|t| {
        let m = gaussian_gen(6, 2, 4, 1.0, mix(base, t))?;
        prop1_check(&m, t as usize % 6)
    })
    .map_err(|e| e.tagged("prop1"))?;
    let prop2 = trials(v.n_prop2, &|t| {
        let spec = GaussianSpec {
            orthonormal_a: true,
            noise: 0.05,
            ..GaussianSpec::new(6, 2, 3, 0.4)
        };
        prop2_check(&spec.generate(mix(base, t))?, v.prop2_samples, mix(base, t))
    })
    .map_err(|e| e.tagged("prop2"))?;
    let prop3 = trials(v.n_prop3, &|t| {
        let spec = DiscreteSpec {
            n_latent: 2 + t as usize % 3,
            len: 3 + t as usize % 2,
            n_types: 2 + t as usize % 2,
            alpha: 0.3,
        };
        prop3_check(&discrete_gen(&spec, mix(base, t))?, 0, 1)
    })
    .map_err(|e| e.tagged("prop3"))?;
    let prop4 = trials(v.n_prop4, &|t| {
        let p = discrete_gen(&DiscreteSpec::default(), mix(base, t))?.marginal_x()?;
        let q = perturb(&p, 0.5, Some(mix(base, (t + 1) << 32)))?;
        prop4_check(&p, &q, 1, 2)
    })
    .map_err(|e| e.tagged("prop4"))?;
    Ok(vec![("prop1", prop1), ("prop2", prop2), ("prop3", prop3), ("prop4", prop4)])
}

/// `trial,lhs,rhs,slack,holds` for one proposition.
pub fn write_prop_csv<W: std::io::Write>(w: W, reports: &[PropReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["trial", "lhs", "rhs", "slack", "holds"])?;
    for (t, r) in reports.iter().enumerate() {
        w.write_record([
            t.to_string(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.slack.to_string(),
            r.holds.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing proposition csv: {e}")))?;
    Ok(())
}

/// Proposition sweep as a result table: per trial a 0/1 `holds` metric,
/// `lhs`, and `slack` when finite.
pub fn run_verify_props(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(Experiment::VerifyProps.name());
    for (name, reports) in prop_sweep(cfg)? {
        for (t, r) in reports.iter().enumerate() {
            let t = t as u64;
            table.push(name, t, "holds", r.holds as u8 as f64)?;
            table.push(name, t, "lhs", r.lhs)?;
            if r.slack.is_finite() {
                table.push(name, t, "slack", r.slack)?;
            }
        }
    }
    Ok(table)
}
