use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use depmine_core::corpus::{
    build_vocab_from_tokens, gen_synthetic, load_conllu, load_jsonl, write_jsonl, GrammarConfig,
    Sentence, TreebankSentence, Vocab,
};
use depmine_core::dependence::{dependence_matrix, DependenceConfig, Method, PmiTable, Scorer};
use depmine_core::experiments::{
    claims, emit_outputs, prop_sweep, write_prop_csv, Experiment, ExperimentConfig, ModelConfig,
};
use depmine_core::masking::MaskSpec;
use depmine_core::mlm::{
    accuracy, finetune, load_checkpoint, save_checkpoint, train_mlm, TinyMlm, TrainConfig,
};
use depmine_core::parsing::{corpus_uuas, mst, write_parse_tsv};

#[derive(Parser)]
#[command(name = "depmine", version, about = "Masked LM dependence mining experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mixture-p masking case study
    CaseStudy(ExperimentArgs),
    /// Uniform vs cloze vs no-cloze second-stage pretraining
    MaskCompare(ExperimentArgs),
    /// UUAS of dependence-based parsers on the synthetic grammar
    ParseEval(ExperimentArgs),
    /// Per-relation recall of CondMI against a linear chain
    Relations(ExperimentArgs),
    /// Numerical checks of the latent-variable propositions
    VerifyProps(ExperimentArgs),
    /// Write a synthetic treebank as JSON lines
    GenSynthetic {
        /// Grammar config JSON; defaults when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain a masked LM on a treebank
    TrainMlm {
        #[arg(long)]
        config: PathBuf,
    },
    /// Finetune a classifier on tab-separated `label<TAB>text` lines
    Finetune {
        #[arg(long)]
        config: PathBuf,
    },
    /// Dependence matrices and MST parses for every sentence of a treebank
    Score {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Required for condpmi and condmi
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Corpus for PMI statistics (defaults to --corpus)
        #[arg(long)]
        pmi_corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        gibbs_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON; per-experiment defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// `a..b` (inclusive), `a..=b`, or a comma-separated list
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
}

#[derive(Debug, Clone)]
struct Seeds(Vec<u64>);

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let num = |x: &str| x.trim().parse::<u64>().map_err(|_| format!("bad seed {x:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty seed range {s:?}"));
        }
        Ok(Seeds((a..=b).collect()))
    } else {
        s.split(',').map(num).collect::<Result<_, _>>().map(Seeds)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run_experiment(experiment: Experiment, args: ExperimentArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(p) => {
            let mut c: ExperimentConfig = read_json(p)?;
            c.experiment = experiment;
            c
        }
        None => ExperimentConfig::for_experiment(experiment),
    };
    if let Some(Seeds(seeds)) = args.seeds {
        cfg.seeds = seeds;
    }
    cfg.validate()?;
    let out = depmine_core::experiments::run(&cfg)?;
    for p in emit_outputs(&out.table, &args.out)? {
        eprintln!("wrote {}", p.display());
    }
    if let Some(rel) = &out.relations {
        let path = args.out.join("relations.csv");
        rel.report.write_csv(create(&path)?)?;
        eprintln!("wrote {} ({} sentences)", path.display(), rel.n_sentences);
    }
    if experiment == Experiment::VerifyProps {
        for (name, reports) in prop_sweep(&cfg)? {
            let path = args.out.join(format!("{name}.csv"));
            write_prop_csv(create(&path)?, &reports)?;
        }
    }
    let mut ok = true;
    for a in out.table.aggregates() {
        println!(
            "{:<14} {:<20} mean {:.4} ± {:.4} (n = {})",
            a.condition, a.metric, a.mean, a.ci95_halfwidth, a.n
        );
    }
    for c in claims(experiment, &out.table, out.relations.as_ref()) {
        println!("[{}] {} ({})", if c.holds { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.holds;
    }
    Ok(ok)
}

fn load_treebank(path: &Path) -> Result<Vec<TreebankSentence>> {
    let is_conllu = path
        .extension()
        .is_some_and(|e| e == "conllu" || e == "conll");
    Ok(if is_conllu {
        load_conllu(path)?
    } else {
        load_jsonl(path)?
    })
}

fn vocab_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".vocab.json");
    PathBuf::from(s)
}

fn load_model(checkpoint: &Path) -> Result<(TinyMlm, Vocab)> {
    let vp = vocab_path(checkpoint);
    let vocab = Vocab::from_json(
        &std::fs::read_to_string(&vp).with_context(|| format!("reading {}", vp.display()))?,
    )?;
    let model = load_checkpoint(checkpoint, Some(vocab.fingerprint()))?;
    Ok((model, vocab))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainMlmConfig {
    corpus: PathBuf,
    out: PathBuf,
    #[serde(default = "default_mask")]
    mask: String,
    #[serde(default = "one")]
    min_count: usize,
    #[serde(default)]
    model: ModelConfig,
    #[serde(default = "TrainConfig::pretrain")]
    train: TrainConfig,
}

fn default_mask() -> String {
    "uniform:0.15".into()
}

fn one() -> usize {
    1
}

fn train_mlm_cmd(config: &Path) -> Result<()> {
    let cfg: TrainMlmConfig = read_json(config)?;
    let bank = load_treebank(&cfg.corpus)?;
    let vocab = build_vocab_from_tokens(bank.iter().map(|s| s.words.as_slice()), cfg.min_count)?;
    let sentences: Vec<Sentence> = bank.iter().map(|s| s.encode(&vocab)).collect();
    let max_len = sentences.iter().map(Sentence::len).max().unwrap_or(2);
    let strategy = cfg.mask.parse::<MaskSpec>()?.resolve(&vocab)?;
    let mut model = TinyMlm::new(cfg.model.dims(vocab.len(), max_len), cfg.train.seed)?;
    let report = train_mlm(&mut model, &sentences, &strategy, &cfg.train)?;
    save_checkpoint(&cfg.out, &model, vocab.fingerprint())?;
    std::fs::write(vocab_path(&cfg.out), vocab.to_json()?)?;
    for (e, l) in report.loss_curve.iter().enumerate() {
        println!("epoch {:>3}  loss {l:.4}", e + 1);
    }
    eprintln!("wrote {}", cfg.out.display());
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FinetuneConfig {
    train: PathBuf,
    dev: PathBuf,
    /// Pretrained encoder; a freshly initialized one when absent
    checkpoint: Option<PathBuf>,
    #[serde(default)]
    model: ModelConfig,
    #[serde(default = "TrainConfig::finetune")]
    finetune: TrainConfig,
    #[serde(default)]
    freeze_encoder: bool,
}

fn read_labeled(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let Some((label, sentence)) = line.split_once('\t') else {
            bail!("{}:{}: expected label<TAB>text", path.display(), k + 1);
        };
        let label = label
            .trim()
            .parse()
            .with_context(|| format!("{}:{}: bad label", path.display(), k + 1))?;
        out.push((label, sentence.split_whitespace().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn finetune_cmd(config: &Path) -> Result<()> {
    let cfg: FinetuneConfig = read_json(config)?;
    let train_raw = read_labeled(&cfg.train)?;
    let dev_raw = read_labeled(&cfg.dev)?;
    let (mut model, vocab) = match &cfg.checkpoint {
        Some(p) => load_model(p)?,
        None => {
            let vocab = build_vocab_from_tokens(train_raw.iter().map(|(_, w)| w.as_slice()), 1)?;
            let max_len = 1 + train_raw.iter().chain(&dev_raw).map(|(_, w)| w.len()).max().unwrap_or(1);
            let model = TinyMlm::new(cfg.model.dims(vocab.len(), max_len), cfg.finetune.seed)?;
            (model, vocab)
        }
    };
    let encode = |raw: &[(usize, Vec<String>)]| -> Vec<(Sentence, usize)> {
        raw.iter()
            .map(|(y, w)| (Sentence::from_words(w, &vocab), *y))
            .collect()
    };
    let (train, dev) = (encode(&train_raw), encode(&dev_raw));
    let n_classes = 1 + train.iter().chain(&dev).map(|(_, y)| *y).max().unwrap_or(0);
    let res = finetune(&mut model, &train, &dev, n_classes, &cfg.finetune, cfg.freeze_encoder)?;
    for (e, a) in res.dev_curve.iter().enumerate() {
        println!("epoch {:>3}  dev accuracy {a:.4}", e + 1);
    }
    println!(
        "best epoch {}  dev accuracy {:.4}  train accuracy {:.4}",
        res.best_epoch,
        res.dev_accuracy,
        accuracy(&model, &res.head, &train)?
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn score_cmd(
    corpus: &Path,
    method: Method,
    checkpoint: Option<&Path>,
    pmi_corpus: Option<&Path>,
    gibbs_steps: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let bank = load_treebank(corpus)?;
    let model = checkpoint.map(load_model).transpose()?;
    let vocab = match &model {
        Some((_, v)) => v.clone(),
        None => build_vocab_from_tokens(bank.iter().map(|s| s.words.as_slice()), 1)?,
    };
    let pmi = if method == Method::Pmi {
        let source = match pmi_corpus {
            Some(p) => load_treebank(p)?,
            None => bank.clone(),
        };
        let sentences: Vec<Sentence> = source.iter().map(|s| s.encode(&vocab)).collect();
        Some(PmiTable::from_corpus(sentences.iter()))
    } else {
        None
    };
    let scorer = match (method, &pmi, &model) {
        (Method::Pmi, Some(t), _) => Scorer::Pmi(t),
        (Method::CondPmi, _, Some((m, _))) => Scorer::CondPmi(m),
        (Method::CondMi, _, Some((m, _))) => Scorer::CondMi(m),
        _ => bail!("--checkpoint is required for {method}"),
    };
    let est = DependenceConfig {
        gibbs_steps,
        seed,
        ..DependenceConfig::default()
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut matrices = create(&out.join("matrices.jsonl"))?;
    let mut parses = create(&out.join("parses.tsv"))?;
    let (mut pred, mut gold) = (Vec::new(), Vec::new());
    for s in &bank {
        let sentence = s.encode(&vocab);
        let m = dependence_matrix(scorer, &sentence, &est)
            .with_context(|| format!("sentence {}", s.id))?;
        writeln!(matrices, "{}", m.to_json()?)?;
        let tree = mst(&m)?;
        write_parse_tsv(&mut parses, &tree, &s.words)?;
        pred.push(tree);
        gold.push(s.tree.clone());
    }
    matrices.flush()?;
    parses.flush()?;
    println!("{method} UUAS {:.4} over {} sentences", corpus_uuas(&pred, &gold)?, bank.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::CaseStudy(a) => run_experiment(Experiment::CaseStudy, a),
        Command::MaskCompare(a) => run_experiment(Experiment::MaskCompare, a),
        Command::ParseEval(a) => run_experiment(Experiment::ParseEval, a),
        Command::Relations(a) => run_experiment(Experiment::Relations, a),
        Command::VerifyProps(a) => run_experiment(Experiment::VerifyProps, a),
        Command::GenSynthetic { config, n, out } => (|| {
            let cfg: GrammarConfig = match config {
                Some(p) => read_json(&p)?,
                None => GrammarConfig::default(),
            };
            let corpus = gen_synthetic(&cfg, n)?;
            let items: Vec<TreebankSentence> = corpus
                .sentences
                .iter()
                .enumerate()
                .map(|(k, (s, t))| TreebankSentence {
                    id: format!("synthetic-{k}"),
                    words: s.surface.clone(),
                    tree: t.clone(),
                })
                .collect();
            let mut w = create(&out)?;
            write_jsonl(&mut w, &items)?;
            w.flush()?;
            Ok(true)
        })(),
        Command::TrainMlm { config } => train_mlm_cmd(&config).map(|_| true),
        Command::Finetune { config } => finetune_cmd(&config).map(|_| true),
        Command::Score {
            corpus,
            method,
            checkpoint,
            pmi_corpus,
            gibbs_steps,
            seed,
            out,
        } => score_cmd(
            &corpus,
            method,
            checkpoint.as_deref(),
            pmi_corpus.as_deref(),
            gibbs_steps,
            seed,
            &out,
        )
        .map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
