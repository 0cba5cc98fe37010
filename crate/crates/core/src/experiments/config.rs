use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::GrammarConfig;
use crate::dependence::DependenceConfig;
use crate::error::{Error, Result};
use crate::mlm::{Dims, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CaseStudy,
    MaskCompare,
    ParseEval,
    Relations,
    VerifyProps,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::CaseStudy,
        Experiment::MaskCompare,
        Experiment::ParseEval,
        Experiment::Relations,
        Experiment::VerifyProps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CaseStudy => "case-study",
            Experiment::MaskCompare => "mask-compare",
            Experiment::ParseEval => "parse-eval",
            Experiment::Relations => "relations",
            Experiment::VerifyProps => "verify-props",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Encoder shape shared by the experiments; the vocabulary size and
/// maximum length come from the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub heads: usize,
    pub ffn: usize,
    pub layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let d = Dims::small(2, 2);
        ModelConfig {
            hidden: d.hidden,
            heads: d.heads,
            ffn: d.ffn,
            layers: d.layers,
        }
    }
}

impl ModelConfig {
    pub fn dims(&self, vocab: usize, max_len: usize) -> Dims {
        Dims {
            vocab,
            hidden: self.hidden,
            heads: self.heads,
            ffn: self.ffn,
            layers: self.layers,
            max_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseStudyConfig {
    /// Size of the generated corpus; half is used for pretraining.
    pub n_examples: usize,
    pub ps: Vec<f64>,
    /// Labeled examples drawn from the finetuning half.
    pub n_finetune: usize,
    pub n_dev: usize,
    pub model: ModelConfig,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        CaseStudyConfig {
            n_examples: 4000,
            ps: vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0],
            n_finetune: 64,
            n_dev: 400,
            model: ModelConfig::default(),
            pretrain: TrainConfig {
                epochs: 5,
                ..TrainConfig::pretrain()
            },
            finetune: TrainConfig::finetune(),
        }
    }
}

/// Downstream task for the mask comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskTask {
    /// Polarity of the template sentiment corpus; the lexicon is its
    /// polarity words.
    Sentiment,
    /// Latent topic of the synthetic grammar; the lexicon is each topic's
    /// most probable word class.
    Topic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskCompareConfig {
    pub task: MaskTask,
    /// Grammar for the topic task; its seed also seeds the sentiment corpus.
    pub grammar: GrammarConfig,
    /// Unlabeled task text for second-stage pretraining.
    pub n_unlabeled: usize,
    pub n_finetune: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub uniform_rate: f64,
    pub model: ModelConfig,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
}

impl Default for MaskCompareConfig {
    fn default() -> Self {
        MaskCompareConfig {
            task: MaskTask::Sentiment,
            grammar: GrammarConfig {
                attach_concentration: 2.0,
                ..GrammarConfig::default()
            },
            n_unlabeled: 2000,
            n_finetune: 20,
            n_dev: 100,
            n_test: 400,
            uniform_rate: 0.15,
            model: ModelConfig::default(),
            pretrain: TrainConfig {
                epochs: 15,
                ..TrainConfig::pretrain()
            },
            // 20 examples give too few steps at the default finetuning rate.
            finetune: TrainConfig {
                lr: 1e-3,
                epochs: 30,
                early_stop_patience: 5,
                ..TrainConfig::finetune()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseEvalConfig {
    pub grammar: GrammarConfig,
    pub n_train: usize,
    pub n_eval: usize,
    pub mask_rate: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub estimator: DependenceConfig,
}

impl Default for ParseEvalConfig {
    fn default() -> Self {
        ParseEvalConfig {
            // one word per class, so the loss floor is set by syntax alone
            grammar: GrammarConfig {
                vocab_per_class: 1,
                ..GrammarConfig::default()
            },
            n_train: 2000,
            n_eval: 300,
            mask_rate: 0.3,
            model: ModelConfig::default(),
            train: TrainConfig {
                epochs: 50,
                ..TrainConfig::pretrain()
            },
            estimator: DependenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelationsConfig {
    /// Training sentences analysed; capped by the training split.
    pub n_sentences: usize,
}

impl Default for RelationsConfig {
    fn default() -> Self {
        RelationsConfig { n_sentences: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub n_prop1: usize,
    pub n_prop2: usize,
    pub prop2_samples: usize,
    pub n_prop3: usize,
    pub n_prop4: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n_prop1: 1000,
            n_prop2: 200,
            prop2_samples: 10_000,
            n_prop3: 1000,
            n_prop4: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub case_study: CaseStudyConfig,
    pub mask_compare: MaskCompareConfig,
    pub parse_eval: ParseEvalConfig,
    pub relations: RelationsConfig,
    pub verify: VerifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::for_experiment(Experiment::ParseEval)
    }
}

impl ExperimentConfig {
    /// Defaults with the seed count each study reports over.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let n_seeds = match experiment {
            Experiment::CaseStudy => 10,
            Experiment::MaskCompare => 20,
            Experiment::ParseEval | Experiment::Relations => 3,
            Experiment::VerifyProps => 1,
        };
        ExperimentConfig {
            experiment,
            seeds: (0..n_seeds).collect(),
            case_study: CaseStudyConfig::default(),
            mask_compare: MaskCompareConfig::default(),
            parse_eval: ParseEvalConfig::default(),
            relations: RelationsConfig::default(),
            verify: VerifyConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        let cs = &self.case_study;
        if cs.ps.iter().any(|p| !(0.0..=100.0).contains(p)) {
            return Err(Error::Config("case-study p values must lie in [0, 100]".into()));
        }
        if cs.n_finetune + cs.n_dev > cs.n_examples / 2 {
            return Err(Error::Config(
                "case-study finetune and dev sets must fit in the finetuning half".into(),
            ));
        }
        let mc = &self.mask_compare;
        if mc.n_finetune < 2 || mc.n_test == 0 {
            return Err(Error::Config("mask-compare needs n_finetune >= 2 and n_test >= 1".into()));
        }
        mc.grammar.validate()?;
        let pe = &self.parse_eval;
        pe.grammar.validate()?;
        if pe.n_train == 0 || pe.n_eval == 0 {
            return Err(Error::Config("parse-eval needs training and evaluation sentences".into()));
        }
        if !(pe.mask_rate > 0.0 && pe.mask_rate <= 1.0) {
            return Err(Error::Config("parse-eval mask_rate must lie in (0, 1]".into()));
        }
        Ok(())
    }
}
