//! Template sentiment corpus for the masking case study.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

use super::{Lexicon, Sentence, Vocab};

pub const POSITIVE_WORDS: [&str; 20] = [
    "good", "great", "excellent", "wonderful", "superb", "brilliant", "charming", "delightful",
    "moving", "fresh", "clever", "funny", "beautiful", "engaging", "solid", "touching", "smart",
    "lovely", "gripping", "fine",
];

pub const NEGATIVE_WORDS: [&str; 20] = [
    "bad", "awful", "terrible", "boring", "dull", "weak", "messy", "tedious", "poor", "bland",
    "clumsy", "flat", "silly", "stale", "ugly", "lame", "shallow", "tiresome", "sloppy", "dreary",
];

const FILLERS: [&str; 24] = [
    "the", "a", "movie", "film", "story", "plot", "acting", "cast", "script", "scene", "was",
    "is", "and", "but", "very", "quite", "this", "its", "with", "of", "director", "ending",
    "music", "really",
];

pub const LABEL_WORDS: [&str; 2] = ["negative", "positive"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    /// Sentence with the label word appended.
    pub with_label: Sentence,
    /// The same sentence without it, used for finetuning.
    pub plain: Sentence,
    /// 0 = negative, 1 = positive
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct CaseStudyCorpus {
    pub vocab: Vocab,
    /// The 40 polarity words.
    pub lexicon: Lexicon,
    pub examples: Vec<LabeledExample>,
}

impl CaseStudyCorpus {
    pub fn vocab_for_case_study() -> Vocab {
        Vocab::from_words(
            FILLERS
                .iter()
                .chain(&POSITIVE_WORDS)
                .chain(&NEGATIVE_WORDS)
                .chain(&LABEL_WORDS)
                .copied(),
        )
    }

    /// Majority polarity of the lexicon words in `s`, if there is one.
    pub fn majority(&self, s: &Sentence) -> Option<usize> {
        let pos = s
            .surface
            .iter()
            .filter(|w| POSITIVE_WORDS.contains(&w.as_str()))
            .count();
        let neg = s
            .surface
            .iter()
            .filter(|w| NEGATIVE_WORDS.contains(&w.as_str()))
            .count();
        match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => Some(1),
            std::cmp::Ordering::Less => Some(0),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// Generates `n` labeled template sentences. Each has 2-5 filler words and
/// 1-3 polarity words whose majority is the label; the label is drawn first
/// so classes are balanced in expectation.
pub fn gen_case_study(n: usize, seed: u64) -> Result<CaseStudyCorpus> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let vocab = CaseStudyCorpus::vocab_for_case_study();
    let lexicon = Lexicon::new(
        "sentiment",
        POSITIVE_WORDS
            .iter()
            .chain(&NEGATIVE_WORDS)
            .map(|w| vocab.lookup(w)),
    )?;
    let mut rng = rng::split(seed, 7);
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.random_range(0..2usize);
        let (agree, disagree) = match rng.random_range(0..4) {
            0 => (1, 0),
            1 => (2, 0),
            2 => (2, 1),
            _ => (3, 0),
        };
        let (same, other) = if label == 1 {
            (&POSITIVE_WORDS, &NEGATIVE_WORDS)
        } else {
            (&NEGATIVE_WORDS, &POSITIVE_WORDS)
        };
        let mut words: Vec<&str> = Vec::new();
        for _ in 0..agree {
            words.push(same[rng.random_range(0..same.len())]);
        }
        for _ in 0..disagree {
            words.push(other[rng.random_range(0..other.len())]);
        }
        let n_fill = rng.random_range(2..=5);
        for _ in 0..n_fill {
            words.push(FILLERS[rng.random_range(0..FILLERS.len())]);
        }
        words.shuffle(&mut rng);
        let plain = Sentence::from_words(&words, &vocab);
        words.push(LABEL_WORDS[label]);
        let with_label = Sentence::from_words(&words, &vocab);
        examples.push(LabeledExample {
            with_label,
            plain,
            label,
        });
    }
    Ok(CaseStudyCorpus {
        vocab,
        lexicon,
        examples,
    })
}
