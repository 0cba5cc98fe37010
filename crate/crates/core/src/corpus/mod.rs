//! Corpus ingestion, vocabularies, gold trees and synthetic generators.

mod case_study;
mod conllu;
mod jsonl;
mod synthetic;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{check_spanning_tree, Edge};

pub use case_study::{
    gen_case_study, CaseStudyCorpus, LabeledExample, NEGATIVE_WORDS, POSITIVE_WORDS,
};
pub use conllu::{load_conllu, parse_conllu, TreebankSentence};
pub use jsonl::{dump_jsonl, load_jsonl, read_jsonl, write_jsonl, TreeRecord};
pub use synthetic::{gen_synthetic, word_name, Grammar, GrammarConfig, SyntheticCorpus};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const MASK: usize = 3;
const SPECIAL_SURFACES: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[MASK]"];

/// Prefix marking a word-internal continuation piece.
pub const CONTINUATION: &str = "##";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    id_of: HashMap<String, usize>,
}

impl Vocab {
    /// A vocabulary with the specials followed by `words` in order. Duplicate
    /// words keep their first id.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab {
            tokens: Vec::new(),
            id_of: HashMap::new(),
        };
        for s in SPECIAL_SURFACES {
            v.push(s.to_string());
        }
        for w in words {
            v.push(w.into());
        }
        v
    }

    fn push(&mut self, w: String) {
        if !self.id_of.contains_key(&w) {
            self.id_of.insert(w.clone(), self.tokens.len());
            self.tokens.push(w);
        }
    }

    fn reindex(&mut self) {
        self.id_of = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn is_special(id: usize) -> bool {
        id <= MASK
    }

    /// Raw lookup, specials included.
    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.id_of.get(token).copied()
    }

    /// Id of a surface word from raw text. Specials are never produced.
    pub fn lookup(&self, word: &str) -> usize {
        match self.id_of.get(word) {
            Some(&id) if !Self::is_special(id) => id,
            _ => UNK,
        }
    }

    /// Splits a word into vocabulary pieces. Whole words map to one id; when
    /// the vocabulary carries `##` continuation pieces, unknown words are split
    /// by greedy longest match. Anything unsplittable is `[UNK]`.
    pub fn tokenize_word(&self, word: &str) -> Vec<usize> {
        let whole = self.lookup(word);
        if whole != UNK || !self.has_continuations() {
            return vec![whole];
        }
        let chars: Vec<char> = word.chars().collect();
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while end > start {
                let body: String = chars[start..end].iter().collect();
                let piece = if start == 0 {
                    body
                } else {
                    format!("{CONTINUATION}{body}")
                };
                let id = self.lookup(&piece);
                if id != UNK {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => {
                    pieces.push(id);
                    start = end;
                }
                None => return vec![UNK],
            }
        }
        pieces
    }

    fn has_continuations(&self) -> bool {
        self.tokens.iter().any(|t| t.starts_with(CONTINUATION))
    }

    /// FNV-1a hash of the token list, used to tie checkpoints to a vocabulary.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for b in t.bytes().chain(std::iter::once(0xff)) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.tokens)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let tokens: Vec<String> = serde_json::from_str(s)?;
        if tokens.len() < SPECIAL_SURFACES.len()
            || tokens[..SPECIAL_SURFACES.len()] != SPECIAL_SURFACES
        {
            return Err(Error::Config("vocabulary does not start with the specials".into()));
        }
        let mut v = Vocab {
            tokens,
            id_of: HashMap::new(),
        };
        v.reindex();
        Ok(v)
    }
}

/// Builds a vocabulary from whitespace-tokenized text. Words seen fewer than
/// `min_count` times are left out and map to `[UNK]`. Ids are assigned in
/// order of first appearance.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], min_count: usize) -> Result<Vocab> {
    let words: Vec<Vec<&str>> = corpus
        .iter()
        .map(|line| line.as_ref().split_whitespace().collect())
        .collect();
    build_vocab_from_tokens(words.iter().map(|w| w.as_slice()), min_count)
}

pub fn build_vocab_from_tokens<'a, I, S>(sentences: I, min_count: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a [S]>,
    S: AsRef<str> + 'a,
{
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for sent in sentences {
        for w in sent {
            let w = w.as_ref();
            if SPECIAL_SURFACES.contains(&w) {
                continue;
            }
            let c = counts.entry(w.to_string()).or_insert(0);
            if *c == 0 {
                order.push(w.to_string());
            }
            *c += 1;
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Vocab::from_words(
        order.into_iter().filter(|w| counts[w] >= min_count.max(1)),
    ))
}

/// A tokenized sentence. `word_map[k]` is the word that piece `k` belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub ids: Vec<usize>,
    pub surface: Vec<String>,
    pub word_map: Vec<usize>,
}

impl Sentence {
    /// One piece per word.
    pub fn from_words<S: AsRef<str>>(words: &[S], vocab: &Vocab) -> Self {
        let ids = words.iter().map(|w| vocab.lookup(w.as_ref())).collect();
        Sentence {
            ids,
            surface: words.iter().map(|w| w.as_ref().to_string()).collect(),
            word_map: (0..words.len()).collect(),
        }
    }

    /// Splits unknown words into continuation pieces where the vocabulary
    /// allows it.
    pub fn from_words_subword<S: AsRef<str>>(words: &[S], vocab: &Vocab) -> Self {
        let mut s = Sentence {
            ids: Vec::new(),
            surface: Vec::new(),
            word_map: Vec::new(),
        };
        for (w, word) in words.iter().enumerate() {
            for id in vocab.tokenize_word(word.as_ref()) {
                s.ids.push(id);
                s.surface.push(if id == UNK {
                    word.as_ref().to_string()
                } else {
                    vocab.token(id).to_string()
                });
                s.word_map.push(w);
            }
        }
        s
    }

    pub fn from_ids(ids: Vec<usize>, vocab: &Vocab) -> Self {
        let surface = ids.iter().map(|&i| vocab.token(i).to_string()).collect();
        let n = ids.len();
        Sentence {
            ids,
            surface,
            word_map: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_words(&self) -> usize {
        self.word_map.last().map_or(0, |&w| w + 1)
    }

    /// Copy with `[CLS]` prepended.
    pub fn with_cls(&self) -> Sentence {
        let mut ids = Vec::with_capacity(self.len() + 1);
        ids.push(CLS);
        ids.extend_from_slice(&self.ids);
        let mut surface = Vec::with_capacity(self.len() + 1);
        surface.push(SPECIAL_SURFACES[CLS].to_string());
        surface.extend(self.surface.iter().cloned());
        let mut word_map = vec![0];
        word_map.extend(self.word_map.iter().map(|w| w + 1));
        Sentence {
            ids,
            surface,
            word_map,
        }
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.ids.is_empty() {
            return Err(Error::EmptySentence);
        }
        if self.ids.len() != self.surface.len() || self.ids.len() != self.word_map.len() {
            return Err(Error::Dimension("ids/surface/word_map lengths differ".into()));
        }
        if let Some(&bad) = self.ids.iter().find(|&&id| id >= vocab_size) {
            return Err(Error::OutOfRange {
                pos: bad,
                len: vocab_size,
            });
        }
        if self.word_map[0] != 0 || self.word_map.windows(2).any(|w| w[1] < w[0] || w[1] > w[0] + 1)
        {
            return Err(Error::Dimension("word_map is not monotone and onto".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTree {
    pub n_words: usize,
    pub edges: Vec<Edge>,
    pub relations: BTreeMap<Edge, String>,
}

impl GoldTree {
    /// Validates and normalizes (sorted, deduplicated edge order).
    pub fn new(
        n_words: usize,
        labeled: impl IntoIterator<Item = (Edge, String)>,
        sentence_id: &str,
    ) -> Result<Self> {
        let relations: BTreeMap<Edge, String> = labeled.into_iter().collect();
        let edges: Vec<Edge> = relations.keys().copied().collect();
        check_spanning_tree(n_words, &edges).map_err(|msg| Error::InvalidTree {
            sentence: sentence_id.to_string(),
            msg,
        })?;
        Ok(GoldTree {
            n_words,
            edges,
            relations,
        })
    }

    pub fn relation(&self, e: Edge) -> Option<&str> {
        self.relations.get(&e).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub name: String,
    pub words: std::collections::BTreeSet<usize>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, words: impl IntoIterator<Item = usize>) -> Result<Self> {
        let words: std::collections::BTreeSet<usize> = words.into_iter().collect();
        if words.is_empty() {
            return Err(Error::EmptyLexicon { dropped: 0 });
        }
        Ok(Lexicon {
            name: name.into(),
            words,
        })
    }

    pub fn contains(&self, id: usize) -> bool {
        self.words.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Reads a lexicon file (one word per line, anything after a tab ignored).
/// Returns the lexicon and the number of out-of-vocabulary lines dropped.
pub fn load_lexicon(path: impl AsRef<Path>, vocab: &Vocab) -> Result<(Lexicon, usize)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_lexicon(&text, name, vocab)
}

pub fn parse_lexicon(text: &str, name: String, vocab: &Vocab) -> Result<(Lexicon, usize)> {
    let mut words = std::collections::BTreeSet::new();
    let mut dropped = 0;
    for line in text.lines() {
        let word = line.split('\t').next().unwrap_or("").trim();
        if word.is_empty() {
            continue;
        }
        match vocab.lookup(word) {
            UNK => dropped += 1,
            id => {
                words.insert(id);
            }
        }
    }
    if words.is_empty() {
        return Err(Error::EmptyLexicon { dropped });
    }
    Ok((Lexicon { name, words }, dropped))
}
