//! Mask distributions over sentence positions.
//!
//! `[CLS]` and `[PAD]` positions are never candidates; "position" below means
//! a maskable position.

use std::path::PathBuf;
use std::str::FromStr;


use crate::corpus::{load_lexicon, Lexicon, Sentence, Vocab, CLS, MASK, PAD};
use crate::error::{Error, Result};

pub const DEFAULT_UNIFORM_RATE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub enum MaskStrategy {
    /// Each position independently with probability `rate`; at least one.
    Uniform { rate: f64 },
    /// One lexicon position (all of them when `all` is set).
    Cloze { lexicon: Lexicon, all: bool },
    /// One non-lexicon position.
    NoCloze { lexicon: Lexicon },
    /// The final position with probability `p / 100`, otherwise one of the
    /// others.
    MixtureP { p: f64 },
}

/// Outcome of one draw. `fallback` is set when the strategy had no eligible
/// position and a uniform position was used instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskDraw {
    pub positions: Vec<usize>,
    pub fallback: bool,
}

impl MaskStrategy {
    pub fn uniform(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::Config(format!("mask rate must lie in (0, 1), got {rate}")));
        }
        Ok(MaskStrategy::Uniform { rate })
    }

    pub fn mixture(p: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::Config(format!("mixture p must lie in [0, 100], got {p}")));
        }
        Ok(MaskStrategy::MixtureP { p })
    }

    pub fn cloze(lexicon: Lexicon) -> Self {
        MaskStrategy::Cloze {
            lexicon,
            all: false,
        }
    }

    pub fn no_cloze(lexicon: Lexicon) -> Self {
        MaskStrategy::NoCloze { lexicon }
    }

    pub fn name(&self) -> String {
        match self {
            MaskStrategy::Uniform { rate } => format!("uniform:{rate}"),
            MaskStrategy::Cloze { lexicon, .. } => format!("cloze:{}", lexicon.name),
            MaskStrategy::NoCloze { lexicon } => format!("nocloze:{}", lexicon.name),
            MaskStrategy::MixtureP { p } => format!("mixture:{p}"),
        }
    }

    pub fn sample_mask<R: rand::Rng + ?Sized>(
        &self,
        sentence: &Sentence,
        rng: &mut R,
    ) -> Result<MaskDraw> {
        let cand: Vec<usize> = (0..sentence.len())
            .filter(|&k| sentence.ids[k] != CLS && sentence.ids[k] != PAD)
            .collect();
        if cand.is_empty() {
            return Err(Error::EmptySentence);
        }
        let pick = |rng: &mut R, from: &[usize]| from[rng.random_range(0..from.len())];
        let draw = |positions, fallback| Ok(MaskDraw { positions, fallback });
        match self {
            MaskStrategy::Uniform { rate } => {
                let mut chosen: Vec<usize> = cand
                    .iter()
                    .copied()
                    .filter(|_| rng.random::<f64>() < *rate)
                    .collect();
                if chosen.is_empty() {
                    chosen.push(pick(rng, &cand));
                }
                draw(chosen, false)
            }
            MaskStrategy::Cloze { lexicon, all } => {
                let eligible: Vec<usize> = cand
                    .iter()
                    .copied()
                    .filter(|&k| lexicon.contains(sentence.ids[k]))
                    .collect();
                if eligible.is_empty() {
                    draw(vec![pick(rng, &cand)], true)
                } else if *all {
                    draw(eligible, false)
                } else {
                    draw(vec![pick(rng, &eligible)], false)
                }
            }
            MaskStrategy::NoCloze { lexicon } => {
                let eligible: Vec<usize> = cand
                    .iter()
                    .copied()
                    .filter(|&k| !lexicon.contains(sentence.ids[k]))
                    .collect();
                if eligible.is_empty() {
                    draw(vec![pick(rng, &cand)], true)
                } else {
                    draw(vec![pick(rng, &eligible)], false)
                }
            }
            MaskStrategy::MixtureP { p } => {
                let last = *cand.last().unwrap();
                if cand.len() == 1 || rng.random::<f64>() < p / 100.0 {
                    draw(vec![last], false)
                } else {
                    draw(vec![pick(rng, &cand[..cand.len() - 1])], false)
                }
            }
        }
    }
}

/// Copy of `sentence` with every listed position replaced by `[MASK]`.
pub fn apply_mask(sentence: &Sentence, positions: &[usize]) -> Result<Sentence> {
    let mut out = sentence.clone();
    for &p in positions {
        if p >= out.len() {
            return Err(Error::OutOfRange {
                pos: p,
                len: out.len(),
            });
        }
        out.ids[p] = MASK;
    }
    Ok(out)
}

/// A strategy as written on the command line:
/// `uniform:0.15 | cloze:<lexfile> | nocloze:<lexfile> | mixture:<p>`.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    Uniform(f64),
    Cloze(PathBuf),
    NoCloze(PathBuf),
    Mixture(f64),
}

impl FromStr for MaskSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number in mask spec {s:?}")))
        };
        match kind {
            "uniform" if arg.is_empty() => Ok(MaskSpec::Uniform(DEFAULT_UNIFORM_RATE)),
            "uniform" => Ok(MaskSpec::Uniform(num(arg)?)),
            "cloze" if !arg.is_empty() => Ok(MaskSpec::Cloze(arg.into())),
            "nocloze" if !arg.is_empty() => Ok(MaskSpec::NoCloze(arg.into())),
            "mixture" => Ok(MaskSpec::Mixture(num(arg)?)),
            _ => Err(Error::Config(format!("unknown mask spec {s:?}"))),
        }
    }
}

impl MaskSpec {
    pub fn resolve(&self, vocab: &Vocab) -> Result<MaskStrategy> {
        match self {
            MaskSpec::Uniform(r) => MaskStrategy::uniform(*r),
            MaskSpec::Mixture(p) => MaskStrategy::mixture(*p),
            MaskSpec::Cloze(path) => Ok(MaskStrategy::cloze(load_lexicon(path, vocab)?.0)),
            MaskSpec::NoCloze(path) => Ok(MaskStrategy::no_cloze(load_lexicon(path, vocab)?.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn sent(words: &[&str], v: &Vocab) -> Sentence {
        Sentence::from_words(words, v)
    }

    fn vocab() -> Vocab {
        Vocab::from_words(["a", "b", "c", "d", "good", "bad"])
    }

    #[test]
    fn uniform_single_token_falls_back() {
        let v = vocab();
        let s = sent(&["a"], &v);
        let m = MaskStrategy::uniform(0.15).unwrap();
        let mut rng = seeded(0);
        for _ in 0..200 {
            assert_eq!(m.sample_mask(&s, &mut rng).unwrap().positions, vec![0]);
        }
    }

    #[test]
    fn cloze_and_nocloze_respect_lexicon() {
        let v = vocab();
        let lex = Lexicon::new("l", [v.lookup("good")]).unwrap();
        let s = sent(&["a", "b", "c", "good", "d"], &v);
        let mut rng = seeded(1);
        let cloze = MaskStrategy::cloze(lex.clone());
        let no = MaskStrategy::no_cloze(lex.clone());
        for _ in 0..500 {
            let d = cloze.sample_mask(&s, &mut rng).unwrap();
            assert_eq!(d.positions, vec![3]);
            assert!(!d.fallback);
            let d = no.sample_mask(&s, &mut rng).unwrap();
            assert_eq!(d.positions.len(), 1);
            assert_ne!(d.positions[0], 3);
        }
        // no lexicon token: fallback to a uniform position, reported
        let s2 = sent(&["a", "b"], &v);
        assert!(cloze.sample_mask(&s2, &mut rng).unwrap().fallback);
        let all = MaskStrategy::Cloze {
            lexicon: Lexicon::new("l", [v.lookup("good"), v.lookup("bad")]).unwrap(),
            all: true,
        };
        let s3 = sent(&["good", "a", "bad"], &v);
        assert_eq!(all.sample_mask(&s3, &mut rng).unwrap().positions, vec![0, 2]);
    }

    #[test]
    fn degenerate_mixtures() {
        let v = vocab();
        let s = sent(&["a", "b", "c", "d"], &v);
        let mut rng = seeded(2);
        let always = MaskStrategy::mixture(100.0).unwrap();
        let never = MaskStrategy::mixture(0.0).unwrap();
        let n = 10_000;
        let mut hits = (0, 0);
        for _ in 0..n {
            hits.0 += (always.sample_mask(&s, &mut rng).unwrap().positions == [3]) as usize;
            hits.1 += (never.sample_mask(&s, &mut rng).unwrap().positions == [3]) as usize;
        }
        assert_eq!(hits, (n, 0));
    }

    #[test]
    fn cls_is_never_masked() {
        let v = vocab();
        let s = sent(&["a", "b"], &v).with_cls();
        let mut rng = seeded(3);
        let m = MaskStrategy::mixture(0.0).unwrap();
        for _ in 0..200 {
            assert_eq!(m.sample_mask(&s, &mut rng).unwrap().positions, vec![1]);
        }
    }

    #[test]
    fn uniform_marginals() {
        let v = vocab();
        let words = ["a"; 40];
        let s = sent(&words, &v);
        let m = MaskStrategy::uniform(0.15).unwrap();
        let mut rng = seeded(4);
        let mut freq = vec![0usize; s.len()];
        let n = 100_000;
        for _ in 0..n {
            for p in m.sample_mask(&s, &mut rng).unwrap().positions {
                freq[p] += 1;
            }
        }
        for f in freq {
            let r = f as f64 / n as f64;
            assert!((r - 0.15).abs() < 0.01, "{r}");
        }
    }

    #[test]
    fn apply_mask_contract() {
        let v = vocab();
        let s = sent(&["a", "b", "c"], &v);
        assert_eq!(apply_mask(&s, &[]).unwrap(), s);
        let m = apply_mask(&s, &[1]).unwrap();
        assert_eq!(m.ids[1], MASK);
        assert_eq!(s.ids[1], v.lookup("b"));
        let both = apply_mask(&s, &[0, 2]).unwrap();
        let seq = apply_mask(&apply_mask(&s, &[0]).unwrap(), &[2]).unwrap();
        assert_eq!(both, seq);
        assert_eq!(both.word_map, s.word_map);
        assert!(matches!(apply_mask(&s, &[3]), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn parse_specs() {
        assert_eq!("uniform:0.2".parse::<MaskSpec>().unwrap(), MaskSpec::Uniform(0.2));
        assert_eq!("uniform".parse::<MaskSpec>().unwrap(), MaskSpec::Uniform(0.15));
        assert_eq!("mixture:40".parse::<MaskSpec>().unwrap(), MaskSpec::Mixture(40.0));
        assert_eq!(
            "cloze:lex.txt".parse::<MaskSpec>().unwrap(),
            MaskSpec::Cloze("lex.txt".into())
        );
        assert!("span:3".parse::<MaskSpec>().is_err());
        assert!(MaskStrategy::uniform(1.0).is_err());
        assert!(MaskStrategy::mixture(101.0).is_err());
    }
}
