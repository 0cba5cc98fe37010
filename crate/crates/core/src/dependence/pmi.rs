use std::collections::HashMap;

use crate::corpus::Sentence;

/// Type-level PMI from within-sentence co-occurrence.
///
/// `p(a)` is the unigram token frequency and `p(a, b)` the frequency of the
/// ordered pair `(a, b)` among all ordered pairs of distinct positions within
/// a sentence, with add-one smoothing over the `K²` joint cells of the `K`
/// observed types. Under independent tokens the pair frequency factorizes
/// into the unigram frequencies, so PMI is centred at zero.
#[derive(Debug, Clone)]
pub struct PmiTable {
    unigram: HashMap<usize, u64>,
    joint: HashMap<(usize, usize), u64>,
    n_tokens: u64,
    n_pairs: u64,
}

impl PmiTable {
    pub fn from_corpus<'a, I>(corpus: I) -> Self
    where
        I: IntoIterator<Item = &'a Sentence>,
    {
        let mut t = PmiTable {
            unigram: HashMap::new(),
            joint: HashMap::new(),
            n_tokens: 0,
            n_pairs: 0,
        };
        for s in corpus {
            for &a in &s.ids {
                *t.unigram.entry(a).or_insert(0) += 1;
            }
            t.n_tokens += s.ids.len() as u64;
            for (i, &a) in s.ids.iter().enumerate() {
                for (j, &b) in s.ids.iter().enumerate() {
                    if i != j {
                        *t.joint.entry((a, b)).or_insert(0) += 1;
                    }
                }
            }
            let l = s.ids.len() as u64;
            t.n_pairs += l * l.saturating_sub(1);
        }
        t
    }

    pub fn n_types(&self) -> usize {
        self.unigram.len()
    }

    /// PMI in nats; 0 when either type never occurred.
    pub fn pmi(&self, a: usize, b: usize) -> f64 {
        let (Some(&ca), Some(&cb)) = (self.unigram.get(&a), self.unigram.get(&b)) else {
            return 0.0;
        };
        let k = self.unigram.len() as f64;
        let cab = self.joint.get(&(a, b)).copied().unwrap_or(0) as f64;
        let pab = (cab + 1.0) / (self.n_pairs as f64 + k * k);
        let pa = ca as f64 / self.n_tokens as f64;
        let pb = cb as f64 / self.n_tokens as f64;
        (pab / (pa * pb)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocab;
    use crate::rng::seeded;
    use rand::Rng as _;

    #[test]
    fn hand_counted_pmi() {
        let v = Vocab::from_words(["a", "b", "c", "d"]);
        let corpus: Vec<Sentence> = ["a b", "a b", "c d"]
            .iter()
            .map(|l| Sentence::from_words(&l.split(' ').collect::<Vec<_>>(), &v))
            .collect();
        let t = PmiTable::from_corpus(&corpus);
        // 6 tokens, p(a) = p(b) = 2/6; 6 ordered pairs, (a,b) seen twice,
        // K = 4 types: p(a,b) = (2+1)/(6+16)
        let expected = ((3.0f64 / 22.0) / ((2.0 / 6.0) * (2.0 / 6.0))).ln();
        assert_eq!(t.pmi(v.lookup("a"), v.lookup("b")), expected);
        assert_eq!(t.pmi(v.lookup("b"), v.lookup("a")), expected);
        assert_eq!(t.pmi(v.lookup("a"), 99), 0.0);
    }

    #[test]
    fn disjoint_types_have_negative_pmi() {
        let v = Vocab::from_words(["a", "b", "x", "y"]);
        let mut corpus = Vec::new();
        for _ in 0..500 {
            corpus.push(Sentence::from_words(&["a", "x", "x"], &v));
            corpus.push(Sentence::from_words(&["b", "y", "y"], &v));
        }
        let t = PmiTable::from_corpus(&corpus);
        assert!(t.pmi(v.lookup("a"), v.lookup("b")) < 0.0);
    }

    #[test]
    fn independent_tokens_have_near_zero_pmi() {
        let words: Vec<String> = (0..5).map(|i| format!("w{i}")).collect();
        let v = Vocab::from_words(words.iter().cloned());
        let mut rng = seeded(3);
        let corpus: Vec<Sentence> = (0..10_000)
            .map(|_| {
                let len = rng.random_range(3..=10);
                let ids = (0..len).map(|_| 4 + rng.random_range(0..5)).collect();
                Sentence::from_ids(ids, &v)
            })
            .collect();
        let t = PmiTable::from_corpus(&corpus);
        for a in 4..9 {
            for b in 4..9 {
                let p = t.pmi(a, b);
                assert!(p.abs() < 0.05, "pmi({a},{b}) = {p}");
            }
        }
    }
}
