//! Synthetic dependency grammar with a latent topic.
//!
//! Each sentence draws a topic, a root word class from the topic's class
//! prior, and then grows head-outward: every placed word emits left and then
//! right dependents, continuing on each side with probability `1 - stop_prob`.
//! A dependent's class depends on its head's class (sharpened by
//! `attach_concentration`) mixed with the topic prior, so gold edges carry
//! direct dependence while the topic confounds every token.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::rng::{self, categorical, Rng};

use super::{GoldTree, Sentence, Vocab};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrammarConfig {
    pub n_word_classes: usize,
    pub vocab_per_class: usize,
    pub n_topics: usize,
    pub stop_prob: f64,
    pub attach_concentration: f64,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        GrammarConfig {
            n_word_classes: 16,
            vocab_per_class: 2,
            n_topics: 3,
            stop_prob: 0.45,
            attach_concentration: 8.0,
            max_len: 10,
            seed: 0,
        }
    }
}

impl GrammarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_word_classes < 1 || self.vocab_per_class < 1 || self.n_topics < 1 {
            return Err(Error::Config("grammar counts must be at least 1".into()));
        }
        if !(self.stop_prob > 0.0 && self.stop_prob < 1.0) {
            return Err(Error::Config(format!(
                "stop_prob must lie in (0, 1), got {}",
                self.stop_prob
            )));
        }
        if !(self.attach_concentration > 0.0) {
            return Err(Error::Config("attach_concentration must be positive".into()));
        }
        if self.max_len < 2 {
            return Err(Error::Config("max_len must be at least 2".into()));
        }
        Ok(())
    }
}

const LEFT: usize = 0;
const RIGHT: usize = 1;

/// Sampled grammar parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    pub cfg: GrammarConfig,
    /// `topic_prior[z][c]`
    pub topic_prior: Vec<Vec<f64>>,
    /// `attach[h][side][c]`, before topic mixing
    pub attach: Vec<[Vec<f64>; 2]>,
}

impl Grammar {
    pub fn sample(cfg: &GrammarConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.n_word_classes;
        let mut rng = rng::split(cfg.seed, 0);

        let topic_prior = (0..cfg.n_topics)
            .map(|_| {
                let mut w = vec![1.0; k];
                let mut order: Vec<usize> = (0..k).collect();
                order.shuffle(&mut rng);
                for &c in order.iter().take(2.min(k)) {
                    w[c] += 6.0;
                }
                normalize(w)
            })
            .collect();

        // Every head class has one favourite dependent class shared by both
        // sides and a side-specific runner-up.
        let mut favourite: Vec<usize> = (0..k).collect();
        favourite.shuffle(&mut rng);
        let attach = (0..k)
            .map(|h| {
                let side = |rng: &mut Rng| {
                    let mut score = vec![0.0; k];
                    score[favourite[h]] = 1.0;
                    if k > 1 {
                        let mut second = rng.random_range(0..k - 1);
                        if second >= favourite[h] {
                            second += 1;
                        }
                        score[second] = 0.6;
                    }
                    softmax_scaled(&score, cfg.attach_concentration)
                };
                [side(&mut rng), side(&mut rng)]
            })
            .collect();

        Ok(Grammar {
            cfg: cfg.clone(),
            topic_prior,
            attach,
        })
    }

    pub fn vocab(&self) -> Vocab {
        Vocab::from_words((0..self.cfg.n_word_classes).flat_map(|c| {
            (0..self.cfg.vocab_per_class).map(move |k| word_name(c, k))
        }))
    }

    /// Dependent-class distribution given head class, side and topic.
    pub fn child_dist(&self, head: usize, side: usize, topic: usize) -> Vec<f64> {
        let w = self.cfg.attach_concentration / (1.0 + self.cfg.attach_concentration);
        self.attach[head][side]
            .iter()
            .zip(&self.topic_prior[topic])
            .map(|(a, t)| w * a + (1.0 - w) * t)
            .collect()
    }

    fn grow(&self, rng: &mut Rng) -> Option<(usize, Vec<Node>)> {
        let cfg = &self.cfg;
        let topic = rng.random_range(0..cfg.n_topics);
        let root_class = categorical(rng, &self.topic_prior[topic]);
        let mut nodes = vec![Node::new(root_class, None, 0, 0, rng, cfg.vocab_per_class)];
        let mut frontier = vec![0usize];
        while let Some(id) = frontier.pop() {
            let (class, depth) = (nodes[id].class, nodes[id].depth);
            for side in [LEFT, RIGHT] {
                // growth halts once the sentence is full
                while nodes.len() < cfg.max_len && rng.random::<f64>() >= cfg.stop_prob {
                    let c = categorical(rng, &self.child_dist(class, side, topic));
                    let child = nodes.len();
                    nodes.push(Node::new(c, Some(id), side, depth + 1, rng, cfg.vocab_per_class));
                    nodes[id].children[side].push(child);
                    frontier.push(child);
                }
            }
        }
        if nodes.len() < 2 {
            return None;
        }
        Some((topic, nodes))
    }
}

#[derive(Debug, Clone)]
struct Node {
    class: usize,
    word: usize,
    head: Option<usize>,
    side: usize,
    depth: usize,
    /// nearest-first
    children: [Vec<usize>; 2],
}

impl Node {
    fn new(
        class: usize,
        head: Option<usize>,
        side: usize,
        depth: usize,
        rng: &mut Rng,
        per_class: usize,
    ) -> Self {
        Node {
            class,
            word: rng.random_range(0..per_class),
            head,
            side,
            depth,
            children: [Vec::new(), Vec::new()],
        }
    }
}

fn linearize(nodes: &[Node], id: usize, out: &mut Vec<usize>) {
    for &c in nodes[id].children[LEFT].iter().rev() {
        linearize(nodes, c, out);
    }
    out.push(id);
    for &c in &nodes[id].children[RIGHT] {
        linearize(nodes, c, out);
    }
}

pub fn word_name(class: usize, k: usize) -> String {
    format!("c{class}w{k}")
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn softmax_scaled(score: &[f64], scale: f64) -> Vec<f64> {
    let m = score.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    normalize(score.iter().map(|s| ((s - m) * scale).exp()).collect())
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub grammar: Grammar,
    pub vocab: Vocab,
    pub sentences: Vec<(Sentence, GoldTree)>,
    pub topics: Vec<usize>,
    /// word class of every token, aligned with `sentences`
    pub classes: Vec<Vec<usize>>,
    /// head position of every token (`None` at the root)
    pub heads: Vec<Vec<Option<usize>>>,
}

/// Generates `n` sentences with gold trees. A pure function of `cfg`.
pub fn gen_synthetic(cfg: &GrammarConfig, n: usize) -> Result<SyntheticCorpus> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let grammar = Grammar::sample(cfg)?;
    let vocab = grammar.vocab();
    let mut rng = rng::split(cfg.seed, 1);
    let mut sentences = Vec::with_capacity(n);
    let mut topics = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    let mut heads = Vec::with_capacity(n);
    while sentences.len() < n {
        let Some((topic, nodes)) = grammar.grow(&mut rng) else {
            continue;
        };
        let mut order = Vec::with_capacity(nodes.len());
        linearize(&nodes, 0, &mut order);
        let mut pos = vec![0; nodes.len()];
        for (p, &id) in order.iter().enumerate() {
            pos[id] = p;
        }
        let words: Vec<String> = order
            .iter()
            .map(|&id| word_name(nodes[id].class, nodes[id].word))
            .collect();
        let labeled = nodes.iter().enumerate().filter_map(|(id, node)| {
            node.head.map(|h| {
                let side = if node.side == LEFT { "L" } else { "R" };
                (Edge::new(pos[id], pos[h]), format!("{side}dep{}", node.depth))
            })
        });
        let tree = GoldTree::new(nodes.len(), labeled, &format!("synthetic {}", sentences.len()))?;
        sentences.push((Sentence::from_words(&words, &vocab), tree));
        topics.push(topic);
        classes.push(order.iter().map(|&id| nodes[id].class).collect());
        heads.push(order.iter().map(|&id| nodes[id].head.map(|h| pos[h])).collect());
    }
    Ok(SyntheticCorpus {
        grammar,
        vocab,
        sentences,
        topics,
        classes,
        heads,
    })
}
