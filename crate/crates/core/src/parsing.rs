//! Tree induction from dependence matrices, baseline trees and attachment
//! scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::GoldTree;
use crate::dependence::DependenceMatrix;
use crate::error::{Error, Result};
use crate::graph::{check_spanning_tree, DisjointSets, Edge};

/// An undirected spanning tree over the words of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParseTree {
    pub n_words: usize,
    /// Sorted, each stored smaller endpoint first.
    pub edges: Vec<Edge>,
}

impl ParseTree {
    pub fn new(n_words: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut edges: Vec<Edge> = edges.into_iter().map(|e| Edge::new(e.0, e.1)).collect();
        edges.sort();
        check_spanning_tree(n_words, &edges).map_err(|msg| Error::InvalidTree {
            sentence: String::new(),
            msg,
        })?;
        Ok(Self { n_words, edges })
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.edges.binary_search(&Edge::new(e.0, e.1)).is_ok()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.touches(v))
            .map(|e| if e.0 == v { e.1 } else { e.0 })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn score(&self, m: &DependenceMatrix) -> f64 {
        self.edges.iter().map(|e| m.get(e.0, e.1)).sum()
    }
}

/// Maximum spanning tree (Kruskal). Edges are taken in order of decreasing
/// score, ties going to the lexicographically smaller pair.
pub fn mst(m: &DependenceMatrix) -> Result<ParseTree> {
    let n = m.n;
    if n < 2 {
        return Err(Error::Dimension(format!("cannot parse {n} words")));
    }
    let mut cand = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let s = m.get(i, j);
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("score ({i}, {j}) = {s}")));
            }
            cand.push((s, Edge(i, j)));
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut dsu = DisjointSets::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (_, e) in cand {
        if dsu.union(e.0, e.1) {
            edges.push(e);
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    ParseTree::new(n, edges)
}

pub fn linear_chain(n: usize) -> Result<ParseTree> {
    if n < 2 {
        return Err(Error::Dimension(format!("cannot parse {n} words")));
    }
    ParseTree::new(n, (0..n - 1).map(|k| Edge(k, k + 1)))
}

/// Uniform labeled tree, decoded from a uniformly random Prüfer sequence.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ParseTree> {
    if n < 2 {
        return Err(Error::Dimension(format!("cannot parse {n} words")));
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    ParseTree::new(n, prufer_decode(n, &seq))
}

fn prufer_decode(n: usize, seq: &[usize]) -> Vec<Edge> {
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = leaves.pop_first().expect("a tree always has a leaf");
        edges.push(Edge::new(leaf, v));
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.insert(v);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    edges.push(Edge::new(rest[0], rest[1]));
    edges
}

/// Recovered and total gold edges; add counts across sentences for the
/// micro-averaged corpus score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub hit: usize,
    pub total: usize,
}

impl EdgeCounts {
    pub fn add(&mut self, other: EdgeCounts) {
        self.hit += other.hit;
        self.total += other.total;
    }

    pub fn score(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.hit as f64 / self.total as f64
        }
    }
}

pub fn edge_counts(pred: &ParseTree, gold: &GoldTree) -> Result<EdgeCounts> {
    if pred.n_words != gold.n_words {
        return Err(Error::Dimension(format!(
            "predicted tree has {} words, gold has {}",
            pred.n_words, gold.n_words
        )));
    }
    let hit = gold.edges.iter().filter(|e| pred.contains(**e)).count();
    Ok(EdgeCounts {
        hit,
        total: gold.edges.len(),
    })
}

/// Undirected unlabeled attachment score of one sentence.
pub fn uuas(pred: &ParseTree, gold: &GoldTree) -> Result<f64> {
    Ok(edge_counts(pred, gold)?.score())
}

/// Micro-averaged UUAS over aligned sentence lists.
pub fn corpus_uuas(pred: &[ParseTree], gold: &[GoldTree]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} gold trees",
            pred.len(),
            gold.len()
        )));
    }
    let mut c = EdgeCounts::default();
    for (p, g) in pred.iter().zip(gold) {
        c.add(edge_counts(p, g)?);
    }
    Ok(c.score())
}

/// Haldane–Anscombe corrected log odds ratio of hit rates A vs B and whether
/// it differs from zero at the 5% level (Wald interval).
pub fn log_odds_test(a_hit: usize, a_miss: usize, b_hit: usize, b_miss: usize) -> (f64, bool) {
    let c = [a_hit, a_miss, b_hit, b_miss].map(|x| x as f64 + 0.5);
    let l = (c[0] * c[3] / (c[1] * c[2])).ln();
    let se = c.iter().map(|x| 1.0 / x).sum::<f64>().sqrt();
    (l, l.abs() > 1.96 * se)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRow {
    pub relation: String,
    pub gold_count: usize,
    pub method_hits: usize,
    pub chain_hits: usize,
    pub method_recall: f64,
    pub chain_recall: f64,
    pub log_odds: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub rows: Vec<RelationRow>,
}

/// Per-relation recall of `pred` against a linear chain on the same
/// sentences, rows sorted by relation label.
pub fn relation_recall(pred: &[ParseTree], gold: &[GoldTree]) -> Result<RelationReport> {
    if pred.len() != gold.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} gold trees",
            pred.len(),
            gold.len()
        )));
    }
    // relation -> (gold, method hits, chain hits)
    let mut acc: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (k, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.n_words != g.n_words {
            return Err(Error::Dimension(format!("sentence {k}: word counts differ")));
        }
        let chain = linear_chain(g.n_words)?;
        for e in &g.edges {
            let rel = g.relation(*e).filter(|r| !r.is_empty() && *r != "_");
            let rel = rel.ok_or_else(|| Error::InvalidTree {
                sentence: k.to_string(),
                msg: format!("edge ({}, {}) has no relation label", e.0, e.1),
            })?;
            let slot = acc.entry(rel.to_string()).or_default();
            slot.0 += 1;
            slot.1 += p.contains(*e) as usize;
            slot.2 += chain.contains(*e) as usize;
        }
    }
    let rows = acc
        .into_iter()
        .map(|(relation, (n, m, c))| {
            let (log_odds, significant) = log_odds_test(m, n - m, c, n - c);
            RelationRow {
                relation,
                gold_count: n,
                method_hits: m,
                chain_hits: c,
                method_recall: m as f64 / n as f64,
                chain_recall: c as f64 / n as f64,
                log_odds,
                significant,
            }
        })
        .collect();
    Ok(RelationReport { rows })
}

impl RelationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "relation",
            "gold_count",
            "method_recall",
            "chain_recall",
            "log_odds",
            "significant",
            "method_hits",
            "chain_hits",
        ])?;
        for r in &self.rows {
            out.write_record([
                r.relation.clone(),
                r.gold_count.to_string(),
                r.method_recall.to_string(),
                r.chain_recall.to_string(),
                r.log_odds.to_string(),
                r.significant.to_string(),
                r.method_hits.to_string(),
                r.chain_hits.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// One line per word: 1-based index, surface form, 1-based neighbors.
pub fn write_parse_tsv<W: Write>(mut w: W, tree: &ParseTree, words: &[String]) -> Result<()> {
    if words.len() != tree.n_words {
        return Err(Error::Dimension(format!(
            "{} words for a {}-word tree",
            words.len(),
            tree.n_words
        )));
    }
    for (k, word) in words.iter().enumerate() {
        let nbrs: Vec<String> = tree.neighbors(k).iter().map(|v| (v + 1).to_string()).collect();
        writeln!(w, "{}\t{}\t{}", k + 1, word, nbrs.join(",")).map_err(|e| Error::io("<tsv>", e))?;
    }
    writeln!(w).map_err(|e| Error::io("<tsv>", e))?;
    Ok(())
}
