//! CoNLL-U reader. Only ID, FORM, HEAD and DEPREL are used.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Edge;

use super::{GoldTree, Sentence, Vocab};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreebankSentence {
    pub id: String,
    pub words: Vec<String>,
    pub tree: GoldTree,
}

impl TreebankSentence {
    pub fn encode(&self, vocab: &Vocab) -> Sentence {
        Sentence::from_words_subword(&self.words, vocab)
    }
}

pub fn load_conllu(path: impl AsRef<Path>) -> Result<Vec<TreebankSentence>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(&text)
}

struct Row {
    form: String,
    head: usize,
    deprel: String,
}

pub fn parse_conllu(text: &str) -> Result<Vec<TreebankSentence>> {
    let mut out = Vec::new();
    let mut rows: Vec<Row> = Vec::new();
    let mut sent_id: Option<String> = None;

    let mut flush = |rows: &mut Vec<Row>, sent_id: &mut Option<String>| -> Result<()> {
        if rows.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let id = sent_id
            .take()
            .unwrap_or_else(|| format!("#{}", out.len() + 1));
        let n = rows.len();
        let mut labeled = Vec::with_capacity(n.saturating_sub(1));
        for (k, r) in rows.iter().enumerate() {
            if r.head == 0 {
                continue;
            }
            if r.head > n {
                return Err(Error::InvalidTree {
                    sentence: id.clone(),
                    msg: format!("head {} of token {} beyond sentence length {}", r.head, k + 1, n),
                });
            }
            labeled.push((Edge::new(k, r.head - 1), r.deprel.clone()));
        }
        // a duplicated pair (mutual heads) collapses in the map; count first
        let distinct: std::collections::BTreeSet<Edge> = labeled.iter().map(|(e, _)| *e).collect();
        if distinct.len() != labeled.len() {
            return Err(Error::InvalidTree {
                sentence: id,
                msg: "cyclic HEAD structure".into(),
            });
        }
        let tree = GoldTree::new(n, labeled, &id)?;
        out.push(TreebankSentence {
            id,
            words: rows.drain(..).map(|r| r.form).collect(),
            tree,
        });
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut rows, &mut sent_id)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("sent_id") {
                sent_id = Some(v.trim_start_matches([' ', '=']).trim().to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        // multiword ranges (3-4) and empty nodes (5.1) are not syntactic words
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad ID {:?}", cols[0]),
        })?;
        if id != rows.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected ID {}, found {}", rows.len() + 1, id),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad HEAD {:?}", cols[6]),
        })?;
        rows.push(Row {
            form: cols[1].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    flush(&mut rows, &mut sent_id)?;
    Ok(out)
}
