//! Line-delimited JSON corpus dumps: `{surface, edges, relations}` per line.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Edge;

use super::{GoldTree, TreebankSentence};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub surface: Vec<String>,
    pub edges: Vec<[usize; 2]>,
    /// Keyed by `"i-j"` with `i < j`.
    pub relations: BTreeMap<String, String>,
}

impl TreeRecord {
    pub fn from_tree(surface: &[String], tree: &GoldTree) -> Self {
        TreeRecord {
            surface: surface.to_vec(),
            edges: tree.edges.iter().map(|e| [e.0, e.1]).collect(),
            relations: tree
                .relations
                .iter()
                .map(|(e, r)| (format!("{}-{}", e.0, e.1), r.clone()))
                .collect(),
        }
    }

    pub fn into_sentence(self, id: String) -> Result<TreebankSentence> {
        let mut labeled = Vec::with_capacity(self.edges.len());
        for [a, b] in self.edges {
            let e = Edge::new(a, b);
            let rel = self
                .relations
                .get(&format!("{}-{}", e.0, e.1))
                .cloned()
                .ok_or_else(|| Error::InvalidTree {
                    sentence: id.clone(),
                    msg: format!("edge ({}, {}) has no relation label", e.0, e.1),
                })?;
            labeled.push((e, rel));
        }
        let n = self.surface.len();
        if labeled.len() + 1 != n {
            return Err(Error::InvalidTree {
                sentence: id,
                msg: format!("{} edges for {} words", labeled.len(), n),
            });
        }
        let tree = GoldTree::new(n, labeled, &id)?;
        Ok(TreebankSentence {
            id,
            words: self.surface,
            tree,
        })
    }
}

pub fn write_jsonl<W: Write>(mut w: W, items: &[TreebankSentence]) -> Result<()> {
    for s in items {
        let rec = TreeRecord::from_tree(&s.words, &s.tree);
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<jsonl writer>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<TreebankSentence>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TreeRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?;
        out.push(rec.into_sentence(format!("line {}", k + 1))?);
    }
    Ok(out)
}

pub fn dump_jsonl(path: impl AsRef<Path>, items: &[TreebankSentence]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_jsonl(&mut w, items)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<TreebankSentence>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let tree = GoldTree::new(
            3,
            [(Edge(0, 1), "Ldep1".to_string()), (Edge(1, 2), "Rdep1".to_string())],
            "t",
        )
        .unwrap();
        let s = TreebankSentence {
            id: "line 1".into(),
            words: vec!["a".into(), "b".into(), "c".into()],
            tree,
        };
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&s)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"relations\":{\"0-1\":\"Ldep1\",\"1-2\":\"Rdep1\"}"));
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, vec![s]);
    }

    #[test]
    fn missing_label_is_an_error() {
        let line = r#"{"surface":["a","b"],"edges":[[0,1]],"relations":{}}"#;
        assert!(matches!(
            read_jsonl(line.as_bytes()),
            Err(Error::InvalidTree { .. })
        ));
    }
}
