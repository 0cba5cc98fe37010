//! Undirected edges and spanning-tree validation shared by gold and predicted trees.

use serde::{Deserialize, Serialize};

/// Undirected edge stored with the smaller endpoint first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.0 == v || self.1 == v
    }
}

/// Checks that `edges` form a spanning tree on `0..n`. Returns a message
/// describing the first violation.
pub fn check_spanning_tree(n: usize, edges: &[Edge]) -> Result<(), String> {
    if n == 0 {
        return Err("tree has no nodes".into());
    }
    if edges.len() != n - 1 {
        return Err(format!("{} edges for {} nodes", edges.len(), n));
    }
    let mut dsu = DisjointSets::new(n);
    for e in edges {
        if e.0 == e.1 {
            return Err(format!("self-loop at {}", e.0));
        }
        if e.1 >= n {
            return Err(format!("edge ({}, {}) out of range", e.0, e.1));
        }
        if !dsu.union(e.0, e.1) {
            return Err(format!("cycle through ({}, {})", e.0, e.1));
        }
    }
    // n-1 successful unions on n nodes means connected
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_chain_and_rejects_cycle() {
        let chain = [Edge::new(0, 1), Edge::new(1, 2)];
        assert!(check_spanning_tree(3, &chain).is_ok());
        let cyc = [Edge::new(0, 1), Edge::new(1, 0)];
        assert!(check_spanning_tree(3, &cyc).is_err());
        assert!(check_spanning_tree(1, &[]).is_ok());
        assert!(check_spanning_tree(2, &[Edge::new(1, 1)]).is_err());
    }
}
