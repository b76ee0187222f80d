use std::collections::HashMap;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::model::Dag;

/// Undirected graph obtained by marrying common parents and dropping edge
/// directions. Adjacency is stored as one bitset row per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoralGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<FixedBitSet>,
}

impl MoralGraph {
    /// An edgeless graph over the given node names.
    pub fn empty(names: Vec<String>) -> Self {
        let n = names.len();
        let index = names.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Self {
            names,
            index,
            adj: vec![FixedBitSet::with_capacity(n); n],
        }
    }

    pub fn from_edges(names: Vec<String>, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(names);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        if u != v {
            self.adj[u].insert(v);
            self.adj[v].insert(u);
        }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].contains(v)
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[u].ones()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adj[u].count_ones(..)
    }

    pub(crate) fn rows(&self) -> &[FixedBitSet] {
        &self.adj
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|r| r.count_ones(..)).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.node_count() {
            out.extend(self.adj[u].ones().filter(|&v| v > u).map(|v| (u, v)));
        }
        out
    }

    /// Same edges, by name, each pair sorted lexicographically.
    pub fn named_edges(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .edges()
            .into_iter()
            .map(|(u, v)| {
                let (a, b) = (self.names[u].clone(), self.names[v].clone());
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        out.sort();
        out
    }
}

/// Moralizes `dag`: an edge joins `u` and `v` iff one is a parent of the
/// other or they share a child.
pub fn moral_graph(dag: &Dag) -> MoralGraph {
    let mut g = MoralGraph::empty(dag.names().to_vec());
    for c in 0..dag.node_count() {
        let ps = dag.parents(c);
        for (k, &p) in ps.iter().enumerate() {
            g.add_edge(p, c);
            for &q in &ps[k + 1..] {
                g.add_edge(p, q);
            }
        }
    }
    g
}
