//! Elimination orders, cluster sequences, minfill, and lifting orders to
//! multi-world networks.

use std::collections::HashSet;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dag;
use crate::moral::MoralGraph;
use crate::worlds::{n_world_dag, twin_dag, Lifting};

/// A permutation of variable ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EliminationOrder(pub Vec<String>);

impl EliminationOrder {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        Self(names.iter().map(|s| s.as_ref().to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Resolves ids against a node index and checks that every node appears
    /// exactly once.
    pub fn resolve(&self, n: usize, index_of: impl Fn(&str) -> Option<usize>) -> Result<Vec<usize>> {
        if self.0.len() != n {
            return Err(Error::NotPermutation(format!(
                "{} ids for {n} nodes",
                self.0.len()
            )));
        }
        let mut seen = vec![false; n];
        self.0
            .iter()
            .map(|id| {
                let i = index_of(id).ok_or_else(|| Error::NotPermutation(format!("unknown `{id}`")))?;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::NotPermutation(format!("`{id}` repeated")));
                }
                Ok(i)
            })
            .collect()
    }
}

/// Clusters induced by eliminating nodes in order. `clusters[i]` belongs to
/// `order[i]` and contains it; indices refer to the eliminated graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterSequence {
    pub order: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    pub width: usize,
}

impl ClusterSequence {
    /// Cluster of a node, indexed by node rather than by step.
    pub fn by_node(&self) -> Vec<&[usize]> {
        let mut out = vec![&[][..]; self.order.len()];
        for (step, &v) in self.order.iter().enumerate() {
            out[v] = &self.clusters[step];
        }
        out
    }
}

/// Eliminates `order` from a working copy of `g`, connecting the remaining
/// neighbours of each eliminated node.
pub fn eliminate(g: &MoralGraph, order: &EliminationOrder) -> Result<ClusterSequence> {
    let order = order.resolve(g.node_count(), |id| g.index_of(id))?;
    Ok(eliminate_indices(g, &order))
}

pub(crate) fn eliminate_indices(g: &MoralGraph, order: &[usize]) -> ClusterSequence {
    let mut adj: Vec<FixedBitSet> = g.rows().to_vec();
    let mut clusters = Vec::with_capacity(order.len());
    let mut width = 0;
    for &v in order {
        let nb = adj[v].clone();
        let mut cluster: Vec<usize> = nb.ones().collect();
        for &u in &cluster {
            adj[u].union_with(&nb);
            adj[u].set(u, false);
            adj[u].set(v, false);
        }
        cluster.push(v);
        cluster.sort_unstable();
        width = width.max(cluster.len() - 1);
        clusters.push(cluster);
    }
    ClusterSequence {
        order: order.to_vec(),
        clusters,
        width,
    }
}

/// Width of an order without keeping its clusters.
pub fn order_width(g: &MoralGraph, order: &EliminationOrder) -> Result<usize> {
    Ok(eliminate(g, order)?.width)
}

fn name_ranks(g: &MoralGraph) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..g.node_count()).collect();
    idx.sort_by(|&a, &b| g.name(a).cmp(g.name(b)));
    let mut rank = vec![0; idx.len()];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

fn fill_in(adj: &[FixedBitSet], v: usize) -> usize {
    let nb = &adj[v];
    let d = nb.count_ones(..);
    let linked: usize = nb.ones().map(|u| adj[u].intersection_count(nb)).sum();
    (d * d.saturating_sub(1) - linked) / 2
}

/// Greedy minfill: repeatedly eliminates the node adding the fewest fill
/// edges; ties go to the smaller cluster, then to the smaller id.
pub fn minfill_order(g: &MoralGraph) -> EliminationOrder {
    let idx = minfill_indices(g);
    EliminationOrder(idx.into_iter().map(|i| g.name(i).to_string()).collect())
}

pub(crate) fn minfill_indices(g: &MoralGraph) -> Vec<usize> {
    let n = g.node_count();
    let rank = name_ranks(g);
    let mut adj: Vec<FixedBitSet> = g.rows().to_vec();
    let mut alive = vec![true; n];
    let mut fill: Vec<usize> = (0..n).map(|v| fill_in(&adj, v)).collect();
    let mut dirty = FixedBitSet::with_capacity(n);
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (fill[v], adj[v].count_ones(..), rank[v]))
            .expect("a live node remains");
        order.push(v);
        alive[v] = false;
        let nb = adj[v].clone();
        dirty.clear();
        for u in nb.ones() {
            adj[u].union_with(&nb);
            adj[u].set(u, false);
            adj[u].set(v, false);
        }
        for u in nb.ones() {
            dirty.insert(u);
            dirty.union_with(&adj[u]);
        }
        for u in dirty.ones() {
            if alive[u] {
                fill[u] = fill_in(&adj, u);
            }
        }
    }
    order
}

/// Replaces every non-shared node `X` of `order` by its copies in world
/// order; shared nodes appear once.
pub fn lift_order(
    order: &EliminationOrder,
    base: &Dag,
    lifting: &Lifting,
    net: &Dag,
) -> Result<EliminationOrder> {
    let idx = order.resolve(base.node_count(), |id| base.index_of(id))?;
    let mut out = Vec::with_capacity(net.node_count());
    for i in idx {
        if lifting.shared[i] {
            out.push(net.name(lifting.copies[i][0]).to_string());
        } else {
            out.extend(lifting.copies[i].iter().map(|&j| net.name(j).to_string()));
        }
    }
    Ok(EliminationOrder(out))
}

/// Twin elimination order: every non-root `X` becomes `X, X'`.
pub fn twin_order(order: &EliminationOrder, base: &Dag) -> Result<EliminationOrder> {
    let (net, lifting, _) = twin_dag(base)?;
    lift_order(order, base, &lifting, &net)
}

/// N-world order: every variable outside `shared_roots` becomes
/// `X, X^2, ..., X^N` consecutively.
pub fn n_world_order(
    order: &EliminationOrder,
    base: &Dag,
    shared_roots: &std::collections::BTreeSet<String>,
    worlds: usize,
) -> Result<EliminationOrder> {
    let (net, lifting, _) = n_world_dag(base, shared_roots, worlds)?;
    lift_order(order, base, &lifting, &net)
}

/// Every ordering of `0..n`, for brute-force checks on tiny graphs.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut HashSet<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if used.insert(v) {
                cur.push(v);
                rec(cur, used, n, out);
                cur.pop();
                used.remove(&v);
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut HashSet::new(), n, &mut out);
    out
}
