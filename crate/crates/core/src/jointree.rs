//! Jointrees whose leaves host families, built from elimination orders and
//! lifted to twin and N-world networks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::elimination::{eliminate_indices, EliminationOrder};
use crate::error::{Error, Result};
use crate::model::Dag;
use crate::moral::moral_graph;
use crate::worlds::{n_world_dag, twin_dag, Lifting};

/// Role of a lifted jointree edge relative to the base jointree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeClass {
    /// A base edge inside a duplicated subtree; it now serves world 1.
    Duplicated,
    /// A copy of a duplicated edge serving a later world.
    Duplicate,
    /// A base edge outside every duplicated subtree.
    Invariant,
}

/// How each edge of a lifted jointree relates to the base jointree.
#[derive(Clone, Debug)]
pub struct TreeLifting {
    pub lifting: Lifting,
    pub edge_class: Vec<EdgeClass>,
    /// 1-based world served by duplicated and duplicate edges; 0 for
    /// invariant ones.
    pub edge_world: Vec<usize>,
    /// Base edge each edge descends from. `None` only for edges added to a
    /// single-node base tree.
    pub edge_origin: Vec<Option<usize>>,
}

/// A tree in which only leaves host families. Families are named by their
/// child variable in `dag`.
#[derive(Clone, Debug)]
pub struct Jointree {
    dag: Dag,
    names: Vec<String>,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<(usize, usize)>>,
    host: Vec<Option<usize>>,
    lifting: Option<TreeLifting>,
}

impl Jointree {
    /// Builds and checks a jointree. `host[i]` is the family child hosted at
    /// node `i`, if any.
    pub fn new(
        dag: Dag,
        names: Vec<String>,
        edges: Vec<(usize, usize)>,
        host: Vec<Option<usize>>,
    ) -> Result<Self> {
        let jt = Self::assemble(dag, names, edges, host);
        jt.check()?;
        Ok(jt)
    }

    fn assemble(
        dag: Dag,
        names: Vec<String>,
        edges: Vec<(usize, usize)>,
        host: Vec<Option<usize>>,
    ) -> Self {
        let mut adj = vec![Vec::new(); names.len()];
        for (e, &(a, b)) in edges.iter().enumerate() {
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
        Self {
            dag,
            names,
            edges,
            adj,
            host,
            lifting: None,
        }
    }

    /// Verifies the tree shape and the hosting rules.
    pub fn check(&self) -> Result<()> {
        let n = self.names.len();
        let bad = |m: String| Err(Error::InvalidJointree(m));
        if n == 0 {
            return bad("jointree has no nodes".into());
        }
        if self.host.len() != n {
            return bad("host list does not match node count".into());
        }
        if self.edges.len() + 1 != n {
            return bad(format!("{} nodes need {} edges, found {}", n, n - 1, self.edges.len()));
        }
        if self.edges.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return bad("edge endpoint out of range".into());
        }
        if self.rooted(0).order.len() != n {
            return bad("jointree is not connected".into());
        }
        let mut hosted = vec![false; self.dag.node_count()];
        for (i, h) in self.host.iter().enumerate() {
            match *h {
                Some(x) if x >= self.dag.node_count() => {
                    return bad(format!("node {} hosts unknown family {x}", self.names[i]))
                }
                Some(x) => {
                    if self.adj[i].len() > 1 {
                        return bad(format!("internal node {} hosts a family", self.names[i]));
                    }
                    hosted[x] = true;
                }
                None if self.adj[i].len() <= 1 => {
                    return bad(format!("leaf {} hosts no family", self.names[i]))
                }
                None => {}
            }
        }
        if let Some(x) = hosted.iter().position(|h| !h) {
            return bad(format!("family of `{}` is not hosted", self.dag.name(x)));
        }
        Ok(())
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
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

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(neighbor, edge index)` pairs of node `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adj[i]
    }

    pub fn host(&self, i: usize) -> Option<usize> {
        self.host[i]
    }

    pub fn hosts(&self) -> &[Option<usize>] {
        &self.host
    }

    /// Leaves hosting the family of `x`.
    pub fn hosts_of(&self, x: usize) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.host[i] == Some(x)).collect()
    }

    /// Family members of the family hosted at `i`, child last.
    pub fn hosted_family(&self, i: usize) -> Option<Vec<usize>> {
        self.host[i].map(|x| self.dag.family_indices(x))
    }

    pub fn lifting(&self) -> Option<&TreeLifting> {
        self.lifting.as_ref()
    }

    pub fn edge_class(&self) -> Option<&[EdgeClass]> {
        self.lifting.as_ref().map(|l| l.edge_class.as_slice())
    }

    /// Appends a leaf hosting family `x` next to `attach`.
    pub(crate) fn add_leaf(&mut self, attach: usize, x: usize, name: String) -> usize {
        let i = self.names.len();
        self.names.push(name);
        self.host.push(Some(x));
        self.adj.push(Vec::new());
        let e = self.edges.len();
        self.edges.push((attach, i));
        self.adj[attach].push((i, e));
        self.adj[i].push((attach, e));
        i
    }

    /// Breadth-first orientation from `root`.
    pub(crate) fn rooted(&self, root: usize) -> Rooted {
        let n = self.node_count();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = vec![root];
        seen[root] = true;
        let mut k = 0;
        while k < order.len() {
            let u = order[k];
            k += 1;
            for &(v, e) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((u, e));
                    order.push(v);
                }
            }
        }
        Rooted { order, parent }
    }
}

pub(crate) struct Rooted {
    /// Nodes in breadth-first order; parents precede children.
    pub order: Vec<usize>,
    /// `(parent, edge)` of every non-root node.
    pub parent: Vec<Option<(usize, usize)>>,
}

/// Separators per edge and clusters per node, both as sorted variable lists.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparatorAssignment {
    pub separators: Vec<Vec<usize>>,
    pub clusters: Vec<Vec<usize>>,
    pub width: usize,
    pub normalized_width: f64,
}

impl SeparatorAssignment {
    /// Derives clusters and widths: a leaf's cluster is its hosted family,
    /// any other cluster is the union of its adjacent separators.
    pub fn from_separators(jt: &Jointree, separators: Vec<Vec<usize>>) -> Self {
        let clusters: Vec<Vec<usize>> = (0..jt.node_count())
            .map(|i| match jt.hosted_family(i) {
                Some(mut f) => {
                    f.sort_unstable();
                    f
                }
                None => {
                    let mut c: Vec<usize> = jt.adj[i]
                        .iter()
                        .flat_map(|&(_, e)| separators[e].iter().copied())
                        .collect();
                    c.sort_unstable();
                    c.dedup();
                    c
                }
            })
            .collect();
        let width = clusters.iter().map(Vec::len).max().unwrap_or(1).saturating_sub(1);
        let normalized_width = normalized_width(clusters.iter().map(Vec::len));
        Self {
            separators,
            clusters,
            width,
            normalized_width,
        }
    }

    pub fn separator_width(&self) -> usize {
        self.separators.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// `log2 Σ 2^s` over cluster sizes `s`, computed without overflow.
pub fn normalized_width(sizes: impl IntoIterator<Item = usize>) -> f64 {
    let sizes: Vec<usize> = sizes.into_iter().collect();
    let Some(&m) = sizes.iter().max() else {
        return 0.0;
    };
    let s: f64 = sizes.iter().map(|&k| (k as f64 - m as f64).exp2()).sum();
    m as f64 + s.log2()
}

/// Separator of each edge: the variables hosted on both of its sides.
pub fn classical_separators(jt: &Jointree) -> SeparatorAssignment {
    let n = jt.node_count();
    let vars = jt.dag.node_count();
    let mut by_var: Vec<Vec<usize>> = vec![Vec::new(); vars];
    for i in 0..n {
        if let Some(f) = jt.hosted_family(i) {
            for v in f {
                by_var[v].push(i);
            }
        }
    }
    let rooted = jt.rooted(0);
    let mut separators = vec![Vec::new(); jt.edges.len()];
    let mut count = vec![0usize; n];
    for (v, hosts) in by_var.iter().enumerate() {
        if hosts.len() < 2 {
            continue;
        }
        count.iter_mut().for_each(|c| *c = 0);
        for &h in hosts {
            count[h] += 1;
        }
        for &u in rooted.order.iter().rev() {
            if let Some((p, e)) = rooted.parent[u] {
                if count[u] > 0 && count[u] < hosts.len() {
                    separators[e].push(v);
                }
                count[p] += count[u];
            }
        }
    }
    SeparatorAssignment::from_separators(jt, separators)
}

/// Jointree induced by eliminating `order` from the moral graph of `dag`.
///
/// Cluster `i` links to the cluster of the earliest eliminated variable in
/// `C_i` minus the eliminated variable, or to the last cluster if that set is
/// empty. Each family gets a leaf under the cluster of its first eliminated
/// member. Non-hosting leaves are then pruned.
pub fn jointree_from_order(dag: &Dag, order: &EliminationOrder) -> Result<Jointree> {
    let order = order.resolve(dag.node_count(), |s| dag.index_of(s))?;
    Ok(jointree_from_indices(dag, &order))
}

pub(crate) fn jointree_from_indices(dag: &Dag, order: &[usize]) -> Jointree {
    let n = dag.node_count();
    let seq = eliminate_indices(&moral_graph(dag), order);
    let mut pos = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    // nodes 0..n are clusters in elimination order, n..2n family leaves
    let mut edges = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let next = seq.clusters[i]
            .iter()
            .filter(|&&v| v != order[i])
            .map(|&v| pos[v])
            .min()
            .unwrap_or(n - 1);
        edges.push((i, next));
    }
    for x in 0..n {
        let first = dag.family_indices(x).iter().map(|&v| pos[v]).min().unwrap();
        edges.push((first, n + x));
    }
    let mut host: Vec<Option<usize>> = vec![None; n];
    host.extend((0..n).map(Some));

    let mut degree = vec![0usize; 2 * n];
    let mut adj = vec![Vec::new(); 2 * n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut alive = vec![true; 2 * n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| degree[i] <= 1).collect();
    while let Some(u) = stack.pop() {
        if !alive[u] || degree[u] > 1 || host[u].is_some() {
            continue;
        }
        alive[u] = false;
        for &w in &adj[u] {
            if alive[w] {
                degree[w] -= 1;
                if degree[w] <= 1 {
                    stack.push(w);
                }
            }
        }
    }
    let mut remap = vec![usize::MAX; 2 * n];
    let mut k = 0;
    for i in (0..2 * n).filter(|&i| alive[i]) {
        remap[i] = k;
        k += 1;
    }
    let names = (0..k).map(|i| format!("n{i}")).collect();
    let edges = edges
        .into_iter()
        .filter(|&(a, b)| alive[a] && alive[b])
        .map(|(a, b)| (remap[a], remap[b]))
        .collect();
    let host = (0..2 * n).filter(|&i| alive[i]).map(|i| host[i]).collect();
    let jt = Jointree::assemble(dag.clone(), names, edges, host);
    debug_assert!(jt.check().is_ok());
    jt
}

/// Twin jointree of `jt`, lifted onto the twin network. Duplicate nodes are
/// named `j'`.
pub fn make_twin_jointree(jt: &Jointree) -> Result<Jointree> {
    let (net, lifting, _) = twin_dag(&jt.dag)?;
    lift_jointree(jt, net, lifting, |name, _| format!("{name}'"))
}

/// Lifted jointree with `worlds` copies sharing the roots in
/// `shared_roots`. Copies of node `j` are named `j^k`.
pub fn make_n_world_jointree(
    jt: &Jointree,
    shared_roots: &BTreeSet<String>,
    worlds: usize,
) -> Result<Jointree> {
    let (net, lifting, _) = n_world_dag(&jt.dag, shared_roots, worlds)?;
    lift_jointree(jt, net, lifting, |name, k| format!("{name}^{k}"))
}

fn lift_jointree(
    jt: &Jointree,
    net: Dag,
    lifting: Lifting,
    copy_name: impl Fn(&str, usize) -> String,
) -> Result<Jointree> {
    if jt.lifting.is_some() {
        return Err(Error::InvalidJointree("jointree is already lifted".into()));
    }
    let worlds = lifting.worlds;
    let mut out = Jointree::assemble(net, jt.names.clone(), jt.edges.clone(), jt.host.clone());
    let mut origin: Vec<Option<usize>> = (0..jt.edges.len()).map(Some).collect();

    // the root must be an internal node; tiny trees get an auxiliary one
    let shared_leaf = |x: usize| lifting.shared[x];
    let needs_dup = (0..jt.node_count()).any(|i| jt.host[i].is_some_and(|x| !shared_leaf(x)));
    let mut aux_root = None;
    if worlds > 1 && needs_dup && out.node_count() <= 2 {
        let aux = out.names.len();
        aux_root = Some(aux);
        out.names.push("aux".into());
        out.host.push(None);
        out.adj.push(Vec::new());
        if out.node_count() == 3 {
            let (a, b) = out.edges[0];
            out.edges[0] = (a, aux);
            out.edges.push((aux, b));
            origin.push(Some(0));
        } else {
            out.edges.push((aux, 0));
            origin.push(None);
        }
        out = Jointree::assemble(out.dag, out.names, out.edges, out.host);
    }

    let mut class: Vec<Option<EdgeClass>> = vec![None; out.edges.len()];
    let mut world: Vec<usize> = vec![0; out.edges.len()];
    let root = aux_root.or_else(|| (0..out.node_count()).find(|&i| out.adj[i].len() >= 2));
    if let Some(root) = root {
        let rooted = out.rooted(root);
        let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); out.node_count()];
        for &u in &rooted.order {
            if let Some((p, e)) = rooted.parent[u] {
                children[p].push((u, e));
            }
        }
        let (mut has_shared, mut has_dup) = (vec![false; out.node_count()], vec![false; out.node_count()]);
        for &u in rooted.order.iter().rev() {
            if let Some(x) = out.host[u] {
                has_shared[u] |= lifting.shared[x];
                has_dup[u] |= !lifting.shared[x];
            }
            if let Some((p, _)) = rooted.parent[u] {
                has_shared[p] |= has_shared[u];
                has_dup[p] |= has_dup[u];
            }
        }

        let base_nodes = out.node_count();
        let mut stack = vec![(root, None::<(usize, usize)>)];
        while let Some((r, up)) = stack.pop() {
            if !has_dup[r] {
                continue;
            }
            let Some((p, pe)) = up.filter(|_| !has_shared[r]) else {
                stack.extend(children[r].iter().rev().map(|&(c, e)| (c, Some((r, e)))));
                continue;
            };
            // subtree of r in pre-order, with the edge to each node's parent
            let mut sub = vec![(r, pe)];
            let mut k = 0;
            while k < sub.len() {
                let u = sub[k].0;
                k += 1;
                sub.extend(children[u].iter().copied());
            }
            for &(_, e) in &sub {
                class[e] = Some(EdgeClass::Duplicated);
                world[e] = 1;
            }
            for w in 2..=worlds {
                let mut copy = vec![usize::MAX; base_nodes];
                for &(u, e) in &sub {
                    let i = out.names.len();
                    copy[u] = i;
                    out.names.push(copy_name(&out.names[u], w));
                    out.host.push(out.host[u].map(|x| lifting.copies[x][w - 1]));
                    out.adj.push(Vec::new());
                    let attach = if u == r { p } else { copy[rooted.parent[u].unwrap().0] };
                    let ne = out.edges.len();
                    out.edges.push((attach, i));
                    out.adj[attach].push((i, ne));
                    out.adj[i].push((attach, ne));
                    class.push(Some(EdgeClass::Duplicate));
                    world.push(w);
                    origin.push(origin[e]);
                }
            }
        }
    }

    let edge_class: Vec<EdgeClass> = class
        .into_iter()
        .map(|c| c.unwrap_or(EdgeClass::Invariant))
        .collect();
    out.lifting = Some(TreeLifting {
        lifting,
        edge_class,
        edge_world: world,
        edge_origin: origin,
    });
    out.check()?;
    Ok(out)
}

/// Lifts base separators edge by edge: duplicated edges keep `S` in world 1,
/// duplicate edges take the copy of `S` in their world, invariant edges take
/// the union of all copies.
pub fn lift_separators(base: &[Vec<usize>], lifted: &Jointree) -> Result<Vec<Vec<usize>>> {
    let tl = lifted.lifting.as_ref().ok_or(Error::MissingEdgeClass)?;
    let mut out = Vec::with_capacity(lifted.edges.len());
    for e in 0..lifted.edges.len() {
        let Some(o) = tl.edge_origin[e] else {
            out.push(Vec::new());
            continue;
        };
        let s = base.get(o).ok_or_else(|| {
            Error::InvalidJointree(format!("no base separator for edge {o}"))
        })?;
        let mut lifted_s: Vec<usize> = match tl.edge_class[e] {
            EdgeClass::Duplicated | EdgeClass::Duplicate => {
                tl.lifting.in_world(s, tl.edge_world[e] - 1)
            }
            EdgeClass::Invariant => (0..tl.lifting.worlds)
                .flat_map(|k| tl.lifting.in_world(s, k))
                .collect(),
        };
        lifted_s.sort_unstable();
        lifted_s.dedup();
        out.push(lifted_s);
    }
    Ok(out)
}

/// Separators of a lifted jointree computed from the base separators alone.
pub fn twin_separators_direct(
    base: &SeparatorAssignment,
    lifted: &Jointree,
) -> Result<SeparatorAssignment> {
    let seps = lift_separators(&base.separators, lifted)?;
    Ok(SeparatorAssignment::from_separators(lifted, seps))
}

/// Serializable view of a jointree and one separator assignment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointreeDoc {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    /// Family child id to the leaves hosting that family.
    pub hosts: std::collections::BTreeMap<String, Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge_class: Option<Vec<EdgeClass>>,
    pub separators: Vec<Vec<String>>,
    pub width: usize,
    pub normalized_width: f64,
}

impl JointreeDoc {
    pub fn new(jt: &Jointree, seps: &SeparatorAssignment) -> Self {
        let names = |vs: &[usize]| vs.iter().map(|&v| jt.dag.name(v).to_string()).collect();
        let mut hosts = std::collections::BTreeMap::<String, Vec<String>>::new();
        for i in 0..jt.node_count() {
            if let Some(x) = jt.host[i] {
                hosts.entry(jt.dag.name(x).to_string()).or_default().push(jt.names[i].clone());
            }
        }
        Self {
            nodes: jt.names.clone(),
            edges: jt
                .edges
                .iter()
                .map(|&(a, b)| (jt.names[a].clone(), jt.names[b].clone()))
                .collect(),
            hosts,
            edge_class: jt.edge_class().map(<[EdgeClass]>::to_vec),
            separators: seps.separators.iter().map(|s| names(s)).collect(),
            width: seps.width,
            normalized_width: seps.normalized_width,
        }
    }
}
