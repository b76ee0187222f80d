//! Twin, N-world and generalized N-world networks, and do-interventions.
//!
//! In every construction the first world keeps the base ids and base node
//! indices; later worlds are appended world by world in base order. Twin
//! duplicates are named `X'`, N-world copies `X^j` for `j >= 2`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dag, Evidence, Mechanism, Scm, VariableKind};

/// Where each base variable lives in a multi-world network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldMap {
    pub worlds: usize,
    /// Base ids that are not duplicated, sorted.
    pub shared: Vec<String>,
    /// One entry per base variable in base order.
    pub copies: Vec<WorldCopies>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldCopies {
    pub base: String,
    /// Network id in worlds `1..=N`; shared variables repeat their own id.
    pub ids: Vec<String>,
}

impl WorldMap {
    /// Network id of `base` in `world` (1-based).
    pub fn id(&self, base: &str, world: usize) -> Option<&str> {
        if world == 0 || world > self.worlds {
            return None;
        }
        self.copies
            .iter()
            .find(|c| c.base == base)
            .map(|c| c.ids[world - 1].as_str())
    }

    pub fn is_shared(&self, base: &str) -> bool {
        self.shared.binary_search_by(|s| s.as_str().cmp(base)).is_ok()
    }
}

/// Index-level view of a lifting: `copies[i][k]` is the network index of base
/// node `i` in world `k + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lifting {
    pub worlds: usize,
    pub shared: Vec<bool>,
    pub copies: Vec<Vec<usize>>,
}

impl Lifting {
    pub fn from_world_map(map: &WorldMap, base: &Dag, net: &Dag) -> Result<Self> {
        let mut shared = vec![false; base.node_count()];
        let mut copies = vec![Vec::new(); base.node_count()];
        for c in &map.copies {
            let i = base.require(&c.base)?;
            shared[i] = map.is_shared(&c.base);
            copies[i] = c.ids.iter().map(|id| net.require(id)).collect::<Result<_>>()?;
        }
        Ok(Self {
            worlds: map.worlds,
            shared,
            copies,
        })
    }

    /// Maps a set of base indices into world `k` (0-based).
    pub fn in_world(&self, vars: &[usize], k: usize) -> Vec<usize> {
        vars.iter().map(|&v| self.copies[v][k]).collect()
    }

    /// Inverse map: network index -> (base index, 0-based world). Shared
    /// variables report world 0.
    pub fn origin(&self, net_nodes: usize) -> Vec<(usize, usize)> {
        let mut out = vec![(usize::MAX, 0); net_nodes];
        for (i, ids) in self.copies.iter().enumerate() {
            for (k, &j) in ids.iter().enumerate().rev() {
                out[j] = (i, k);
            }
        }
        out
    }
}

pub fn twin_name(base: &str) -> String {
    format!("{base}'")
}

pub fn world_name(base: &str, world: usize) -> String {
    if world == 1 {
        base.to_string()
    } else {
        format!("{base}^{world}")
    }
}

/// Replicates the non-shared nodes of `dag` into `worlds` copies. A parent
/// that is shared feeds every copy; otherwise copy `k` of a node takes copy
/// `k` of the parent.
fn replicate_dag(
    dag: &Dag,
    shared: &[bool],
    worlds: usize,
    name: impl Fn(&str, usize) -> String,
) -> Result<(Dag, Lifting, WorldMap)> {
    let n = dag.node_count();
    let dup: Vec<usize> = (0..n).filter(|&i| !shared[i]).collect();
    let mut copies: Vec<Vec<usize>> = (0..n).map(|i| vec![i; worlds]).collect();
    for k in 1..worlds {
        for (r, &i) in dup.iter().enumerate() {
            copies[i][k] = n + (k - 1) * dup.len() + r;
        }
    }
    let mut names: Vec<String> = dag.names().to_vec();
    let mut parents: Vec<Vec<usize>> = dag.all_parents().to_vec();
    for k in 1..worlds {
        for &i in &dup {
            if dag.name(i).contains('^') {
                return Err(Error::InvalidId(name(dag.name(i), k + 1)));
            }
            names.push(name(dag.name(i), k + 1));
            parents.push(dag.parents(i).iter().map(|&p| copies[p][k]).collect());
        }
    }
    let net = Dag::from_parts(names, parents)?;
    let map = WorldMap {
        worlds,
        shared: {
            let mut s: Vec<String> = (0..n)
                .filter(|&i| shared[i])
                .map(|i| dag.name(i).to_string())
                .collect();
            s.sort();
            s
        },
        copies: (0..n)
            .map(|i| WorldCopies {
                base: dag.name(i).to_string(),
                ids: copies[i].iter().map(|&j| net.name(j).to_string()).collect(),
            })
            .collect(),
    };
    let lifting = Lifting {
        worlds,
        shared: shared.to_vec(),
        copies,
    };
    Ok((net, lifting, map))
}

fn replicate_scm(scm: &Scm, net: Dag, lifting: &Lifting) -> Scm {
    let origin = lifting.origin(net.node_count());
    let variables = origin
        .iter()
        .enumerate()
        .map(|(j, &(i, _))| {
            let mut v = scm.variable(i).clone();
            v.id = net.name(j).to_string();
            v
        })
        .collect();
    let mechanisms = origin.iter().map(|&(i, _)| scm.mechanism(i).clone()).collect();
    Scm::from_parts_unchecked(net, variables, mechanisms)
}

/// Twin network of a DAG: every internal node gets a duplicate `X'`; roots
/// are shared.
pub fn twin_dag(dag: &Dag) -> Result<(Dag, Lifting, WorldMap)> {
    let shared: Vec<bool> = (0..dag.node_count()).map(|i| dag.is_root(i)).collect();
    replicate_dag(dag, &shared, 2, |b, _| twin_name(b))
}

pub fn twin_network(scm: &Scm) -> Result<(Scm, WorldMap)> {
    let (net, lifting, map) = twin_dag(scm.dag())?;
    Ok((replicate_scm(scm, net, &lifting), map))
}

fn shared_mask(dag: &Dag, shared_roots: &BTreeSet<String>) -> Result<Vec<bool>> {
    let mut mask = vec![false; dag.node_count()];
    for r in shared_roots {
        let i = dag.require(r)?;
        if !dag.is_root(i) {
            return Err(Error::NotRoot(r.clone()));
        }
        mask[i] = true;
    }
    Ok(mask)
}

pub fn n_world_dag(
    dag: &Dag,
    shared_roots: &BTreeSet<String>,
    worlds: usize,
) -> Result<(Dag, Lifting, WorldMap)> {
    assert!(worlds >= 1, "at least one world is required");
    let mask = shared_mask(dag, shared_roots)?;
    replicate_dag(dag, &mask, worlds, world_name)
}

/// N-world network: roots in `shared_roots` are common to all worlds, every
/// other variable `X` becomes `X, X^2, ..., X^N`.
pub fn n_world_network(
    scm: &Scm,
    shared_roots: &BTreeSet<String>,
    worlds: usize,
) -> Result<(Scm, WorldMap)> {
    let (net, lifting, map) = n_world_dag(scm.dag(), shared_roots, worlds)?;
    Ok((replicate_scm(scm, net, &lifting), map))
}

/// All root ids of a DAG.
pub fn root_ids(dag: &Dag) -> BTreeSet<String> {
    dag.roots().into_iter().map(|i| dag.name(i).to_string()).collect()
}

/// An edge between two copies of the same duplicated variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrossEdge {
    pub var: String,
    pub from_world: usize,
    pub to_world: usize,
}

/// Generalized N-world network: only `duplicated` nodes are copied, and
/// cross edges `X^i -> X^j` (`i < j`) may be added between copies. A node
/// that is not duplicated takes every copy of a duplicated parent.
pub fn generalized_n_world(
    dag: &Dag,
    duplicated: &BTreeSet<String>,
    worlds: usize,
    cross_edges: &BTreeSet<CrossEdge>,
) -> Result<(Dag, Lifting)> {
    assert!(worlds >= 1, "at least one world is required");
    let n = dag.node_count();
    let mut shared = vec![true; n];
    for d in duplicated {
        shared[dag.require(d)?] = false;
    }
    let (net, lifting, _) = replicate_dag(dag, &shared, worlds, world_name)?;
    let names = net.names().to_vec();
    let mut parents = net.all_parents().to_vec();

    // shared children of duplicated parents see every copy
    for c in (0..n).filter(|&c| shared[c]) {
        let mut ps = Vec::new();
        for &p in dag.parents(c) {
            if shared[p] {
                ps.push(p);
            } else {
                ps.extend(lifting.copies[p].iter().copied());
            }
        }
        parents[c] = ps;
    }

    for e in cross_edges {
        let i = dag.require(&e.var)?;
        if shared[i] {
            return Err(Error::InvalidCrossEdge(format!("`{}` is not duplicated", e.var)));
        }
        if e.from_world == 0 || e.to_world > worlds || e.from_world >= e.to_world {
            return Err(Error::InvalidCrossEdge(format!(
                "`{}` {} -> {} needs 1 <= i < j <= {worlds}",
                e.var, e.from_world, e.to_world
            )));
        }
        let from = lifting.copies[i][e.from_world - 1];
        let to = lifting.copies[i][e.to_world - 1];
        if !parents[to].contains(&from) {
            parents[to].push(from);
        }
    }
    let out = Dag::from_parts(names, parents)?;
    Ok((out, lifting))
}

/// Applies `do(interventions)`: each intervened variable loses its parents
/// and becomes a root with a point mass on the intervened state.
pub fn mutilate(scm: &Scm, interventions: &Evidence) -> Result<Scm> {
    let resolved = crate::model::resolve_evidence(scm, interventions)?;
    if resolved.is_empty() {
        return Ok(scm.clone());
    }
    let (dag, mut variables, mut mechanisms) = scm.clone().into_parts();
    let mut parents = dag.all_parents().to_vec();
    for &(i, state) in &resolved {
        parents[i].clear();
        let mut dist = vec![0.0; variables[i].cardinality()];
        dist[state] = 1.0;
        mechanisms[i] = Mechanism::Distribution(dist);
        variables[i].kind = VariableKind::ExogenousRoot;
    }
    let dag = Dag::from_parts(dag.names().to_vec(), parents)?;
    Scm::new(dag, variables, mechanisms)
}
