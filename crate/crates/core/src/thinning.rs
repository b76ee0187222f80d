//! Family replication and separator thinning.
//!
//! Rule 1 drops a functional `X` from `S_ij` when `(i, j)` lies on a path
//! between two leaves hosting the family of `X` and every separator on that
//! path contains `X`. Rule 2 drops `X` from `S_ij` when `X` is dangling at
//! one end: that node's hosted family does not mention `X` and no other
//! separator at that node contains `X`.

use std::collections::{BTreeSet, VecDeque};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::elimination::EliminationOrder;
use crate::error::{Error, Result};
use crate::jointree::{
    classical_separators, jointree_from_order, lift_separators, normalized_width, Jointree, Rooted,
    SeparatorAssignment,
};
use crate::model::Dag;

pub const DEFAULT_CHAIN_BOUND: usize = 10;

/// One separator removal and the evidence that justified it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub edge: (String, String),
    pub variable: String,
    pub rule: u8,
    /// Rule 1: the host-to-host path through the edge. Rule 2: the node at
    /// which the variable dangles.
    pub witness: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ThinnedJointree {
    pub jointree: Jointree,
    pub thinned: SeparatorAssignment,
    /// Functional flag per variable of the jointree's DAG.
    pub functional: Vec<bool>,
    pub log: Vec<Removal>,
}

/// Per-variable view used by both rules: which nodes host the family of
/// `x` and which hosted families mention `x`.
struct VarSets {
    hosts: FixedBitSet,
    mentions: FixedBitSet,
}

impl VarSets {
    fn of(jt: &Jointree, x: usize) -> Self {
        let n = jt.node_count();
        let (mut hosts, mut mentions) = (FixedBitSet::with_capacity(n), FixedBitSet::with_capacity(n));
        for i in 0..n {
            if let Some(y) = jt.host(i) {
                if y == x {
                    hosts.insert(i);
                    mentions.insert(i);
                } else if jt.dag().parents(y).contains(&x) {
                    mentions.insert(i);
                }
            }
        }
        Self { hosts, mentions }
    }
}

/// Reusable breadth-first search buffers.
struct Scratch {
    prev: Vec<usize>,
    seen: Vec<u32>,
    stamp: u32,
    queue: VecDeque<usize>,
}

impl Scratch {
    fn new() -> Self {
        Self {
            prev: Vec::new(),
            seen: Vec::new(),
            stamp: 0,
            queue: VecDeque::new(),
        }
    }

    fn reset(&mut self, n: usize) {
        if self.seen.len() < n {
            self.seen.resize(n, 0);
            self.prev.resize(n, 0);
        }
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.stamp = 1;
        }
        self.queue.clear();
    }
}

/// Rule checks for one variable, given its membership over the edges.
struct Rules<'a> {
    jt: &'a Jointree,
    sets: &'a VarSets,
}

impl Rules<'_> {
    /// Path from `start` to a leaf hosting the family of `x`, moving only
    /// through edges whose separators contain `x` and never crossing `skip`.
    fn path_to_host(&self, member: &FixedBitSet, start: usize, skip: usize, s: &mut Scratch) -> Option<Vec<usize>> {
        s.reset(self.jt.node_count());
        s.seen[start] = s.stamp;
        s.prev[start] = start;
        s.queue.push_back(start);
        while let Some(u) = s.queue.pop_front() {
            if self.sets.hosts.contains(u) {
                let mut path = vec![u];
                let mut w = u;
                while w != start {
                    w = s.prev[w];
                    path.push(w);
                }
                path.reverse();
                return Some(path);
            }
            for &(v, e) in self.jt.neighbors(u) {
                if e != skip && s.seen[v] != s.stamp && member.contains(e) {
                    s.seen[v] = s.stamp;
                    s.prev[v] = u;
                    s.queue.push_back(v);
                }
            }
        }
        None
    }

    fn rule1(&self, member: &FixedBitSet, e: usize, s: &mut Scratch) -> Option<Vec<usize>> {
        let (a, b) = self.jt.edges()[e];
        let left = self.path_to_host(member, a, e, s)?;
        let right = self.path_to_host(member, b, e, s)?;
        let mut w: Vec<usize> = left.into_iter().rev().collect();
        w.extend(right);
        Some(w)
    }

    fn dangles_at(&self, member: &FixedBitSet, i: usize, e: usize) -> bool {
        !self.sets.mentions.contains(i)
            && self
                .jt
                .neighbors(i)
                .iter()
                .all(|&(_, f)| f == e || !member.contains(f))
    }

    fn rule2(&self, member: &FixedBitSet, e: usize) -> Option<usize> {
        let (a, b) = self.jt.edges()[e];
        [a, b].into_iter().find(|&i| self.dangles_at(member, i, e))
    }

    /// Applies both rules to exhaustion, sweeping `order` and trying rule 1
    /// before rule 2, until a pass removes nothing.
    fn run(&self, member: &mut FixedBitSet, order: &[usize], s: &mut Scratch, mut removed: impl FnMut(usize, u8, Vec<usize>)) {
        loop {
            let mut changed = false;
            for &e in order {
                if !member.contains(e) {
                    continue;
                }
                let (rule, witness) = if let Some(path) = self.rule1(member, e, s) {
                    (1, path)
                } else if let Some(i) = self.rule2(member, e) {
                    (2, vec![i])
                } else {
                    continue;
                };
                member.set(e, false);
                changed = true;
                removed(e, rule, witness);
            }
            if !changed {
                break;
            }
        }
    }
}

fn canonical_edges(jt: &Jointree) -> Vec<usize> {
    let mut es: Vec<usize> = (0..jt.edges().len()).collect();
    es.sort_by_key(|&e| {
        let (a, b) = jt.edges()[e];
        (a.min(b), a.max(b))
    });
    es
}

/// Classical membership of `x` over the edges, by counting the hosts that
/// mention `x` below each edge.
fn classical_member(jt: &Jointree, rooted: &Rooted, sets: &VarSets, count: &mut Vec<usize>) -> FixedBitSet {
    let mut member = FixedBitSet::with_capacity(jt.edges().len());
    let total = sets.mentions.count_ones(..);
    if total < 2 {
        return member;
    }
    count.clear();
    count.resize(jt.node_count(), 0);
    for h in sets.mentions.ones() {
        count[h] = 1;
    }
    for &u in rooted.order.iter().rev() {
        if let Some((p, e)) = rooted.parent[u] {
            if count[u] > 0 && count[u] < total {
                member.insert(e);
            }
            count[p] += count[u];
        }
    }
    member
}

/// Cluster sizes from per-variable memberships: leaves keep their family,
/// other nodes take the union of adjacent separators.
fn cluster_sizes(jt: &Jointree, members: &[FixedBitSet]) -> Vec<usize> {
    let n = jt.node_count();
    let mut last = vec![usize::MAX; n];
    let mut size = vec![0usize; n];
    for (v, m) in members.iter().enumerate() {
        for e in m.ones() {
            let (a, b) = jt.edges()[e];
            for u in [a, b] {
                if last[u] != v {
                    last[u] = v;
                    size[u] += 1;
                }
            }
        }
    }
    for (i, s) in size.iter_mut().enumerate() {
        if let Some(x) = jt.host(i) {
            *s = jt.dag().parents(x).len() + 1;
        }
    }
    size
}

fn score(jt: &Jointree, members: &[FixedBitSet]) -> (usize, f64) {
    let sizes = cluster_sizes(jt, members);
    let width = sizes.iter().max().map_or(0, |&m| m.saturating_sub(1));
    let internal = sizes.iter().enumerate().filter(|&(i, _)| jt.host(i).is_none()).map(|(_, &s)| s);
    (width, normalized_width(internal))
}

/// Thinned memberships of every variable, with the jointree they refer to.
struct Workspace<'a> {
    jt: Jointree,
    functional: &'a [bool],
    sets: Vec<VarSets>,
    members: Vec<FixedBitSet>,
    score: (usize, f64),
    scratch: Scratch,
}

impl<'a> Workspace<'a> {
    fn new(jt: &Jointree, functional: &'a [bool]) -> Self {
        let n = jt.dag().node_count();
        let rooted = jt.rooted(0);
        let order = canonical_edges(jt);
        let mut scratch = Scratch::new();
        let mut count = Vec::new();
        let sets: Vec<VarSets> = (0..n).map(|x| VarSets::of(jt, x)).collect();
        let members: Vec<FixedBitSet> = (0..n)
            .map(|x| {
                let mut m = classical_member(jt, &rooted, &sets[x], &mut count);
                if functional[x] {
                    Rules { jt, sets: &sets[x] }.run(&mut m, &order, &mut scratch, |_, _, _| {});
                }
                m
            })
            .collect();
        let score = score(jt, &members);
        Self {
            jt: jt.clone(),
            functional,
            sets,
            members,
            score,
            scratch,
        }
    }

    /// Adds a replica of the family of `x` beside `attach` if the score does
    /// not get worse; `loose` compares the thinned width alone.
    fn try_replica(&mut self, attach: usize, x: usize, loose: bool) -> bool {
        let mut trial = self.jt.clone();
        let leaf = trial.add_leaf(attach, x, format!("n{}", self.jt.node_count()));
        let edges = trial.edges().len();
        let rooted = trial.rooted(0);
        let order = canonical_edges(&trial);
        let family = trial.dag().family_indices(x);
        let mut count = Vec::new();
        let mut members = self.members.clone();
        let mut sets = Vec::with_capacity(family.len());
        for &v in &family {
            let mut s = VarSets {
                hosts: self.sets[v].hosts.clone(),
                mentions: self.sets[v].mentions.clone(),
            };
            s.hosts.grow(leaf + 1);
            s.mentions.grow(leaf + 1);
            s.mentions.insert(leaf);
            if v == x {
                s.hosts.insert(leaf);
            }
            let mut m = classical_member(&trial, &rooted, &s, &mut count);
            if self.functional[v] {
                Rules { jt: &trial, sets: &s }.run(&mut m, &order, &mut self.scratch, |_, _, _| {});
            }
            members[v] = m;
            sets.push(s);
        }
        for m in members.iter_mut() {
            m.grow(edges);
        }
        let new = score(&trial, &members);
        let keep = if loose {
            new.0 <= self.score.0
        } else {
            new.0 < self.score.0 || (new.0 == self.score.0 && new.1 <= self.score.1 + 1e-9)
        };
        if keep {
            for (&v, s) in family.iter().zip(sets) {
                self.sets[v] = s;
            }
            for (v, s) in self.sets.iter_mut().enumerate() {
                if !family.contains(&v) {
                    s.hosts.grow(leaf + 1);
                    s.mentions.grow(leaf + 1);
                }
            }
            self.jt = trial;
            self.members = members;
            self.score = new;
        }
        keep
    }
}

/// Adds replica leaves for functional families.
///
/// For each functional `X`, candidate attach points are the nodes beside the
/// leaves hosting families of descendants reachable from `X` through at most
/// `chain_bound` edges with functional intermediates, followed by the inner
/// nodes whose thinned separators still carry `X`. A first pass keeps a
/// replica only if it lowers the thinned width, or keeps it and does not
/// raise the normalized width of the inner clusters; a second pass keeps any
/// replica that does not raise the thinned width. The thinned width therefore
/// never exceeds the classical one.
pub fn replicate(jt: &Jointree, functional: &[bool], chain_bound: usize) -> Jointree {
    if chain_bound == 0 || jt.node_count() <= 2 {
        return jt.clone();
    }
    let dag = jt.dag();
    let n = dag.node_count();
    let children = dag.children();
    let attach: Vec<Vec<usize>> = (0..n)
        .map(|z| jt.hosts_of(z).iter().map(|&h| jt.neighbors(h)[0].0).collect())
        .collect();
    let chains: Vec<BTreeSet<usize>> = (0..n)
        .map(|x| {
            let mut depth = vec![usize::MAX; n];
            depth[x] = 0;
            let mut queue = VecDeque::from([x]);
            let mut reached = BTreeSet::new();
            while let Some(u) = queue.pop_front() {
                if depth[u] == chain_bound || (u != x && !functional[u]) {
                    continue;
                }
                for &c in &children[u] {
                    if depth[c] == usize::MAX {
                        depth[c] = depth[u] + 1;
                        reached.insert(c);
                        queue.push_back(c);
                    }
                }
            }
            reached
        })
        .collect();
    let mut ws = Workspace::new(jt, functional);
    for loose in [false, true] {
        for x in (0..n).filter(|&x| functional[x] && !dag.is_root(x)) {
            let mut placed: BTreeSet<usize> = ws.sets[x].hosts.ones().map(|h| ws.jt.neighbors(h)[0].0).collect();
            for &z in &chains[x] {
                for &a in &attach[z] {
                    if placed.insert(a) {
                        ws.try_replica(a, x, loose);
                    }
                }
            }
            let carrying: Vec<usize> = (0..ws.jt.node_count())
                .filter(|&i| {
                    ws.jt.host(i).is_none() && ws.jt.neighbors(i).iter().any(|&(_, e)| ws.members[x].contains(e))
                })
                .collect();
            for a in carrying {
                if placed.insert(a) {
                    ws.try_replica(a, x, loose);
                }
            }
        }
    }
    debug_assert!(ws.jt.check().is_ok());
    ws.jt
}

/// Applies both rules to exhaustion. Each variable is swept on its own,
/// over edges in sorted node-pair order with rule 1 tried before rule 2,
/// until a pass removes nothing; the rules for one variable never look at
/// another, so this equals a joint sweep.
pub fn thin(jt: &Jointree, functional: &[bool]) -> ThinnedJointree {
    let classical = classical_separators(jt);
    let n = jt.dag().node_count();
    let order = canonical_edges(jt);
    let mut members = vec![FixedBitSet::with_capacity(jt.edges().len()); n];
    for (e, s) in classical.separators.iter().enumerate() {
        for &v in s {
            members[v].insert(e);
        }
    }
    let mut scratch = Scratch::new();
    let mut log = Vec::new();
    for x in (0..n).filter(|&x| functional[x]) {
        let sets = VarSets::of(jt, x);
        Rules { jt, sets: &sets }.run(&mut members[x], &order, &mut scratch, |e, rule, witness| {
            let (a, b) = jt.edges()[e];
            log.push(Removal {
                edge: (jt.name(a).to_string(), jt.name(b).to_string()),
                variable: jt.dag().name(x).to_string(),
                rule,
                witness: witness.iter().map(|&i| jt.name(i).to_string()).collect(),
            });
        });
    }
    ThinnedJointree {
        thinned: SeparatorAssignment::from_separators(jt, transpose(&members, jt.edges().len())),
        jointree: jt.clone(),
        functional: functional.to_vec(),
        log,
    }
}

fn transpose(members: &[FixedBitSet], edges: usize) -> Vec<Vec<usize>> {
    let mut seps = vec![Vec::new(); edges];
    for (v, m) in members.iter().enumerate() {
        for e in m.ones() {
            seps[e].push(v);
        }
    }
    seps
}

/// Replays `log` from the classical separators, rechecking every removal
/// against the state it was made in, and returns the resulting separators.
pub fn replay(jt: &Jointree, functional: &[bool], log: &[Removal]) -> Result<Vec<Vec<usize>>> {
    let classical = classical_separators(jt);
    let n = jt.dag().node_count();
    let mut members = vec![FixedBitSet::with_capacity(jt.edges().len()); n];
    for (e, s) in classical.separators.iter().enumerate() {
        for &v in s {
            members[v].insert(e);
        }
    }
    let mut scratch = Scratch::new();
    let node = |s: &str| {
        jt.names()
            .iter()
            .position(|n| n == s)
            .ok_or_else(|| Error::InvalidJointree(format!("unknown node `{s}`")))
    };
    for r in log {
        let (a, b) = (node(&r.edge.0)?, node(&r.edge.1)?);
        let e = jt
            .neighbors(a)
            .iter()
            .find(|&&(v, _)| v == b)
            .map(|&(_, e)| e)
            .ok_or_else(|| Error::InvalidJointree(format!("no edge {a}-{b}")))?;
        let x = jt.dag().require(&r.variable)?;
        let bad = |why: &str| {
            Err(Error::InvalidJointree(format!(
                "removal of `{}` from {}-{} {why}",
                r.variable, r.edge.0, r.edge.1
            )))
        };
        if !functional[x] {
            return bad("targets a non-functional variable");
        }
        if !members[x].contains(e) {
            return bad("targets an absent variable");
        }
        let sets = VarSets::of(jt, x);
        let rules = Rules { jt, sets: &sets };
        let ok = match r.rule {
            1 => rules.rule1(&members[x], e, &mut scratch).is_some(),
            2 => rules.rule2(&members[x], e).is_some(),
            _ => false,
        };
        if !ok {
            return bad("is not justified by its rule");
        }
        members[x].set(e, false);
    }
    Ok(transpose(&members, jt.edges().len()))
}

/// Thinned separators of a lifted jointree obtained from the thinned base
/// separators alone.
pub fn thinned_twin_separators(
    base: &ThinnedJointree,
    lifted: &Jointree,
) -> Result<ThinnedJointree> {
    let tl = lifted.lifting().ok_or(Error::MissingEdgeClass)?;
    let seps = lift_separators(&base.thinned.separators, lifted)?;
    let origin = tl.lifting.origin(lifted.dag().node_count());
    let functional = origin.iter().map(|&(i, _)| base.functional[i]).collect();
    Ok(ThinnedJointree {
        thinned: SeparatorAssignment::from_separators(lifted, seps),
        jointree: lifted.clone(),
        functional,
        log: Vec::new(),
    })
}

/// Internal nodes of `dag` as a functional mask.
pub fn internal_mask(dag: &Dag) -> Vec<bool> {
    (0..dag.node_count()).map(|i| !dag.is_root(i)).collect()
}

/// Replicates and then thins `jt`.
pub fn replicate_and_thin(jt: &Jointree, functional: &[bool], chain_bound: usize) -> ThinnedJointree {
    thin(&replicate(jt, functional, chain_bound), functional)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthReport {
    /// Width of the jointree built from the order.
    pub classical: usize,
    /// Width after replication, before thinning.
    pub replicated: usize,
    /// Width after thinning the replicated jointree.
    pub thinned: usize,
}

/// Widths along the pipeline order → jointree → replicate → thin.
pub fn causal_width_report(
    dag: &Dag,
    functional: &[bool],
    chain_bound: usize,
    order: &EliminationOrder,
) -> Result<WidthReport> {
    let jt = jointree_from_order(dag, order)?;
    let rep = replicate(&jt, functional, chain_bound);
    Ok(WidthReport {
        classical: classical_separators(&jt).width,
        replicated: classical_separators(&rep).width,
        thinned: thin(&rep, functional).thinned.width,
    })
}
