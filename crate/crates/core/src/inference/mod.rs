//! Exact inference: variable elimination, jointree propagation over
//! classical or thinned separators, and counterfactual queries on N-world
//! networks.

mod oracle;
mod query;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use oracle::{brute_force_counterfactual, brute_force_joint, network_enumeration, STATE_SPACE_GUARD};
pub use query::{random_query, CounterfactualQuery, Mode, ResolvedQuery, StateRef, WorldAssignment};

use crate::elimination::{eliminate_indices, minfill_indices, EliminationOrder};
use crate::error::{Error, Result};
use crate::factor::{family_factor, multiply, multiply_all, project, reduce, sum_out, Factor};
use crate::jointree::{
    classical_separators, jointree_from_indices, make_n_world_jointree, twin_separators_direct,
    Jointree, SeparatorAssignment,
};
use crate::model::{resolve_evidence, Evidence, Scm};
use crate::moral::moral_graph;
use crate::thinning::{replicate_and_thin, thinned_twin_separators, DEFAULT_CHAIN_BOUND};
use crate::worlds::{mutilate, n_world_network};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ve,
    VeTwin,
    VeNworld,
    Jointree,
    JointreeThinned,
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub value: f64,
    pub evidence_probability: f64,
    pub joint_probability: f64,
    pub method: Method,
}

impl InferenceResult {
    /// Joint mode reports `joint`; conditional mode reports `joint /
    /// evidence` and rejects zero-probability evidence.
    pub fn from_probabilities(joint: f64, evidence: f64, mode: Mode, method: Method) -> Result<Self> {
        let value = match mode {
            Mode::Joint => joint,
            Mode::Conditional if evidence > 0.0 => (joint / evidence).min(1.0),
            Mode::Conditional => return Err(Error::ZeroProbabilityEvidence),
        };
        Ok(Self {
            value: value.clamp(0.0, 1.0),
            evidence_probability: evidence,
            joint_probability: joint,
            method,
        })
    }
}

/// Engines for counterfactual queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Ve,
    Jointree,
    JointreeThinned,
    Oracle,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ve" => Ok(Self::Ve),
            "jointree" => Ok(Self::Jointree),
            "jointree-thinned" => Ok(Self::JointreeThinned),
            "oracle" => Ok(Self::Oracle),
            _ => Err(Error::InvalidQuery(format!("unknown engine `{s}`"))),
        }
    }
}

fn has_conflict(assignment: &[(usize, usize)]) -> bool {
    let mut seen = BTreeMap::new();
    assignment
        .iter()
        .any(|&(v, s)| *seen.entry(v).or_insert(s) != s)
}

/// Probability of `assignment` by eliminating variables in `order`. Also
/// returns the largest scope formed before a summation.
pub fn ve_probability(scm: &Scm, assignment: &[(usize, usize)], order: &[usize]) -> Result<(f64, usize)> {
    if has_conflict(assignment) {
        return Ok((0.0, 0));
    }
    let mut pool: Vec<Factor> = (0..scm.node_count())
        .map(|i| reduce(&family_factor(scm, i), assignment))
        .collect::<Result<_>>()?;
    let mut peak = 0;
    for &v in order {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) = pool.into_iter().partition(|f| f.contains(v));
        pool = rest;
        if bucket.is_empty() {
            continue;
        }
        let prod = multiply_all(&bucket)?;
        peak = peak.max(prod.vars().len());
        pool.push(sum_out(&prod, v));
    }
    let rest = multiply_all(&pool)?;
    Ok((rest.total(), peak))
}

/// `Pr(target | evidence)` by variable elimination along `order`.
pub fn ve_query(
    scm: &Scm,
    evidence: &Evidence,
    order: &EliminationOrder,
    target: &Evidence,
) -> Result<InferenceResult> {
    let order = order.resolve(scm.node_count(), |s| scm.dag().index_of(s))?;
    let ev = resolve_evidence(scm, evidence)?;
    let mut both = ev.clone();
    both.extend(resolve_evidence(scm, target)?);
    let (joint, peak_joint) = ve_probability(scm, &both, &order)?;
    let (pe, peak_ev) = ve_probability(scm, &ev, &order)?;
    let width = eliminate_indices(&moral_graph(scm.dag()), &order).width;
    assert!(
        peak_joint.max(peak_ev) <= width + 1,
        "elimination formed a scope larger than the order's clusters"
    );
    InferenceResult::from_probabilities(joint, pe, Mode::Conditional, Method::Ve)
}

/// Outcome of a two-pass propagation.
#[derive(Clone, Debug)]
pub struct Propagation {
    /// Probability of the evidence, read at the root.
    pub probability: f64,
    /// The same quantity read at every node; equal up to rounding on a
    /// valid jointree.
    pub node_totals: Vec<f64>,
    pub max_message_scope: usize,
}

/// Collects towards node 0 and distributes back, projecting each message
/// onto its edge's separator.
///
/// `factors[x]` is the table of variable `x`; its scope must fit the family
/// hosted for `x`. Indicator tables go to every host of their family, the
/// rest to the first host only.
pub fn propagate(
    jt: &Jointree,
    separators: &[Vec<usize>],
    factors: &[Factor],
    evidence: &[(usize, usize)],
) -> Result<Propagation> {
    let n = jt.node_count();
    if has_conflict(evidence) {
        return Ok(Propagation {
            probability: 0.0,
            node_totals: vec![0.0; n],
            max_message_scope: 0,
        });
    }
    let mut local: Vec<Factor> = vec![Factor::unit(); n];
    let mut hosts: Vec<Vec<usize>> = vec![Vec::new(); factors.len()];
    for i in 0..n {
        if let Some(x) = jt.host(i) {
            hosts[x].push(i);
        }
    }
    for (x, f) in factors.iter().enumerate() {
        let reduced = reduce(f, evidence)?;
        let fam = jt.hosted_family(hosts[x][0]).unwrap_or_default();
        if f.vars().iter().any(|v| !fam.contains(v)) {
            return Err(Error::InvalidJointree(format!(
                "table of `{}` does not fit its hosted family",
                jt.dag().name(x)
            )));
        }
        let targets = if f.is_indicator() { &hosts[x][..] } else { &hosts[x][..1] };
        for &h in targets {
            local[h] = multiply(&local[h], &reduced)?;
        }
    }

    let rooted = jt.rooted(0);
    let mut up: Vec<Option<Factor>> = vec![None; n];
    let mut down: Vec<Option<Factor>> = vec![None; n];
    let mut peak = 0;
    let children: Vec<Vec<usize>> = (0..n)
        .map(|u| {
            jt.neighbors(u)
                .iter()
                .filter(|&&(v, _)| rooted.parent[v].is_some_and(|(p, _)| p == u))
                .map(|&(v, _)| v)
                .collect()
        })
        .collect();
    for &u in rooted.order.iter().rev() {
        if let Some((_, e)) = rooted.parent[u] {
            let mut acc = local[u].clone();
            for &c in &children[u] {
                acc = multiply(&acc, up[c].as_ref().unwrap())?;
            }
            let m = project(&acc, &separators[e]);
            peak = peak.max(m.vars().len());
            up[u] = Some(m);
        }
    }
    for &u in &rooted.order {
        let kids = &children[u];
        for &c in kids {
            let mut acc = local[u].clone();
            if let Some(d) = &down[u] {
                acc = multiply(&acc, d)?;
            }
            for &o in kids.iter().filter(|&&o| o != c) {
                acc = multiply(&acc, up[o].as_ref().unwrap())?;
            }
            let e = rooted.parent[c].unwrap().1;
            let m = project(&acc, &separators[e]);
            peak = peak.max(m.vars().len());
            down[c] = Some(m);
        }
    }
    let node_totals = (0..n)
        .map(|u| {
            let mut acc = local[u].clone();
            if let Some(d) = &down[u] {
                acc = multiply(&acc, d)?;
            }
            for &c in &children[u] {
                acc = multiply(&acc, up[c].as_ref().unwrap())?;
            }
            Ok(acc.total())
        })
        .collect::<Result<Vec<f64>>>()?;
    let sep_width = separators.iter().map(Vec::len).max().unwrap_or(0);
    assert!(peak <= sep_width, "a message outgrew its separator");
    Ok(Propagation {
        probability: node_totals[0],
        node_totals,
        max_message_scope: peak,
    })
}

/// `Pr(target | evidence)` by propagation over `seps`, treating the target
/// as extra evidence in a second pass.
pub fn jointree_propagate(
    jt: &Jointree,
    seps: &SeparatorAssignment,
    factors: &[Factor],
    evidence: &[(usize, usize)],
    target: &[(usize, usize)],
) -> Result<InferenceResult> {
    let pe = propagate(jt, &seps.separators, factors, evidence)?.probability;
    let mut both = evidence.to_vec();
    both.extend_from_slice(target);
    let joint = propagate(jt, &seps.separators, factors, &both)?.probability;
    InferenceResult::from_probabilities(joint, pe, Mode::Conditional, Method::Jointree)
}

/// All family tables of a model.
pub fn model_factors(scm: &Scm) -> Vec<Factor> {
    (0..scm.node_count()).map(|i| family_factor(scm, i)).collect()
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    pub chain_bound: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            chain_bound: DEFAULT_CHAIN_BOUND,
        }
    }
}

/// The mutilated N-world network of a query, with observations and target
/// mapped onto its variables.
pub struct PreparedQuery {
    pub network: Scm,
    pub observe: Vec<(usize, usize)>,
    pub target: Vec<(usize, usize)>,
}

pub fn prepare(scm: &Scm, rq: &ResolvedQuery) -> Result<PreparedQuery> {
    let (net, map) = n_world_network(scm, &rq.shared, rq.worlds)?;
    let id = |i: usize, k: usize| map.copies[i].ids[k].clone();
    let mut ev = Evidence::new();
    for (k, list) in rq.intervene.iter().enumerate() {
        for &(i, s) in list {
            ev.insert(id(i, k), s);
        }
    }
    let network = mutilate(&net, &ev)?;
    let lift = |lists: &[Vec<(usize, usize)>]| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, l) in lists.iter().enumerate() {
            for &(i, s) in l {
                out.push((network.dag().index_of(&id(i, k)).expect("copies exist"), s));
            }
        }
        out
    };
    Ok(PreparedQuery {
        observe: lift(&rq.observe),
        target: lift(&rq.target),
        network,
    })
}

/// Functional mask of the base model: internal variables flagged
/// functional.
pub fn functional_mask(scm: &Scm) -> Vec<bool> {
    (0..scm.node_count())
        .map(|i| scm.variable(i).functional && !scm.dag().is_root(i))
        .collect()
}

pub fn counterfactual(scm: &Scm, q: &CounterfactualQuery, engine: Engine) -> Result<InferenceResult> {
    counterfactual_with(scm, q, engine, &EngineOptions::default())
}

/// Answers `q` with the chosen engine. Elimination lifts a base minfill
/// order; the jointree engines lift the base minfill jointree and its
/// (thinned) separators.
pub fn counterfactual_with(
    scm: &Scm,
    q: &CounterfactualQuery,
    engine: Engine,
    opts: &EngineOptions,
) -> Result<InferenceResult> {
    if engine == Engine::Oracle {
        return brute_force_counterfactual(scm, q);
    }
    let rq = q.resolve(scm)?;
    let prep = prepare(scm, &rq)?;
    let net = &prep.network;
    let mut both = prep.observe.clone();
    both.extend_from_slice(&prep.target);
    let base = scm.dag();
    let base_order = minfill_indices(&moral_graph(base));

    let (joint, evidence, method) = match engine {
        Engine::Ve => {
            let order = crate::elimination::n_world_order(
                &EliminationOrder(base_order.iter().map(|&i| base.name(i).to_string()).collect()),
                base,
                &rq.shared,
                rq.worlds,
            )?
            .resolve(net.node_count(), |s| net.dag().index_of(s))?;
            let width = eliminate_indices(&moral_graph(net.dag()), &order).width;
            let (joint, p1) = ve_probability(net, &both, &order)?;
            let (evidence, p2) = ve_probability(net, &prep.observe, &order)?;
            assert!(p1.max(p2) <= width + 1, "elimination exceeded its width");
            let method = if rq.worlds == 2 { Method::VeTwin } else { Method::VeNworld };
            (joint, evidence, method)
        }
        Engine::Jointree | Engine::JointreeThinned => {
            let base_jt = jointree_from_indices(base, &base_order);
            let (lifted, seps, method) = if engine == Engine::Jointree {
                let lifted = make_n_world_jointree(&base_jt, &rq.shared, rq.worlds)?;
                let seps = twin_separators_direct(&classical_separators(&base_jt), &lifted)?;
                (lifted, seps, Method::Jointree)
            } else {
                let thinned = replicate_and_thin(&base_jt, &functional_mask(scm), opts.chain_bound);
                let lifted = make_n_world_jointree(&thinned.jointree, &rq.shared, rq.worlds)?;
                let t = thinned_twin_separators(&thinned, &lifted)?;
                (lifted, t.thinned, Method::JointreeThinned)
            };
            let factors = model_factors(net);
            let joint = propagate(&lifted, &seps.separators, &factors, &both)?.probability;
            let evidence = propagate(&lifted, &seps.separators, &factors, &prep.observe)?.probability;
            (joint, evidence, method)
        }
        Engine::Oracle => unreachable!(),
    };
    InferenceResult::from_probabilities(joint, evidence, rq.mode, method)
}

#[cfg(test)]
mod tests;
