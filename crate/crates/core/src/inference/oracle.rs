//! Exhaustive enumeration, used as ground truth for the other engines.

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::model::{instantiations, Mechanism, Scm};
use crate::worlds::{mutilate, n_world_network};

use super::query::{CounterfactualQuery, ResolvedQuery};
use super::{InferenceResult, Method};

/// Largest state space the oracles will enumerate.
pub const STATE_SPACE_GUARD: u128 = 1 << 24;

fn guard(cards: impl IntoIterator<Item = usize>) -> Result<()> {
    let size = cards
        .into_iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c as u128))
        .unwrap_or(u128::MAX);
    if size > STATE_SPACE_GUARD {
        return Err(Error::StateSpaceTooLarge(size));
    }
    Ok(())
}

fn root_dist(scm: &Scm, r: usize) -> &[f64] {
    match scm.mechanism(r) {
        Mechanism::Distribution(d) => d,
        Mechanism::Function(_) => unreachable!("roots carry distributions"),
    }
}

/// The full joint distribution as one factor over every variable.
pub fn brute_force_joint(scm: &Scm) -> Result<Factor> {
    let cards = scm.cardinalities();
    guard(cards.iter().copied())?;
    let dag = scm.dag();
    let roots = dag.roots();
    let topo = dag.topological_order()?;
    let root_cards: Vec<usize> = roots.iter().map(|&r| cards[r]).collect();
    let mut table = vec![0.0; cards.iter().product()];
    let mut states = vec![0; cards.len()];
    for u in instantiations(&root_cards) {
        let mut p = 1.0;
        for (k, &r) in roots.iter().enumerate() {
            states[r] = u[k];
            p *= root_dist(scm, r)[u[k]];
        }
        for &v in &topo {
            if !dag.is_root(v) {
                states[v] = scm.evaluate(v, &states);
            }
        }
        let ix = states.iter().zip(&cards).fold(0, |acc, (&s, &c)| acc * c + s);
        table[ix] += p;
    }
    Factor::new((0..cards.len()).collect(), cards, table)
}

/// Abduction, intervention and prediction by enumerating exogenous states:
/// shared roots once, every other root once per world. Each world is then
/// simulated under its own interventions.
pub fn brute_force_counterfactual(scm: &Scm, q: &CounterfactualQuery) -> Result<InferenceResult> {
    let rq = q.resolve(scm)?;
    let (joint, evidence) = exogenous_enumeration(scm, &rq)?;
    InferenceResult::from_probabilities(joint, evidence, rq.mode, Method::Oracle)
}

pub(crate) fn exogenous_enumeration(scm: &Scm, rq: &ResolvedQuery) -> Result<(f64, f64)> {
    let dag = scm.dag();
    let n = dag.node_count();
    let topo = dag.topological_order()?;
    // slot per shared root, then per (world, unshared root)
    let mut slots: Vec<(usize, Option<usize>)> = Vec::new();
    for r in dag.roots() {
        if rq.shared.contains(dag.name(r)) {
            slots.push((r, None));
        } else {
            slots.extend((0..rq.worlds).map(|k| (r, Some(k))));
        }
    }
    let slot_cards: Vec<usize> = slots.iter().map(|&(r, _)| scm.cardinality(r)).collect();
    guard(slot_cards.iter().copied())?;

    let mut forced = vec![vec![None; n]; rq.worlds];
    for (k, list) in rq.intervene.iter().enumerate() {
        for &(i, s) in list {
            forced[k][i] = Some(s);
        }
    }
    let (mut joint, mut evidence) = (0.0, 0.0);
    let mut exo = vec![vec![0; n]; rq.worlds];
    let mut states = vec![0; n];
    for u in instantiations(&slot_cards) {
        let mut p = 1.0;
        for (k, &(r, world)) in slots.iter().enumerate() {
            p *= root_dist(scm, r)[u[k]];
            match world {
                None => (0..rq.worlds).for_each(|w| exo[w][r] = u[k]),
                Some(w) => exo[w][r] = u[k],
            }
        }
        if p == 0.0 {
            continue;
        }
        let (mut observed, mut hit) = (true, true);
        for w in 0..rq.worlds {
            for &v in &topo {
                states[v] = match forced[w][v] {
                    Some(s) => s,
                    None if dag.is_root(v) => exo[w][v],
                    None => scm.evaluate(v, &states),
                };
            }
            observed &= rq.observe[w].iter().all(|&(i, s)| states[i] == s);
            hit &= rq.target[w].iter().all(|&(i, s)| states[i] == s);
        }
        if observed {
            evidence += p;
            if hit {
                joint += p;
            }
        }
    }
    Ok((joint, evidence))
}

/// The same quantities read off the joint of the mutilated N-world network.
pub fn network_enumeration(scm: &Scm, q: &CounterfactualQuery) -> Result<(f64, f64)> {
    let rq = q.resolve(scm)?;
    let (net, map) = n_world_network(scm, &rq.shared, rq.worlds)?;
    let id = |i: usize, k: usize| map.copies[i].ids[k].clone();
    let mut ev = crate::model::Evidence::new();
    for (k, list) in rq.intervene.iter().enumerate() {
        for &(i, s) in list {
            ev.insert(id(i, k), s);
        }
    }
    let net = mutilate(&net, &ev)?;
    let lift = |lists: &[Vec<(usize, usize)>]| -> Vec<(usize, usize)> {
        lists
            .iter()
            .enumerate()
            .flat_map(|(k, l)| l.iter().map(move |&(i, s)| (k, i, s)))
            .map(|(k, i, s)| (net.dag().index_of(&id(i, k)).unwrap(), s))
            .collect()
    };
    let observe = lift(&rq.observe);
    let target = lift(&rq.target);
    let joint_table = brute_force_joint(&net)?;
    let cards = net.cardinalities();
    let (mut joint, mut evidence) = (0.0, 0.0);
    for (x, &p) in instantiations(&cards).zip(joint_table.table()) {
        if p > 0.0 && observe.iter().all(|&(i, s)| x[i] == s) {
            evidence += p;
            if target.iter().all(|&(i, s)| x[i] == s) {
                joint += p;
            }
        }
    }
    Ok((joint, evidence))
}
