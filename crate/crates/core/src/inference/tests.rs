use super::*;
use crate::catalog::{half_adder, GATE_STATES};
use crate::elimination::minfill_order;
use crate::jointree::jointree_from_order;
use crate::model::{instantiations, ScmBuilder};
use crate::randgen::{gen_rnet, parameterize, to_rscm, Rng};
use crate::thinning::{internal_mask, replicate_and_thin};

const TOL: f64 = 1e-9;

fn ev(pairs: &[(&str, usize)]) -> Evidence {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn random_scm(seed: u64, max_vars: usize) -> Scm {
    let mut rng = Rng::new(seed);
    let n = 1 + rng.below(max_vars);
    let p = rng.below(4);
    parameterize(&gen_rnet(n, p, seed), seed ^ 0x5eed, 2)
}

/// Random model whose internal variables each have their own root.
fn random_functional_scm(seed: u64, base_vars: usize) -> Scm {
    let mut rng = Rng::new(seed);
    let n = 1 + rng.below(base_vars);
    let dag = to_rscm(&gen_rnet(n, 1 + rng.below(3), seed));
    parameterize(&dag, seed ^ 0xf00d, 2)
}

fn random_assignment(rng: &mut Rng, n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        if rng.below(3) == 0 {
            out.push((i, rng.below(2)));
        }
    }
    out
}

fn minfill(scm: &Scm) -> EliminationOrder {
    minfill_order(&moral_graph(scm.dag()))
}

#[test]
fn single_root_marginal() {
    let scm = ScmBuilder::new().binary_root("U", 0.7).unwrap().build().unwrap();
    let r = ve_query(&scm, &Evidence::new(), &minfill(&scm), &ev(&[("U", 0)])).unwrap();
    assert!((r.value - 0.3).abs() < 1e-15);
    let joint = brute_force_joint(&scm).unwrap();
    assert_eq!(joint.table(), &[0.30000000000000004, 0.7]);
}

fn healthy_half_adder() -> Scm {
    let states = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    ScmBuilder::new()
        .root("U", states(&["00", "01", "10", "11"]), vec![0.25; 4])
        .and_then(|b| b.binary_function("A", &["U"], |s| s[0] >> 1))
        .and_then(|b| b.binary_function("B", &["U"], |s| s[0] & 1))
        .and_then(|b| b.root("X", states(&GATE_STATES), vec![1.0, 0.0, 0.0]))
        .and_then(|b| b.root("Y", states(&GATE_STATES), vec![1.0, 0.0, 0.0]))
        .and_then(|b| b.binary_function("S", &["A", "B", "X"], |s| if s[2] == 0 { s[0] ^ s[1] } else { s[2] - 1 }))
        .and_then(|b| b.binary_function("C", &["A", "B", "Y"], |s| if s[2] == 0 { s[0] & s[1] } else { s[2] - 1 }))
        .and_then(ScmBuilder::build)
        .unwrap()
}

#[test]
fn healthy_xor_is_forced() {
    let scm = healthy_half_adder();
    let r = ve_query(&scm, &ev(&[("A", 1), ("B", 0)]), &minfill(&scm), &ev(&[("S", 1)])).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12);
    let jt = jointree_from_order(scm.dag(), &minfill(&scm)).unwrap();
    let seps = classical_separators(&jt);
    let a = scm.dag().require("A").unwrap();
    let b = scm.dag().require("B").unwrap();
    let s = scm.dag().require("S").unwrap();
    let r2 = jointree_propagate(&jt, &seps, &model_factors(&scm), &[(a, 1), (b, 0)], &[(s, 1)]).unwrap();
    assert!((r2.value - 1.0).abs() < 1e-12);
}

#[test]
fn zero_probability_evidence_is_an_error() {
    let scm = healthy_half_adder();
    let r = ve_query(&scm, &ev(&[("A", 1), ("B", 0), ("S", 0)]), &minfill(&scm), &ev(&[("C", 0)]));
    assert!(matches!(r, Err(Error::ZeroProbabilityEvidence)));
}

/// Marginal of `assignment` from the joint table.
fn joint_marginal(scm: &Scm, assignment: &[(usize, usize)]) -> f64 {
    let joint = brute_force_joint(scm).unwrap();
    instantiations(&scm.cardinalities())
        .zip(joint.table())
        .filter(|(x, _)| assignment.iter().all(|&(i, s)| x[i] == s))
        .map(|(_, &p)| p)
        .sum()
}

#[test]
fn elimination_and_propagation_match_enumeration() {
    for seed in 0..60u64 {
        let scm = random_scm(seed, 10);
        let n = scm.node_count();
        let mut rng = Rng::new(seed + 1000);
        let assignment = random_assignment(&mut rng, n);
        let expect = joint_marginal(&scm, &assignment);
        let order = minfill_indices(&moral_graph(scm.dag()));
        let (got, peak) = ve_probability(&scm, &assignment, &order).unwrap();
        assert!((got - expect).abs() < TOL, "seed {seed}: {got} vs {expect}");
        let width = eliminate_indices(&moral_graph(scm.dag()), &order).width;
        assert!(peak <= width + 1);

        let jt = jointree_from_indices(scm.dag(), &order);
        let seps = classical_separators(&jt);
        let prop = propagate(&jt, &seps.separators, &model_factors(&scm), &assignment).unwrap();
        assert!((prop.probability - expect).abs() < TOL, "seed {seed}");
        assert!(prop.node_totals.iter().all(|t| (t - expect).abs() < TOL));
        assert!(prop.max_message_scope <= seps.separator_width());
    }
}

#[test]
fn single_family_jointree() {
    let scm = ScmBuilder::new().binary_root("U", 0.25).unwrap().build().unwrap();
    let jt = jointree_from_order(scm.dag(), &minfill(&scm)).unwrap();
    let seps = classical_separators(&jt);
    let r = jointree_propagate(&jt, &seps, &model_factors(&scm), &[], &[(0, 1)]).unwrap();
    assert!((r.value - 0.25).abs() < 1e-15);
}

#[test]
fn thinned_propagation_matches_classical() {
    for seed in 0..40u64 {
        let scm = random_functional_scm(seed, 7);
        let order = minfill_indices(&moral_graph(scm.dag()));
        let jt = jointree_from_indices(scm.dag(), &order);
        let t = replicate_and_thin(&jt, &internal_mask(scm.dag()), 10);
        let mut rng = Rng::new(seed);
        let assignment = random_assignment(&mut rng, scm.node_count());
        let expect = joint_marginal(&scm, &assignment);
        let prop = propagate(&t.jointree, &t.thinned.separators, &model_factors(&scm), &assignment).unwrap();
        assert!(
            prop.node_totals.iter().all(|x| (x - expect).abs() < TOL),
            "seed {seed}: {:?} vs {expect}",
            prop.node_totals
        );
    }
}

fn half_adder_query() -> CounterfactualQuery {
    // observed: A=1, B=0, C=0, S=0; then do(A=1, B=1), ask for C=1, S=0
    CounterfactualQuery::new(2)
        .observe(1, "A", 1)
        .observe(1, "B", 0)
        .observe(1, "C", 0)
        .observe(1, "S", 0)
        .intervene(2, "A", 1)
        .intervene(2, "B", 1)
        .target(2, "C", 1)
        .target(2, "S", 0)
}

#[test]
fn half_adder_counterfactual() {
    let scm = half_adder();
    let q = half_adder_query();
    // S=0 under inputs (1,0) forces the XOR gate stuck low; C=0 leaves the
    // AND gate healthy or stuck low with odds 0.9 : 0.05
    let expect = 0.9 / 0.95;
    let oracle = brute_force_counterfactual(&scm, &q).unwrap();
    assert!((oracle.value - expect).abs() < 1e-12, "{}", oracle.value);
    for engine in [Engine::Ve, Engine::Jointree, Engine::JointreeThinned] {
        let r = counterfactual(&scm, &q, engine).unwrap();
        assert!((r.value - expect).abs() < TOL, "{engine:?}: {}", r.value);
    }
    assert_eq!(counterfactual(&scm, &q, Engine::Ve).unwrap().method, Method::VeTwin);
}

#[test]
fn three_world_half_adder() {
    let scm = half_adder();
    let q = CounterfactualQuery::new(3)
        .shared(&["X", "Y"])
        .intervene(1, "A", 1)
        .intervene(1, "B", 0)
        .observe(1, "S", 1)
        .observe(1, "C", 0)
        .intervene(2, "A", 0)
        .intervene(2, "B", 0)
        .observe(2, "S", 1)
        .observe(2, "C", 0)
        .intervene(3, "A", 1)
        .intervene(3, "B", 1)
        .target(3, "S", 1)
        .target(3, "C", 1);
    // S=1 on inputs (0,0) means the XOR gate is stuck high
    let expect = 0.9 / 0.95;
    for engine in [Engine::Oracle, Engine::Ve, Engine::Jointree, Engine::JointreeThinned] {
        let r = counterfactual(&scm, &q, engine).unwrap();
        assert!((r.value - expect).abs() < TOL, "{engine:?}: {}", r.value);
    }
    assert_eq!(counterfactual(&scm, &q, Engine::Ve).unwrap().method, Method::VeNworld);
}

#[test]
fn one_world_is_associational() {
    let scm = half_adder();
    let q = CounterfactualQuery::new(1).observe(1, "S", 1).target(1, "X", 0);
    let cf = counterfactual(&scm, &q, Engine::Ve).unwrap();
    let plain = ve_query(&scm, &ev(&[("S", 1)]), &minfill(&scm), &ev(&[("X", 0)])).unwrap();
    assert!((cf.value - plain.value).abs() < 1e-12);
}

#[test]
fn intervening_on_shared_root_is_rejected() {
    let scm = half_adder();
    let q = CounterfactualQuery::new(2).intervene(2, "X", 0).target(2, "S", 1);
    assert!(matches!(q.resolve(&scm), Err(Error::InvalidQuery(_))));
    let q = CounterfactualQuery::new(2).observe(3, "A", 0).target(1, "S", 1);
    assert!(matches!(q.resolve(&scm), Err(Error::WorldOutOfRange { .. })));
}

#[test]
fn query_json_round_trip() {
    let text = r#"{"worlds": 2, "observe": [{"world": 1, "var": "X", "state": "ok"}],
        "do": [{"world": 2, "var": "A", "state": 1}],
        "target": [{"world": 2, "var": "S", "state": 0}], "mode": "joint"}"#;
    let q = CounterfactualQuery::from_json(text).unwrap();
    assert_eq!(q.mode, Mode::Joint);
    let rq = q.resolve(&half_adder()).unwrap();
    assert_eq!(rq.observe[0], vec![(3, 0)]);
    let back = CounterfactualQuery::from_json(&serde_json::to_string(&q).unwrap()).unwrap();
    assert_eq!(back, q);
}

#[test]
fn oracle_formulations_agree() {
    for seed in 0..50u64 {
        let scm = random_scm(seed, 8);
        let mut rng = Rng::new(seed ^ 77);
        let q = random_query(&scm, &mut rng, 2, seed % 2 == 0).joint();
        let a = brute_force_counterfactual(&scm, &q).unwrap();
        let (joint, evidence) = network_enumeration(&scm, &q).unwrap();
        assert!((a.joint_probability - joint).abs() < 1e-12, "seed {seed}");
        assert!((a.evidence_probability - evidence).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn deterministic_models_give_certain_answers() {
    let dag = gen_rnet(7, 3, 5);
    let mut scm = parameterize(&dag, 5, 2);
    let (dag, mut vars, mut mechs) = scm.clone().into_parts();
    for r in dag.roots() {
        mechs[r] = crate::model::Mechanism::Distribution(vec![0.0, 1.0]);
        vars[r].functional = false;
    }
    scm = Scm::new(dag, vars, mechs).unwrap();
    let mut rng = Rng::new(1);
    for _ in 0..20 {
        let q = random_query(&scm, &mut rng, 2, false);
        let r = brute_force_counterfactual(&scm, &q).unwrap();
        assert!(r.value == 0.0 || r.value == 1.0);
    }
}

#[test]
fn engines_agree_with_oracle() {
    for seed in 0..80u64 {
        let scm = random_scm(seed, 9);
        let mut rng = Rng::new(seed);
        let worlds = 1 + (seed as usize % 3);
        let q = random_query(&scm, &mut rng, worlds, seed % 4 == 0);
        let oracle = brute_force_counterfactual(&scm, &q).unwrap();
        for engine in [Engine::Ve, Engine::Jointree, Engine::JointreeThinned] {
            let r = counterfactual(&scm, &q, engine).unwrap();
            assert!(
                (r.value - oracle.value).abs() < TOL,
                "seed {seed} {engine:?}: {} vs {}",
                r.value,
                oracle.value
            );
            assert!((0.0..=1.0).contains(&r.value));
            assert!(r.joint_probability <= r.evidence_probability + TOL);
        }
    }
}

#[test]
fn counterfactual_consistency() {
    for seed in 0..20u64 {
        let scm = random_scm(seed, 8);
        let internals = scm.dag().internals();
        if internals.is_empty() {
            continue;
        }
        let v = scm.dag().name(internals[seed as usize % internals.len()]).to_string();
        let q = CounterfactualQuery::new(2)
            .intervene(2, &v, 1)
            .observe(2, &v, 1)
            .target(2, &v, 1);
        for engine in [Engine::Oracle, Engine::Ve, Engine::Jointree] {
            assert!((counterfactual(&scm, &q, engine).unwrap().value - 1.0).abs() < 1e-12);
        }
    }
}

fn swap_worlds(q: &CounterfactualQuery) -> CounterfactualQuery {
    let flip = |list: &[WorldAssignment]| {
        list.iter()
            .map(|a| WorldAssignment {
                world: 3 - a.world,
                ..a.clone()
            })
            .collect()
    };
    CounterfactualQuery {
        observe: flip(&q.observe),
        interventions: flip(&q.interventions),
        target: flip(&q.target),
        ..q.clone()
    }
}

#[test]
fn twin_symmetry() {
    for seed in 0..30u64 {
        let scm = random_scm(seed, 8);
        let mut rng = Rng::new(seed + 5);
        let q = random_query(&scm, &mut rng, 2, true);
        let a = counterfactual(&scm, &q, Engine::Jointree).unwrap();
        let b = counterfactual(&scm, &swap_worlds(&q), Engine::Jointree).unwrap();
        assert!((a.value - b.value).abs() < TOL, "seed {seed}");
    }
}

#[test]
fn thinned_engine_on_functional_models() {
    for seed in 0..40u64 {
        let scm = random_functional_scm(seed, 6);
        let mut rng = Rng::new(seed);
        let q = random_query(&scm, &mut rng, 2, true);
        let oracle = brute_force_counterfactual(&scm, &q).unwrap();
        let r = counterfactual(&scm, &q, Engine::JointreeThinned).unwrap();
        assert!((r.value - oracle.value).abs() < TOL, "seed {seed}");
    }
}
