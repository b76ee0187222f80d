//! Width bound audits over random instances and exhaustive searches for
//! instances where the bounds are met.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::elimination::{all_permutations, eliminate_indices, lift_order, minfill_order, EliminationOrder};
use crate::error::Result;
use crate::jointree::{
    classical_separators, jointree_from_order, make_twin_jointree, twin_separators_direct,
};
use crate::model::Dag;
use crate::moral::{moral_graph, MoralGraph};
use crate::parallel;
use crate::randgen::{GenConfig, GenMethod, Rng};
use crate::thinning::{internal_mask, replicate_and_thin, thinned_twin_separators, DEFAULT_CHAIN_BOUND};
use crate::treewidth::{exact_treewidth, DEFAULT_NODE_LIMIT};
use crate::worlds::{generalized_n_world, n_world_dag, twin_dag, CrossEdge, Lifting};

/// Names of the audited properties.
pub const CHECKS: [&str; 7] = [
    "order-twin",
    "alg1-width",
    "alg1-nodes",
    "separators-direct",
    "cluster-containment",
    "thinned-twin",
    "order-n-world",
];

/// World counts used by the N-world check.
pub const N_WORLDS: [usize; 3] = [2, 3, 5];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub instances: usize,
    pub seed: u64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub chain_bound: usize,
    pub workers: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            seed: 0,
            min_nodes: 4,
            max_nodes: 30,
            chain_bound: DEFAULT_CHAIN_BOUND,
            workers: 0,
        }
    }
}

impl AuditConfig {
    /// Instance `i` cycles through rNET, rNET2, rSCM and rSCM2.
    pub fn instance(&self, i: usize) -> GenConfig {
        let seed = self.seed.wrapping_add(i as u64);
        let mut rng = Rng::new(seed ^ 0xa0d1_7000);
        let span = self.max_nodes.saturating_sub(self.min_nodes) + 1;
        GenConfig {
            method: if i % 2 == 0 { GenMethod::Rnet } else { GenMethod::Rnet2 },
            n: self.min_nodes + rng.below(span),
            p: 1 + rng.below(5),
            d: 2 + rng.below(4),
            seed,
            scm: (i / 2) % 2 == 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub check: String,
    pub instance: GenConfig,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub instances: usize,
    /// Evaluations per check.
    pub checked: BTreeMap<String, usize>,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_of(&self, check: &str) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }
}

struct Tally {
    checked: BTreeMap<&'static str, usize>,
    failures: Vec<(&'static str, String)>,
}

impl Tally {
    fn new() -> Self {
        Self {
            checked: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, name: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        *self.checked.entry(name).or_default() += 1;
        if !ok {
            self.failures.push((name, detail()));
        }
    }
}

fn order_indices(order: &EliminationOrder, dag: &Dag) -> Vec<usize> {
    order
        .resolve(dag.node_count(), |s| dag.index_of(s))
        .expect("orders are built from the same graph")
}

fn width_of(g: &MoralGraph, order: &[usize]) -> usize {
    eliminate_indices(g, order).width
}

/// `C^t(X)` and `C^t(X')` lie inside `C(X)` together with its twin image.
pub fn cluster_containment(dag: &Dag, order: &[usize]) -> Result<bool> {
    let (twin, lifting, _) = twin_dag(dag)?;
    let base_names = EliminationOrder(order.iter().map(|&i| dag.name(i).to_string()).collect());
    let lifted = order_indices(&lift_order(&base_names, dag, &lifting, &twin)?, &twin);
    let base_seq = eliminate_indices(&moral_graph(dag), order);
    let twin_seq = eliminate_indices(&moral_graph(&twin), &lifted);
    let base_clusters = base_seq.by_node();
    let twin_clusters = twin_seq.by_node();
    for x in 0..dag.node_count() {
        let c = base_clusters[x];
        let allowed: BTreeSet<usize> = lifting
            .in_world(c, 0)
            .into_iter()
            .chain(lifting.in_world(c, 1))
            .collect();
        for &copy in &lifting.copies[x] {
            if !twin_clusters[copy].iter().all(|v| allowed.contains(v)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn random_subset(rng: &mut Rng, items: &[usize]) -> Vec<usize> {
    items.iter().copied().filter(|_| rng.below(2) == 1).collect()
}

fn n_world_width(base: &Dag, order: &EliminationOrder, net: &Dag, lifting: &Lifting) -> Result<usize> {
    let lifted = lift_order(order, base, lifting, net)?;
    Ok(width_of(&moral_graph(net), &order_indices(&lifted, net)))
}

fn audit_instance(g: &GenConfig, chain_bound: usize) -> Result<Tally> {
    let dag = g.generate();
    let mut t = Tally::new();
    let base_graph = moral_graph(&dag);
    let order = minfill_order(&base_graph);
    let idx = order_indices(&order, &dag);
    let w = width_of(&base_graph, &idx);

    let (twin, lifting, _) = twin_dag(&dag)?;
    let tw = n_world_width(&dag, &order, &twin, &lifting)?;
    t.check("order-twin", tw <= 2 * w + 1, || format!("base {w}, twin {tw}"));

    let jt = jointree_from_order(&dag, &order)?;
    let seps = classical_separators(&jt);
    let tjt = make_twin_jointree(&jt)?;
    let direct = twin_separators_direct(&seps, &tjt)?;
    t.check("alg1-width", direct.width <= 2 * seps.width + 1, || {
        format!("base {}, twin {}", seps.width, direct.width)
    });
    t.check("alg1-nodes", tjt.node_count() <= 2 * jt.node_count().max(2), || {
        format!("base {} nodes, twin {}", jt.node_count(), tjt.node_count())
    });
    let classical = classical_separators(&tjt);
    t.check("separators-direct", direct == classical, || {
        let e = (0..tjt.edges().len())
            .find(|&e| direct.separators[e] != classical.separators[e])
            .unwrap_or(0);
        format!("edge {e}: {:?} vs {:?}", direct.separators.get(e), classical.separators.get(e))
    });
    t.check("cluster-containment", cluster_containment(&dag, &idx)?, String::new);

    let thinned = replicate_and_thin(&jt, &internal_mask(&dag), chain_bound);
    let lifted = make_twin_jointree(&thinned.jointree)?;
    let tt = thinned_twin_separators(&thinned, &lifted)?;
    t.check("thinned-twin", tt.thinned.width <= 2 * thinned.thinned.width + 1, || {
        format!("base {}, twin {}", thinned.thinned.width, tt.thinned.width)
    });

    let mut rng = Rng::new(g.seed ^ 0x4e57);
    let roots = dag.roots();
    let all: Vec<usize> = (0..dag.node_count()).collect();
    for worlds in N_WORLDS {
        let bound = worlds * (w + 1) - 1;
        let mut nets = Vec::new();
        for shared in [roots.clone(), random_subset(&mut rng, &roots)] {
            let names: BTreeSet<String> = shared.iter().map(|&r| dag.name(r).to_string()).collect();
            let (net, lifting, _) = n_world_dag(&dag, &names, worlds)?;
            nets.push((net, lifting));
        }
        let duplicated = random_subset(&mut rng, &all);
        let dup_names: BTreeSet<String> = duplicated.iter().map(|&i| dag.name(i).to_string()).collect();
        let mut cross = BTreeSet::new();
        for &x in &duplicated {
            for j in 2..=worlds {
                for i in 1..j {
                    if rng.below(3) == 0 {
                        cross.insert(CrossEdge {
                            var: dag.name(x).to_string(),
                            from_world: i,
                            to_world: j,
                        });
                    }
                }
            }
        }
        nets.push(generalized_n_world(&dag, &dup_names, worlds, &cross)?);
        for (net, lifting) in &nets {
            let nw = n_world_width(&dag, &order, net, lifting)?;
            t.check("order-n-world", nw <= bound, || format!("N={worlds}, base {w}, lifted {nw}"));
        }
    }
    Ok(t)
}

/// Evaluates every check on `cfg.instances` random instances.
pub fn run_bound_audit(cfg: &AuditConfig) -> Result<AuditReport> {
    let ids: Vec<usize> = (0..cfg.instances).collect();
    let tallies = parallel::map(&ids, cfg.workers, |&i| audit_instance(&cfg.instance(i), cfg.chain_bound));
    let mut report = AuditReport {
        instances: cfg.instances,
        ..AuditReport::default()
    };
    for name in CHECKS {
        report.checked.insert(name.to_string(), 0);
    }
    for (i, t) in tallies.into_iter().enumerate() {
        let t = t?;
        for (name, n) in t.checked {
            *report.checked.entry(name.to_string()).or_default() += n;
        }
        for (name, detail) in t.failures {
            report.violations.push(AuditViolation {
                check: name.to_string(),
                instance: cfg.instance(i),
                detail,
            });
        }
    }
    Ok(report)
}

/// A DAG given by its edge list over nodes `X1..Xn`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallDag {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
}

impl SmallDag {
    fn of(dag: &Dag) -> Self {
        Self {
            nodes: dag.names().to_vec(),
            edges: dag
                .edges()
                .map(|(a, b)| (dag.name(a).to_string(), dag.name(b).to_string()))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderWitness {
    pub dag: SmallDag,
    pub order: Vec<String>,
    pub twin_order: Vec<String>,
    pub width: usize,
    pub twin_width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreewidthWitness {
    pub dag: SmallDag,
    pub treewidth: usize,
    pub twin_treewidth: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub max_nodes: usize,
    pub dags_searched: usize,
    pub order_witness: Option<OrderWitness>,
    pub treewidth_witness: Option<TreewidthWitness>,
}

/// Connected DAGs on `n` nodes whose edges respect the labelling order,
/// one per edge mask, in mask order. Every DAG has such a labelling.
pub fn connected_dags(n: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let names: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
    let mut out = Vec::new();
    for mask in 0u64..1 << pairs.len() {
        let mut parents = vec![Vec::new(); n];
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if mask >> b & 1 == 1 {
                parents[j].push(i);
            }
        }
        let dag = Dag::from_parts(names.clone(), parents).expect("edges follow the labelling");
        if dag.is_connected() {
            out.push(dag);
        }
    }
    out
}

fn order_witness(dag: &Dag, perms: &[Vec<usize>], base_w: usize, twin_w: usize) -> Result<Option<OrderWitness>> {
    let g = moral_graph(dag);
    let (twin, lifting, _) = twin_dag(dag)?;
    let tg = moral_graph(&twin);
    for p in perms {
        if width_of(&g, p) != base_w {
            continue;
        }
        let order = EliminationOrder(p.iter().map(|&i| dag.name(i).to_string()).collect());
        let lifted = lift_order(&order, dag, &lifting, &twin)?;
        let w = width_of(&tg, &order_indices(&lifted, &twin));
        if w == twin_w {
            return Ok(Some(OrderWitness {
                dag: SmallDag::of(dag),
                order: order.0,
                twin_order: lifted.0,
                width: base_w,
                twin_width: w,
            }));
        }
    }
    Ok(None)
}

fn treewidth_witness(dag: &Dag, base_tw: usize, twin_tw: usize) -> Result<Option<TreewidthWitness>> {
    let tw = exact_treewidth(&moral_graph(dag), DEFAULT_NODE_LIMIT)?;
    if tw != base_tw {
        return Ok(None);
    }
    let (twin, _, _) = twin_dag(dag)?;
    let t = exact_treewidth(&moral_graph(&twin), DEFAULT_NODE_LIMIT)?;
    Ok((t == twin_tw).then(|| TreewidthWitness {
        dag: SmallDag::of(dag),
        treewidth: tw,
        twin_treewidth: t,
    }))
}

/// Searches connected DAGs with up to `max_nodes` nodes, smallest first,
/// for (a) an order of width 2 whose twin order has width 5 and (b) a
/// network of treewidth 2 whose twin network has treewidth 4.
pub fn tightness_search(max_nodes: usize, workers: usize) -> Result<TightnessReport> {
    let mut report = TightnessReport {
        max_nodes,
        ..TightnessReport::default()
    };
    for n in 1..=max_nodes {
        if report.order_witness.is_some() && report.treewidth_witness.is_some() {
            break;
        }
        let dags = connected_dags(n);
        report.dags_searched += dags.len();
        let perms = all_permutations(n);
        let found = parallel::map(&dags, workers, |dag| -> Result<_> {
            let a = match report.order_witness {
                None => order_witness(dag, &perms, 2, 5)?,
                Some(_) => None,
            };
            let b = match report.treewidth_witness {
                None => treewidth_witness(dag, 2, 4)?,
                Some(_) => None,
            };
            Ok((a, b))
        });
        for f in found {
            let (a, b) = f?;
            if report.order_witness.is_none() {
                report.order_witness = a;
            }
            if report.treewidth_witness.is_none() {
                report.treewidth_witness = b;
            }
        }
    }
    Ok(report)
}
