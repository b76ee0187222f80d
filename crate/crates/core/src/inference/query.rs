use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mechanism, Scm};
use crate::randgen::Rng;
use crate::worlds::root_ids;

/// A state given by index or by name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateRef {
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldAssignment {
    /// 1-based world index.
    pub world: usize,
    pub var: String,
    pub state: StateRef,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `Pr(target | observations)`.
    #[default]
    Conditional,
    /// `Pr(target, observations)`.
    Joint,
}

/// Observations, interventions and a target event spread over `worlds`
/// worlds that share the roots in `shared_roots` (all roots if absent).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualQuery {
    pub worlds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_roots: Option<Vec<String>>,
    #[serde(default)]
    pub observe: Vec<WorldAssignment>,
    #[serde(default, rename = "do")]
    pub interventions: Vec<WorldAssignment>,
    pub target: Vec<WorldAssignment>,
    #[serde(default)]
    pub mode: Mode,
}

fn assign(world: usize, var: &str, state: usize) -> WorldAssignment {
    WorldAssignment {
        world,
        var: var.to_string(),
        state: StateRef::Index(state),
    }
}

impl CounterfactualQuery {
    pub fn new(worlds: usize) -> Self {
        Self {
            worlds,
            shared_roots: None,
            observe: Vec::new(),
            interventions: Vec::new(),
            target: Vec::new(),
            mode: Mode::Conditional,
        }
    }

    pub fn observe(mut self, world: usize, var: &str, state: usize) -> Self {
        self.observe.push(assign(world, var, state));
        self
    }

    pub fn intervene(mut self, world: usize, var: &str, state: usize) -> Self {
        self.interventions.push(assign(world, var, state));
        self
    }

    pub fn target(mut self, world: usize, var: &str, state: usize) -> Self {
        self.target.push(assign(world, var, state));
        self
    }

    pub fn shared(mut self, roots: &[&str]) -> Self {
        self.shared_roots = Some(roots.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn joint(mut self) -> Self {
        self.mode = Mode::Joint;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Checks the query against `scm` and maps it to variable indices.
    pub fn resolve(&self, scm: &Scm) -> Result<ResolvedQuery> {
        if self.worlds == 0 {
            return Err(Error::InvalidQuery("at least one world is required".into()));
        }
        let dag = scm.dag();
        let shared: BTreeSet<String> = match &self.shared_roots {
            Some(r) => r.iter().cloned().collect(),
            None => root_ids(dag),
        };
        for r in &shared {
            if !dag.is_root(dag.require(r)?) {
                return Err(Error::NotRoot(r.clone()));
            }
        }
        let n = self.worlds;
        let resolve_list = |list: &[WorldAssignment]| -> Result<Vec<Vec<(usize, usize)>>> {
            let mut out = vec![Vec::new(); n];
            for a in list {
                if a.world == 0 || a.world > n {
                    return Err(Error::WorldOutOfRange {
                        world: a.world,
                        worlds: n,
                    });
                }
                let i = dag.require(&a.var)?;
                let var = scm.variable(i);
                let s = match &a.state {
                    StateRef::Index(s) => *s,
                    StateRef::Name(name) => var.state_index(name).ok_or_else(|| {
                        Error::InvalidQuery(format!("`{}` has no state `{name}`", a.var))
                    })?,
                };
                if s >= var.cardinality() {
                    return Err(Error::StateOutOfRange {
                        var: a.var.clone(),
                        state: s,
                        cardinality: var.cardinality(),
                    });
                }
                out[a.world - 1].push((i, s));
            }
            Ok(out)
        };
        let observe = resolve_list(&self.observe)?;
        let intervene = resolve_list(&self.interventions)?;
        let target = resolve_list(&self.target)?;
        for (k, list) in intervene.iter().enumerate() {
            for (a, &(i, s)) in list.iter().enumerate() {
                if shared.contains(dag.name(i)) {
                    return Err(Error::InvalidQuery(format!(
                        "`{}` is shared by all worlds and cannot be intervened on in world {}",
                        dag.name(i),
                        k + 1
                    )));
                }
                if list[..a].iter().any(|&(j, t)| j == i && t != s) {
                    return Err(Error::InvalidQuery(format!(
                        "conflicting interventions on `{}` in world {}",
                        dag.name(i),
                        k + 1
                    )));
                }
            }
        }
        Ok(ResolvedQuery {
            worlds: n,
            shared,
            observe,
            intervene,
            target,
            mode: self.mode,
        })
    }
}

/// A query checked against a model; lists are per world, 0-based.
#[derive(Clone, Debug)]
pub struct ResolvedQuery {
    pub worlds: usize,
    pub shared: BTreeSet<String>,
    pub observe: Vec<Vec<(usize, usize)>>,
    pub intervene: Vec<Vec<(usize, usize)>>,
    pub target: Vec<Vec<(usize, usize)>>,
    pub mode: Mode,
}

/// Draws a query whose observations have positive probability.
///
/// Shared roots are a random subset of the roots unless `all_shared`.
/// Interventions hit unshared variables with probability 0.2 per world;
/// observations copy a simulated sample with probability 0.3 per variable
/// and world; the target fixes one or two random variables.
pub fn random_query(scm: &Scm, rng: &mut Rng, worlds: usize, all_shared: bool) -> CounterfactualQuery {
    let dag = scm.dag();
    let n = dag.node_count();
    let roots = dag.roots();
    let shared: Vec<usize> = roots
        .iter()
        .copied()
        .filter(|_| all_shared || rng.below(2) == 1)
        .collect();
    let mut q = CounterfactualQuery::new(worlds);
    q.shared_roots = Some(shared.iter().map(|&r| dag.name(r).to_string()).collect());

    let topo = dag.topological_order().expect("valid models are acyclic");
    let draw_root = |rng: &mut Rng, r: usize| match scm.mechanism(r) {
        Mechanism::Distribution(d) => {
            let u = rng.unit();
            let mut acc = 0.0;
            for (s, p) in d.iter().enumerate() {
                acc += p;
                if u < acc {
                    return s;
                }
            }
            d.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        }
        Mechanism::Function(_) => unreachable!(),
    };
    let mut shared_state = vec![0; n];
    for &r in &shared {
        shared_state[r] = draw_root(rng, r);
    }
    for w in 1..=worlds {
        let mut done = vec![None; n];
        for i in 0..n {
            if !shared.contains(&i) && rng.below(5) == 0 {
                let s = rng.below(scm.cardinality(i));
                q = q.intervene(w, dag.name(i), s);
                done[i] = Some(s);
            }
        }
        let mut states = vec![0; n];
        for &v in &topo {
            states[v] = match done[v] {
                Some(s) => s,
                None if shared.contains(&v) => shared_state[v],
                None if dag.is_root(v) => draw_root(rng, v),
                None => scm.evaluate(v, &states),
            };
        }
        for (v, &s) in states.iter().enumerate() {
            if rng.below(10) < 3 {
                q = q.observe(w, dag.name(v), s);
            }
        }
    }
    for _ in 0..1 + rng.below(2) {
        let v = rng.below(n);
        let w = 1 + rng.below(worlds);
        q = q.target(w, dag.name(v), rng.below(scm.cardinality(v)));
    }
    q
}
