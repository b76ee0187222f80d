//! Variables, DAGs and fully specified structural causal models.

mod dag;
pub mod io;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use dag::{family_of, is_valid_id, Dag, Family};

use crate::error::{Error, Result};

/// Tolerance on the sum of a root distribution.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariableKind {
    ExogenousRoot,
    EndogenousInternal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub id: String,
    pub states: Vec<String>,
    pub kind: VariableKind,
    pub functional: bool,
}

impl Variable {
    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// How a variable gets its value.
#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism {
    /// Prior over the states of an exogenous root.
    Distribution(Vec<f64>),
    /// Child state for each parent instantiation, enumerated
    /// lexicographically over the parents (last parent fastest).
    Function(Vec<usize>),
}

/// A fully specified structural causal model.
#[derive(Clone, Debug, PartialEq)]
pub struct Scm {
    dag: Dag,
    variables: Vec<Variable>,
    mechanisms: Vec<Mechanism>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    Cycle,
    DuplicateParent,
    ZeroCardinality,
    KindMismatch,
    NotFunctional,
    MechanismMismatch,
    TableLength { expected: usize, found: usize },
    NegativeProbability,
    Normalization { sum: f64 },
    StateOutOfRange { row: usize, state: usize },
    NonDeterministic,
}

/// One broken model invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub var: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rule {
            Rule::Cycle => write!(f, "cycle through `{}`", self.var),
            Rule::DuplicateParent => write!(f, "`{}` lists a parent twice", self.var),
            Rule::ZeroCardinality => write!(f, "`{}` has no states", self.var),
            Rule::KindMismatch => write!(f, "`{}` has a kind inconsistent with its parents", self.var),
            Rule::NotFunctional => write!(f, "internal `{}` is not functional", self.var),
            Rule::MechanismMismatch => write!(
                f,
                "`{}` needs a distribution iff it is a root, a function otherwise",
                self.var
            ),
            Rule::TableLength { expected, found } => write!(
                f,
                "`{}` table has length {found}, expected {expected}",
                self.var
            ),
            Rule::NegativeProbability => write!(f, "`{}` has a negative probability", self.var),
            Rule::Normalization { sum } => {
                write!(f, "`{}` distribution sums to {sum}", self.var)
            }
            Rule::StateOutOfRange { row, state } => write!(
                f,
                "`{}` function row {row} maps to out-of-range state {state}",
                self.var
            ),
            Rule::NonDeterministic => write!(f, "`{}` has a non-deterministic table", self.var),
        }
    }
}

/// Assignments of states to variables, keyed by variable id.
pub type Evidence = BTreeMap<String, usize>;

/// Resolves evidence to `(index, state)` pairs and checks state ranges.
pub fn resolve_evidence(scm: &Scm, evidence: &Evidence) -> Result<Vec<(usize, usize)>> {
    evidence
        .iter()
        .map(|(name, &state)| {
            let i = scm.dag().require(name)?;
            let card = scm.cardinality(i);
            if state >= card {
                return Err(Error::StateOutOfRange {
                    var: name.clone(),
                    state,
                    cardinality: card,
                });
            }
            Ok((i, state))
        })
        .collect()
}

fn binary_states() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

/// Incrementally builds an [`Scm`]; parents must be declared first.
#[derive(Default)]
pub struct ScmBuilder {
    dag: Dag,
    variables: Vec<Variable>,
    mechanisms: Vec<Mechanism>,
}

impl ScmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn root(mut self, id: &str, states: Vec<String>, dist: Vec<f64>) -> Result<Self> {
        self.dag.add_node(id, &[])?;
        self.variables.push(Variable {
            id: id.to_string(),
            states,
            kind: VariableKind::ExogenousRoot,
            functional: false,
        });
        self.mechanisms.push(Mechanism::Distribution(dist));
        Ok(self)
    }

    pub fn binary_root(self, id: &str, p_one: f64) -> Result<Self> {
        self.root(id, binary_states(), vec![1.0 - p_one, p_one])
    }

    /// Adds an internal variable whose state is `f(parent states)`.
    pub fn function(
        mut self,
        id: &str,
        states: Vec<String>,
        parents: &[&str],
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        let pis: Vec<usize> = parents
            .iter()
            .map(|p| self.dag.require(p))
            .collect::<Result<_>>()?;
        let cards: Vec<usize> = pis.iter().map(|&p| self.variables[p].cardinality()).collect();
        let table = instantiations(&cards).map(|row| f(&row)).collect();
        self.dag.add_node(id, parents)?;
        self.variables.push(Variable {
            id: id.to_string(),
            states,
            kind: VariableKind::EndogenousInternal,
            functional: true,
        });
        self.mechanisms.push(Mechanism::Function(table));
        Ok(self)
    }

    pub fn binary_function(
        self,
        id: &str,
        parents: &[&str],
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        self.function(id, binary_states(), parents, f)
    }

    pub fn build(self) -> Result<Scm> {
        Scm::new(self.dag, self.variables, self.mechanisms)
    }
}

/// Iterates all instantiations of variables with the given cardinalities in
/// lexicographic order, last position fastest.
pub fn instantiations(cards: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = cards.iter().product();
    let mut cur = vec![0; cards.len()];
    let mut first = true;
    (0..total).map(move |_| {
        if first {
            first = false;
        } else {
            for k in (0..cards.len()).rev() {
                cur[k] += 1;
                if cur[k] < cards[k] {
                    break;
                }
                cur[k] = 0;
            }
        }
        cur.clone()
    })
}

impl Scm {
    /// Builds a model and rejects it if any invariant fails.
    pub fn new(dag: Dag, variables: Vec<Variable>, mechanisms: Vec<Mechanism>) -> Result<Self> {
        let scm = Self::from_parts_unchecked(dag, variables, mechanisms);
        let violations = validate(&scm);
        if violations.is_empty() {
            Ok(scm)
        } else {
            Err(Error::Invalid(violations))
        }
    }

    /// Assembles a model without validation.
    pub fn from_parts_unchecked(
        dag: Dag,
        variables: Vec<Variable>,
        mechanisms: Vec<Mechanism>,
    ) -> Self {
        assert_eq!(dag.node_count(), variables.len());
        assert_eq!(dag.node_count(), mechanisms.len());
        Self {
            dag,
            variables,
            mechanisms,
        }
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn mechanism(&self, i: usize) -> &Mechanism {
        &self.mechanisms[i]
    }

    pub fn node_count(&self) -> usize {
        self.dag.node_count()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.variables[i].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    /// Ids of variables flagged functional.
    pub fn functional_set(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&i| self.variables[i].functional)
            .collect()
    }

    /// Row index of a parent instantiation given the full state vector.
    pub fn parent_row(&self, i: usize, states: &[usize]) -> usize {
        self.dag
            .parents(i)
            .iter()
            .fold(0, |acc, &p| acc * self.cardinality(p) + states[p])
    }

    /// Evaluates the structural equation of internal variable `i`.
    pub fn evaluate(&self, i: usize, states: &[usize]) -> usize {
        match &self.mechanisms[i] {
            Mechanism::Function(t) => t[self.parent_row(i, states)],
            Mechanism::Distribution(_) => panic!("`{}` is a root", self.variables[i].id),
        }
    }

    pub(crate) fn into_parts(self) -> (Dag, Vec<Variable>, Vec<Mechanism>) {
        (self.dag, self.variables, self.mechanisms)
    }
}

/// Lists every broken invariant of `scm`. Empty iff the model is valid.
pub fn validate(scm: &Scm) -> Vec<Violation> {
    let dag = scm.dag();
    let mut out = Vec::new();
    let push = |out: &mut Vec<Violation>, i: usize, rule: Rule| {
        out.push(Violation {
            var: dag.name(i).to_string(),
            rule,
        })
    };

    let mut structurally_sound = true;
    for i in 0..dag.node_count() {
        let ps = dag.parents(i);
        if ps.contains(&i) {
            push(&mut out, i, Rule::Cycle);
            structurally_sound = false;
        }
        let mut sorted = ps.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != ps.len() {
            push(&mut out, i, Rule::DuplicateParent);
        }
        if ps.iter().any(|&p| p >= dag.node_count()) {
            structurally_sound = false;
        }
    }
    if structurally_sound {
        if let Err(Error::Cycle(name)) = dag.topological_order() {
            out.push(Violation {
                var: name,
                rule: Rule::Cycle,
            });
        }
    }

    for i in 0..dag.node_count() {
        let var = scm.variable(i);
        if var.cardinality() == 0 {
            push(&mut out, i, Rule::ZeroCardinality);
            continue;
        }
        let is_root = dag.is_root(i);
        if is_root != (var.kind == VariableKind::ExogenousRoot) {
            push(&mut out, i, Rule::KindMismatch);
        }
        if !is_root && !var.functional {
            push(&mut out, i, Rule::NotFunctional);
        }
        match scm.mechanism(i) {
            Mechanism::Distribution(p) => {
                if !is_root {
                    push(&mut out, i, Rule::MechanismMismatch);
                }
                if p.len() != var.cardinality() {
                    push(
                        &mut out,
                        i,
                        Rule::TableLength {
                            expected: var.cardinality(),
                            found: p.len(),
                        },
                    );
                }
                if p.iter().any(|&x| !(x >= 0.0)) {
                    push(&mut out, i, Rule::NegativeProbability);
                }
                let sum: f64 = p.iter().sum();
                if !((sum - 1.0).abs() <= NORMALIZATION_TOLERANCE) {
                    push(&mut out, i, Rule::Normalization { sum });
                }
            }
            Mechanism::Function(t) => {
                if is_root {
                    push(&mut out, i, Rule::MechanismMismatch);
                }
                if !structurally_sound {
                    continue;
                }
                let rows: usize = dag.parents(i).iter().map(|&p| scm.cardinality(p)).product();
                if t.len() != rows {
                    push(
                        &mut out,
                        i,
                        Rule::TableLength {
                            expected: rows,
                            found: t.len(),
                        },
                    );
                }
                if let Some((row, &state)) =
                    t.iter().enumerate().find(|(_, &s)| s >= var.cardinality())
                {
                    push(&mut out, i, Rule::StateOutOfRange { row, state });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::half_adder;

    #[test]
    fn half_adder_is_valid() {
        let scm = half_adder();
        assert_eq!(validate(&scm), vec![]);
        assert_eq!(scm.node_count(), 7);
        let s = family_of(scm.dag(), "S").unwrap();
        assert_eq!(
            s.members.into_iter().collect::<Vec<_>>(),
            vec!["A", "B", "S", "X"]
        );
        let c = family_of(scm.dag(), "C").unwrap();
        assert_eq!(
            c.members.into_iter().collect::<Vec<_>>(),
            vec!["A", "B", "C", "Y"]
        );
    }

    #[test]
    fn self_loop_is_reported() {
        let dag = Dag::from_parts_unchecked(vec!["A".into()], vec![vec![0]]).unwrap();
        let scm = Scm::from_parts_unchecked(
            dag,
            vec![Variable {
                id: "A".into(),
                states: binary_states(),
                kind: VariableKind::EndogenousInternal,
                functional: true,
            }],
            vec![Mechanism::Function(vec![0, 1])],
        );
        let v = validate(&scm);
        assert_eq!(
            v,
            vec![Violation {
                var: "A".into(),
                rule: Rule::Cycle
            }]
        );
    }

    #[test]
    fn unnormalized_root_is_reported() {
        let dag = Dag::from_parts(vec!["U".into()], vec![vec![]]).unwrap();
        let scm = Scm::from_parts_unchecked(
            dag,
            vec![Variable {
                id: "U".into(),
                states: binary_states(),
                kind: VariableKind::ExogenousRoot,
                functional: false,
            }],
            vec![Mechanism::Distribution(vec![0.6, 0.6])],
        );
        let v = validate(&scm);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0].rule, Rule::Normalization { .. }));
        assert!(Scm::new(scm.dag.clone(), scm.variables.clone(), scm.mechanisms.clone()).is_err());
    }

    #[test]
    fn families_cover_each_node_once() {
        let scm = half_adder();
        let mut counts = vec![0; scm.node_count()];
        for i in 0..scm.node_count() {
            let f = scm.dag().family_indices(i);
            counts[*f.last().unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn instantiation_order_is_last_fastest() {
        let rows: Vec<_> = instantiations(&[2, 3]).collect();
        assert_eq!(rows[0], vec![0, 0]);
        assert_eq!(rows[1], vec![0, 1]);
        assert_eq!(rows[3], vec![1, 0]);
        assert_eq!(rows.len(), 6);
        assert_eq!(instantiations(&[]).count(), 1);
    }
}
