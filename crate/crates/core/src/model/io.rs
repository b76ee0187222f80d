//! JSON network files.
//!
//! ```json
//! {"variables": [
//!   {"id": "U", "states": ["0", "1"], "parents": [], "dist": [0.5, 0.5]},
//!   {"id": "A", "states": ["0", "1"], "parents": ["U"], "cpt": [1, 0]}
//! ]}
//! ```
//!
//! `cpt` lists one child state per parent instantiation (last parent
//! fastest). A row may also be written as a probability vector; it is
//! accepted only when it is a point mass.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dag, Mechanism, Rule, Scm, Variable, VariableKind, Violation};
use crate::error::{Error, Result};
use crate::worlds::WorldMap;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    variables: Vec<VariableDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    world_map: Option<WorldMap>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    id: String,
    states: Vec<String>,
    #[serde(default)]
    parents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpt: Option<Vec<CptRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    functional: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CptRow {
    State(usize),
    Row(Vec<f64>),
}

/// A network file: the model plus optional world metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkFile {
    pub scm: Scm,
    pub world_map: Option<WorldMap>,
}

fn field(var: &str, field: &'static str, message: impl Into<String>) -> Error {
    Error::Field {
        var: var.to_string(),
        field,
        message: message.into(),
    }
}

pub fn parse_network(text: &str) -> Result<NetworkFile> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let names: Vec<String> = doc.variables.iter().map(|v| v.id.clone()).collect();
    let provisional = Dag::from_parts_unchecked(names.clone(), vec![Vec::new(); names.len()])?;
    let mut parents = Vec::with_capacity(names.len());
    for v in &doc.variables {
        let ps = v
            .parents
            .iter()
            .map(|p| {
                provisional
                    .index_of(p)
                    .ok_or_else(|| field(&v.id, "parents", format!("unknown parent `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        parents.push(ps);
    }
    let dag = Dag::from_parts(names, parents)?;

    let mut variables = Vec::with_capacity(doc.variables.len());
    let mut mechanisms = Vec::with_capacity(doc.variables.len());
    let mut violations = Vec::new();
    for (i, v) in doc.variables.iter().enumerate() {
        let is_root = dag.is_root(i);
        if v.states.is_empty() {
            return Err(field(&v.id, "states", "at least one state is required"));
        }
        let mechanism = match (&v.dist, &v.cpt) {
            (Some(_), Some(_)) => {
                return Err(field(&v.id, "dist", "both `dist` and `cpt` given"));
            }
            (None, None) => {
                return Err(field(&v.id, "dist", "one of `dist` or `cpt` is required"));
            }
            (Some(d), None) => Mechanism::Distribution(d.clone()),
            (None, Some(rows)) => {
                let mut table = Vec::with_capacity(rows.len());
                for row in rows {
                    match row {
                        CptRow::State(s) => table.push(*s),
                        CptRow::Row(p) => match point_mass(p) {
                            Some(s) => table.push(s),
                            None => {
                                violations.push(Violation {
                                    var: v.id.clone(),
                                    rule: Rule::NonDeterministic,
                                });
                                table.push(0);
                            }
                        },
                    }
                }
                Mechanism::Function(table)
            }
        };
        variables.push(Variable {
            id: v.id.clone(),
            states: v.states.clone(),
            kind: if is_root {
                VariableKind::ExogenousRoot
            } else {
                VariableKind::EndogenousInternal
            },
            functional: v.functional.unwrap_or(!is_root),
        });
        mechanisms.push(mechanism);
    }
    violations.dedup();
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let scm = Scm::new(dag, variables, mechanisms)?;
    Ok(NetworkFile {
        scm,
        world_map: doc.world_map,
    })
}

fn point_mass(p: &[f64]) -> Option<usize> {
    let ones: Vec<usize> = (0..p.len()).filter(|&k| p[k] == 1.0).collect();
    let zeros = p.iter().filter(|&&x| x == 0.0).count();
    (ones.len() == 1 && zeros + 1 == p.len()).then(|| ones[0])
}

pub fn network_to_string(scm: &Scm, world_map: Option<&WorldMap>) -> String {
    let dag = scm.dag();
    let variables = (0..scm.node_count())
        .map(|i| {
            let var = scm.variable(i);
            let is_root = dag.is_root(i);
            let (dist, cpt) = match scm.mechanism(i) {
                Mechanism::Distribution(d) => (Some(d.clone()), None),
                Mechanism::Function(t) => (None, Some(t.iter().map(|&s| CptRow::State(s)).collect())),
            };
            VariableDoc {
                id: var.id.clone(),
                states: var.states.clone(),
                parents: dag.parents(i).iter().map(|&p| dag.name(p).to_string()).collect(),
                dist,
                cpt,
                functional: (var.functional == is_root).then_some(var.functional),
            }
        })
        .collect();
    let doc = NetworkDoc {
        variables,
        world_map: world_map.cloned(),
    };
    serde_json::to_string_pretty(&doc).expect("network serialization cannot fail")
}

pub fn load_network_file(path: impl AsRef<Path>) -> Result<NetworkFile> {
    parse_network(&fs::read_to_string(path)?)
}

/// Loads and validates a model.
pub fn load_network(path: impl AsRef<Path>) -> Result<Scm> {
    Ok(load_network_file(path)?.scm)
}

pub fn save_network(path: impl AsRef<Path>, scm: &Scm, world_map: Option<&WorldMap>) -> Result<()> {
    let mut text = network_to_string(scm, world_map);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::half_adder;

    #[test]
    fn single_root() {
        let f = parse_network(
            r#"{"variables":[{"id":"U","states":["a","b"],"parents":[],"dist":[0.5,0.5]}]}"#,
        )
        .unwrap();
        assert_eq!(f.scm.node_count(), 1);
        assert_eq!(f.scm.dag().edge_count(), 0);
    }

    #[test]
    fn half_adder_round_trip() {
        let scm = half_adder();
        let text = network_to_string(&scm, None);
        let back = parse_network(&text).unwrap();
        assert_eq!(back.scm, scm);
        assert_eq!(back.scm.dag().edge_count(), 8);
    }

    #[test]
    fn non_deterministic_row_names_variable() {
        let text = r#"{"variables":[
            {"id":"U","states":["0","1"],"dist":[0.5,0.5]},
            {"id":"A","states":["0","1"],"parents":["U"],"cpt":[[0.5,0.5],1]}
        ]}"#;
        match parse_network(text).unwrap_err() {
            Error::Invalid(v) => {
                assert_eq!(v[0].var, "A");
                assert_eq!(v[0].rule, Rule::NonDeterministic);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn point_mass_rows_are_accepted() {
        let text = r#"{"variables":[
            {"id":"U","states":["0","1"],"dist":[0.5,0.5]},
            {"id":"A","states":["0","1"],"parents":["U"],"cpt":[[0.0,1.0],0]}
        ]}"#;
        let f = parse_network(text).unwrap();
        assert_eq!(f.scm.mechanism(1), &Mechanism::Function(vec![1, 0]));
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_network("{\n  \"variables\": [ }").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn cycle_and_bad_parent() {
        let text = r#"{"variables":[
            {"id":"A","states":["0","1"],"parents":["B"],"cpt":[0,1]},
            {"id":"B","states":["0","1"],"parents":["A"],"cpt":[0,1]}
        ]}"#;
        assert!(matches!(parse_network(text).unwrap_err(), Error::Cycle(_)));
        let text = r#"{"variables":[{"id":"A","states":["0"],"parents":["Z"],"cpt":[0]}]}"#;
        assert!(matches!(
            parse_network(text).unwrap_err(),
            Error::Field { field: "parents", .. }
        ));
    }

    #[test]
    fn unnormalized_root_rejected_at_load() {
        let text = r#"{"variables":[{"id":"U","states":["0","1"],"dist":[0.6,0.6]}]}"#;
        match parse_network(text).unwrap_err() {
            Error::Invalid(v) => assert_eq!(v[0].var, "U"),
            e => panic!("unexpected {e}"),
        }
    }
}
