use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Checks the variable id grammar: `[A-Za-z_][A-Za-z0-9_']*`, optionally
/// followed by a world suffix `^<digits>`.
pub fn is_valid_id(id: &str) -> bool {
    let (stem, world) = match id.split_once('^') {
        Some((stem, world)) => (stem, Some(world)),
        None => (id, None),
    };
    let mut chars = stem.chars();
    let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
    let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'');
    let world_ok = match world {
        Some(w) => !w.is_empty() && w.chars().all(|c| c.is_ascii_digit()),
        None => true,
    };
    head_ok && tail_ok && world_ok
}

/// A directed acyclic graph over named variables.
///
/// Nodes are addressed by dense indices in insertion order; names are kept
/// alongside for I/O and for deterministic tie-breaking.
#[derive(Clone, Debug, Default)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl PartialEq for Dag {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.parents == other.parents
    }
}

impl Eq for Dag {}

/// The family of a variable: the variable together with its parents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Family {
    pub child: String,
    pub members: BTreeSet<String>,
}

impl Dag {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a node whose parents already exist. Graphs built this way are
    /// acyclic by construction.
    pub fn add_node(&mut self, name: impl Into<String>, parents: &[&str]) -> Result<usize> {
        let name = name.into();
        if !is_valid_id(&name) {
            return Err(Error::InvalidId(name));
        }
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateVariable(name));
        }
        let mut ps = Vec::with_capacity(parents.len());
        for p in parents {
            let pi = self.require(p)?;
            if ps.contains(&pi) {
                return Err(Error::Field {
                    var: name,
                    field: "parents",
                    message: format!("duplicate parent `{p}`"),
                });
            }
            ps.push(pi);
        }
        Ok(self.push_node(name, ps))
    }

    pub(crate) fn push_node(&mut self, name: String, parents: Vec<usize>) -> usize {
        let i = self.names.len();
        self.index.insert(name.clone(), i);
        self.names.push(name);
        self.parents.push(parents);
        i
    }

    /// Builds a graph from names and index-based parent lists, rejecting
    /// duplicates, self-loops, dangling indices and cycles.
    pub fn from_parts(names: Vec<String>, parents: Vec<Vec<usize>>) -> Result<Self> {
        let dag = Self::from_parts_unchecked(names, parents)?;
        for (i, ps) in dag.parents.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &p in ps {
                if p >= dag.names.len() {
                    return Err(Error::Field {
                        var: dag.names[i].clone(),
                        field: "parents",
                        message: format!("parent index {p} out of range"),
                    });
                }
                if p == i {
                    return Err(Error::Cycle(dag.names[i].clone()));
                }
                if !seen.insert(p) {
                    return Err(Error::Field {
                        var: dag.names[i].clone(),
                        field: "parents",
                        message: format!("duplicate parent `{}`", dag.names[p]),
                    });
                }
            }
        }
        dag.topological_order()?;
        Ok(dag)
    }

    /// Same as [`Dag::from_parts`] but only checks name uniqueness and id
    /// syntax. Used to represent invalid inputs for [`crate::model::validate`].
    pub fn from_parts_unchecked(names: Vec<String>, parents: Vec<Vec<usize>>) -> Result<Self> {
        assert_eq!(names.len(), parents.len(), "names and parents must align");
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if !is_valid_id(n) {
                return Err(Error::InvalidId(n.clone()));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::DuplicateVariable(n.clone()));
            }
        }
        Ok(Self {
            names,
            parents,
            index,
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn all_parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.node_count()];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                if p < ch.len() {
                    ch[p].push(c);
                }
            }
        }
        ch
    }

    pub fn is_root(&self, i: usize) -> bool {
        self.parents[i].is_empty()
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.is_root(i)).collect()
    }

    pub fn internals(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| !self.is_root(i)).collect()
    }

    /// Directed edges as `(parent, child)` pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    /// Kahn's algorithm; ties resolved by node index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.node_count();
        let children = self.children();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(Error::Cycle(self.names[stuck].clone()));
        }
        Ok(order)
    }

    /// Indices of the family of `i`, child last.
    pub fn family_indices(&self, i: usize) -> Vec<usize> {
        let mut f = self.parents[i].clone();
        f.push(i);
        f
    }

    pub fn family(&self, i: usize) -> Family {
        Family {
            child: self.names[i].clone(),
            members: self
                .family_indices(i)
                .into_iter()
                .map(|j| self.names[j].clone())
                .collect(),
        }
    }

    /// Whether the underlying undirected graph is connected.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let children = self.children();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in self.parents[v].iter().chain(&children[v]) {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }
}

/// Returns the family of `v` in `dag`.
pub fn family_of(dag: &Dag, v: &str) -> Result<Family> {
    Ok(dag.family(dag.require(v)?))
}
