//! Discrete factors over network variables.
//!
//! A factor's scope is a strictly increasing list of variable indices; the
//! table enumerates scope instantiations lexicographically, last variable
//! fastest.

use crate::error::{Error, Result};
use crate::model::{Mechanism, Scm};

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    /// Builds a factor, sorting the scope and permuting the table to match.
    pub fn new(vars: Vec<usize>, cards: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        assert_eq!(vars.len(), cards.len());
        let size: usize = cards.iter().product();
        if table.len() != size {
            return Err(Error::InvalidQuery(format!(
                "factor table has {} entries, scope needs {size}",
                table.len()
            )));
        }
        let mut perm: Vec<usize> = (0..vars.len()).collect();
        perm.sort_by_key(|&k| vars[k]);
        if perm.windows(2).any(|w| vars[w[0]] == vars[w[1]]) {
            return Err(Error::InvalidQuery("factor scope repeats a variable".into()));
        }
        let given = Self { vars, cards, table };
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(given);
        }
        let vars: Vec<usize> = perm.iter().map(|&k| given.vars[k]).collect();
        let cards: Vec<usize> = perm.iter().map(|&k| given.cards[k]).collect();
        let mut own = vec![0; given.vars.len()];
        let mut s = 1;
        for k in (0..own.len()).rev() {
            own[k] = s;
            s *= given.cards[k];
        }
        let strides: Vec<usize> = perm.iter().map(|&k| own[k]).collect();
        let table = Walk::new(&cards, &[&strides]).map(|ix| given.table[ix[0]]).collect();
        Ok(Self { vars, cards, table })
    }

    /// The scalar factor 1.
    pub fn unit() -> Self {
        Self::scalar(1.0)
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            vars: Vec::new(),
            cards: Vec::new(),
            table: vec![value],
        }
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vars.binary_search(&v).is_ok()
    }

    /// Value at an instantiation of the scope, in scope order.
    pub fn value(&self, states: &[usize]) -> f64 {
        let ix = states
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&s, &c)| acc * c + s);
        self.table[ix]
    }

    /// True if every entry is 0 or 1.
    pub fn is_indicator(&self) -> bool {
        self.table.iter().all(|&x| x == 0.0 || x == 1.0)
    }

    /// Stride of each of `vars` inside this factor's table; 0 for variables
    /// outside the scope.
    fn strides_for(&self, vars: &[usize]) -> Vec<usize> {
        let mut own = vec![0; self.vars.len()];
        let mut s = 1;
        for k in (0..self.vars.len()).rev() {
            own[k] = s;
            s *= self.cards[k];
        }
        vars.iter()
            .map(|v| self.vars.binary_search(v).map_or(0, |k| own[k]))
            .collect()
    }

    /// Cardinality of `v` if it is in scope.
    pub fn cardinality(&self, v: usize) -> Option<usize> {
        self.vars.binary_search(&v).ok().map(|k| self.cards[k])
    }
}

/// Odometer over a scope that tracks flat indices into several tables.
struct Walk<'a> {
    cards: &'a [usize],
    strides: Vec<&'a [usize]>,
    cur: Vec<usize>,
    ix: Vec<usize>,
    left: usize,
}

impl<'a> Walk<'a> {
    fn new(cards: &'a [usize], strides: &[&'a [usize]]) -> Self {
        Self {
            cards,
            strides: strides.to_vec(),
            cur: vec![0; cards.len()],
            ix: vec![0; strides.len()],
            left: cards.iter().product(),
        }
    }
}

impl Iterator for Walk<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.left == 0 {
            return None;
        }
        self.left -= 1;
        let out = self.ix.clone();
        if self.left > 0 {
            for k in (0..self.cards.len()).rev() {
                self.cur[k] += 1;
                for (t, s) in self.strides.iter().enumerate() {
                    self.ix[t] += s[k];
                }
                if self.cur[k] < self.cards[k] {
                    break;
                }
                for (t, s) in self.strides.iter().enumerate() {
                    self.ix[t] -= s[k] * self.cards[k];
                }
                self.cur[k] = 0;
            }
        }
        Some(out)
    }
}

/// Pointwise product over the union of both scopes.
pub fn multiply(a: &Factor, b: &Factor) -> Result<Factor> {
    let mut vars = Vec::with_capacity(a.vars.len() + b.vars.len());
    let mut cards = Vec::with_capacity(vars.capacity());
    let (mut i, mut j) = (0, 0);
    while i < a.vars.len() || j < b.vars.len() {
        let take_a = j == b.vars.len() || (i < a.vars.len() && a.vars[i] <= b.vars[j]);
        if take_a {
            if j < b.vars.len() && a.vars[i] == b.vars[j] {
                if a.cards[i] != b.cards[j] {
                    return Err(Error::CardinalityMismatch(a.vars[i]));
                }
                j += 1;
            }
            vars.push(a.vars[i]);
            cards.push(a.cards[i]);
            i += 1;
        } else {
            vars.push(b.vars[j]);
            cards.push(b.cards[j]);
            j += 1;
        }
    }
    let sa = a.strides_for(&vars);
    let sb = b.strides_for(&vars);
    let table = Walk::new(&cards, &[&sa, &sb])
        .map(|ix| a.table[ix[0]] * b.table[ix[1]])
        .collect();
    Ok(Factor { vars, cards, table })
}

/// Product of many factors; the unit factor for an empty list.
pub fn multiply_all<'a>(factors: impl IntoIterator<Item = &'a Factor>) -> Result<Factor> {
    let mut acc = Factor::unit();
    for f in factors {
        acc = multiply(&acc, f)?;
    }
    Ok(acc)
}

/// Sums `keep`'s complement out of `f`. Variables of `keep` outside the
/// scope are ignored.
pub fn project(f: &Factor, keep: &[usize]) -> Factor {
    let (vars, cards): (Vec<usize>, Vec<usize>) = f
        .vars
        .iter()
        .zip(&f.cards)
        .filter(|(v, _)| keep.contains(v))
        .map(|(&v, &c)| (v, c))
        .unzip();
    if vars.len() == f.vars.len() {
        return f.clone();
    }
    let out_shape = Factor {
        vars: vars.clone(),
        cards: cards.clone(),
        table: Vec::new(),
    };
    let so = out_shape.strides_for(&f.vars);
    let mut table = vec![0.0; cards.iter().product()];
    let ones: Vec<usize> = {
        let mut s = vec![0; f.vars.len()];
        let mut acc = 1;
        for k in (0..f.vars.len()).rev() {
            s[k] = acc;
            acc *= f.cards[k];
        }
        s
    };
    for ix in Walk::new(&f.cards, &[&ones, &so]) {
        table[ix[1]] += f.table[ix[0]];
    }
    Factor { vars, cards, table }
}

/// Sums variable `v` out of `f`.
pub fn sum_out(f: &Factor, v: usize) -> Factor {
    let keep: Vec<usize> = f.vars.iter().copied().filter(|&u| u != v).collect();
    project(f, &keep)
}

/// Keeps the rows consistent with `evidence` and drops the evidence
/// variables from the scope.
pub fn reduce(f: &Factor, evidence: &[(usize, usize)]) -> Result<Factor> {
    let mut fixed = vec![None; f.vars.len()];
    for &(v, s) in evidence {
        if let Ok(k) = f.vars.binary_search(&v) {
            if s >= f.cards[k] {
                return Err(Error::CardinalityMismatch(v));
            }
            fixed[k] = Some(s);
        }
    }
    if fixed.iter().all(Option::is_none) {
        return Ok(f.clone());
    }
    let mut base = 0;
    let mut stride = 1;
    let mut free_strides = Vec::new();
    let mut vars = Vec::new();
    let mut cards = Vec::new();
    for k in (0..f.vars.len()).rev() {
        match fixed[k] {
            Some(s) => base += s * stride,
            None => {
                free_strides.push(stride);
                vars.push(f.vars[k]);
                cards.push(f.cards[k]);
            }
        }
        stride *= f.cards[k];
    }
    free_strides.reverse();
    vars.reverse();
    cards.reverse();
    let table = Walk::new(&cards, &[&free_strides])
        .map(|ix| f.table[base + ix[0]])
        .collect();
    Ok(Factor { vars, cards, table })
}

/// The conditional table of variable `i` as a factor over its family.
pub fn family_factor(scm: &Scm, i: usize) -> Factor {
    let mut vars: Vec<usize> = scm.dag().parents(i).to_vec();
    vars.push(i);
    let cards: Vec<usize> = vars.iter().map(|&v| scm.cardinality(v)).collect();
    let table = match scm.mechanism(i) {
        Mechanism::Distribution(d) => d.clone(),
        Mechanism::Function(t) => {
            let c = scm.cardinality(i);
            let mut out = vec![0.0; t.len() * c];
            for (row, &s) in t.iter().enumerate() {
                out[row * c + s] = 1.0;
            }
            out
        }
    };
    Factor::new(vars, cards, table).expect("family tables match their scope")
}

/// Checks that two factors agree on scope and within `tol` on every entry.
pub fn approx_eq(a: &Factor, b: &Factor, tol: f64) -> bool {
    a.vars == b.vars
        && a.cards == b.cards
        && a.table.iter().zip(&b.table).all(|(x, y)| (x - y).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::half_adder;
    use crate::model::instantiations;
    use proptest::prelude::*;

    fn f(vars: &[usize], cards: &[usize], table: &[f64]) -> Factor {
        Factor::new(vars.to_vec(), cards.to_vec(), table.to_vec()).unwrap()
    }

    #[test]
    fn unit_is_identity() {
        let a = f(&[0, 2], &[2, 3], &[1., 2., 3., 4., 5., 6.]);
        assert_eq!(multiply(&a, &Factor::unit()).unwrap(), a);
        assert_eq!(multiply(&Factor::unit(), &a).unwrap(), a);
    }

    #[test]
    fn normalized_marginal_sums_to_one() {
        let a = f(&[4], &[3], &[0.2, 0.3, 0.5]);
        let s = sum_out(&a, 4);
        assert!(s.vars().is_empty());
        assert!((s.table()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn new_sorts_scope() {
        // scope (1, 0): entries indexed by (x1, x0)
        let a = f(&[1, 0], &[2, 3], &[1., 2., 3., 4., 5., 6.]);
        assert_eq!(a.vars(), &[0, 1]);
        assert_eq!(a.value(&[0, 1]), 4.);
        assert_eq!(a.value(&[2, 0]), 3.);
    }

    #[test]
    fn multiply_matches_definition() {
        let a = f(&[0, 1], &[2, 2], &[1., 2., 3., 4.]);
        let b = f(&[1, 2], &[2, 3], &[1., 10., 100., 2., 20., 200.]);
        let c = multiply(&a, &b).unwrap();
        assert_eq!(c.vars(), &[0, 1, 2]);
        for x in instantiations(&[2, 2, 3]) {
            assert_eq!(c.value(&x), a.value(&x[..2]) * b.value(&x[1..]));
        }
    }

    #[test]
    fn cardinality_mismatch_is_an_error() {
        let a = f(&[0], &[2], &[1., 1.]);
        let b = f(&[0], &[3], &[1., 1., 1.]);
        assert!(matches!(multiply(&a, &b), Err(Error::CardinalityMismatch(0))));
    }

    #[test]
    fn family_factor_is_a_cpt() {
        let scm = half_adder();
        let s = scm.dag().require("S").unwrap();
        let f = family_factor(&scm, s);
        assert_eq!(f.vars().len(), 4);
        assert!(f.is_indicator());
        // summing the child out of a CPT leaves all ones
        let m = sum_out(&f, s);
        assert!(m.table().iter().all(|&x| x == 1.0));
    }

    fn table_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
        prop::collection::vec(1usize..=3, 3).prop_flat_map(|cards| {
            let n: usize = cards.iter().product();
            (Just(cards), prop::collection::vec(0.0f64..1.0, n))
        })
    }

    proptest! {
        #[test]
        fn reduce_then_sum_out_matches_enumeration(
            (cards, table) in table_strategy(),
            ev_var in 0usize..3,
            ev_state in 0usize..3,
            out_var in 0usize..3,
        ) {
            prop_assume!(ev_state < cards[ev_var] && out_var != ev_var);
            let fac = f(&[0, 1, 2], &cards, &table);
            let got = sum_out(&reduce(&fac, &[(ev_var, ev_state)]).unwrap(), out_var);
            let keep: Vec<usize> = (0..3).filter(|&v| v != ev_var && v != out_var).collect();
            prop_assert_eq!(got.vars(), &keep[..]);
            for s in 0..cards[keep[0]] {
                let mut expect = 0.0;
                for x in instantiations(&cards) {
                    if x[ev_var] == ev_state && x[keep[0]] == s {
                        expect += fac.value(&x);
                    }
                }
                prop_assert!((got.table()[s] - expect).abs() < 1e-12);
            }
        }

        #[test]
        fn multiply_commutes((cards, table) in table_strategy(), other in prop::collection::vec(0.0f64..1.0, 9)) {
            let a = f(&[0, 1, 2], &cards, &table);
            let n = cards[1] * 3;
            let b = f(&[1, 5], &[cards[1], 3], &other[..n]);
            let ab = multiply(&a, &b).unwrap();
            let ba = multiply(&b, &a).unwrap();
            prop_assert!(approx_eq(&ab, &ba, 0.0));
            let total: f64 = project(&ab, &[]).total();
            prop_assert!((total - ab.total()).abs() < 1e-12);
        }
    }
}
