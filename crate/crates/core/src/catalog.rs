//! Small hand-written models used by tests, docs and the CLI.

use crate::model::{Scm, ScmBuilder};

/// Health states of a gate: working, output stuck low, output stuck high.
pub const GATE_STATES: [&str; 3] = ["ok", "stuck0", "stuck1"];

/// Prior over [`GATE_STATES`].
pub const GATE_PRIOR: [f64; 3] = [0.9, 0.05, 0.05];

fn gate(ok_output: usize, health: usize) -> usize {
    match health {
        0 => ok_output,
        1 => 0,
        _ => 1,
    }
}

/// The two-bit half adder: `U` samples the input pair, `X` and `Y` are the
/// health of the XOR and AND gates, `S` is the sum and `C` the carry.
///
/// Structure: `U -> A`, `U -> B`, `{A, B, X} -> S`, `{A, B, Y} -> C`.
pub fn half_adder() -> Scm {
    let states = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    ScmBuilder::new()
        .root("U", states(&["00", "01", "10", "11"]), vec![0.25; 4])
        .and_then(|b| b.binary_function("A", &["U"], |s| s[0] >> 1))
        .and_then(|b| b.binary_function("B", &["U"], |s| s[0] & 1))
        .and_then(|b| b.root("X", states(&GATE_STATES), GATE_PRIOR.to_vec()))
        .and_then(|b| b.root("Y", states(&GATE_STATES), GATE_PRIOR.to_vec()))
        .and_then(|b| b.binary_function("S", &["A", "B", "X"], |s| gate(s[0] ^ s[1], s[2])))
        .and_then(|b| b.binary_function("C", &["A", "B", "Y"], |s| gate(s[0] & s[1], s[2])))
        .and_then(ScmBuilder::build)
        .expect("half adder is a valid model")
}

/// `U -> A -> S` with a biased root and identity mechanisms.
pub fn chain() -> Scm {
    ScmBuilder::new()
        .binary_root("U", 0.7)
        .and_then(|b| b.binary_function("A", &["U"], |s| s[0]))
        .and_then(|b| b.binary_function("S", &["A"], |s| 1 - s[0]))
        .and_then(ScmBuilder::build)
        .expect("chain is a valid model")
}
