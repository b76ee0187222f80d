//! Exact treewidth for small graphs.
//!
//! Branch and bound over sets of eliminated nodes. The graph left after
//! eliminating a set `S` does not depend on the order inside `S`, so the
//! cluster formed by eliminating `v` next is `v` plus every node outside
//! `S` reachable from `v` through `S`.

use std::collections::HashMap;

use crate::elimination::{eliminate_indices, minfill_indices};
use crate::error::{Error, Result};
use crate::moral::MoralGraph;

pub const DEFAULT_NODE_LIMIT: usize = 12;

struct Search {
    n: usize,
    adj: Vec<u64>,
    full: u64,
    best: usize,
    seen: HashMap<u64, usize>,
}

impl Search {
    /// Nodes outside `eliminated ∪ {v}` reachable from `v` through
    /// `eliminated`.
    fn frontier(&self, eliminated: u64, v: usize) -> u64 {
        let mut visited = 1u64 << v;
        let mut stack = vec![v];
        let mut out = 0u64;
        while let Some(u) = stack.pop() {
            let mut nb = self.adj[u] & !visited;
            while nb != 0 {
                let w = nb.trailing_zeros() as usize;
                nb &= nb - 1;
                visited |= 1 << w;
                if eliminated >> w & 1 == 1 {
                    stack.push(w);
                } else {
                    out |= 1 << w;
                }
            }
        }
        out
    }

    fn run(&mut self, eliminated: u64, so_far: usize) {
        if eliminated == self.full {
            self.best = self.best.min(so_far);
            return;
        }
        if let Some(&w) = self.seen.get(&eliminated) {
            if w <= so_far {
                return;
            }
        }
        self.seen.insert(eliminated, so_far);

        let mut moves: Vec<(usize, usize)> = (0..self.n)
            .filter(|&v| eliminated >> v & 1 == 0)
            .map(|v| (self.frontier(eliminated, v).count_ones() as usize, v))
            .collect();
        moves.sort_unstable();
        // the remaining graph has treewidth at least its minimum degree
        if so_far.max(moves[0].0) >= self.best {
            return;
        }
        for (deg, v) in moves {
            let w = so_far.max(deg);
            if w >= self.best {
                break;
            }
            self.run(eliminated | 1 << v, w);
        }
    }
}

/// Minimum width over all elimination orders of `g`.
pub fn exact_treewidth(g: &MoralGraph, node_limit: usize) -> Result<usize> {
    let n = g.node_count();
    if n > node_limit || n > 63 {
        return Err(Error::TooLarge {
            nodes: n,
            limit: node_limit.min(63),
        });
    }
    if n == 0 {
        return Ok(0);
    }
    let adj = (0..n)
        .map(|u| g.neighbors(u).fold(0u64, |m, v| m | 1 << v))
        .collect();
    let upper = eliminate_indices(g, &minfill_indices(g)).width;
    let mut s = Search {
        n,
        adj,
        full: (1u64 << n) - 1,
        best: upper,
        seen: HashMap::new(),
    };
    s.run(0, 0);
    Ok(s.best)
}
