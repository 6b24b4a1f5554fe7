use std::collections::BTreeSet;

use super::BipartiteProblem;
use crate::error::Result;
use crate::maxflow::FlowGraph;
use crate::network::Network;

/// An indecomposable part of a bipartite problem (local indices, sorted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
}

/// Splits the problem into blocks that can be solved one at a time.
///
/// With any feasible flow at hand, the residual graph has `x → y` for every
/// arc and `y → x` wherever flow is positive. Its strongly connected
/// components are the blocks: an arc joining two different blocks carries no
/// flow in any feasible solution. Blocks come out with sinks of the
/// condensation first, ties broken by their lowest source index, so every arc
/// between blocks runs from a later block into an earlier one.
pub fn block_decompose(bp: &BipartiteProblem) -> Result<Vec<Block>> {
    let total = bp.check_margins()?;
    let (a, b) = (bp.source_count(), bp.target_count());
    let eps = 1e-12 * total.max(1.0);
    let (s, t) = (a + b, a + b + 1);
    let mut g = FlowGraph::new(a + b + 2, eps);
    for x in 0..a {
        g.add_edge(s, x, bp.n()[x]);
    }
    for y in 0..b {
        g.add_edge(a + y, t, bp.m()[y]);
    }
    let edges: Vec<usize> = bp
        .arcs()
        .iter()
        .map(|arc| g.add_edge(arc.x, a + arc.y, f64::INFINITY))
        .collect();
    let shipped = g.max_flow(s, t);
    if shipped < total - crate::EPS_MASS * total.max(1.0) {
        return Err(bp.hall_error());
    }

    let mut arcs = Vec::new();
    for (arc, &e) in bp.arcs().iter().zip(&edges) {
        arcs.push((arc.x, a + arc.y));
        if g.flow(e) > eps {
            arcs.push((a + arc.y, arc.x));
        }
    }
    let names = (0..a + b).map(|i| i.to_string()).collect();
    let residual = Network::new(names, arcs)?;
    let (comp, members) = residual.strongly_connected_components();

    // Kahn's algorithm on the reversed condensation.
    let k = members.len();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    for &(u, v) in residual.arcs() {
        if comp[u] != comp[v] {
            succ[comp[u]].insert(comp[v]);
        }
    }
    let mut remaining: Vec<usize> = succ.iter().map(BTreeSet::len).collect();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (c, out) in succ.iter().enumerate() {
        for &d in out {
            pred[d].push(c);
        }
    }
    let key = |c: usize| members[c][0];
    let mut ready: BTreeSet<(usize, usize)> = (0..k)
        .filter(|&c| remaining[c] == 0)
        .map(|c| (key(c), c))
        .collect();
    let mut blocks = Vec::with_capacity(k);
    while let Some((_, c)) = ready.pop_first() {
        let sources: Vec<usize> = members[c].iter().copied().filter(|&v| v < a).collect();
        let targets: Vec<usize> = members[c]
            .iter()
            .filter(|&&v| v >= a)
            .map(|&v| v - a)
            .collect();
        blocks.push(Block { sources, targets });
        for &p in &pred[c] {
            remaining[p] -= 1;
            if remaining[p] == 0 {
                ready.insert((key(p), p));
            }
        }
    }
    Ok(blocks)
}
