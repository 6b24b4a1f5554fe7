//! Transferable utility: `G̃_xy(p) = p - c_xy`, a transportation problem.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{
    check_ground, residuals, BipartiteEquilibrium, BipartiteNode, BipartiteProblem, SolveStats,
};
use crate::error::{Error, Result};
use crate::EPS_MASS;

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Residual {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
}

impl Residual {
    fn add(&mut self, u: usize, v: usize, cap: f64, cost: f64) -> usize {
        let id = self.to.len();
        self.to.extend([v, u]);
        self.cap.extend([cap, 0.0]);
        self.cost.extend([cost, -cost]);
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }
}

/// Min-cost transportation by successive shortest paths, with prices read
/// off the optimal residual graph and normalized so the ground node is 0.
pub fn solve_bipartite_tu(
    bp: &BipartiteProblem,
    ground: BipartiteNode,
) -> Result<BipartiteEquilibrium> {
    check_ground(bp, ground)?;
    bp.check_margins()?;
    solve_tu(bp, ground, 0.0)
}

pub(crate) fn solve_tu(
    bp: &BipartiteProblem,
    ground: BipartiteNode,
    ground_value: f64,
) -> Result<BipartiteEquilibrium> {
    let (a, b) = (bp.source_count(), bp.target_count());
    let mut costs = Vec::with_capacity(bp.arcs().len());
    for (i, arc) in bp.arcs().iter().enumerate() {
        match arc.g.as_affine() {
            Some((1.0, c)) => costs.push(-c),
            _ => {
                return Err(Error::validation(
                    format!("arcs[{i}]"),
                    "transferable solver needs unit-slope affine arcs",
                ))
            }
        }
    }
    let (s, t) = (a + b, a + b + 1);
    let nodes = a + b + 2;
    let mut r = Residual {
        adj: vec![Vec::new(); nodes],
        to: Vec::new(),
        cap: Vec::new(),
        cost: Vec::new(),
    };
    for x in 0..a {
        r.add(s, x, bp.n()[x], 0.0);
    }
    for y in 0..b {
        r.add(a + y, t, bp.m()[y], 0.0);
    }
    let arc_edge: Vec<usize> = bp
        .arcs()
        .iter()
        .zip(&costs)
        .map(|(arc, &c)| r.add(arc.x, a + arc.y, f64::INFINITY, c))
        .collect();

    let total: f64 = bp.n().iter().sum();
    let scale = total.max(1.0);
    let cap_eps = 1e-12 * scale;

    // The graph is a DAG, so exact initial potentials come from one pass.
    let mut pot = vec![0.0; nodes];
    for y in 0..b {
        pot[a + y] = f64::INFINITY;
    }
    for (arc, &c) in bp.arcs().iter().zip(&costs) {
        pot[a + arc.y] = f64::min(pot[a + arc.y], c);
    }
    for y in 0..b {
        if pot[a + y] == f64::INFINITY {
            pot[a + y] = 0.0;
        }
    }
    pot[t] = (0..b)
        .map(|y| pot[a + y])
        .fold(f64::INFINITY, f64::min)
        .min(0.0);

    let mut shipped = 0.0;
    let mut iterations = 0;
    while shipped < total - EPS_MASS * scale {
        iterations += 1;
        let mut dist = vec![f64::INFINITY; nodes];
        let mut pred = vec![usize::MAX; nodes];
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        heap.push(Reverse((Key(0.0), s)));
        while let Some(Reverse((Key(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &r.adj[u] {
                if r.cap[e] <= cap_eps {
                    continue;
                }
                let v = r.to[e];
                let rc = (r.cost[e] + pot[u] - pot[v]).max(0.0);
                if d + rc < dist[v] {
                    dist[v] = d + rc;
                    pred[v] = e;
                    heap.push(Reverse((Key(dist[v]), v)));
                }
            }
        }
        if dist[t] == f64::INFINITY {
            break;
        }
        for v in 0..nodes {
            pot[v] += dist[v].min(dist[t]);
        }
        let mut push = total - shipped;
        let mut v = t;
        while v != s {
            let e = pred[v];
            push = push.min(r.cap[e]);
            v = r.to[e ^ 1];
        }
        let mut v = t;
        while v != s {
            let e = pred[v];
            r.cap[e] -= push;
            r.cap[e ^ 1] += push;
            v = r.to[e ^ 1];
        }
        shipped += push;
    }
    if shipped < total - EPS_MASS * scale {
        return Err(bp.hall_error());
    }
    let flow: Vec<f64> = arc_edge.iter().map(|&e| r.cap[e ^ 1]).collect();

    // Shortest distances from a virtual root over x → y (cost c) and, where
    // flow is positive, y → x (cost -c) give p_y - p_x <= c with equality
    // on every arc in use.
    let mut p = vec![0.0f64; a + b];
    for _ in 0..=(a + b) {
        let mut changed = false;
        for ((arc, &c), &f) in bp.arcs().iter().zip(&costs).zip(&flow) {
            let (x, y) = (arc.x, a + arc.y);
            if p[x] + c < p[y] - 1e-12 * (1.0 + p[y].abs()) {
                p[y] = p[x] + c;
                changed = true;
            }
            if f > cap_eps && p[y] - c < p[x] - 1e-12 * (1.0 + p[x].abs()) {
                p[x] = p[y] - c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let base = match ground {
        BipartiteNode::Source(x) => p[x],
        BipartiteNode::Target(y) => p[a + y],
    };
    let px: Vec<f64> = (0..a).map(|x| p[x] - base + ground_value).collect();
    let py: Vec<f64> = (0..b).map(|y| p[a + y] - base + ground_value).collect();
    let res = residuals(bp, &flow, &px, &py);
    Ok(BipartiteEquilibrium {
        flow,
        px,
        py,
        ground: Some(ground),
        residuals: res,
        stats: SolveStats {
            penalty_n: None,
            penalty_flow: 0.0,
            doublings: 0,
            blocks: 1,
            iterations,
        },
    })
}
