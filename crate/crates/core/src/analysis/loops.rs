use std::collections::VecDeque;

use super::check_connections;
use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::network::Network;

/// Default half-width of the price grid used for piecewise-linear loops.
pub const DEFAULT_PRICE_BOX: f64 = 1e3;

/// Largest strongly connected component whose simple cycles are enumerated.
pub const LOOP_ENUMERATION_LIMIT: usize = 15;

const MAX_CYCLES: usize = 200_000;
const GRID_POINTS: usize = 1025;
const SLOPE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LoopReport {
    pub ok: bool,
    /// Nodes `x₀, …, x_k` of a simple cycle; the closing arc is `x_k → x₀`.
    pub violating_loop: Option<Vec<usize>>,
    /// `(p, H(p) - p)` at a price where the loop is not strictly unprofitable.
    pub profit_at: Option<(f64, f64)>,
}

impl LoopReport {
    fn ok() -> Self {
        LoopReport {
            ok: true,
            violating_loop: None,
            profit_at: None,
        }
    }

    fn violation(cycle: Vec<usize>, price: f64, profit: f64) -> Self {
        LoopReport {
            ok: false,
            violating_loop: Some(cycle),
            profit_at: Some((price, profit)),
        }
    }

    pub fn into_result(self) -> Result<()> {
        match (self.violating_loop, self.profit_at) {
            (Some(cycle), Some((price, profit))) => Err(Error::ProfitableLoop {
                cycle,
                price,
                profit,
            }),
            _ => Ok(()),
        }
    }
}

/// `H = G_{x₀x₁} ∘ G_{x₁x₂} ∘ … ∘ G_{x_k x₀}` for the cycle `x₀, …, x_k`.
pub fn loop_composition(net: &Network, g: &[Connection], cycle: &[usize]) -> Connection {
    let k = cycle.len();
    let mut h = Connection::identity();
    for i in 0..k {
        let a = net
            .find_arc(cycle[i], cycle[(i + 1) % k])
            .expect("cycle follows arcs of the network");
        h = h.then_apply_to(&g[a]);
    }
    h
}

/// Checks that every loop satisfies `H(p) < p` for all prices.
///
/// Strongly connected components made of affine arcs are decided exactly.
/// Components containing piecewise-linear arcs are checked by enumerating
/// their simple cycles and testing each exact composition at its breakpoints
/// and tails, plus a uniform grid over `[-price_box, price_box]`.
pub fn check_no_profitable_loops(
    net: &Network,
    g: &[Connection],
    price_box: f64,
) -> Result<LoopReport> {
    check_connections(net, g)?;
    if !(price_box.is_finite() && price_box > 0.0) {
        return Err(Error::validation(
            "price_box",
            "must be finite and positive",
        ));
    }
    let (comp, members) = net.strongly_connected_components();
    for (cid, nodes) in members.iter().enumerate() {
        if nodes.len() < 2 {
            continue;
        }
        let inner: Vec<usize> = (0..net.arc_count())
            .filter(|&a| {
                let (x, y) = net.arc(a);
                comp[x] == cid && comp[y] == cid
            })
            .collect();
        let found = if inner.iter().all(|&a| g[a].is_affine()) {
            affine_component(net, g, nodes, &comp, cid)
        } else {
            enumerated_component(net, g, nodes, &comp, cid, price_box)?
        };
        if let Some(report) = found {
            return Ok(report);
        }
    }
    Ok(LoopReport::ok())
}

fn rotate_to_min(mut cycle: Vec<usize>) -> Vec<usize> {
    if let Some(i) = cycle
        .iter()
        .enumerate()
        .min_by_key(|&(_, &z)| z)
        .map(|(i, _)| i)
    {
        cycle.rotate_left(i);
    }
    cycle
}

fn affine_report(net: &Network, g: &[Connection], cycle: Vec<usize>) -> LoopReport {
    let cycle = rotate_to_min(cycle);
    let (s, b) = loop_composition(net, g, &cycle)
        .as_affine()
        .expect("affine cycle");
    if (s - 1.0).abs() > SLOPE_EPS {
        // A slope other than one has the fixed point b / (1 - s).
        let p = b / (1.0 - s);
        LoopReport::violation(cycle, p, s * p + b - p)
    } else {
        LoopReport::violation(cycle, 0.0, b)
    }
}

/// Splits a closed walk (first node repeated at the end) into simple cycles.
fn split_closed_walk(walk: &[usize]) -> Vec<Vec<usize>> {
    let mut cycles = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for &z in walk {
        if let Some(pos) = stack.iter().position(|&w| w == z) {
            cycles.push(stack[pos..].to_vec());
            stack.truncate(pos);
        }
        stack.push(z);
    }
    cycles
}

fn affine_component(
    net: &Network,
    g: &[Connection],
    nodes: &[usize],
    comp: &[usize],
    cid: usize,
) -> Option<LoopReport> {
    let n = net.node_count();
    let inside = |a: usize| {
        let (x, y) = net.arc(a);
        comp[x] == cid && comp[y] == cid
    };
    let aff = |a: usize| g[a].as_affine().expect("affine arc");
    let root = nodes[0];

    // sigma(u) = product of slopes along a path u ⇝ root.
    let mut sigma = vec![f64::NAN; n];
    let mut toward_root = vec![usize::MAX; n];
    sigma[root] = 1.0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &a in net.in_arcs(v) {
            let u = net.arc(a).0;
            if inside(a) && sigma[u].is_nan() {
                sigma[u] = aff(a).0 * sigma[v];
                toward_root[u] = a;
                queue.push_back(u);
            }
        }
    }
    let mut from_root = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &a in net.out_arcs(u) {
            let v = net.arc(a).1;
            if inside(a) && !seen[v] {
                seen[v] = true;
                from_root[v] = a;
                queue.push_back(v);
            }
        }
    }
    let path_to_root = |mut z: usize| {
        let mut p = vec![z];
        while z != root {
            z = net.arc(toward_root[z]).1;
            p.push(z);
        }
        p
    };
    let path_from_root = |mut z: usize| {
        let mut p = vec![z];
        while z != root {
            z = net.arc(from_root[z]).0;
            p.push(z);
        }
        p.reverse();
        p
    };
    let walk_slope = |walk: &[usize]| {
        walk.windows(2)
            .map(|w| aff(net.find_arc(w[0], w[1]).expect("walk arc")).0)
            .product::<f64>()
    };

    let inner: Vec<usize> = (0..net.arc_count()).filter(|&a| inside(a)).collect();
    for &a in &inner {
        let (u, v) = net.arc(a);
        let s = aff(a).0;
        if (s * sigma[v] - sigma[u]).abs() <= SLOPE_EPS * sigma[u] {
            continue;
        }
        // Either the walk u → v ⇝ root ⇝ u or the walk u ⇝ root ⇝ u has a
        // composite slope other than one; so does one of its simple cycles.
        let back = path_from_root(u);
        let mut w1 = vec![u];
        w1.extend(path_to_root(v));
        w1.extend(&back[1..]);
        let mut w0 = path_to_root(u);
        w0.extend(&back[1..]);
        let mut cycles = split_closed_walk(&w1);
        cycles.extend(split_closed_walk(&w0));
        let closed = |c: &Vec<usize>| {
            let mut w = c.clone();
            w.push(c[0]);
            walk_slope(&w).ln().abs()
        };
        let best = cycles
            .into_iter()
            .filter(|c| c.len() >= 2)
            .max_by(|x, y| closed(x).total_cmp(&closed(y)))
            .expect("closed walk contains a cycle");
        return Some(affine_report(net, g, best));
    }

    // Consistent slopes: rescaling prices by sigma makes every arc
    // transferable with cost -b / sigma(tail). Loops are profitable exactly
    // when their rescaled cost is nonpositive.
    let cost: Vec<f64> = (0..net.arc_count())
        .map(|a| {
            if inside(a) {
                -aff(a).1 / sigma[net.arc(a).0]
            } else {
                0.0
            }
        })
        .collect();
    let k = nodes.len();
    let mut dist = vec![0.0f64; n];
    let mut pred = vec![usize::MAX; n];
    let mut last = None;
    for _ in 0..k {
        last = None;
        for &a in &inner {
            let (u, v) = net.arc(a);
            let cand = dist[u] + cost[a];
            if cand < dist[v] - 1e-12 * (1.0 + dist[v].abs()) {
                dist[v] = cand;
                pred[v] = a;
                last = Some(v);
            }
        }
        if last.is_none() {
            break;
        }
    }
    if let Some(mut z) = last {
        for _ in 0..k {
            z = net.arc(pred[z]).0;
        }
        let start = z;
        let mut cycle = vec![start];
        let mut w = net.arc(pred[start]).0;
        while w != start {
            cycle.push(w);
            w = net.arc(pred[w]).0;
        }
        cycle.reverse();
        return Some(affine_report(net, g, cycle));
    }
    // No negative cycle: look for a cycle of zero reduced cost.
    let tight: Vec<usize> = inner
        .iter()
        .copied()
        .filter(|&a| {
            let (u, v) = net.arc(a);
            cost[a] + dist[u] - dist[v] <= 1e-12 * (1.0 + cost[a].abs())
        })
        .collect();
    find_cycle(net, &tight).map(|c| affine_report(net, g, c))
}

/// Any directed cycle using only the listed arcs.
fn find_cycle(net: &Network, arcs: &[usize]) -> Option<Vec<usize>> {
    let n = net.node_count();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &a in arcs {
        let (u, v) = net.arc(a);
        out[u].push(v);
    }
    let mut state = vec![0u8; n];
    for s in 0..n {
        if state[s] != 0 || out[s].is_empty() {
            continue;
        }
        let mut stack = vec![(s, 0usize)];
        let mut path = vec![s];
        state[s] = 1;
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            if *i < out[u].len() {
                let v = out[u][*i];
                *i += 1;
                match state[v] {
                    0 => {
                        state[v] = 1;
                        stack.push((v, 0));
                        path.push(v);
                    }
                    1 => {
                        let pos = path.iter().position(|&w| w == v).expect("on path");
                        return Some(path[pos..].to_vec());
                    }
                    _ => {}
                }
            } else {
                state[u] = 2;
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

/// Returns a price where `H(p) >= p`, if there is one.
fn loop_violation(h: &Connection, price_box: f64) -> Option<(f64, f64)> {
    let f = h.to_piecewise();
    let pts = f.points();
    let mut worst: Option<(f64, f64)> = None;
    for &(x, y) in pts {
        let d = y - x;
        if d >= 0.0 && worst.is_none_or(|(_, w)| d > w) {
            worst = Some((x, d));
        }
    }
    if worst.is_some() {
        return worst;
    }
    let (x0, y0) = pts[0];
    if f.left_slope() < 1.0 {
        // H(p) - p grows without bound to the left; step past its zero.
        let p = x0 + (y0 - x0) / (1.0 - f.left_slope()) - 1.0;
        return Some((p, h.eval(p) - p));
    }
    let (xn, yn) = pts[pts.len() - 1];
    if f.right_slope() > 1.0 {
        let p = xn - (yn - xn) / (f.right_slope() - 1.0) + 1.0;
        return Some((p, h.eval(p) - p));
    }
    (0..GRID_POINTS)
        .map(|i| -price_box + 2.0 * price_box * i as f64 / (GRID_POINTS - 1) as f64)
        .map(|p| (p, h.eval(p) - p))
        .find(|&(_, d)| d >= 0.0)
}

fn enumerated_component(
    net: &Network,
    g: &[Connection],
    nodes: &[usize],
    comp: &[usize],
    cid: usize,
    price_box: f64,
) -> Result<Option<LoopReport>> {
    if nodes.len() > LOOP_ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            what: "loop enumeration (component size)",
            size: nodes.len(),
            limit: LOOP_ENUMERATION_LIMIT,
        });
    }
    let succ = |u: usize| {
        net.out_arcs(u)
            .iter()
            .map(|&a| net.arc(a).1)
            .filter(|&v| comp[v] == cid)
            .collect::<Vec<_>>()
    };
    let mut count = 0usize;
    for &start in nodes {
        // Cycles whose smallest node is `start`.
        let mut path = vec![start];
        let mut on_path = vec![false; net.node_count()];
        on_path[start] = true;
        let mut stack = vec![(succ(start), 0usize)];
        while let Some((next, i)) = stack.last_mut() {
            if *i >= next.len() {
                stack.pop();
                let u = path.pop().expect("path matches stack");
                on_path[u] = false;
                continue;
            }
            let v = next[*i];
            *i += 1;
            if v == start {
                count += 1;
                if count > MAX_CYCLES {
                    return Err(Error::EnumerationGuard {
                        what: "loop enumeration (cycle count)",
                        size: count,
                        limit: MAX_CYCLES,
                    });
                }
                let h = loop_composition(net, g, &path);
                if let Some((p, d)) = loop_violation(&h, price_box) {
                    return Ok(Some(LoopReport::violation(path.clone(), p, d)));
                }
            } else if v > start && !on_path[v] {
                on_path[v] = true;
                path.push(v);
                stack.push((succ(v), 0));
            }
        }
    }
    Ok(None)
}
