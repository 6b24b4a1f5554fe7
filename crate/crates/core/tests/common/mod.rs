//! Instance generators and independent oracles shared by the integration
//! tests.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use eqflow::io::{from_json, ProblemDocument};
use eqflow::{Connection, ExitFlow, FlowProblem, Network};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

/// Each ordered pair becomes an arc with probability `density`; with `dag`
/// only pairs `i < j` are eligible.
pub fn random_arcs(rng: &mut ChaCha8Rng, n: usize, density: f64, dag: bool) -> Vec<(usize, usize)> {
    let mut arcs = Vec::new();
    for x in 0..n {
        for y in 0..n {
            if x != y && (!dag || x < y) && rng.gen_bool(density) {
                arcs.push((x, y));
            }
        }
    }
    arcs
}

/// Integers in `[-5, 5]` summing to zero.
pub fn random_integer_q(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut q: Vec<i64> = (0..n - 1).map(|_| rng.gen_range(-5..=5)).collect();
        let last = -q.iter().sum::<i64>();
        if (-5..=5).contains(&last) {
            q.push(last);
            return q.into_iter().map(|v| v as f64).collect();
        }
    }
}

/// Shortest (fewest arcs) path from `s` to any node in `targets`.
pub fn bfs_path(net: &Network, s: usize, targets: &[bool]) -> Option<Vec<usize>> {
    let n = net.node_count();
    let mut prev = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        if targets[u] && u != s {
            let mut path = vec![u];
            let mut v = u;
            while v != s {
                v = prev[v];
                path.push(v);
            }
            path.reverse();
            return Some(path);
        }
        for &a in net.out_arcs(u) {
            let v = net.arc(a).1;
            if !seen[v] {
                seen[v] = true;
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}

/// Exit flows generated by routing random masses along paths into a random
/// target set, so the result is transportable by construction.
pub fn routed_q(rng: &mut ChaCha8Rng, net: &Network) -> Option<Vec<f64>> {
    let n = net.node_count();
    let k = rng.gen_range(1..=n.min(3));
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let targets = eqflow::network::mask(n, nodes[..k].iter().copied());
    let mut q = vec![0.0; n];
    let mut routed = 0;
    for _ in 0..rng.gen_range(1..=4) {
        let s = rng.gen_range(0..n);
        if let Some(path) = bfs_path(net, s, &targets) {
            let m = (rng.gen_range(1..=12) as f64) * 0.25;
            q[path[0]] -= m;
            q[*path.last().unwrap()] += m;
            routed += 1;
        }
    }
    (routed > 0).then_some(q)
}

/// A transferable instance with positive costs in which every node reaches
/// a node with positive exit flow.
pub fn random_tu_instance(rng: &mut ChaCha8Rng, dag: bool) -> FlowProblem {
    loop {
        let n = rng.gen_range(2..=8);
        let density = [0.2, 0.5, 0.8][rng.gen_range(0..3)];
        let arcs = random_arcs(rng, n, density, dag);
        let net = Network::new(names(n), arcs).unwrap();
        let Some(q) = routed_q(rng, &net) else {
            continue;
        };
        if q.iter().all(|v| v.abs() < 1e-12) {
            continue;
        }
        let live = net.can_reach(&q.iter().map(|&v| v > 0.0).collect::<Vec<_>>());
        if live.iter().any(|&l| !l) {
            continue;
        }
        let g = (0..net.arc_count())
            .map(|_| Connection::cost((rng.gen_range(1..=40) as f64) * 0.125))
            .collect();
        return FlowProblem::new(net, g, ExitFlow::new(q).unwrap()).unwrap();
    }
}

/// Uncapacitated min-cost flow by successive shortest paths with
/// Bellman-Ford on the residual graph. Returns the optimal cost and flow.
pub fn min_cost_flow(net: &Network, costs: &[f64], q: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = net.node_count();
    let (s, t) = (n, n + 1);
    // Residual edges: (from, to, cap, cost), paired as e and e ^ 1.
    let mut edges: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut add = |u: usize, v: usize, cap: f64, cost: f64| {
        edges.push((u, v, cap, cost));
        edges.push((v, u, 0.0, -cost));
        edges.len() - 2
    };
    let arc_edge: Vec<usize> = net
        .arcs()
        .iter()
        .zip(costs)
        .map(|(&(x, y), &c)| add(x, y, f64::INFINITY, c))
        .collect();
    let mut demand = 0.0;
    for (z, &qz) in q.iter().enumerate() {
        if qz < 0.0 {
            add(s, z, -qz, 0.0);
        } else if qz > 0.0 {
            add(z, t, qz, 0.0);
            demand += qz;
        }
    }
    let mut shipped = 0.0;
    let mut cost = 0.0;
    while shipped < demand - 1e-12 {
        let mut dist = vec![f64::INFINITY; n + 2];
        let mut pred = vec![usize::MAX; n + 2];
        dist[s] = 0.0;
        for _ in 0..n + 2 {
            let mut changed = false;
            for (e, &(u, v, cap, c)) in edges.iter().enumerate() {
                if cap > 1e-12 && dist[u] + c < dist[v] - 1e-12 {
                    dist[v] = dist[u] + c;
                    pred[v] = e;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if dist[t].is_infinite() {
            return None;
        }
        let mut push = f64::INFINITY;
        let mut v = t;
        while v != s {
            let e = pred[v];
            push = push.min(edges[e].2);
            v = edges[e].0;
        }
        let mut v = t;
        while v != s {
            let e = pred[v];
            edges[e].2 -= push;
            edges[e ^ 1].2 += push;
            v = edges[e].0;
        }
        shipped += push;
        cost += push * dist[t];
    }
    let flow = arc_edge.iter().map(|&e| edges[e ^ 1].2).collect();
    Some((cost, flow))
}

/// All simple directed cycles, each listed once, starting at its smallest
/// node.
pub fn simple_cycles(net: &Network) -> Vec<Vec<usize>> {
    let n = net.node_count();
    let mut out = Vec::new();
    fn dfs(
        net: &Network,
        start: usize,
        u: usize,
        path: &mut Vec<usize>,
        on: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        for &a in net.out_arcs(u) {
            let v = net.arc(a).1;
            if v == start {
                out.push(path.clone());
            } else if v > start && !on[v] {
                on[v] = true;
                path.push(v);
                dfs(net, start, v, path, on, out);
                path.pop();
                on[v] = false;
            }
        }
    }
    for s in 0..n {
        let mut on = vec![false; n];
        on[s] = true;
        let mut path = vec![s];
        dfs(net, s, s, &mut path, &mut on, &mut out);
    }
    out
}

/// `H = G_{x₀x₁} ∘ … ∘ G_{x_k x₀}` for affine arcs, as `(slope, intercept)`.
pub fn affine_loop(net: &Network, g: &[Connection], cycle: &[usize]) -> (f64, f64) {
    let k = cycle.len();
    let (mut s, mut b) = (1.0, 0.0);
    for i in 0..k {
        let a = net.find_arc(cycle[i], cycle[(i + 1) % k]).unwrap();
        let (si, bi) = g[a].as_affine().unwrap();
        // (s, b) ∘ (si, bi): p ↦ s (si p + bi) + b
        b += s * bi;
        s *= si;
    }
    (s, b)
}

/// A loop is profitable when `H(p) >= p` somewhere: any slope other than 1
/// has a fixed point, and slope 1 needs a nonnegative intercept.
pub fn affine_loop_profitable(s: f64, b: f64) -> bool {
    s != 1.0 || b >= 0.0
}

#[derive(Debug, Deserialize)]
pub struct ExpectedFlow {
    pub from: String,
    pub to: String,
    pub flow: f64,
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub ground: String,
    pub p: serde_json::Map<String, serde_json::Value>,
    pub mu: Vec<ExpectedFlow>,
}

#[derive(Debug, Deserialize)]
pub struct ItuFixture {
    pub problem: ProblemDocument,
    pub expected: Expected,
}

pub fn fixture_dir(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(sub)
}

/// JSON files in a fixture directory, sorted by name.
pub fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
}

pub fn itu_fixtures() -> Vec<(String, ItuFixture)> {
    json_files(&fixture_dir("itu"))
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, from_json(&text).unwrap())
        })
        .collect()
}
