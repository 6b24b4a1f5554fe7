//! Dinic's max-flow on `f64` capacities.
//!
//! Infinite capacity is `f64::INFINITY`; residuals of such edges stay
//! infinite, so they never appear in a minimum cut.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct FlowGraph {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    residual: Vec<f64>,
    eps: f64,
}

impl FlowGraph {
    /// `eps` is the residual below which an edge counts as saturated.
    pub fn new(n: usize, eps: f64) -> Self {
        FlowGraph {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            residual: Vec::new(),
            eps,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u → v` and returns its edge id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64) -> usize {
        debug_assert!(cap >= 0.0);
        let id = self.to.len();
        self.to.push(v);
        self.residual.push(cap);
        self.adj[u].push(id);
        self.to.push(u);
        self.residual.push(0.0);
        self.adj[v].push(id + 1);
        id
    }

    /// Flow currently carried by the forward edge `id`.
    pub fn flow(&self, id: usize) -> f64 {
        self.residual[id ^ 1]
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if level[v] == usize::MAX && self.residual[e] > self.eps {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn push(&mut self, u: usize, t: usize, limit: f64, level: &[usize], iter: &mut [usize]) -> f64 {
        if u == t {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let e = self.adj[u][iter[u]];
            let v = self.to[e];
            if self.residual[e] > self.eps && level[v] == level[u] + 1 {
                let got = self.push(v, t, limit.min(self.residual[e]), level, iter);
                if got > 0.0 {
                    self.residual[e] -= got;
                    self.residual[e ^ 1] += got;
                    return got;
                }
            }
            iter[u] += 1;
        }
        0.0
    }

    /// Maximum `s → t` flow, accumulated on top of any flow already present.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(s);
            if level[t] == usize::MAX {
                return total;
            }
            let mut iter = vec![0; self.adj.len()];
            loop {
                let f = self.push(s, t, f64::INFINITY, &level, &mut iter);
                if f <= 0.0 {
                    break;
                }
                total += f;
                if f.is_infinite() {
                    return f;
                }
            }
        }
    }

    /// Nodes reachable from `s` through unsaturated residual edges.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s)
            .into_iter()
            .map(|l| l != usize::MAX)
            .collect()
    }

    /// Number of forward edges added so far.
    pub fn edge_count(&self) -> usize {
        self.to.len() / 2
    }
}
