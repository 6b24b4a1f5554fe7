//! Complete bipartite problems with general connections.
//!
//! Spanning trees of `X × Y` serve as bases. A tree fixes the flow (by leaf
//! elimination against the margins) and, together with the ground price,
//! fixes every price exactly by propagating `p_x = G̃_xy(p_y)` along its arcs.
//! A basis is an equilibrium when its flow is nonnegative and no off-tree arc
//! has positive rent. Pivots bring in a positive-rent arc and drop the first
//! arc its cycle empties, as in the network simplex method. Should pivoting
//! revisit a basis, Bland's rule takes over, and as a last resort all
//! spanning trees are enumerated; a complete problem always has an
//! equilibrium supported on a spanning tree.

use std::collections::{HashSet, VecDeque};

use super::{
    check_ground, residuals, tu, BipartiteEquilibrium, BipartiteNode, BipartiteProblem, SolveStats,
};
use crate::error::{Error, Result};

const MAX_PIVOTS: usize = 20_000;
const MAX_TREES: f64 = 2e6;

struct Tree<'a> {
    bp: &'a BipartiteProblem,
    a: usize,
    b: usize,
    flow_eps: f64,
}

impl Tree<'_> {
    fn ends(&self, e: usize) -> (usize, usize) {
        let arc = &self.bp.arcs()[e];
        (arc.x, self.a + arc.y)
    }

    fn adjacency(&self, tree: &[usize]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.a + self.b];
        for &e in tree {
            let (u, v) = self.ends(e);
            adj[u].push(e);
            adj[v].push(e);
        }
        adj
    }

    /// Flow on every arc (zero off the tree) by peeling leaves.
    fn flows(&self, tree: &[usize]) -> Vec<f64> {
        let nodes = self.a + self.b;
        let adj = self.adjacency(tree);
        let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut used = vec![false; self.bp.arcs().len()];
        let mut rem: Vec<f64> = self.bp.n().iter().chain(self.bp.m()).copied().collect();
        let mut flow = vec![0.0; self.bp.arcs().len()];
        let mut leaves: VecDeque<usize> = (0..nodes).filter(|&u| deg[u] == 1).collect();
        while let Some(u) = leaves.pop_front() {
            if deg[u] != 1 {
                continue;
            }
            let e = *adj[u].iter().find(|&&e| !used[e]).expect("leaf has an arc");
            let (x, y) = self.ends(e);
            let v = if x == u { y } else { x };
            flow[e] = rem[u];
            rem[v] -= rem[u];
            used[e] = true;
            deg[u] = 0;
            deg[v] -= 1;
            if deg[v] == 1 {
                leaves.push_back(v);
            }
        }
        flow
    }

    /// Prices fixed by the tree and the ground value.
    fn prices(&self, tree: &[usize], ground: usize, value: f64) -> Vec<f64> {
        let adj = self.adjacency(tree);
        let mut p = vec![f64::NAN; self.a + self.b];
        p[ground] = value;
        let mut queue = VecDeque::from([ground]);
        while let Some(u) = queue.pop_front() {
            for &e in &adj[u] {
                let (x, y) = self.ends(e);
                let g = &self.bp.arcs()[e].g;
                if u == x && p[y].is_nan() {
                    p[y] = g.solve_for(p[x]);
                    queue.push_back(y);
                } else if u == y && p[x].is_nan() {
                    p[x] = g.eval(p[y]);
                    queue.push_back(x);
                }
            }
        }
        p
    }

    fn rent(&self, e: usize, p: &[f64]) -> (f64, f64) {
        let (x, y) = self.ends(e);
        let gy = self.bp.arcs()[e].g.eval(p[y]);
        let thr = 1e-12 * p[x].abs().max(gy.abs()).max(1.0);
        (gy - p[x], thr)
    }

    /// Tree arcs on the path from `from` to `to`, in order.
    fn path(&self, tree: &[usize], from: usize, to: usize) -> Vec<usize> {
        let adj = self.adjacency(tree);
        let mut via = vec![usize::MAX; self.a + self.b];
        let mut seen = vec![false; self.a + self.b];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &e in &adj[u] {
                let (x, y) = self.ends(e);
                let v = if x == u { y } else { x };
                if !seen[v] {
                    seen[v] = true;
                    via[v] = e;
                    queue.push_back(v);
                }
            }
        }
        let mut arcs = Vec::new();
        let mut v = to;
        while v != from {
            let e = via[v];
            arcs.push(e);
            let (x, y) = self.ends(e);
            v = if x == v { y } else { x };
        }
        arcs.reverse();
        arcs
    }

    fn is_equilibrium(
        &self,
        tree: &[usize],
        in_tree: &[bool],
        ground: usize,
        value: f64,
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let flow = self.flows(tree);
        if tree.iter().any(|&e| flow[e] < -self.flow_eps) {
            return None;
        }
        let p = self.prices(tree, ground, value);
        let feasible = (0..self.bp.arcs().len()).filter(|&e| !in_tree[e]).all(|e| {
            let (r, thr) = self.rent(e, &p);
            r <= thr
        });
        feasible.then_some((flow, p))
    }
}

fn north_west_corner(bp: &BipartiteProblem) -> Vec<usize> {
    let (a, b) = (bp.source_count(), bp.target_count());
    let mut rn = bp.n().to_vec();
    let mut rm = bp.m().to_vec();
    let (mut i, mut j) = (0, 0);
    let mut tree = Vec::with_capacity(a + b - 1);
    loop {
        tree.push(bp.arc_index(i, j).expect("complete problem"));
        let f = rn[i].min(rm[j]);
        rn[i] -= f;
        rm[j] -= f;
        if i == a - 1 && j == b - 1 {
            break;
        }
        if j == b - 1 || (i < a - 1 && rn[i] <= rm[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    tree
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Equilibrium of a complete bipartite problem with the ground node priced
/// at `ground_value`.
pub fn solve_complete_bipartite(
    bp: &BipartiteProblem,
    ground: BipartiteNode,
    ground_value: f64,
    tol: f64,
) -> Result<BipartiteEquilibrium> {
    check_ground(bp, ground)?;
    let total = bp.check_margins()?;
    if !bp.is_complete() {
        return Err(Error::validation("arcs", "problem is not complete"));
    }
    if bp.is_transferable() {
        return tu::solve_tu(bp, ground, ground_value);
    }
    let (a, b) = (bp.source_count(), bp.target_count());
    let t = Tree {
        bp,
        a,
        b,
        flow_eps: 1e-12 * total.max(1.0),
    };
    let root = match ground {
        BipartiteNode::Source(x) => x,
        BipartiteNode::Target(y) => a + y,
    };
    let m = bp.arcs().len();
    let finish = |tree: &[usize], flow: Vec<f64>, p: Vec<f64>, iterations: usize| {
        let flow: Vec<f64> = flow.into_iter().map(|f| f.max(0.0)).collect();
        let px = p[..a].to_vec();
        let py = p[a..].to_vec();
        let res = residuals(bp, &flow, &px, &py);
        let _ = tree;
        if res.max() > tol {
            return Err(Error::NonConvergence {
                stage: "bipartite basis",
                iterations,
                residual: res.max(),
            });
        }
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
    };

    let mut tree = north_west_corner(bp);
    let mut in_tree = vec![false; m];
    for &e in &tree {
        in_tree[e] = true;
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut bland = false;
    let mut pivots = 0;
    while pivots < MAX_PIVOTS {
        let flow = t.flows(&tree);
        let p = t.prices(&tree, root, ground_value);
        let mut entering: Option<(usize, f64)> = None;
        for e in (0..m).filter(|&e| !in_tree[e]) {
            let (r, thr) = t.rent(e, &p);
            if r > thr {
                if bland {
                    entering = Some((e, r));
                    break;
                }
                if entering.is_none_or(|(_, best)| r > best) {
                    entering = Some((e, r));
                }
            }
        }
        let Some((enter, _)) = entering else {
            return finish(&tree, flow, p, pivots);
        };
        pivots += 1;
        let (xs, ys) = t.ends(enter);
        let cycle = t.path(&tree, ys, xs);
        // Arcs at even positions lose flow, odd positions gain.
        let theta = cycle
            .iter()
            .step_by(2)
            .map(|&e| flow[e].max(0.0))
            .fold(f64::INFINITY, f64::min);
        let leave = cycle
            .iter()
            .step_by(2)
            .copied()
            .filter(|&e| flow[e].max(0.0) <= theta + t.flow_eps)
            .min()
            .expect("cycle has a decreasing arc");
        in_tree[leave] = false;
        in_tree[enter] = true;
        let pos = tree
            .iter()
            .position(|&e| e == leave)
            .expect("leaving arc is in the tree");
        tree[pos] = enter;
        let mut key = tree.clone();
        key.sort_unstable();
        if !seen.insert(key) {
            if bland {
                break;
            }
            bland = true;
            seen.clear();
        }
    }

    // Exhaustive search over spanning trees.
    let k = a + b - 1;
    if binomial(m, k) > MAX_TREES {
        return Err(Error::NonConvergence {
            stage: "bipartite pivoting",
            iterations: pivots,
            residual: f64::NAN,
        });
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if spans(&t, &idx) {
            let mut mark = vec![false; m];
            for &e in &idx {
                mark[e] = true;
            }
            if let Some((flow, p)) = t.is_equilibrium(&idx, &mark, root, ground_value) {
                return finish(&idx, flow, p, pivots);
            }
        }
        // Next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return Err(Error::NonConvergence {
                    stage: "bipartite tree enumeration",
                    iterations: pivots,
                    residual: f64::NAN,
                });
            }
            i -= 1;
            if idx[i] < m - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn spans(t: &Tree<'_>, arcs: &[usize]) -> bool {
    let mut parent: Vec<usize> = (0..t.a + t.b).collect();
    fn find(parent: &mut [usize], mut u: usize) -> usize {
        while parent[u] != u {
            parent[u] = parent[parent[u]];
            u = parent[u];
        }
        u
    }
    for &e in arcs {
        let (u, v) = t.ends(e);
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            return false;
        }
        parent[ru] = rv;
    }
    true
}
