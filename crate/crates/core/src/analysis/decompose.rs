use crate::error::{Error, Result};
use crate::network::{ExitFlow, InternalFlow, Network};
use crate::DEFAULT_TOL;

/// A flow written as a sum of source-to-target paths and loops.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowDecomposition {
    /// Node sequences from a source to a target, with their mass.
    pub path_flows: Vec<(Vec<usize>, f64)>,
    /// Simple cycles `x₀, …, x_k` (closing arc `x_k → x₀`), with their mass.
    pub loop_flows: Vec<(Vec<usize>, f64)>,
}

impl FlowDecomposition {
    pub fn loop_mass(&self) -> f64 {
        self.loop_flows.iter().fold(0.0, |acc, (_, m)| acc + m)
    }

    /// Arc-wise sum of all path and loop flows.
    pub fn recompose(&self, net: &Network) -> Vec<f64> {
        let mut mu = vec![0.0; net.arc_count()];
        let mut add = |x: usize, y: usize, m: f64| {
            let a = net.find_arc(x, y).expect("decomposition follows arcs");
            mu[a] += m;
        };
        for (path, m) in &self.path_flows {
            for w in path.windows(2) {
                add(w[0], w[1], *m);
            }
        }
        for (cycle, m) in &self.loop_flows {
            for i in 0..cycle.len() {
                add(cycle[i], cycle[(i + 1) % cycle.len()], *m);
            }
        }
        mu
    }
}

/// Greedy path and loop peeling.
///
/// Paths start at the lowest-indexed node with remaining supply and follow
/// the lowest-indexed arc with remaining flow until they hit a node with
/// remaining demand; a revisited node splits off a loop. Flow left once all
/// supply is routed is peeled into loops.
pub fn flow_decompose(net: &Network, mu: &InternalFlow, q: &ExitFlow) -> Result<FlowDecomposition> {
    if q.len() != net.node_count() {
        return Err(Error::DimensionMismatch {
            what: "exit flow",
            expected: net.node_count(),
            found: q.len(),
        });
    }
    let balance = net.incidence_apply(mu)?;
    let scale = mu
        .iter()
        .chain(q.iter())
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let worst = balance
        .iter()
        .zip(q.iter())
        .map(|(b, qz)| (b - qz).abs())
        .fold(0.0, f64::max);
    if worst > DEFAULT_TOL * scale {
        return Err(Error::validation(
            "mu",
            format!("flow does not balance the exit flow (residual {worst:e})"),
        ));
    }
    let eps = 1e-12 * scale;
    let n = net.node_count();
    let mut rest: Vec<f64> = mu.to_vec();
    let mut excess: Vec<f64> = q.to_vec();
    let mut out = FlowDecomposition::default();

    let next_arc =
        |rest: &[f64], u: usize| net.out_arcs(u).iter().copied().find(|&a| rest[a] > eps);

    while let Some(s) = (0..n).find(|&z| excess[z] < -eps) {
        let mut path = vec![s];
        let mut arcs: Vec<usize> = Vec::new();
        let mut pos = vec![usize::MAX; n];
        pos[s] = 0;
        loop {
            let u = *path.last().expect("nonempty path");
            if u != s && excess[u] > eps {
                let m = arcs
                    .iter()
                    .map(|&a| rest[a])
                    .fold((-excess[s]).min(excess[u]), f64::min);
                for &a in &arcs {
                    rest[a] -= m;
                }
                excess[s] += m;
                excess[u] -= m;
                out.path_flows.push((path, m));
                break;
            }
            let Some(a) = next_arc(&rest, u) else {
                // Only rounding-level imbalance can strand a source here.
                excess[s] = 0.0;
                break;
            };
            let v = net.arc(a).1;
            if pos[v] != usize::MAX {
                let i = pos[v];
                let mut cyc_arcs: Vec<usize> = arcs[i..].to_vec();
                cyc_arcs.push(a);
                let m = cyc_arcs
                    .iter()
                    .map(|&e| rest[e])
                    .fold(f64::INFINITY, f64::min);
                for &e in &cyc_arcs {
                    rest[e] -= m;
                }
                for &z in &path[i + 1..] {
                    pos[z] = usize::MAX;
                }
                out.loop_flows.push((path[i..].to_vec(), m));
                path.truncate(i + 1);
                arcs.truncate(i);
                continue;
            }
            pos[v] = path.len();
            path.push(v);
            arcs.push(a);
        }
    }

    while let Some(first) = (0..net.arc_count()).find(|&a| rest[a] > eps) {
        let (s, mut u) = net.arc(first);
        let mut path = vec![s];
        let mut arcs = vec![first];
        let mut pos = vec![usize::MAX; n];
        pos[s] = 0;
        loop {
            if pos[u] != usize::MAX {
                let i = pos[u];
                let cyc_arcs = &arcs[i..];
                let m = cyc_arcs
                    .iter()
                    .map(|&e| rest[e])
                    .fold(f64::INFINITY, f64::min);
                for &e in cyc_arcs {
                    rest[e] -= m;
                }
                out.loop_flows.push((path[i..].to_vec(), m));
                break;
            }
            pos[u] = path.len();
            path.push(u);
            match next_arc(&rest, u) {
                Some(a) => {
                    arcs.push(a);
                    u = net.arc(a).1;
                }
                None => {
                    rest[first] = 0.0;
                    break;
                }
            }
        }
    }
    Ok(out)
}
