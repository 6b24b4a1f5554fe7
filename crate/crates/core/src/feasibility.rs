//! Transportability of an exit flow, reachability of targets and Hall's
//! condition.
//!
//! `q` is transportable (some `μ ≥ 0` has `∇ᵀμ = q`) exactly when every
//! retaining set `B` has `q(B) ≥ 0`. The max-flow formulation decides this and
//! produces either a flow or a retaining set with negative mass.

use crate::bipartite::BipartiteProblem;
use crate::error::{Error, Result};
use crate::maxflow::FlowGraph;
use crate::network::{mask, members, ExitFlow, InternalFlow, Network};
use crate::EPS_MASS;

/// Largest node count accepted by the brute-force oracles.
pub const ENUMERATION_LIMIT: usize = 20;

/// Saturation threshold inside the auxiliary max-flow instances.
const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub witness_flow: Option<InternalFlow>,
    /// Retaining set with negative mass, sorted by node index.
    pub violating_set: Option<Vec<usize>>,
    /// `q(B)` of the violating set; zero when feasible.
    pub deficit: f64,
}

impl FeasibilityReport {
    /// Converts an infeasible verdict into the matching error.
    pub fn into_result(self) -> Result<InternalFlow> {
        match self.witness_flow {
            Some(mu) => Ok(mu),
            None => Err(Error::Infeasible {
                violating_set: self.violating_set.unwrap_or_default(),
                deficit: self.deficit,
            }),
        }
    }
}

fn check_dims(net: &Network, q: &[f64]) -> Result<()> {
    if q.len() != net.node_count() {
        return Err(Error::DimensionMismatch {
            what: "exit flow",
            expected: net.node_count(),
            found: q.len(),
        });
    }
    Ok(())
}

fn feasibility_slack(supply: f64) -> f64 {
    EPS_MASS * supply.max(1.0)
}

/// Decides whether `q` can be carried by a nonnegative flow on `net`.
pub fn check_feasibility(net: &Network, q: &ExitFlow) -> Result<FeasibilityReport> {
    check_dims(net, q)?;
    q.check_balanced(EPS_MASS)?;
    let n = net.node_count();
    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2, RESIDUAL_EPS);
    let arc_edges: Vec<usize> = net
        .arcs()
        .iter()
        .map(|&(x, y)| g.add_edge(x, y, f64::INFINITY))
        .collect();
    let mut supply = 0.0;
    for (z, &qz) in q.iter().enumerate() {
        if qz < 0.0 {
            g.add_edge(s, z, -qz);
        } else if qz > 0.0 {
            g.add_edge(z, t, qz);
            supply += qz;
        }
    }
    let value = g.max_flow(s, t);
    if value >= supply - feasibility_slack(supply) {
        let mu = arc_edges.iter().map(|&e| g.flow(e).max(0.0)).collect();
        return Ok(FeasibilityReport {
            feasible: true,
            witness_flow: Some(InternalFlow::new(mu)?),
            violating_set: None,
            deficit: 0.0,
        });
    }
    // Nodes still reachable from the super-source form a retaining set: the
    // original arcs are uncapacitated, so none of them can leave it.
    let mut side = g.source_side(s);
    side.truncate(n);
    let deficit = q.mass_of(&side);
    Ok(FeasibilityReport {
        feasible: false,
        witness_flow: None,
        violating_set: Some(members(&side)),
        deficit,
    })
}

/// Exhaustive minimum of `q(B)` over retaining sets `B`, with a minimizer.
///
/// Subsets are scanned in increasing bitmask order and the first minimizer is
/// kept, so the empty set is returned when the minimum is zero.
pub fn retaining_oracle(net: &Network, q: &ExitFlow) -> Result<(f64, Vec<usize>)> {
    check_dims(net, q)?;
    let n = net.node_count();
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            what: "retaining-set enumeration",
            size: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut succ = vec![0u32; n];
    for &(x, y) in net.arcs() {
        succ[x] |= 1 << y;
    }
    let mut best = (0.0, 0u32);
    for b in 1u32..(1u32 << n) {
        let retaining = (0..n).all(|z| b & (1 << z) == 0 || succ[z] & !b == 0);
        if !retaining {
            continue;
        }
        let mass: f64 = (0..n).filter(|&z| b & (1 << z) != 0).map(|z| q[z]).sum();
        if mass < best.0 {
            best = (mass, b);
        }
    }
    let set = (0..n).filter(|&z| best.1 & (1 << z) != 0).collect();
    Ok((best.0, set))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedReport {
    pub feasible: bool,
    pub witness_flow: Option<Vec<f64>>,
    /// A set `B` with `q(B) > u(I(B)) - l(O(B))`.
    pub violating_set: Option<Vec<usize>>,
    /// `u(I(B)) - l(O(B)) - q(B)`, negative for the violating set.
    pub slack: f64,
}

/// Existence of `μ` with `∇ᵀμ = q` and `lower ≤ μ ≤ upper`.
///
/// `upper` entries may be `f64::INFINITY`. Lower bounds are removed by
/// shifting `q`, after which the instance is a plain max-flow problem.
pub fn hoffman_feasible(
    net: &Network,
    q: &ExitFlow,
    lower: &[f64],
    upper: &[f64],
) -> Result<BoundedReport> {
    check_dims(net, q)?;
    q.check_balanced(EPS_MASS)?;
    let m = net.arc_count();
    for (what, v) in [("lower bounds", lower), ("upper bounds", upper)] {
        if v.len() != m {
            return Err(Error::DimensionMismatch {
                what,
                expected: m,
                found: v.len(),
            });
        }
    }
    for a in 0..m {
        let (l, u) = (lower[a], upper[a]);
        if !(l.is_finite() && l >= 0.0 && !u.is_nan() && u >= l) {
            return Err(Error::BadBounds {
                arc: a,
                lower: l,
                upper: u,
            });
        }
    }
    let n = net.node_count();
    let base = net.incidence_apply(lower)?;
    let shifted: Vec<f64> = q.iter().zip(&base).map(|(qz, bz)| qz - bz).collect();
    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2, RESIDUAL_EPS);
    let arc_edges: Vec<usize> = net
        .arcs()
        .iter()
        .enumerate()
        .map(|(a, &(x, y))| g.add_edge(x, y, upper[a] - lower[a]))
        .collect();
    let mut supply = 0.0;
    for (z, &qz) in shifted.iter().enumerate() {
        if qz < 0.0 {
            g.add_edge(s, z, -qz);
        } else if qz > 0.0 {
            g.add_edge(z, t, qz);
            supply += qz;
        }
    }
    let value = g.max_flow(s, t);
    if value >= supply - feasibility_slack(supply) {
        let mu = arc_edges
            .iter()
            .zip(lower)
            .map(|(&e, &l)| l + g.flow(e).max(0.0))
            .collect();
        return Ok(BoundedReport {
            feasible: true,
            witness_flow: Some(mu),
            violating_set: None,
            slack: 0.0,
        });
    }
    let side = g.source_side(s);
    let sink_side: Vec<bool> = (0..n).map(|z| !side[z]).collect();
    let (outward, inward) = net.cut_arcs(&sink_side);
    let slack = inward.iter().map(|&a| upper[a]).sum::<f64>()
        - outward.iter().map(|&a| lower[a]).sum::<f64>()
        - q.mass_of(&sink_side);
    Ok(BoundedReport {
        feasible: false,
        witness_flow: None,
        violating_set: Some(members(&sink_side)),
        slack,
    })
}

/// Nodes that cannot reach any node with positive exit flow.
///
/// Returns `(ok, dead_nodes)`; `ok` holds when every node can reach a target.
pub fn check_assumption2(net: &Network, q: &ExitFlow) -> Result<(bool, Vec<usize>)> {
    check_dims(net, q)?;
    let targets: Vec<bool> = q.iter().map(|&v| v > 0.0).collect();
    let live = net.can_reach(&targets);
    let dead: Vec<usize> = (0..net.node_count()).filter(|&z| !live[z]).collect();
    Ok((dead.is_empty(), dead))
}

/// Removes dead nodes (which must carry `q = 0`).
///
/// Returns the live sub-network, its exit flow and the original index of
/// every kept node.
pub fn prune_dead_nodes(net: &Network, q: &ExitFlow) -> Result<(Network, ExitFlow, Vec<usize>)> {
    let (_, dead) = check_assumption2(net, q)?;
    if let Some(&z) = dead.iter().find(|&&z| q[z] < 0.0) {
        return Err(Error::DeadSource { node: z, q: q[z] });
    }
    let keep: Vec<bool> = {
        let d = mask(net.node_count(), dead.iter().copied());
        d.iter().map(|&b| !b).collect()
    };
    let (sub, node_map, _) = net.induced(&keep);
    let q_sub = ExitFlow::new(node_map.iter().map(|&z| q[z]).collect())?;
    Ok((sub, q_sub, node_map))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HallReport {
    pub ok: bool,
    /// Source set `K` (local source indices) whose supply falls short of the
    /// targets reachable only from `K`.
    pub violating_sources: Option<Vec<usize>>,
    /// `m({y : every supplier of y is in K}) - n(K)`; positive when violated.
    pub shortfall: f64,
}

/// Hall's condition: for every source set `K`, `n(K)` covers the demand of
/// the targets all of whose suppliers lie in `K`.
///
/// Small problems are checked exhaustively and report the most violated
/// set; larger ones go through max-flow.
pub fn hall_check(bp: &BipartiteProblem) -> Result<HallReport> {
    let total = bp.check_margins()?;
    let (a, b) = (bp.source_count(), bp.target_count());
    let slack = feasibility_slack(total);
    if a <= ENUMERATION_LIMIT {
        let mut suppliers = vec![0u32; b];
        for arc in bp.arcs() {
            suppliers[arc.y] |= 1 << arc.x;
        }
        let mut worst = (0.0, None);
        for k in 0u32..(1u32 << a) {
            let supply: f64 = (0..a)
                .filter(|&x| k & (1 << x) != 0)
                .map(|x| bp.n()[x])
                .sum();
            let captive: f64 = (0..b)
                .filter(|&y| suppliers[y] & !k == 0)
                .map(|y| bp.m()[y])
                .sum();
            let short = captive - supply;
            if short > slack && short > worst.0 {
                worst = (short, Some(k));
            }
        }
        return Ok(match worst.1 {
            None => HallReport {
                ok: true,
                violating_sources: None,
                shortfall: 0.0,
            },
            Some(k) => HallReport {
                ok: false,
                violating_sources: Some((0..a).filter(|&x| k & (1 << x) != 0).collect()),
                shortfall: worst.0,
            },
        });
    }
    let (s, t) = (a + b, a + b + 1);
    let mut g = FlowGraph::new(a + b + 2, RESIDUAL_EPS);
    for x in 0..a {
        g.add_edge(s, x, bp.n()[x]);
    }
    for y in 0..b {
        g.add_edge(a + y, t, bp.m()[y]);
    }
    for arc in bp.arcs() {
        g.add_edge(arc.x, a + arc.y, f64::INFINITY);
    }
    let value = g.max_flow(s, t);
    if value >= total - slack {
        return Ok(HallReport {
            ok: true,
            violating_sources: None,
            shortfall: 0.0,
        });
    }
    // Sources left on the sink side form K: every target outside the
    // source-side neighbourhood is supplied only from K.
    let side = g.source_side(s);
    let k: Vec<usize> = (0..a).filter(|&x| !side[x]).collect();
    let kmask = mask(a, k.iter().copied());
    let mut supplied_outside = vec![false; b];
    for arc in bp.arcs() {
        if !kmask[arc.x] {
            supplied_outside[arc.y] = true;
        }
    }
    let captive: f64 = (0..b)
        .filter(|&y| !supplied_outside[y])
        .map(|y| bp.m()[y])
        .sum();
    let supply: f64 = k.iter().map(|&x| bp.n()[x]).sum();
    Ok(HallReport {
        ok: false,
        violating_sources: Some(k),
        shortfall: captive - supply,
    })
}
