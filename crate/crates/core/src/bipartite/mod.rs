//! The bipartite matching problem associated with a flow problem.
//!
//! Sources `X` ship `n_x > 0`, targets `Y` receive `m_y > 0`, and each arc
//! `xy` carries a connection `G̃_xy`. An equilibrium is a flow meeting both
//! margins together with prices such that `p_x >= G̃_xy(p_y)` everywhere,
//! with equality on arcs that carry flow, and a ground node priced at a fixed
//! value.

mod blocks;
mod simplex;
mod tu;

use std::collections::HashMap;

pub use blocks::{block_decompose, Block};
pub use simplex::solve_complete_bipartite;
pub use tu::solve_bipartite_tu;

use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::feasibility::hall_check;
use crate::EPS_MASS;

/// Most penalty doublings attempted before giving up.
pub const MAX_DOUBLINGS: usize = 60;

/// A node of the bipartite problem, by local index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BipartiteNode {
    Source(usize),
    Target(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteArc {
    pub x: usize,
    pub y: usize,
    pub g: Connection,
    /// Added by the penalty completion.
    pub completion: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteProblem {
    sources: Vec<usize>,
    targets: Vec<usize>,
    n: Vec<f64>,
    m: Vec<f64>,
    arcs: Vec<BipartiteArc>,
    index: HashMap<(usize, usize), usize>,
}

impl BipartiteProblem {
    /// Margins `n` over sources and `m` over targets, arcs as
    /// `(source, target, G̃)` with local indices.
    pub fn new(n: Vec<f64>, m: Vec<f64>, arcs: Vec<(usize, usize, Connection)>) -> Result<Self> {
        for (what, v) in [("n", &n), ("m", &m)] {
            if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::validation(
                    format!("{what}[{i}]"),
                    "margins must be finite and positive",
                ));
            }
        }
        let mut index = HashMap::with_capacity(arcs.len());
        let mut list = Vec::with_capacity(arcs.len());
        for (i, (x, y, g)) in arcs.into_iter().enumerate() {
            if x >= n.len() || y >= m.len() {
                return Err(Error::validation(
                    format!("arcs[{i}]"),
                    "endpoint out of range",
                ));
            }
            if index.insert((x, y), i).is_some() {
                return Err(Error::validation(format!("arcs[{i}]"), "duplicate arc"));
            }
            list.push(BipartiteArc {
                x,
                y,
                g,
                completion: false,
            });
        }
        Ok(BipartiteProblem {
            sources: (0..n.len()).collect(),
            targets: (0..m.len()).collect(),
            n,
            m,
            arcs: list,
            index,
        })
    }

    /// Attaches external identifiers (e.g. network node indices) to the
    /// sources and targets.
    pub fn with_labels(mut self, sources: Vec<usize>, targets: Vec<usize>) -> Result<Self> {
        if sources.len() != self.n.len() || targets.len() != self.m.len() {
            return Err(Error::validation(
                "labels",
                "one label per source and target required",
            ));
        }
        self.sources = sources;
        self.targets = targets;
        Ok(self)
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn source_count(&self) -> usize {
        self.n.len()
    }

    pub fn target_count(&self) -> usize {
        self.m.len()
    }

    pub fn n(&self) -> &[f64] {
        &self.n
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn arcs(&self) -> &[BipartiteArc] {
        &self.arcs
    }

    pub fn arc_index(&self, x: usize, y: usize) -> Option<usize> {
        self.index.get(&(x, y)).copied()
    }

    pub fn is_complete(&self) -> bool {
        self.arcs.len() == self.n.len() * self.m.len()
    }

    pub fn is_transferable(&self) -> bool {
        self.arcs.iter().all(|a| a.g.is_transferable())
    }

    /// Checks `Σn = Σm` and returns the common total.
    pub fn check_margins(&self) -> Result<f64> {
        let sn: f64 = self.n.iter().sum();
        let sm: f64 = self.m.iter().sum();
        if (sn - sm).abs() > EPS_MASS * sn.max(sm).max(1.0) {
            return Err(Error::validation(
                "margins",
                format!("source total {sn} differs from target total {sm}"),
            ));
        }
        Ok(sn)
    }

    /// The sub-problem on the given sources and targets (local indices of
    /// `self`), with the indices of the kept arcs.
    pub fn restrict(&self, xs: &[usize], ys: &[usize]) -> (BipartiteProblem, Vec<usize>) {
        let mut lx = vec![usize::MAX; self.n.len()];
        let mut ly = vec![usize::MAX; self.m.len()];
        for (i, &x) in xs.iter().enumerate() {
            lx[x] = i;
        }
        for (j, &y) in ys.iter().enumerate() {
            ly[y] = j;
        }
        let mut arcs = Vec::new();
        let mut arc_map = Vec::new();
        let mut index = HashMap::new();
        for (k, a) in self.arcs.iter().enumerate() {
            if lx[a.x] != usize::MAX && ly[a.y] != usize::MAX {
                index.insert((lx[a.x], ly[a.y]), arcs.len());
                arcs.push(BipartiteArc {
                    x: lx[a.x],
                    y: ly[a.y],
                    g: a.g.clone(),
                    completion: a.completion,
                });
                arc_map.push(k);
            }
        }
        let sub = BipartiteProblem {
            sources: xs.iter().map(|&x| self.sources[x]).collect(),
            targets: ys.iter().map(|&y| self.targets[y]).collect(),
            n: xs.iter().map(|&x| self.n[x]).collect(),
            m: ys.iter().map(|&y| self.m[y]).collect(),
            arcs,
            index,
        };
        (sub, arc_map)
    }

    fn hall_error(&self) -> Error {
        match hall_check(self) {
            Ok(r) => Error::HallViolated {
                sources: r
                    .violating_sources
                    .unwrap_or_default()
                    .into_iter()
                    .map(|x| self.sources[x])
                    .collect(),
                shortfall: r.shortfall,
            },
            Err(e) => e,
        }
    }
}

/// Residuals of the equilibrium system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// Largest margin violation over sources and targets.
    pub margin: f64,
    /// Largest positive rent `G̃_xy(p_y) - p_x`.
    pub rent: f64,
    /// `Σ μ_xy |p_x - G̃_xy(p_y)|`.
    pub cs: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.margin.max(self.rent).max(self.cs)
    }
}

pub fn residuals(bp: &BipartiteProblem, flow: &[f64], px: &[f64], py: &[f64]) -> Residuals {
    let mut out_x = vec![0.0; bp.source_count()];
    let mut in_y = vec![0.0; bp.target_count()];
    let mut r = Residuals::default();
    for (a, &f) in bp.arcs.iter().zip(flow) {
        out_x[a.x] += f;
        in_y[a.y] += f;
        let rent = a.g.eval(py[a.y]) - px[a.x];
        r.rent = r.rent.max(rent);
        r.cs += f * rent.abs();
    }
    for (o, n) in out_x.iter().zip(&bp.n) {
        r.margin = r.margin.max((o - n).abs());
    }
    for (i, m) in in_y.iter().zip(&bp.m) {
        r.margin = r.margin.max((i - m).abs());
    }
    r
}

/// Solver bookkeeping carried with an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    /// Largest penalty used by a completion, if any block needed one.
    pub penalty_n: Option<f64>,
    /// Largest number of penalty doublings over the blocks.
    pub doublings: usize,
    /// Largest flow left on completion arcs by the accepted solution.
    pub penalty_flow: f64,
    pub blocks: usize,
    /// Pivots, augmentations and ground adjustments, summed.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteEquilibrium {
    /// Flow per arc of the problem that was solved.
    pub flow: Vec<f64>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub ground: Option<BipartiteNode>,
    pub residuals: Residuals,
    pub stats: SolveStats,
}

impl BipartiteEquilibrium {
    pub fn price(&self, node: BipartiteNode) -> f64 {
        match node {
            BipartiteNode::Source(x) => self.px[x],
            BipartiteNode::Target(y) => self.py[y],
        }
    }
}

fn check_ground(bp: &BipartiteProblem, ground: BipartiteNode) -> Result<()> {
    let ok = match ground {
        BipartiteNode::Source(x) => x < bp.source_count(),
        BipartiteNode::Target(y) => y < bp.target_count(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Ground(format!("{ground:?} is out of range")))
    }
}

/// Extends the arc set to all of `X × Y`; the added arcs carry `p - n`.
pub fn build_penalty_completion(bp: &BipartiteProblem, n: f64) -> Result<BipartiteProblem> {
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::validation(
            "n",
            "penalty must be finite and positive",
        ));
    }
    let mut out = bp.clone();
    for x in 0..bp.source_count() {
        for y in 0..bp.target_count() {
            if bp.arc_index(x, y).is_none() {
                out.index.insert((x, y), out.arcs.len());
                out.arcs.push(BipartiteArc {
                    x,
                    y,
                    g: Connection::Penalty { n },
                    completion: true,
                });
            }
        }
    }
    Ok(out)
}

/// Starting penalty: a bound on how far prices can spread along a chain of
/// binding arcs, from the arcs' values at zero and at their breakpoints.
fn initial_penalty(bp: &BipartiteProblem) -> f64 {
    let spread = bp
        .arcs
        .iter()
        .flat_map(|a| {
            let g = &a.g;
            std::iter::once(g.eval(0.0).abs()).chain(
                g.breakpoints()
                    .into_iter()
                    .map(move |p| (g.eval(p) - p).abs()),
            )
        })
        .fold(0.0, f64::max);
    1.0 + (bp.source_count() + bp.target_count()) as f64 * spread
}

/// Solves an incomplete problem through penalty completions with doubling
/// penalties until no completion arc carries flow.
pub fn escalate_penalty(
    bp: &BipartiteProblem,
    ground: BipartiteNode,
    ground_value: f64,
    tol: f64,
) -> Result<BipartiteEquilibrium> {
    check_ground(bp, ground)?;
    bp.check_margins()?;
    if bp.is_transferable() {
        return tu::solve_tu(bp, ground, ground_value);
    }
    if bp.is_complete() {
        return solve_complete_bipartite(bp, ground, ground_value, tol);
    }
    solve_penalty_completion(bp, ground, ground_value, tol)
}

/// The doubling loop behind [`escalate_penalty`], without its shortcuts for
/// transferable or complete problems.
pub fn solve_penalty_completion(
    bp: &BipartiteProblem,
    ground: BipartiteNode,
    ground_value: f64,
    tol: f64,
) -> Result<BipartiteEquilibrium> {
    check_ground(bp, ground)?;
    bp.check_margins()?;
    let mut n = initial_penalty(bp);
    let mut iterations = 0;
    let mut penalty_flow = f64::INFINITY;
    for doublings in 0..=MAX_DOUBLINGS {
        let full = build_penalty_completion(bp, n)?;
        let eq = solve_complete_bipartite(&full, ground, ground_value, tol)?;
        iterations += eq.stats.iterations;
        penalty_flow = full
            .arcs
            .iter()
            .zip(&eq.flow)
            .filter(|(a, _)| a.completion)
            .map(|(_, &f)| f)
            .fold(0.0, f64::max);
        if penalty_flow <= EPS_MASS {
            let flow = eq.flow[..bp.arcs.len()].to_vec();
            let res = residuals(bp, &flow, &eq.px, &eq.py);
            return Ok(BipartiteEquilibrium {
                flow,
                px: eq.px,
                py: eq.py,
                ground: Some(ground),
                residuals: res,
                stats: SolveStats {
                    penalty_n: Some(n),
                    doublings,
                    penalty_flow,
                    blocks: 1,
                    iterations,
                },
            });
        }
        n *= 2.0;
    }
    Err(Error::PenaltyEscalation {
        doublings: MAX_DOUBLINGS,
        penalty_flow,
    })
}

const MAX_GROUND_STEPS: usize = 200;

/// Solves the bipartite problem block by block.
///
/// The first block is pinned at its ground node (price 0); every later
/// block's ground price is raised until no arc into an earlier block has
/// positive rent.
pub fn solve_bipartite(
    bp: &BipartiteProblem,
    ground: Option<BipartiteNode>,
    tol: f64,
) -> Result<BipartiteEquilibrium> {
    bp.check_margins()?;
    if let Some(g) = ground {
        check_ground(bp, g)?;
    }
    let (a, b) = (bp.source_count(), bp.target_count());
    if a == 0 && b == 0 {
        return Ok(BipartiteEquilibrium {
            flow: vec![0.0; bp.arcs.len()],
            px: vec![],
            py: vec![],
            ground: None,
            residuals: Residuals::default(),
            stats: SolveStats::default(),
        });
    }
    if a == 0 || b == 0 || !hall_check(bp)?.ok {
        return Err(bp.hall_error());
    }
    let blocks = block_decompose(bp)?;
    let mut flow = vec![0.0; bp.arcs.len()];
    let mut px = vec![f64::NAN; a];
    let mut py = vec![f64::NAN; b];
    let mut block_of_y = vec![usize::MAX; b];
    let mut stats = SolveStats {
        blocks: blocks.len(),
        ..SolveStats::default()
    };
    let mut first_ground = None;
    for (k, block) in blocks.iter().enumerate() {
        let (sub, arc_map) = bp.restrict(&block.sources, &block.targets);
        let local_ground = if let (0, Some(g)) = (k, ground) {
            let found = match g {
                BipartiteNode::Source(x) => block
                    .sources
                    .iter()
                    .position(|&v| v == x)
                    .map(BipartiteNode::Source),
                BipartiteNode::Target(y) => block
                    .targets
                    .iter()
                    .position(|&v| v == y)
                    .map(BipartiteNode::Target),
            };
            found.ok_or_else(|| {
                Error::Ground(format!(
                    "{g:?} lies in a later block; only nodes of the first block can be pinned"
                ))
            })?
        } else {
            BipartiteNode::Source(0)
        };
        if k == 0 {
            first_ground = Some(match local_ground {
                BipartiteNode::Source(i) => BipartiteNode::Source(block.sources[i]),
                BipartiteNode::Target(j) => BipartiteNode::Target(block.targets[j]),
            });
        }
        // Arcs from this block's sources into earlier blocks' targets.
        let cross: Vec<usize> = (0..bp.arcs.len())
            .filter(|&i| {
                let arc = &bp.arcs[i];
                block.sources.contains(&arc.x) && block_of_y[arc.y] < k
            })
            .collect();
        let cross_rent = |eq: &BipartiteEquilibrium| {
            cross
                .iter()
                .map(|&i| {
                    let arc = &bp.arcs[i];
                    let lx = block
                        .sources
                        .iter()
                        .position(|&v| v == arc.x)
                        .expect("in block");
                    arc.g.eval(py[arc.y]) - eq.px[lx]
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut eq = escalate_penalty(&sub, local_ground, 0.0, tol)?;
        stats.iterations += eq.stats.iterations;
        let mut rent = cross_rent(&eq);
        if k > 0 && rent > 0.0 {
            if sub.is_transferable() {
                // Prices shift rigidly with the ground value.
                for p in eq.px.iter_mut().chain(eq.py.iter_mut()) {
                    *p += rent;
                }
                rent = cross_rent(&eq);
                stats.iterations += 1;
            } else {
                let mut offset = rent.max(1.0);
                let mut steps = 0;
                while rent > 0.0 {
                    steps += 1;
                    if steps > MAX_GROUND_STEPS {
                        return Err(Error::NonConvergence {
                            stage: "block ground offset",
                            iterations: steps,
                            residual: rent,
                        });
                    }
                    let next = escalate_penalty(&sub, local_ground, offset, tol)?;
                    stats.iterations += next.stats.iterations + 1;
                    let drop = eq
                        .px
                        .iter()
                        .zip(&next.px)
                        .chain(eq.py.iter().zip(&next.py))
                        .any(|(old, new)| *new < old - tol * old.abs().max(1.0));
                    if drop {
                        return Err(Error::MonotoneResponse { block: k });
                    }
                    eq = next;
                    rent = cross_rent(&eq);
                    offset = (2.0 * offset).max(offset + rent);
                }
            }
        }
        let _ = rent;
        stats.penalty_n = match (stats.penalty_n, eq.stats.penalty_n) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        stats.doublings = stats.doublings.max(eq.stats.doublings);
        stats.penalty_flow = stats.penalty_flow.max(eq.stats.penalty_flow);
        for (i, &x) in block.sources.iter().enumerate() {
            px[x] = eq.px[i];
        }
        for (j, &y) in block.targets.iter().enumerate() {
            py[y] = eq.py[j];
            block_of_y[y] = k;
        }
        for (local, &global) in arc_map.iter().enumerate() {
            flow[global] = eq.flow[local];
        }
    }
    let res = residuals(bp, &flow, &px, &py);
    Ok(BipartiteEquilibrium {
        flow,
        px,
        py,
        ground: first_ground,
        residuals: res,
        stats,
    })
}
