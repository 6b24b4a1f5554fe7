//! The end-to-end pipeline: assumption checks, reduction to the bipartite
//! problem, price extension, flow reconstruction and certificate checking.

use crate::analysis::{
    check_no_profitable_loops, flow_decompose, reduced_connection_functions,
    reduced_connection_map, Diagonal, FlowDecomposition, DEFAULT_PRICE_BOX,
};
use crate::bipartite::{solve_bipartite, BipartiteEquilibrium, BipartiteNode, BipartiteProblem};
use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::feasibility::{check_assumption2, check_feasibility, hall_check, prune_dead_nodes};
use crate::network::{ExitFlow, InternalFlow, Network};
use crate::{DEFAULT_TOL, EPS_MASS};

/// A network, one connection function per arc, and the exit flows.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowProblem {
    pub net: Network,
    pub g: Vec<Connection>,
    pub q: ExitFlow,
}

impl FlowProblem {
    /// Checks dimensions and `Σ q = 0`.
    pub fn new(net: Network, g: Vec<Connection>, q: ExitFlow) -> Result<Self> {
        if g.len() != net.arc_count() {
            return Err(Error::DimensionMismatch {
                what: "connection functions",
                expected: net.arc_count(),
                found: g.len(),
            });
        }
        if q.len() != net.node_count() {
            return Err(Error::DimensionMismatch {
                what: "exit flow",
                expected: net.node_count(),
                found: q.len(),
            });
        }
        q.check_balanced(balance_eps(&q))?;
        Ok(FlowProblem { net, g, q })
    }

    /// Rent `G_xy(p_y) - p_x` of every arc.
    pub fn rents(&self, p: &[f64]) -> Vec<f64> {
        self.net
            .arcs()
            .iter()
            .zip(&self.g)
            .map(|(&(x, y), g)| g.eval(p[y]) - p[x])
            .collect()
    }
}

fn balance_eps(q: &[f64]) -> f64 {
    EPS_MASS * q.iter().map(|v| v.abs()).sum::<f64>().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// Node priced at 0. It must be a source or a target in the first block;
    /// by default the lowest-indexed source of that block is used.
    pub ground: Option<usize>,
    /// Skip the comparison of the feasibility verdict with Hall's condition.
    pub skip_cross_check: bool,
    /// Half-width of the grid used when testing nonlinear loops.
    pub price_box: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: DEFAULT_TOL,
            ground: None,
            skip_cross_check: false,
            price_box: DEFAULT_PRICE_BOX,
        }
    }
}

/// Residuals of the three equilibrium conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// `max_z |(∇ᵀμ - q)_z|`.
    pub balance_residual: f64,
    /// `max_xy (G_xy(p_y) - p_x)₊`.
    pub max_positive_rent: f64,
    /// `Σ_xy μ_xy |p_x - G_xy(p_y)|`.
    pub cs_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Certificate {
    fn new(balance: f64, rent: f64, cs: f64, tol: f64) -> Self {
        let pass = [balance, rent, cs].iter().all(|r| *r <= tol);
        Certificate {
            balance_residual: balance,
            max_positive_rent: rent,
            cs_residual: cs,
            tol,
            pass,
        }
    }

    fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::Certificate {
                balance: self.balance_residual,
                rent: self.max_positive_rent,
                cs: self.cs_residual,
                tol: self.tol,
            })
        }
    }
}

/// Solver bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverMeta {
    /// Node whose price was pinned at 0.
    pub ground: Option<usize>,
    pub penalty_n: Option<f64>,
    /// Flow the accepted bipartite solution left on completion arcs.
    pub penalty_flow: f64,
    pub doublings: usize,
    pub blocks: usize,
    pub iterations: usize,
    pub extension_sweeps: usize,
    /// Largest change of a source or target price during extension.
    pub seed_drift: f64,
    /// Largest change of a target price during extension.
    pub target_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumOutcome {
    pub q: ExitFlow,
    pub mu: InternalFlow,
    pub p: Vec<f64>,
    pub certificate: Certificate,
    pub meta: SolverMeta,
}

/// Checks the equilibrium conditions for `out` (against its own `q`).
pub fn verify_equilibrium(
    fp: &FlowProblem,
    out: &EquilibriumOutcome,
    tol: f64,
) -> Result<Certificate> {
    let (n, m) = (fp.net.node_count(), fp.net.arc_count());
    for (what, expected, found) in [
        ("exit flow", n, out.q.len()),
        ("internal flow", m, out.mu.len()),
        ("prices", n, out.p.len()),
    ] {
        if expected != found {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                found,
            });
        }
    }
    let div = fp.net.incidence_apply(&out.mu)?;
    let balance = div
        .iter()
        .zip(out.q.iter())
        .map(|(d, q)| (d - q).abs())
        .fold(0.0, nan_max);
    let mut rent = 0.0f64;
    let mut cs = 0.0;
    for (r, &mu) in fp.rents(&out.p).into_iter().zip(out.mu.iter()) {
        rent = nan_max(rent, r);
        if mu != 0.0 {
            cs += mu * r.abs();
        }
    }
    if cs.is_nan() {
        cs = f64::INFINITY;
    }
    Ok(Certificate::new(balance, rent, cs, tol))
}

fn nan_max(acc: f64, v: f64) -> f64 {
    if v.is_nan() || acc.is_nan() {
        f64::INFINITY
    } else {
        acc.max(v)
    }
}

/// `(λq, λμ, p)`, with the linear residuals scaled alike.
pub fn scale_outcome(out: &EquilibriumOutcome, lambda: f64) -> Result<EquilibriumOutcome> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::NegativeScale(lambda));
    }
    let c = &out.certificate;
    Ok(EquilibriumOutcome {
        q: ExitFlow::new(out.q.iter().map(|v| lambda * v).collect())?,
        mu: InternalFlow::new(out.mu.iter().map(|v| lambda * v).collect())?,
        p: out.p.clone(),
        certificate: Certificate::new(
            lambda * c.balance_residual,
            c.max_positive_rent,
            lambda * c.cs_residual,
            c.tol,
        ),
        meta: out.meta,
    })
}

/// The associated bipartite problem: sources `{q < 0}`, targets `{q > 0}`,
/// and an arc wherever some path joins them, carrying the reduced
/// connection as an exact function of the target price. Sources and targets
/// are labelled with their node indices.
pub fn reduce_to_bipartite(fp: &FlowProblem) -> Result<BipartiteProblem> {
    let n = fp.net.node_count();
    let xs: Vec<usize> = (0..n).filter(|&z| fp.q[z] < 0.0).collect();
    let ys: Vec<usize> = (0..n).filter(|&z| fp.q[z] > 0.0).collect();
    let mut arcs = Vec::new();
    for (j, &y) in ys.iter().enumerate() {
        let at_zero = reduced_connection_map(&fp.net, &fp.g, y, 0.0, Diagonal::Strict)?;
        if at_zero.contains(&f64::INFINITY) {
            return Err(loop_error(fp));
        }
        let funcs = reduced_connection_functions(&fp.net, &fp.g, y)?;
        for (i, &x) in xs.iter().enumerate() {
            if let Some(f) = &funcs[x] {
                arcs.push((i, j, f.clone()));
            }
        }
    }
    let nx = xs.iter().map(|&x| -fp.q[x]).collect();
    let my = ys.iter().map(|&y| fp.q[y]).collect();
    BipartiteProblem::new(nx, my, arcs)?.with_labels(xs, ys)
}

fn loop_error(fp: &FlowProblem) -> Error {
    match check_no_profitable_loops(&fp.net, &fp.g, DEFAULT_PRICE_BOX).and_then(|r| r.into_result())
    {
        Err(e) => e,
        Ok(()) => Error::ProfitableLoop {
            cycle: Vec::new(),
            price: 0.0,
            profit: f64::INFINITY,
        },
    }
}

/// Result of the price-extension iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceExtension {
    pub p: Vec<f64>,
    /// Sweeps that changed at least one price.
    pub sweeps: usize,
    /// Arc that last raised each node's price; these arcs form a forest.
    pub updating: Vec<Option<usize>>,
    pub seed_drift: f64,
    pub target_drift: f64,
}

fn improves(new: f64, old: f64) -> bool {
    if old == f64::NEG_INFINITY {
        return new > old;
    }
    new > old + 1e-12 * old.abs().max(1.0)
}

fn sweep_with_arcs(net: &Network, g: &[Connection], p: &[f64]) -> (Vec<f64>, Vec<(usize, usize)>) {
    let mut next = p.to_vec();
    let mut best: Vec<Option<usize>> = vec![None; p.len()];
    for (a, &(x, y)) in net.arcs().iter().enumerate() {
        if p[y] == f64::NEG_INFINITY {
            continue;
        }
        let cand = g[a].eval(p[y]);
        if improves(cand, next[x]) {
            next[x] = cand;
            best[x] = Some(a);
        }
    }
    let changed = best
        .iter()
        .enumerate()
        .filter_map(|(z, a)| a.map(|a| (z, a)))
        .collect();
    (next, changed)
}

/// One Jacobi sweep `p_x ← max(p_x, max_y G_xy(p_y))`; returns the new
/// prices and the nodes that moved.
pub fn extension_sweep(net: &Network, g: &[Connection], p: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let (next, changed) = sweep_with_arcs(net, g, p);
    (next, changed.into_iter().map(|(z, _)| z).collect())
}

/// Extends the bipartite prices (labels of `bp` index into `fp.net`) to
/// every node by the max-update iteration, started at `-∞` off `X ∪ Y`.
pub fn extend_prices(
    fp: &FlowProblem,
    bp: &BipartiteProblem,
    be: &BipartiteEquilibrium,
) -> Result<PriceExtension> {
    let n = fp.net.node_count();
    let mut p = vec![f64::NEG_INFINITY; n];
    for (&x, &v) in bp.sources().iter().zip(&be.px) {
        p[x] = v;
    }
    for (&y, &v) in bp.targets().iter().zip(&be.py) {
        p[y] = v;
    }
    let seed = p.clone();
    let cap = n * fp.net.arc_count() + n;
    let mut updating = vec![None; n];
    let mut sweeps = 0;
    loop {
        let (next, changed) = sweep_with_arcs(&fp.net, &fp.g, &p);
        if changed.is_empty() {
            break;
        }
        sweeps += 1;
        if sweeps > cap {
            return Err(Error::ExtensionCap { cap });
        }
        for (z, a) in changed {
            updating[z] = Some(a);
        }
        p = next;
    }
    if let Some(z) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(
            format!("p[{z}]"),
            "node left unpriced by the extension; it cannot reach a target",
        ));
    }
    let drift = |nodes: &[usize]| {
        nodes
            .iter()
            .map(|&z| (p[z] - seed[z]).abs())
            .fold(0.0, f64::max)
    };
    let target_drift = drift(bp.targets());
    let seed_drift = drift(bp.sources()).max(target_drift);
    Ok(PriceExtension {
        p,
        sweeps,
        updating,
        seed_drift,
        target_drift,
    })
}

/// A flow for `fp.q` supported on the arcs whose rent is zero up to a
/// threshold, raised tenfold from round-off level until the zero-rent arcs
/// carry `q` (or the threshold passes `tol`). Loops are dropped from the
/// result, which only carries paths from sources to targets.
pub fn reconstruct_flow(fp: &FlowProblem, p: &[f64], tol: f64) -> Result<InternalFlow> {
    if p.len() != fp.net.node_count() {
        return Err(Error::DimensionMismatch {
            what: "prices",
            expected: fp.net.node_count(),
            found: p.len(),
        });
    }
    let rents = fp.rents(p);
    let scale = p.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let limit = tol.max(1e-12 * scale);
    let mut thr = 1e-12 * scale;
    loop {
        let keep: Vec<bool> = rents.iter().map(|r| r.abs() <= thr).collect();
        let (sub, arc_map) = fp.net.with_arcs(&keep);
        let report = check_feasibility(&sub, &fp.q)?;
        if let Some(w) = report.witness_flow {
            let mut mu = vec![0.0; fp.net.arc_count()];
            for (f, &a) in w.iter().zip(&arc_map) {
                mu[a] = *f;
            }
            let mu = InternalFlow::new(mu)?;
            let paths = FlowDecomposition {
                path_flows: flow_decompose(&fp.net, &mu, &fp.q)?.path_flows,
                loop_flows: Vec::new(),
            };
            return InternalFlow::new(paths.recompose(&fp.net));
        }
        if thr >= limit {
            return Err(Error::Reconstruction(format!(
                "zero-rent arcs cannot carry the exit flow (threshold {thr:e})"
            )));
        }
        thr = (thr * 10.0).min(limit);
    }
}

/// Verdicts of the individual checks, each with its witness on failure.
#[derive(Debug)]
pub struct Diagnostics {
    pub balance: Result<()>,
    /// Dead nodes (all with `q = 0`) on success.
    pub assumption2: Result<Vec<usize>>,
    pub assumption3: Result<()>,
    /// Not run when `q` is unbalanced.
    pub assumption1: Option<Result<()>>,
}

impl Diagnostics {
    pub fn ok(&self) -> bool {
        self.balance.is_ok()
            && self.assumption2.is_ok()
            && self.assumption3.is_ok()
            && matches!(self.assumption1, Some(Ok(())))
    }

    /// Errors in the order the checks run.
    pub fn errors(&self) -> Vec<&Error> {
        let mut out = Vec::new();
        if let Err(e) = &self.balance {
            out.push(e);
        }
        if let Err(e) = &self.assumption2 {
            out.push(e);
        }
        if let Err(e) = &self.assumption3 {
            out.push(e);
        }
        if let Some(Err(e)) = &self.assumption1 {
            out.push(e);
        }
        out
    }
}

fn check_a2(fp: &FlowProblem) -> Result<(Network, ExitFlow, Vec<usize>)> {
    prune_dead_nodes(&fp.net, &fp.q)
}

fn check_a3(fp: &FlowProblem, price_box: f64) -> Result<()> {
    check_no_profitable_loops(&fp.net, &fp.g, price_box)?.into_result()
}

fn check_a1(net: &Network, q: &ExitFlow, node_map: &[usize]) -> Result<InternalFlow> {
    check_feasibility(net, q)?
        .into_result()
        .map_err(|e| e.remap_nodes(node_map))
}

/// Runs every assumption check, regardless of earlier failures.
pub fn diagnose(fp: &FlowProblem, price_box: f64) -> Diagnostics {
    let balance = fp.q.check_balanced(balance_eps(&fp.q));
    let assumption2 =
        check_a2(fp).and_then(|_| check_assumption2(&fp.net, &fp.q).map(|(_, dead)| dead));
    let assumption3 = check_a3(fp, price_box);
    let assumption1 = balance.is_ok().then(|| {
        // Feasibility does not depend on pruning: dead nodes cannot pass
        // flow on to a target.
        let identity: Vec<usize> = (0..fp.net.node_count()).collect();
        check_a1(&fp.net, &fp.q, &identity).map(|_| ())
    });
    Diagnostics {
        balance,
        assumption2,
        assumption3,
        assumption1,
    }
}

/// Computes an equilibrium outcome, or the first failed assumption with its
/// witness.
///
/// Checks run as: balance of `q`, reachability of targets (dead nodes with
/// `q = 0` are set aside), absence of profitable loops, transportability of
/// `q`. The live problem is then reduced to its bipartite problem, solved,
/// and the prices are extended back to every node before a flow is rebuilt
/// on the zero-rent arcs. The outcome is certificate-checked at `tol`.
pub fn solve(fp: &FlowProblem, opts: &SolveOptions) -> Result<EquilibriumOutcome> {
    fp.q.check_balanced(balance_eps(&fp.q))?;
    let (net, q, node_map) = check_a2(fp)?;
    check_a3(fp, opts.price_box)?;
    check_a1(&net, &q, &node_map)?;

    let arc_map: Vec<usize> = net
        .arcs()
        .iter()
        .map(|&(u, v)| {
            fp.net
                .find_arc(node_map[u], node_map[v])
                .expect("sub-network arcs exist in the full network")
        })
        .collect();
    let live = FlowProblem {
        g: arc_map.iter().map(|&a| fp.g[a].clone()).collect(),
        net,
        q,
    };
    let mut local = vec![usize::MAX; fp.net.node_count()];
    for (i, &z) in node_map.iter().enumerate() {
        local[z] = i;
    }

    let bp = reduce_to_bipartite(&live).map_err(|e| e.remap_nodes(&node_map))?;
    if !opts.skip_cross_check {
        let hall = hall_check(&bp)?.ok;
        if !hall {
            return Err(Error::CrossCheck {
                feasible: true,
                hall,
            });
        }
    }
    let ground = match opts.ground {
        None => None,
        Some(z) => {
            let lz = local.get(z).copied().unwrap_or(usize::MAX);
            let node = bp
                .sources()
                .iter()
                .position(|&x| x == lz)
                .map(BipartiteNode::Source)
                .or_else(|| {
                    bp.targets()
                        .iter()
                        .position(|&y| y == lz)
                        .map(BipartiteNode::Target)
                });
            Some(node.ok_or_else(|| {
                Error::Ground(format!("node {z} is neither a source nor a target"))
            })?)
        }
    };
    let be = solve_bipartite(&bp, ground, opts.tol).map_err(|e| e.remap_nodes(&node_map))?;
    let ext = extend_prices(&live, &bp, &be)?;
    let mu_live = reconstruct_flow(&live, &ext.p, opts.tol)?;

    let mut p = vec![f64::NAN; fp.net.node_count()];
    for (i, &z) in node_map.iter().enumerate() {
        p[z] = ext.p[i];
    }
    price_dead_nodes(fp, &mut p);
    let mut mu = vec![0.0; fp.net.arc_count()];
    for (f, &a) in mu_live.iter().zip(&arc_map) {
        mu[a] = *f;
    }
    let ground_node = be.ground.map(|g| {
        let l = match g {
            BipartiteNode::Source(x) => bp.sources()[x],
            BipartiteNode::Target(y) => bp.targets()[y],
        };
        node_map[l]
    });
    let mut out = EquilibriumOutcome {
        q: fp.q.clone(),
        mu: InternalFlow::new(mu)?,
        p,
        certificate: Certificate::new(0.0, 0.0, 0.0, opts.tol),
        meta: SolverMeta {
            ground: ground_node,
            penalty_n: be.stats.penalty_n,
            penalty_flow: be.stats.penalty_flow,
            doublings: be.stats.doublings,
            blocks: be.stats.blocks,
            iterations: be.stats.iterations,
            extension_sweeps: ext.sweeps,
            seed_drift: ext.seed_drift,
            target_drift: ext.target_drift,
        },
    };
    out.certificate = verify_equilibrium(fp, &out, opts.tol)?.into_result()?;
    Ok(out)
}

/// Prices for nodes that cannot reach a target (the entries still `NaN`):
/// low enough that no arc into them has positive rent, then lowered along
/// arcs between them until none of those has positive rent either.
fn price_dead_nodes(fp: &FlowProblem, p: &mut [f64]) {
    let dead: Vec<bool> = p.iter().map(|v| v.is_nan()).collect();
    if !dead.iter().any(|&d| d) {
        return;
    }
    for z in 0..p.len() {
        if dead[z] {
            p[z] = 0.0;
        }
    }
    for (a, &(u, v)) in fp.net.arcs().iter().enumerate() {
        if !dead[u] && dead[v] {
            p[v] = p[v].min(fp.g[a].solve_for(p[u]));
        }
    }
    for _ in 0..=p.len() {
        let mut changed = false;
        for (a, &(u, v)) in fp.net.arcs().iter().enumerate() {
            if dead[u] && dead[v] {
                let cap = fp.g[a].solve_for(p[u]);
                if cap < p[v] - 1e-12 * p[v].abs().max(1.0) {
                    p[v] = cap;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(
        nodes: &[&str],
        arcs: &[(&str, &str)],
        g: Vec<Connection>,
        q: &[f64],
    ) -> FlowProblem {
        let net = Network::from_names(nodes, arcs).unwrap();
        FlowProblem::new(net, g, ExitFlow::new(q.to_vec()).unwrap()).unwrap()
    }

    fn chain() -> FlowProblem {
        problem(
            &["a", "b"],
            &[("a", "b")],
            vec![Connection::cost(1.0)],
            &[-1.0, 1.0],
        )
    }

    fn outcome(mu: f64, p: &[f64]) -> EquilibriumOutcome {
        EquilibriumOutcome {
            q: ExitFlow::new(vec![-1.0, 1.0]).unwrap(),
            mu: InternalFlow::new(vec![mu]).unwrap(),
            p: p.to_vec(),
            certificate: Certificate::new(0.0, 0.0, 0.0, 1e-8),
            meta: SolverMeta::default(),
        }
    }

    #[test]
    fn unbalanced_problem_is_rejected() {
        let net = Network::from_names(&["a", "b"], &[("a", "b")]).unwrap();
        let r = FlowProblem::new(
            net,
            vec![Connection::cost(1.0)],
            ExitFlow::new(vec![-1.0, 2.0]).unwrap(),
        );
        assert!(matches!(r, Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn reduce_chain_and_diamond() {
        let bp = reduce_to_bipartite(&chain()).unwrap();
        assert_eq!(bp.sources(), &[0]);
        assert_eq!(bp.targets(), &[1]);
        assert_eq!(bp.arcs()[0].g, Connection::cost(1.0));

        let fp = problem(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("a", "c"), ("c", "d")],
            vec![
                Connection::cost(1.0),
                Connection::cost(2.0),
                Connection::cost(1.0),
                Connection::cost(1.0),
            ],
            &[-1.0, 0.0, 0.0, 1.0],
        );
        let bp = reduce_to_bipartite(&fp).unwrap();
        assert_eq!(bp.arcs().len(), 1);
        assert_eq!(bp.arcs()[0].g, Connection::cost(2.0));
    }

    #[test]
    fn reduce_drops_unconnected_pairs() {
        let fp = problem(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("c", "d")],
            vec![Connection::cost(1.0), Connection::cost(1.0)],
            &[-1.0, 1.0, -1.0, 1.0],
        );
        let bp = reduce_to_bipartite(&fp).unwrap();
        assert_eq!(bp.arcs().len(), 2);
        assert!(bp.arc_index(0, 1).is_none());
    }

    #[test]
    fn extension_through_an_interior_node() {
        let fp = problem(
            &["a", "m", "b"],
            &[("a", "m"), ("m", "b")],
            vec![Connection::cost(1.0), Connection::cost(1.0)],
            &[-1.0, 0.0, 1.0],
        );
        let out = solve(&fp, &SolveOptions::default()).unwrap();
        assert_eq!(out.p, vec![0.0, 1.0, 2.0]);
        assert_eq!(out.mu.to_vec(), vec![1.0, 1.0]);
        assert_eq!(out.meta.extension_sweeps, 1);
        assert_eq!(out.meta.target_drift, 0.0);
    }

    #[test]
    fn interior_node_takes_the_larger_threshold() {
        // m feeds two targets; its price is the better of the two offers.
        let fp = problem(
            &["a", "m", "b", "c"],
            &[("a", "m"), ("m", "b"), ("m", "c")],
            vec![
                Connection::cost(1.0),
                Connection::cost(1.0),
                Connection::cost(3.0),
            ],
            &[-2.0, 0.0, 1.0, 1.0],
        );
        let out = solve(&fp, &SolveOptions::default()).unwrap();
        let p = &out.p;
        assert_eq!(p[1], (p[2] - 1.0).max(p[3] - 3.0));
        assert!(out.certificate.pass);
    }

    #[test]
    fn diamond_uses_only_the_cheaper_path() {
        let fp = problem(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("a", "c"), ("c", "d")],
            vec![
                Connection::cost(1.0),
                Connection::cost(2.0),
                Connection::cost(1.0),
                Connection::cost(1.0),
            ],
            &[-1.0, 0.0, 0.0, 1.0],
        );
        let out = solve(&fp, &SolveOptions::default()).unwrap();
        assert_eq!(out.mu.to_vec(), vec![0.0, 0.0, 1.0, 1.0]);
        assert!(fp.rents(&out.p)[0] < 0.0 || fp.rents(&out.p)[1] < 0.0);
    }

    #[test]
    fn zero_exit_flow_gives_zero_flow() {
        let fp = problem(
            &["a", "b"],
            &[("a", "b")],
            vec![Connection::cost(1.0)],
            &[0.0, 0.0],
        );
        let out = solve(&fp, &SolveOptions::default()).unwrap();
        assert_eq!(out.mu.to_vec(), vec![0.0]);
        assert!(out.certificate.pass);
    }

    #[test]
    fn solve_chain() {
        let out = solve(&chain(), &SolveOptions::default()).unwrap();
        assert_eq!(out.mu.to_vec(), vec![1.0]);
        assert_eq!(out.p, vec![0.0, 1.0]);
        assert_eq!(out.meta.ground, Some(0));
        let c = out.certificate;
        assert_eq!(
            (c.balance_residual, c.max_positive_rent, c.cs_residual),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn solve_reports_witnesses() {
        let fp = problem(
            &["a", "b"],
            &[("a", "b")],
            vec![Connection::cost(1.0)],
            &[1.0, -1.0],
        );
        match solve(&fp, &SolveOptions::default()) {
            Err(Error::Infeasible { violating_set, .. }) => assert_eq!(violating_set, vec![1]),
            Err(Error::DeadSource { node, .. }) => assert_eq!(node, 1),
            other => panic!("unexpected {other:?}"),
        }
        let fp = problem(
            &["a", "b"],
            &[("a", "b"), ("b", "a")],
            vec![Connection::cost(-1.0), Connection::cost(0.0)],
            &[-1.0, 1.0],
        );
        match solve(&fp, &SolveOptions::default()) {
            Err(Error::ProfitableLoop { cycle, .. }) => assert_eq!(cycle, vec![0, 1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dead_nodes_get_harmless_prices() {
        let fp = problem(
            &["a", "b", "d", "e"],
            &[("a", "b"), ("a", "d"), ("d", "e"), ("e", "d")],
            vec![
                Connection::cost(1.0),
                Connection::cost(0.0),
                Connection::cost(1.0),
                Connection::cost(1.0),
            ],
            &[-1.0, 1.0, 0.0, 0.0],
        );
        let out = solve(&fp, &SolveOptions::default()).unwrap();
        assert!(out.certificate.pass);
        assert!(fp.rents(&out.p).iter().all(|r| *r <= 0.0));
    }

    #[test]
    fn ground_choice() {
        let opts = SolveOptions {
            ground: Some(1),
            ..SolveOptions::default()
        };
        let out = solve(&chain(), &opts).unwrap();
        assert_eq!(out.p, vec![-1.0, 0.0]);
        let fp = problem(
            &["a", "m", "b"],
            &[("a", "m"), ("m", "b")],
            vec![Connection::cost(1.0), Connection::cost(1.0)],
            &[-1.0, 0.0, 1.0],
        );
        let opts = SolveOptions {
            ground: Some(1),
            ..SolveOptions::default()
        };
        assert!(matches!(solve(&fp, &opts), Err(Error::Ground(_))));
    }

    #[test]
    fn certificate_examples() {
        let fp = chain();
        let c = verify_equilibrium(&fp, &outcome(1.0, &[0.0, 1.0]), 1e-8).unwrap();
        assert!(c.pass);
        let c = verify_equilibrium(&fp, &outcome(1.0, &[0.0, 2.0]), 1e-8).unwrap();
        assert_eq!(c.max_positive_rent, 1.0);
        assert!(!c.pass);
        let c = verify_equilibrium(&fp, &outcome(1.0, &[0.0, 0.5]), 1e-8).unwrap();
        assert_eq!(c.cs_residual, 0.5);
        assert!(!c.pass);
    }

    #[test]
    fn scaling() {
        let fp = chain();
        let out = solve(&fp, &SolveOptions::default()).unwrap();
        let zero = scale_outcome(&out, 0.0).unwrap();
        assert_eq!(zero.mu.to_vec(), vec![0.0]);
        assert!(verify_equilibrium(&fp, &zero, 1e-8).unwrap().pass);
        assert_eq!(scale_outcome(&out, 1.0).unwrap(), out);
        let big = scale_outcome(&out, 2.5).unwrap();
        assert_eq!(big.mu.to_vec(), vec![2.5]);
        assert!(verify_equilibrium(&fp, &big, 1e-8).unwrap().pass);
        assert!(matches!(
            scale_outcome(&out, -1.0),
            Err(Error::NegativeScale(_))
        ));
    }

    #[test]
    fn diagnostics_collect_every_failure() {
        let fp = FlowProblem {
            net: Network::from_names(&["a", "b", "c"], &[("a", "b"), ("b", "a")]).unwrap(),
            g: vec![Connection::cost(-1.0), Connection::cost(0.0)],
            q: ExitFlow::new(vec![1.0, 0.0, -1.0]).unwrap(),
        };
        let d = diagnose(&fp, DEFAULT_PRICE_BOX);
        assert!(!d.ok());
        assert!(d.balance.is_ok());
        assert!(matches!(
            d.assumption2,
            Err(Error::DeadSource { node: 2, .. })
        ));
        assert!(matches!(d.assumption3, Err(Error::ProfitableLoop { .. })));
        assert!(matches!(d.assumption1, Some(Err(Error::Infeasible { .. }))));
        assert_eq!(d.errors().len(), 3);
    }
}
