//! Equilibrium flows on directed networks.
//!
//! A flow problem is a directed network whose arcs carry increasing,
//! surjective *connection functions* `G_xy`, together with a vector of exit
//! flows `q` (negative at sources, positive at targets). An equilibrium is a
//! triple `(q, mu, p)` where the internal flow `mu` balances `q`, no arc has
//! positive rent (`p_x >= G_xy(p_y)`), and flow only travels on arcs with zero
//! rent.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`]: graph substrate, incidence algebra, cuts and reachability.
//! * [`connections`]: affine, piecewise-linear and penalty connection
//!   functions with exact inversion, composition and upper envelopes.
//! * [`feasibility`]: transportability of `q` (max-flow with a brute-force
//!   retaining-set oracle), lower/upper bounded circulations, reachability of
//!   targets and Hall's condition.
//! * [`analysis`]: profitable-loop detection, reduced connections and flow
//!   decomposition.
//! * [`bipartite`]: the associated bipartite matching problem, its penalty
//!   completion, block decomposition and solvers.
//! * [`assembly`]: the end-to-end pipeline, price extension, flow
//!   reconstruction and certificate checking.
//! * [`io`]: JSON documents, the DIMACS importer and DOT export.

pub mod analysis;
pub mod assembly;
pub mod bipartite;
pub mod connections;
pub mod error;
pub mod feasibility;
pub mod io;
pub mod maxflow;
pub mod network;

pub use assembly::{
    diagnose, scale_outcome, solve, verify_equilibrium, Certificate, EquilibriumOutcome,
    FlowProblem, SolveOptions, SolverMeta,
};
pub use connections::{ComposedConnection, Connection, PiecewiseLinear};
pub use error::{Error, Result};
pub use network::{ExitFlow, InternalFlow, Network};

/// Absolute tolerance for mass-balance checks on real-valued flows.
pub const EPS_MASS: f64 = 1e-9;

/// Relative tolerance for functional identities (`inverse`, `compose`).
pub const EPS_FN: f64 = 1e-9;

/// Default certificate tolerance of the solver.
pub const DEFAULT_TOL: f64 = 1e-8;
