use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the solver pipeline and its building blocks.
///
/// Node references are dense indices into the [`Network`](crate::Network) the
/// failing operation was called with; [`Error::remap_nodes`] translates them
/// when an operation ran on a pruned sub-network.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{field}: {message}")]
    Validation { field: String, message: String },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("exit flows do not sum to zero (sum = {sum:e})")]
    Unbalanced { sum: f64 },

    #[error(
        "exit flow is not transportable: retaining set {violating_set:?} has q(B) = {deficit}"
    )]
    Infeasible {
        violating_set: Vec<usize>,
        deficit: f64,
    },

    #[error("node {node} has q = {q} but cannot reach any target")]
    DeadSource { node: usize, q: f64 },

    #[error("profitable loop {cycle:?}: H(p) - p = {profit:e} at p = {price}")]
    ProfitableLoop {
        cycle: Vec<usize>,
        price: f64,
        profit: f64,
    },

    #[error("{what}: size {size} exceeds enumeration limit {limit}")]
    EnumerationGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("Hall's condition fails for sources {sources:?} (shortfall {shortfall})")]
    HallViolated { sources: Vec<usize>, shortfall: f64 },

    #[error("{stage} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "penalty escalation did not clear; check Hall/connectivity or tolerances \
         ({doublings} doublings, penalty flow {penalty_flow:e})"
    )]
    PenaltyEscalation { doublings: usize, penalty_flow: f64 },

    #[error("price extension exceeded its sweep cap of {cap}")]
    ExtensionCap { cap: usize },

    #[error("tolerance too tight or bipartite solution inconsistent: {0}")]
    Reconstruction(String),

    #[error("inconsistent bounds on arc {arc}: lower {lower}, upper {upper}")]
    BadBounds { arc: usize, lower: f64, upper: f64 },

    #[error(
        "equilibrium certificate failed: balance {balance:e}, positive rent {rent:e}, \
         slackness {cs:e} (tol {tol:e})"
    )]
    Certificate {
        balance: f64,
        rent: f64,
        cs: f64,
        tol: f64,
    },

    #[error("scale factor must be nonnegative, got {0}")]
    NegativeScale(f64),

    #[error("feasibility verdict ({feasible}) disagrees with Hall's condition ({hall})")]
    CrossCheck { feasible: bool, hall: bool },

    #[error("block {block}: prices did not respond monotonically to the ground offset")]
    MonotoneResponse { block: usize },

    #[error("ground node {0} does not belong to the first block of the bipartite problem")]
    Ground(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Rewrites node indices carried by the error through `map`.
    pub fn remap_nodes(self, map: &[usize]) -> Self {
        let tr = |v: Vec<usize>| v.into_iter().map(|i| map[i]).collect();
        match self {
            Error::Infeasible {
                violating_set,
                deficit,
            } => Error::Infeasible {
                violating_set: tr(violating_set),
                deficit,
            },
            Error::DeadSource { node, q } => Error::DeadSource { node: map[node], q },
            Error::ProfitableLoop {
                cycle,
                price,
                profit,
            } => Error::ProfitableLoop {
                cycle: tr(cycle),
                price,
                profit,
            },
            Error::HallViolated { sources, shortfall } => Error::HallViolated {
                sources: tr(sources),
                shortfall,
            },
            other => other,
        }
    }

    /// True for failures of the existence assumptions (as opposed to input or
    /// numerical problems).
    pub fn is_assumption_failure(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. }
                | Error::DeadSource { .. }
                | Error::ProfitableLoop { .. }
                | Error::HallViolated { .. }
                | Error::Unbalanced { .. }
        )
    }
}
