//! Profitable-loop detection, reduced connections and flow decomposition.

mod decompose;
mod loops;
mod reduced;

pub use decompose::{flow_decompose, FlowDecomposition};
pub use loops::{
    check_no_profitable_loops, loop_composition, LoopReport, DEFAULT_PRICE_BOX,
    LOOP_ENUMERATION_LIMIT,
};
pub use reduced::{
    reduced_connection, reduced_connection_functions, reduced_connection_map, Diagonal,
};

use crate::connections::Connection;
use crate::error::{Error, Result};
use crate::network::Network;

pub(crate) fn check_connections(net: &Network, g: &[Connection]) -> Result<()> {
    if g.len() != net.arc_count() {
        return Err(Error::DimensionMismatch {
            what: "connection functions",
            expected: net.arc_count(),
            found: g.len(),
        });
    }
    Ok(())
}
