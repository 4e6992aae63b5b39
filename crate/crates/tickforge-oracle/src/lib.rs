//! Independent reference implementation used to validate the main checkers:
//! naive explicit-state enumeration over concrete configurations with a
//! separately written abstraction quotient and direct property evaluation.
//!
//! Only the core domain types (terms, facts, configurations, matching,
//! criticality) are shared with the main stack; rule application, state
//! graphs, the quotient and the property evaluations are re-implemented from
//! the definitions. Specifications with fresh values are out of scope here:
//! nonce canonicalization is exactly what the main stack is being tested on,
//! so the oracle sidesteps it by restriction.

mod exec;
mod graph;
mod props;
pub mod randspec;

pub use exec::{successors, OracleError};
pub use graph::{oracle_graph, OracleGraph};
pub use props::{oracle_check, OracleProp};
