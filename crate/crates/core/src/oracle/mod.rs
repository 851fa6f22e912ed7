//! Plaintext references.
//!
//! Everything here works on big integers and rationals and never calls the
//! engine's ring arithmetic; the engine is only driven as a black box by the
//! exhaustive sweeps and tamper trials.

pub mod exact;
pub mod exhaustive;
pub mod fixed;
pub mod network;
pub mod tamper;

use thiserror::Error;

use crate::protocols::ProtocolError;

pub use exhaustive::{exhaustive_mult, exhaustive_round_trip, tamper_sweep, Report, TamperSweep};
pub use fixed::{fixed_eval, Evaluated, Graph, Node};
pub use network::{argmax, eval_network, Activation, OracleRun};
pub use tamper::{tamper_trials, Outcome, Tally, TamperReport};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("node {node} overflows the value range: {raw}")]
    Overflow { node: usize, raw: String },
    #[error("bad graph: {0}")]
    BadGraph(String),
    #[error("model: {0}")]
    Model(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}
