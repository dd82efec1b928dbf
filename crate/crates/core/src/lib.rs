//! Node-based knowledge in synchronous systems with bounded message delays.
//!
//! The crate enumerates every run of a small network running the
//! full-information protocol, evaluates epistemic formulas over agent-time
//! nodes, looks for the communication structures that such knowledge
//! needs, and checks timed coordination policies.

pub mod causality;
pub mod cli;
pub mod coordination;
pub mod harness;
pub mod logic;
pub mod network;
pub mod runs;
pub mod scenario;
