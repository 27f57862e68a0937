//! Simulator of a peer-to-peer service-composition ecosystem.
//!
//! A network of habitats hosts pools of service agents. Each user request
//! instantiates a variable-length genetic algorithm over the local pool, and
//! the evolved response migrates across probabilistic connections that
//! strengthen or weaken with the success of past exchanges. A distributed
//! registry baseline answers the same requests under a matched evaluation
//! budget, and the experiment harness records how the two systems compare
//! as services accumulate.

pub mod config;
pub mod evolution;
pub mod habitat;
pub mod harness;
pub mod model;
pub mod output;
pub mod rng;
pub mod soa;
pub mod verify;
