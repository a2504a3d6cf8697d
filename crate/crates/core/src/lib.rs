//! Online combinatorial optimization with restless Markovian rewards.
//!
//! Each of N independent finite-state Markov chains evolves every slot. A
//! learner picks one arm (a nonnegative coefficient vector over the chains)
//! per slot, observes the states of the chains in the arm's support and
//! collects `sum_i a_i r^i_{x_i}`. The crate provides:
//!
//! - [`markov`]: chain validation, stationary and spectral analysis, product
//!   chains, hitting times and the restless environment.
//! - [`action`]: explicit, shortest-path and bipartite-matching arm families
//!   with a linear solver over each.
//! - [`policy`]: the block-structured regenerative index policy (constant or
//!   growing exploration) and an arm-level baseline.
//! - [`oracle`]: genie reward, regret traces and the bound constants.
//! - [`harness`]: scenarios, presets and the seeded experiment runner.

pub mod action;
pub mod error;
pub mod harness;
pub mod markov;
pub mod oracle;
pub mod policy;

pub use action::{ActionSet, Arm, Sense};
pub use error::{Error, Result};
pub use markov::{ChainAnalysis, ChainSpec, Environment};
