//! Simulator for tree-structured principal-agent bandit games with monetary
//! transfers.
//!
//! Players sit on a tree. Each round the root moves first and every node,
//! after seeing the contract its parent offers, picks an arm and offers one
//! contract `(arm, transfer)` to each child. A node's mean reward depends on
//! its own arm and its children's arms; a transfer is paid only when the
//! child plays exactly the recommended arm.
//!
//! - [`environment`]: trees, reward tables, noise.
//! - [`oracle`]: hindsight optimal incentives, equilibrium profile, welfare.
//! - [`policies`]: the wait / search / UCB player and its schedule.
//! - [`engine`]: the round loop and regret bookkeeping.
//! - [`cli`]: experiment configs, batch runs and CSV output.

pub mod cli;
pub mod engine;
pub mod environment;
pub mod error;
pub mod oracle;
pub mod policies;
pub mod rng;

pub use error::{Error, Result};
