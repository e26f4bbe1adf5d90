//! Per-player decision logic.

mod mail;
mod responder;
pub mod schedule;
pub mod search;
pub mod ucb;

use serde::{Deserialize, Serialize};

pub use mail::{MailPlayer, Phase};
pub use responder::BestResponder;
pub use schedule::{
    aggregate, horizon_guardrail, leaf_params, plan_layers, propagate_params, AssumptionParams,
    ConstantMode, Exponents, LayerPlan, ScheduleParams,
};
pub use search::{
    classify_batch, finalize_incentive, refusal_threshold, BatchLog, BatchOutcome, SearchConfig,
    SearchState, SearchStatus,
};
pub use ucb::UcbStats;

/// A recommended arm and the transfer paid if the child plays exactly it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub arm: usize,
    pub transfer: f64,
}

/// What a player does in one round: its own arm and one contract per child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: usize,
    pub contracts: Vec<Contract>,
}

/// What a player observes at the end of a round: its own realized reward and
/// the arms its children played.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    pub reward: f64,
    pub child_actions: &'a [usize],
}

pub trait Policy: Send {
    /// Chooses this round's action and contracts after seeing the parent's contract.
    fn decide(&mut self, t: u64, parent: Option<Contract>) -> Decision;

    /// Receives the feedback of the round last decided.
    fn observe(&mut self, t: u64, feedback: Feedback<'_>);

    /// JSON view of the internal state, for traces.
    fn snapshot(&self) -> serde_json::Value;
}
