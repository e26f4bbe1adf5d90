use serde_json::json;

use super::{Contract, Decision, Feedback, Policy};
use crate::environment::decode_joint;
use crate::oracle::OracleSolution;

/// Scripted player that knows the hindsight solution: it accepts a contract
/// `(b, tau)` iff `mu*(b) + tau >= max mu*`, otherwise plays its own best arm,
/// and always issues the equilibrium contracts for the arm it plays.
#[derive(Debug, Clone)]
pub struct BestResponder {
    node: usize,
    arms: usize,
    mu_star: Vec<f64>,
    best_children: Vec<usize>,
    /// `child_tau_star[child][arm]`.
    child_tau_star: Vec<Vec<f64>>,
}

impl BestResponder {
    pub fn new(node: usize, children: &[usize], sol: &OracleSolution) -> Self {
        let own = &sol.nodes[node];
        Self {
            node,
            arms: sol.arms,
            mu_star: own.mu_star.clone(),
            best_children: own.best_children.clone(),
            child_tau_star: children
                .iter()
                .map(|&c| sol.nodes[c].tau_star.clone())
                .collect(),
        }
    }

    /// Arm played in response to `parent`.
    pub fn respond(&self, parent: Option<Contract>) -> usize {
        let mut best = 0;
        for a in 1..self.arms {
            if self.mu_star[a] > self.mu_star[best] {
                best = a;
            }
        }
        match parent {
            Some(c) if self.mu_star[c.arm] + c.transfer >= self.mu_star[best] => c.arm,
            _ => best,
        }
    }
}

impl Policy for BestResponder {
    fn decide(&mut self, _t: u64, parent: Option<Contract>) -> Decision {
        let action = self.respond(parent);
        let (_, recs) = decode_joint(
            self.best_children[action],
            self.child_tau_star.len(),
            self.arms,
        );
        let contracts = recs
            .iter()
            .zip(&self.child_tau_star)
            .map(|(&arm, tau)| Contract {
                arm,
                transfer: tau[arm],
            })
            .collect();
        Decision { action, contracts }
    }

    fn observe(&mut self, _t: u64, _feedback: Feedback<'_>) {}

    fn snapshot(&self) -> serde_json::Value {
        json!({ "node": self.node, "scripted": true })
    }
}
