use serde::{Deserialize, Serialize};

use super::RoundRecord;
use crate::environment::Environment;
use crate::oracle::{OracleSolution, SpneProfile};
use crate::policies::Contract;

/// Per-node regret terms, either for one round or accumulated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeRegret {
    pub total: f64,
    pub action: f64,
    pub payment: f64,
    pub deviation: f64,
    /// Sum of per-round distances to the equilibrium profile.
    pub w1_sum: f64,
}

impl NodeRegret {
    fn add(&mut self, other: &NodeRegret) {
        self.total += other.total;
        self.action += other.action;
        self.payment += other.payment;
        self.deviation += other.deviation;
        self.w1_sum += other.w1_sum;
    }

    /// `total - (action + payment + deviation)`; never positive up to rounding.
    pub fn decomposition_gap(&self) -> f64 {
        self.total - (self.action + self.payment + self.deviation)
    }
}

/// Distance between a played profile `(action, recommendations, transfers)`
/// and the equilibrium one: one per wrong own action, one per wrong
/// recommendation, and the transfer error where the recommendation is right.
pub fn spne_distance(star: &SpneProfile, action: usize, issued: &[Contract]) -> f64 {
    let own = if action == star.action { 0.0 } else { 1.0 };
    own + issued
        .iter()
        .zip(star.recommendations.iter().zip(&star.transfers))
        .map(|(c, (&b, &tau))| {
            if c.arm == b {
                (c.transfer - tau).abs()
            } else {
                1.0
            }
        })
        .sum::<f64>()
}

/// Regret terms of node `v` in one round, plus its distance to the
/// equilibrium profile in `w1_sum`.
pub fn round_regret(
    env: &Environment,
    sol: &OracleSolution,
    rec: &RoundRecord,
    v: usize,
) -> NodeRegret {
    let node = &rec.nodes[v];
    let own = &sol.nodes[v];
    let children = &env.tree().node(v).children;
    let played = rec.child_actions(env, v);
    let recommended: Vec<usize> = node.issued.iter().map(|c| c.arm).collect();

    let (offer, offered_arm) = match node.received {
        Some(c) => (c.transfer, Some(c.arm)),
        None => (0.0, None),
    };
    let best = match offered_arm {
        Some(b) => sol.max_mu_star(v).max(own.mu_star[b] + offer),
        None => sol.max_mu_star(v),
    };
    let earned = if offered_arm == Some(node.action) {
        offer
    } else {
        0.0
    };

    let theta_played = env.mean_unchecked(v, node.action, &played);
    let theta_recommended = env.mean_unchecked(v, node.action, &recommended);
    let star_cost: f64 = children
        .iter()
        .zip(&recommended)
        .map(|(&w, &b)| sol.nodes[w].tau_star[b])
        .sum();
    let paid: f64 = node
        .issued
        .iter()
        .zip(&node.compliance)
        .filter(|(_, &ok)| ok)
        .map(|(c, _)| c.transfer)
        .sum();
    let payment: f64 = children
        .iter()
        .zip(&node.issued)
        .map(|(&w, c)| (c.transfer - sol.nodes[w].tau_star[c.arm]).max(0.0))
        .sum();

    NodeRegret {
        total: best - (theta_played + earned - paid),
        action: best - (theta_recommended - star_cost + earned),
        payment,
        deviation: (theta_recommended - theta_played).max(0.0),
        w1_sum: spne_distance(sol.spne_profile(v), node.action, &node.issued),
    }
}

/// Cumulative regret of every node plus the global welfare regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub rounds: u64,
    pub nodes: Vec<NodeRegret>,
    pub welfare: f64,
}

impl RegretLedger {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            rounds: 0,
            nodes: vec![NodeRegret::default(); n_nodes],
            welfare: 0.0,
        }
    }

    /// Adds the per-node regret terms of one round. Returns the largest
    /// per-round decomposition gap seen.
    pub fn accumulate_regret(
        &mut self,
        env: &Environment,
        sol: &OracleSolution,
        rec: &RoundRecord,
    ) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for v in 0..self.nodes.len() {
            let mut r = round_regret(env, sol, rec, v);
            worst = worst.max(r.decomposition_gap());
            r.w1_sum = 0.0;
            self.nodes[v].add(&r);
        }
        self.rounds += 1;
        worst
    }

    /// Adds the welfare regret and the equilibrium distances of one round.
    /// Returns the welfare increment.
    pub fn welfare_and_w1(
        &mut self,
        env: &Environment,
        sol: &OracleSolution,
        rec: &RoundRecord,
    ) -> f64 {
        let mut achieved = 0.0;
        for v in 0..self.nodes.len() {
            let node = &rec.nodes[v];
            achieved += env.mean_unchecked(v, node.action, &rec.child_actions(env, v));
            self.nodes[v].w1_sum += spne_distance(sol.spne_profile(v), node.action, &node.issued);
        }
        let inc = sol.welfare - achieved;
        self.welfare += inc;
        inc
    }

    /// Average distance to the equilibrium profile so far.
    pub fn w1(&self, v: usize) -> f64 {
        if self.rounds == 0 {
            0.0
        } else {
            self.nodes[v].w1_sum / self.rounds as f64
        }
    }
}
