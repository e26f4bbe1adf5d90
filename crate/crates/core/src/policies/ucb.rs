//! UCB over a node's joint arms `(own, children...)`.
//!
//! The index adds the parent's transfer to every joint arm whose own
//! coordinate is the recommended one, so a mean-based learner responds to
//! contracts without storing them. Only compliant rounds (children played what
//! was recommended) feed the statistics.

use serde::{Deserialize, Serialize};

use super::Contract;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbStats {
    arms: usize,
    /// `K^{|ch|}`: joint arms sharing one own action.
    row: usize,
    counts: Vec<u64>,
    means: Vec<f64>,
    /// `ln(K^{|ch|+1} T^3)`.
    log_term: f64,
}

impl UcbStats {
    pub fn new(arms: usize, n_children: usize, horizon: u64) -> Self {
        let row = arms.pow(n_children as u32);
        let joint = arms * row;
        Self {
            arms,
            row,
            counts: vec![0; joint],
            means: vec![0.0; joint],
            log_term: (joint as f64).ln() + 3.0 * (horizon as f64).ln(),
        }
    }

    pub fn joint_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn own_action(&self, joint: usize) -> usize {
        joint / self.row
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn total_pulls(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Confidence width `2 sqrt(ln(K^{|ch|+1} T^3) / n)`.
    pub fn bonus(&self, count: u64) -> f64 {
        2.0 * (self.log_term / count as f64).sqrt()
    }

    /// Index of one joint arm under the current parent contract.
    pub fn score(&self, joint: usize, parent: Option<Contract>) -> f64 {
        let n = self.counts[joint];
        if n == 0 {
            return f64::INFINITY;
        }
        let transfer = match parent {
            Some(c) if c.arm == self.own_action(joint) => c.transfer,
            _ => 0.0,
        };
        self.means[joint] + self.bonus(n) + transfer
    }

    /// Joint arm to play at the `phase_step`-th round (0-based) of the
    /// commit phase. The first `K^{|ch|+1}` rounds sweep every joint arm in
    /// index order; afterwards the highest index wins, ties to the lowest.
    pub fn select(&self, parent: Option<Contract>, phase_step: u64) -> usize {
        if (phase_step as usize) < self.joint_arms() {
            return phase_step as usize;
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for joint in 0..self.joint_arms() {
            let s = self.score(joint, parent);
            if s > best_score {
                best = joint;
                best_score = s;
            }
        }
        best
    }

    /// Folds a shifted reward into the running mean of `joint` when the
    /// children complied; otherwise the round is discarded.
    pub fn update(&mut self, joint: usize, complied: bool, shifted_reward: f64) {
        if !complied {
            return;
        }
        let n = self.counts[joint] + 1;
        self.counts[joint] = n;
        self.means[joint] += (shifted_reward - self.means[joint]) / n as f64;
    }

    pub fn arms(&self) -> usize {
        self.arms
    }
}
