//! The repeated game: one top-down decision pass per round, reward draws,
//! utility settlement, and bookkeeping against the hindsight solution.

mod game;
mod ledger;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::Environment;
use crate::policies::{Contract, Feedback, Policy};

pub use game::{checkpoint_grid, run_game, Checkpoint, Diagnostics, GameConfig, RunOutput};
pub use ledger::{round_regret, spne_distance, NodeRegret, RegretLedger};

/// What one node did and got in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRound {
    pub received: Option<Contract>,
    pub action: usize,
    pub issued: Vec<Contract>,
    /// `compliance[i]`: child `i` played exactly the arm recommended to it.
    pub compliance: Vec<bool>,
    pub reward: f64,
    pub utility: f64,
}

impl NodeRound {
    /// Whether the transfer offered by the parent was earned.
    pub fn complied(&self) -> bool {
        self.received.is_some_and(|c| c.arm == self.action)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub nodes: Vec<NodeRound>,
}

impl RoundRecord {
    /// Actions of the children of `node`, in child order.
    pub fn child_actions(&self, env: &Environment, node: usize) -> Vec<usize> {
        env.tree()
            .node(node)
            .children
            .iter()
            .map(|&c| self.nodes[c].action)
            .collect()
    }
}

/// Plays round `t`. Nodes decide in breadth-first order, so every node sees
/// its parent's contract; rewards are drawn once all actions are fixed.
/// `noise[v]` is node `v`'s noise stream.
pub fn run_round(
    players: &mut [Box<dyn Policy>],
    env: &Environment,
    t: u64,
    noise: &mut [ChaCha8Rng],
) -> RoundRecord {
    let tree = env.tree();
    let n = tree.len();
    let mut received: Vec<Option<Contract>> = vec![None; n];
    let mut decisions = Vec::with_capacity(n);
    for v in 0..n {
        let d = players[v].decide(t, received[v]);
        for (&c, &contract) in tree.node(v).children.iter().zip(&d.contracts) {
            received[c] = Some(contract);
        }
        decisions.push(d);
    }

    let mut nodes = Vec::with_capacity(n);
    for v in 0..n {
        let children = &tree.node(v).children;
        let actions: Vec<usize> = children.iter().map(|&c| decisions[c].action).collect();
        let d = &decisions[v];
        let compliance: Vec<bool> = d
            .contracts
            .iter()
            .zip(&actions)
            .map(|(c, &a)| c.arm == a)
            .collect();
        let reward = env
            .draw_reward(v, d.action, &actions, &mut noise[v])
            .expect("policies only play valid arms");
        let earned = match received[v] {
            Some(c) if c.arm == d.action => c.transfer,
            _ => 0.0,
        };
        let paid: f64 = d
            .contracts
            .iter()
            .zip(&compliance)
            .filter(|(_, &ok)| ok)
            .map(|(c, _)| c.transfer)
            .sum();
        nodes.push(NodeRound {
            received: received[v],
            action: d.action,
            issued: d.contracts.clone(),
            compliance,
            reward,
            utility: reward + earned - paid,
        });
    }

    for v in 0..n {
        let actions: Vec<usize> = tree
            .node(v)
            .children
            .iter()
            .map(|&c| nodes[c].action)
            .collect();
        players[v].observe(
            t,
            Feedback {
                reward: nodes[v].reward,
                child_actions: &actions,
            },
        );
    }
    RoundRecord { t, nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{NoiseModel, Tree};
    use crate::oracle::solve_tree;
    use crate::policies::{BestResponder, Decision};
    use crate::rng::{stream, Purpose};

    /// Always plays one arm and offers fixed contracts.
    struct Fixed(Decision);

    impl Policy for Fixed {
        fn decide(&mut self, _t: u64, _parent: Option<Contract>) -> Decision {
            self.0.clone()
        }
        fn observe(&mut self, _t: u64, _feedback: Feedback<'_>) {}
        fn snapshot(&self) -> serde_json::Value {
            serde_json::Value::Null
        }
    }

    fn chain() -> Environment {
        let tree = Tree::build(2, 1).unwrap();
        Environment::new(
            tree,
            2,
            vec![vec![0.2, 0.8, 0.1, 0.6], vec![0.9, 0.4]],
            NoiseModel::None,
        )
        .unwrap()
    }

    #[test]
    fn settles_transfers() {
        let env = chain();
        let sol = solve_tree(&env);
        let root = Fixed(Decision {
            action: 0,
            contracts: vec![Contract {
                arm: 1,
                transfer: 0.8,
            }],
        });
        let mut players: Vec<Box<dyn Policy>> =
            vec![Box::new(root), Box::new(BestResponder::new(1, &[], &sol))];
        let mut noise: Vec<_> = (0..2).map(|v| stream(1, v, Purpose::Noise)).collect();
        let rec = run_round(&mut players, &env, 1, &mut noise);
        assert_eq!(rec.nodes[1].action, 1);
        assert_eq!(rec.nodes[0].compliance, vec![true]);
        assert!((rec.nodes[0].utility - 0.0).abs() < 1e-15);
        assert!((rec.nodes[1].utility - 1.2).abs() < 1e-15);
        let total_u: f64 = rec.nodes.iter().map(|n| n.utility).sum();
        let total_x: f64 = rec.nodes.iter().map(|n| n.reward).sum();
        assert!((total_u - total_x).abs() < 1e-12);
    }

    #[test]
    fn refused_contract_is_not_paid() {
        let env = chain();
        let sol = solve_tree(&env);
        let root = Fixed(Decision {
            action: 0,
            contracts: vec![Contract {
                arm: 1,
                transfer: 0.3,
            }],
        });
        let mut players: Vec<Box<dyn Policy>> =
            vec![Box::new(root), Box::new(BestResponder::new(1, &[], &sol))];
        let mut noise: Vec<_> = (0..2).map(|v| stream(1, v, Purpose::Noise)).collect();
        let rec = run_round(&mut players, &env, 1, &mut noise);
        assert_eq!(rec.nodes[1].action, 0);
        assert!(!rec.nodes[1].complied());
        assert_eq!(rec.nodes[0].utility, 0.2);
        assert_eq!(rec.nodes[1].utility, 0.9);
    }
}
