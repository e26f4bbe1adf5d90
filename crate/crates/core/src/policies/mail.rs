use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::schedule::{LayerPlan, ScheduleParams};
use super::search::{finalize_incentive, BatchLog, SearchConfig, SearchState};
use super::ucb::UcbStats;
use super::{Contract, Decision, Feedback, Policy};
use crate::environment::decode_joint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Wait,
    Explore,
    Commit,
}

#[derive(Debug, Clone)]
struct Exploration {
    sched: ScheduleParams,
    cfg: SearchConfig,
    /// `searches[child][arm]`.
    searches: Vec<Vec<SearchState>>,
    /// Closed batches as `(child, arm, log)`.
    logs: Vec<(usize, usize, BatchLog)>,
}

#[derive(Debug, Clone)]
enum Pending {
    None,
    Probe {
        arm: usize,
        batch_end: bool,
        arm_end: bool,
    },
    Commit {
        joint: usize,
        recs: Vec<usize>,
        sweep: bool,
    },
}

/// A player that waits for its children to settle, searches for the
/// transfer each child needs per arm, then runs UCB on its reward net of the
/// estimated transfers. Leaves skip straight to UCB.
///
/// Phases are a pure function of the round: `Wait` for `t <= wait`,
/// `Explore` for the next `K * batch_len * batches` rounds (arm by arm, all
/// children probed at once), `Commit` afterwards.
#[derive(Debug, Clone)]
pub struct MailPlayer {
    node: usize,
    arms: usize,
    n_children: usize,
    horizon: u64,
    wait: u64,
    exploration: Option<Exploration>,
    ucb: UcbStats,
    /// `tau_hat[child][arm]`, filled at the end of each arm's search.
    tau_hat: Vec<Vec<f64>>,
    wait_arm: usize,
    rng: ChaCha8Rng,
    pending: Pending,
}

impl MailPlayer {
    /// `plan` is the layer plan of this node's depth; `rng` is the node's
    /// policy stream.
    pub fn new(
        node: usize,
        n_children: usize,
        arms: usize,
        horizon: u64,
        plan: &LayerPlan,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let exploration = match (plan.schedule, plan.children) {
            (Some(sched), Some(children)) if n_children > 0 => Some(Exploration {
                sched,
                cfg: SearchConfig {
                    batch_len: sched.batch_len,
                    batches: sched.batches,
                    c: plan.search_c,
                    kappa: children.kappa,
                    beta_over_alpha: sched.beta_over_alpha(),
                    precision: sched.precision(horizon),
                },
                searches: vec![vec![SearchState::new(); arms]; n_children],
                logs: Vec::new(),
            }),
            _ => None,
        };
        let wait = if exploration.is_some() { plan.wait } else { 0 };
        let wait_arm = rng.random_range(0..arms);
        Self {
            node,
            arms,
            n_children,
            horizon,
            wait,
            exploration,
            ucb: UcbStats::new(arms, n_children, horizon),
            tau_hat: vec![vec![0.0; arms]; n_children],
            wait_arm,
            rng,
            pending: Pending::None,
        }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    fn explore_len(&self) -> u64 {
        self.exploration
            .as_ref()
            .map_or(0, |e| e.sched.explore_len(self.arms))
    }

    /// Last round before the commit phase.
    pub fn commit_after(&self) -> u64 {
        self.wait + self.explore_len()
    }

    pub fn phase(&self, t: u64) -> Phase {
        if self.exploration.is_none() {
            Phase::Commit
        } else if t <= self.wait {
            Phase::Wait
        } else if t <= self.commit_after() {
            Phase::Explore
        } else {
            Phase::Commit
        }
    }

    pub fn tau_hat(&self) -> &[Vec<f64>] {
        &self.tau_hat
    }

    pub fn ucb(&self) -> &UcbStats {
        &self.ucb
    }

    pub fn wait_arm(&self) -> usize {
        self.wait_arm
    }

    pub fn search(&self, child: usize, arm: usize) -> Option<&SearchState> {
        self.exploration.as_ref().map(|e| &e.searches[child][arm])
    }

    pub fn search_logs(&self) -> &[(usize, usize, BatchLog)] {
        self.exploration.as_ref().map_or(&[], |e| e.logs.as_slice())
    }

    fn uniform_arm(&mut self) -> usize {
        self.rng.random_range(0..self.arms)
    }
}

impl Policy for MailPlayer {
    fn decide(&mut self, t: u64, parent: Option<Contract>) -> Decision {
        match self.phase(t) {
            Phase::Wait => {
                self.pending = Pending::None;
                let contract = Contract {
                    arm: self.wait_arm,
                    transfer: 0.0,
                };
                Decision {
                    action: self.uniform_arm(),
                    contracts: vec![contract; self.n_children],
                }
            }
            Phase::Explore => {
                let exp = self
                    .exploration
                    .as_ref()
                    .expect("explore phase implies a schedule");
                let (len, batches) = (exp.sched.batch_len, exp.sched.batches as u64);
                let step = t - self.wait - 1;
                let arm = (step / (len * batches)) as usize;
                let within = step % (len * batches);
                let batch_end = within % len == len - 1;
                let arm_end = batch_end && within / len == batches - 1;
                let contracts = exp
                    .searches
                    .iter()
                    .map(|per_arm| Contract {
                        arm,
                        transfer: per_arm[arm].offer(),
                    })
                    .collect();
                self.pending = Pending::Probe {
                    arm,
                    batch_end,
                    arm_end,
                };
                Decision {
                    action: self.uniform_arm(),
                    contracts,
                }
            }
            Phase::Commit => {
                let step = t - self.commit_after() - 1;
                let joint = self.ucb.select(parent, step);
                let (action, recs) = decode_joint(joint, self.n_children, self.arms);
                let contracts = recs
                    .iter()
                    .zip(&self.tau_hat)
                    .map(|(&arm, tau)| Contract {
                        arm,
                        transfer: tau[arm],
                    })
                    .collect();
                self.pending = Pending::Commit {
                    joint,
                    recs,
                    sweep: (step as usize) < self.ucb.joint_arms(),
                };
                Decision { action, contracts }
            }
        }
    }

    fn observe(&mut self, _t: u64, feedback: Feedback<'_>) {
        match std::mem::replace(&mut self.pending, Pending::None) {
            Pending::None => {}
            Pending::Probe {
                arm,
                batch_end,
                arm_end,
            } => {
                let exp = self.exploration.as_mut().expect("probe implies a schedule");
                for (w, &played) in feedback.child_actions.iter().enumerate() {
                    exp.searches[w][arm].record(played == arm);
                }
                if batch_end {
                    for w in 0..self.n_children {
                        let log = exp.searches[w][arm]
                            .close_batch(&exp.cfg)
                            .expect("refusals never exceed the batch length");
                        exp.logs.push((w, arm, log));
                    }
                }
                if arm_end {
                    for w in 0..self.n_children {
                        self.tau_hat[w][arm] = finalize_incentive(
                            exp.searches[w][arm].final_high(),
                            self.horizon,
                            exp.sched.beta,
                            exp.cfg.c,
                            self.n_children,
                            exp.sched.eta,
                        );
                    }
                }
            }
            Pending::Commit { joint, recs, sweep } => {
                let complied = feedback.child_actions == recs.as_slice();
                let cost: f64 = recs.iter().zip(&self.tau_hat).map(|(&b, tau)| tau[b]).sum();
                // sweep rounds always count, so every joint arm has a sample
                self.ucb
                    .update(joint, complied || sweep, feedback.reward - cost);
            }
        }
    }

    fn snapshot(&self) -> serde_json::Value {
        json!({
            "node": self.node,
            "wait": self.wait,
            "commit_after": self.commit_after(),
            "wait_arm": self.wait_arm,
            "tau_hat": self.tau_hat,
            "search": self.exploration.as_ref().map(|e| &e.searches),
            "ucb_counts": self.ucb.counts(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::schedule::{plan_layers, ConstantMode, Exponents};
    use crate::rng::{stream, Purpose};
    use std::collections::BTreeMap;

    fn depth_two_player(horizon: u64) -> MailPlayer {
        // D = 3 so the depth-2 exponents are (1/4, 2/3, 1/4)
        let plans = plan_layers(
            3,
            2,
            2,
            horizon,
            ConstantMode::Scaled { c_scale: 0.05 },
            &BTreeMap::new(),
        )
        .unwrap();
        MailPlayer::new(1, 2, 2, horizon, &plans[1], stream(0, 1, Purpose::Policy))
    }

    #[test]
    fn leaves_commit_from_the_start() {
        let plans = plan_layers(1, 2, 3, 1000, ConstantMode::default(), &BTreeMap::new()).unwrap();
        let mut leaf = MailPlayer::new(0, 0, 3, 1000, &plans[0], stream(0, 0, Purpose::Policy));
        assert_eq!(leaf.phase(1), Phase::Commit);
        let d = leaf.decide(1, None);
        assert!(d.contracts.is_empty());
        assert_eq!(d.action, 0);
        assert_eq!(
            leaf.decide(2, None).action,
            1,
            "sweep index follows the step even without feedback"
        );
    }

    #[test]
    fn depth_two_starts_exploring_at_midpoint() {
        let mut p = depth_two_player(10_000);
        assert_eq!(p.phase(1), Phase::Explore);
        let d = p.decide(1, None);
        assert_eq!(
            d.contracts,
            vec![
                Contract {
                    arm: 0,
                    transfer: 0.5
                };
                2
            ]
        );
    }

    #[test]
    fn explore_length_is_independent_of_children() {
        // 465 rounds per batch, 4 batches, 2 arms
        for refuse in [false, true] {
            let mut p = depth_two_player(10_000);
            let mut explore = 0;
            for t in 1..=4000 {
                if p.phase(t) == Phase::Explore {
                    explore += 1;
                }
                let d = p.decide(t, None);
                let acts: Vec<usize> = d
                    .contracts
                    .iter()
                    .map(|c| if refuse { (c.arm + 1) % 2 } else { c.arm })
                    .collect();
                p.observe(
                    t,
                    Feedback {
                        reward: 0.5,
                        child_actions: &acts,
                    },
                );
            }
            assert_eq!(explore, 3720);
            assert_eq!(p.commit_after(), 3720);
            assert_eq!(p.phase(3720), Phase::Explore);
            assert_eq!(p.phase(3721), Phase::Commit);
        }
    }

    #[test]
    fn waiting_nodes_offer_zero_transfers() {
        let plans =
            plan_layers(3, 2, 2, 10_000, ConstantMode::default(), &BTreeMap::new()).unwrap();
        let mut root = MailPlayer::new(0, 2, 2, 10_000, &plans[2], stream(0, 0, Purpose::Policy));
        assert_eq!(plans[2].wait, 3720);
        let b = root.wait_arm();
        for t in [1, 100, 3720] {
            assert_eq!(root.phase(t), Phase::Wait);
            let d = root.decide(
                t,
                Some(Contract {
                    arm: 0,
                    transfer: 10.0,
                }),
            );
            assert_eq!(
                d.contracts,
                vec![
                    Contract {
                        arm: b,
                        transfer: 0.0
                    };
                    2
                ]
            );
        }
        assert_eq!(root.phase(3721), Phase::Explore);
    }

    #[test]
    fn exact_responder_search_brackets_incentive() {
        let horizon = 1_000_000;
        let mut ov = BTreeMap::new();
        ov.insert(
            2,
            Exponents {
                eta: 0.25,
                alpha: 0.6,
                beta: 0.25,
            },
        );
        let plans = plan_layers(
            2,
            1,
            2,
            horizon,
            ConstantMode::Scaled { c_scale: 0.05 },
            &ov,
        )
        .unwrap();
        let mut p = MailPlayer::new(0, 1, 2, horizon, &plans[1], stream(3, 0, Purpose::Policy));
        // child: mu* = [0.9, 0.4], so tau* = [0, 0.5]
        let tau_star = [0.0, 0.5];
        for t in 1..=p.commit_after() {
            let d = p.decide(t, None);
            let c = d.contracts[0];
            let act = if c.transfer >= tau_star[c.arm] {
                c.arm
            } else {
                0
            };
            p.observe(
                t,
                Feedback {
                    reward: 0.0,
                    child_actions: &[act],
                },
            );
        }
        let eps = (horizon as f64).powf(-0.25);
        let extra = 0.05 * (horizon as f64).powf(-0.25);
        for (arm, (&star, &est)) in tau_star.iter().zip(&p.tau_hat()[0]).enumerate() {
            assert!(star <= est, "arm {arm}: {est}");
            assert!(est - 4.0 * eps - extra <= star, "arm {arm}: {est}");
        }
    }
}
