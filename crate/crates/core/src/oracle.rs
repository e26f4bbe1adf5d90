//! Hindsight solution of a game instance.
//!
//! Backward induction from the leaves: a child's optimal incentive for arm `b`
//! is the utility it gives up by playing `b` instead of its best arm, a
//! parent's utility table is its mean reward net of those incentives, and the
//! best extractable utility per own action is the row maximum. The equilibrium
//! profile is then read top-down. All argmaxes break ties towards the lowest
//! index, which in row-major joint order is the lexicographically smallest
//! profile.
//!
//! [`brute_force_welfare`] enumerates every joint profile of the whole tree and
//! shares no code with [`solve_tree`]; the two are compared in tests.

use serde::{Deserialize, Serialize};

use crate::environment::{decode_joint, joint_index, Environment};
use crate::error::{Error, Result};

/// Default limit on the number of joint profiles [`brute_force_welfare`] will enumerate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// Equilibrium play of one node: own action, recommended child arms and the
/// transfers attached to them (ordered as the node's children).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpneProfile {
    pub action: usize,
    pub recommendations: Vec<usize>,
    pub transfers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSolution {
    /// `mu^v(a, b^ch)` in row-major joint order.
    pub mu: Vec<f64>,
    /// `mu*^v(a)`: best utility per own action.
    pub mu_star: Vec<f64>,
    /// For each own action, the children-joint index attaining `mu*^v(a)`.
    pub best_children: Vec<usize>,
    /// `tau*_b(v)`: transfer the parent must pay for arm `b`.
    pub tau_star: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub arms: usize,
    pub nodes: Vec<NodeSolution>,
    pub spne: Vec<SpneProfile>,
    /// `W* = sum_v max_a mu*^v(a)`.
    pub welfare: f64,
    /// Joint profile (one arm per node) achieving `welfare`.
    pub welfare_profile: Vec<usize>,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Runs backward induction over the whole tree in `O(|V| K^{B+1})`.
pub fn solve_tree(env: &Environment) -> OracleSolution {
    let tree = env.tree();
    let arms = env.arms();
    let mut nodes: Vec<Option<NodeSolution>> = vec![None; tree.len()];

    for id in tree.bottom_up() {
        let node = tree.node(id);
        let theta = env.rewards().table(id);
        let n_children = node.children.len();
        let child_tau: Vec<&[f64]> = node
            .children
            .iter()
            .map(|&c| {
                nodes[c]
                    .as_ref()
                    .expect("children solved first")
                    .tau_star
                    .as_slice()
            })
            .collect();

        let mu: Vec<f64> = theta
            .iter()
            .enumerate()
            .map(|(idx, &th)| {
                let (_, b) = decode_joint(idx, n_children, arms);
                th - b
                    .iter()
                    .zip(&child_tau)
                    .map(|(&arm, tau)| tau[arm])
                    .sum::<f64>()
            })
            .collect();

        let row = arms.pow(n_children as u32);
        let mut mu_star = Vec::with_capacity(arms);
        let mut best_children = Vec::with_capacity(arms);
        for chunk in mu.chunks(row) {
            let j = argmax(chunk);
            best_children.push(j);
            mu_star.push(chunk[j]);
        }
        let top = max_of(&mu_star);
        let tau_star = mu_star.iter().map(|&m| top - m).collect();

        nodes[id] = Some(NodeSolution {
            mu,
            mu_star,
            best_children,
            tau_star,
        });
    }
    let nodes: Vec<NodeSolution> = nodes
        .into_iter()
        .map(|n| n.expect("all nodes solved"))
        .collect();

    let mut spne: Vec<Option<SpneProfile>> = vec![None; tree.len()];
    let mut action = vec![0; tree.len()];
    action[tree.root()] = argmax(&nodes[tree.root()].mu_star);
    for id in 0..tree.len() {
        let node = tree.node(id);
        let sol = &nodes[id];
        let a = action[id];
        let (_, recs) = decode_joint(sol.best_children[a], node.children.len(), arms);
        let transfers = node
            .children
            .iter()
            .zip(&recs)
            .map(|(&c, &b)| nodes[c].tau_star[b])
            .collect();
        for (&c, &b) in node.children.iter().zip(&recs) {
            action[c] = b;
        }
        spne[id] = Some(SpneProfile {
            action: a,
            recommendations: recs,
            transfers,
        });
    }

    let welfare = nodes.iter().map(|n| max_of(&n.mu_star)).sum();
    OracleSolution {
        arms,
        nodes,
        spne: spne
            .into_iter()
            .map(|p| p.expect("every node visited"))
            .collect(),
        welfare,
        welfare_profile: action,
    }
}

impl OracleSolution {
    /// Equilibrium profile `x*^v` of one node.
    pub fn spne_profile(&self, node: usize) -> &SpneProfile {
        &self.spne[node]
    }

    pub fn max_mu_star(&self, node: usize) -> f64 {
        max_of(&self.nodes[node].mu_star)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Exhaustive maximizer of `sum_v theta^v(a^v, a^{ch(v)})` over all joint
/// profiles, indexed by node id. Ties go to the lexicographically smallest profile.
pub fn brute_force_welfare(env: &Environment, cap: u64) -> Result<(Vec<usize>, f64)> {
    let tree = env.tree();
    let arms = env.arms();
    let n = tree.len();
    let profiles = (arms as f64).powi(n as i32);
    if profiles > cap as f64 {
        return Err(Error::EnumerationCap { profiles, cap });
    }

    let value = |profile: &[usize]| -> f64 {
        tree.nodes()
            .iter()
            .map(|node| {
                let children: Vec<usize> = node.children.iter().map(|&c| profile[c]).collect();
                env.mean_unchecked(node.id, profile[node.id], &children)
            })
            .sum()
    };

    let mut profile = vec![0usize; n];
    let mut best_profile = profile.clone();
    let mut best = value(&profile);
    loop {
        // odometer increment, node 0 most significant
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok((best_profile, best));
            }
            pos -= 1;
            profile[pos] += 1;
            if profile[pos] < arms {
                break;
            }
            profile[pos] = 0;
        }
        let v = value(&profile);
        if v > best {
            best = v;
            best_profile.clone_from(&profile);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGaps {
    /// Smallest utility loss from changing one child's recommendation away
    /// from the equilibrium one; `None` for leaves.
    pub child_gap: Option<f64>,
    /// Smallest gap between the best and any other entry of a mean-reward row
    /// (over own arms for a leaf, over child profiles per own action otherwise).
    pub theta_gap: f64,
    /// Whether `argmax_a mu*^v(a)` is a single arm (exact float comparison).
    pub own_argmax_unique: bool,
    /// Whether the best child profile at the equilibrium action is unique.
    pub child_argmax_unique: bool,
}

fn top_two_gap(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::INFINITY;
    }
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &x in values {
        if x > first {
            second = first;
            first = x;
        } else if x > second {
            second = x;
        }
    }
    first - second
}

fn is_unique_max(values: &[f64]) -> bool {
    let top = max_of(values);
    values.iter().filter(|&&x| x == top).count() == 1
}

/// Margins of the hindsight solution. Zero gaps are reported, never rejected.
pub fn reward_gaps(env: &Environment, sol: &OracleSolution) -> Vec<NodeGaps> {
    let arms = env.arms();
    env.tree()
        .nodes()
        .iter()
        .map(|node| {
            let ns = &sol.nodes[node.id];
            let theta = env.rewards().table(node.id);
            let n_children = node.children.len();
            let row = arms.pow(n_children as u32);
            let profile = &sol.spne[node.id];
            let a = profile.action;

            let child_gap = (n_children > 0).then(|| {
                let base_idx = a * row + ns.best_children[a];
                let base = ns.mu[base_idx];
                let mut gap = f64::INFINITY;
                for slot in 0..n_children {
                    for b in 0..arms {
                        if b == profile.recommendations[slot] {
                            continue;
                        }
                        let mut alt = profile.recommendations.clone();
                        alt[slot] = b;
                        let idx = joint_index(a, &alt, arms);
                        gap = gap.min(base - ns.mu[idx]);
                    }
                }
                gap
            });

            let theta_gap = if n_children == 0 {
                top_two_gap(theta)
            } else {
                theta
                    .chunks(row)
                    .map(top_two_gap)
                    .fold(f64::INFINITY, f64::min)
            };

            NodeGaps {
                child_gap,
                theta_gap,
                own_argmax_unique: is_unique_max(&ns.mu_star),
                child_argmax_unique: n_children == 0
                    || is_unique_max(&ns.mu[a * row..(a + 1) * row]),
            }
        })
        .collect()
}
