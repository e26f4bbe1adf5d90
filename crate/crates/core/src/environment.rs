//! Game instances: tree topology, mean-reward tables and reward noise.
//!
//! Depth follows the leaves-up convention: leaves sit at depth 1 and the root
//! at depth `D`. Nodes are numbered breadth-first from the root, so node 0 is
//! always the root and the children of a node have contiguous ids.
//!
//! A tree of depth `D` and breadth `B` has `(B^D - 1)/(B - 1)` nodes (`D` when
//! `B = 1`): the root is counted once and there are `D` levels in total.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub depth: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    depth: usize,
    breadth: usize,
    nodes: Vec<Node>,
}

impl Tree {
    /// Builds the complete tree of the given depth and breadth, numbered
    /// breadth-first from the root.
    pub fn build(depth: usize, breadth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidTree("depth must be at least 1".into()));
        }
        if breadth == 0 {
            return Err(Error::InvalidTree("breadth must be at least 1".into()));
        }
        let count = Self::node_count(depth, breadth);
        let mut nodes = Vec::with_capacity(count);
        nodes.push(Node {
            id: 0,
            depth,
            parent: None,
            children: Vec::new(),
        });
        let mut cursor = 0;
        while cursor < nodes.len() {
            let node_depth = nodes[cursor].depth;
            if node_depth > 1 {
                for _ in 0..breadth {
                    let id = nodes.len();
                    nodes.push(Node {
                        id,
                        depth: node_depth - 1,
                        parent: Some(cursor),
                        children: Vec::new(),
                    });
                    nodes[cursor].children.push(id);
                }
            }
            cursor += 1;
        }
        debug_assert_eq!(nodes.len(), count);
        Ok(Self {
            depth,
            breadth,
            nodes,
        })
    }

    pub fn node_count(depth: usize, breadth: usize) -> usize {
        if breadth == 1 {
            depth
        } else {
            (breadth.pow(depth as u32) - 1) / (breadth - 1)
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn breadth(&self) -> usize {
        self.breadth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Node ids ordered from the leaves up to the root (reverse breadth-first).
    pub fn bottom_up(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).rev()
    }

    /// Checks the structural invariants of a tree that was deserialized rather
    /// than built.
    pub fn validate(&self) -> Result<()> {
        let expected = Self::build(self.depth, self.breadth)?;
        if expected != *self {
            return Err(Error::InvalidTree(format!(
                "node list does not describe the complete breadth-first tree with depth {} and breadth {}",
                self.depth, self.breadth
            )));
        }
        Ok(())
    }
}

/// Zero-mean reward noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    Gaussian {
        sigma: f64,
    },
    /// `Bernoulli(mean) - mean`, so the realized reward is a coin flip in {0, 1}.
    BernoulliCentered,
    None,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Gaussian { sigma: 0.1 }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Gaussian { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
                Err(Error::InvalidEnvironment(format!(
                    "gaussian sigma must be finite and >= 0, got {sigma}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Draws one noise sample for a reward whose mean is `mean`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                // sigma was validated, so construction cannot fail
                Normal::new(0.0, sigma)
                    .expect("validated sigma")
                    .sample(rng)
            }
            NoiseModel::BernoulliCentered => {
                let hit = if rng.random::<f64>() < mean { 1.0 } else { 0.0 };
                hit - mean
            }
            NoiseModel::None => 0.0,
        }
    }
}

/// Row-major index of a joint action `(own, children...)`, own action most
/// significant.
pub fn joint_index(own: usize, children: &[usize], arms: usize) -> usize {
    children.iter().fold(own, |acc, &b| acc * arms + b)
}

/// Inverse of [`joint_index`] for a node with `n_children` children.
pub fn decode_joint(mut index: usize, n_children: usize, arms: usize) -> (usize, Vec<usize>) {
    let mut children = vec![0; n_children];
    for slot in children.iter_mut().rev() {
        *slot = index % arms;
        index /= arms;
    }
    (index, children)
}

/// Per-node mean-reward tables, flattened row-major over `(own, children...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    tables: Vec<Vec<f64>>,
}

impl RewardModel {
    pub fn new(tables: Vec<Vec<f64>>) -> Self {
        Self { tables }
    }

    pub fn table(&self, node: usize) -> &[f64] {
        &self.tables[node]
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    arms: usize,
    tree: Tree,
    rewards: RewardModel,
    noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl Environment {
    /// Assembles an environment from explicit tables, checking shapes and the
    /// `[0, 1]` range of every mean.
    pub fn new(tree: Tree, arms: usize, tables: Vec<Vec<f64>>, noise: NoiseModel) -> Result<Self> {
        let env = Self {
            arms,
            tree,
            rewards: RewardModel::new(tables),
            noise,
            seed: None,
        };
        env.validate()?;
        Ok(env)
    }

    /// Draws every mean reward i.i.d. uniform on `[0, 1]`.
    pub fn sample<R: Rng + ?Sized>(
        tree: Tree,
        arms: usize,
        noise: NoiseModel,
        rng: &mut R,
    ) -> Result<Self> {
        if arms < 2 {
            return Err(Error::InvalidEnvironment(format!(
                "need at least 2 arms, got {arms}"
            )));
        }
        let tables = tree
            .nodes()
            .iter()
            .map(|node| {
                let size = arms.pow(node.children.len() as u32 + 1);
                (0..size).map(|_| rng.random::<f64>()).collect()
            })
            .collect();
        Self::new(tree, arms, tables, noise)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms < 2 {
            return Err(Error::InvalidEnvironment(format!(
                "need at least 2 arms, got {}",
                self.arms
            )));
        }
        self.tree.validate()?;
        self.noise.validate()?;
        if self.rewards.tables.len() != self.tree.len() {
            return Err(Error::InvalidEnvironment(format!(
                "{} reward tables for {} nodes",
                self.rewards.tables.len(),
                self.tree.len()
            )));
        }
        for (node, table) in self.tree.nodes().iter().zip(&self.rewards.tables) {
            let size = self.arms.pow(node.children.len() as u32 + 1);
            if table.len() != size {
                return Err(Error::InvalidEnvironment(format!(
                    "node {} has {} reward entries, expected {size}",
                    node.id,
                    table.len()
                )));
            }
            if let Some(bad) = table.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidEnvironment(format!(
                    "node {} has mean reward {bad} outside [0, 1]",
                    node.id
                )));
            }
        }
        Ok(())
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn rewards(&self) -> &RewardModel {
        &self.rewards
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Number of joint arms `K^{|ch(v)|+1}` of a node.
    pub fn joint_arms(&self, node: usize) -> usize {
        self.rewards.tables[node].len()
    }

    fn checked_index(&self, node: usize, own: usize, children: &[usize]) -> Result<usize> {
        let invalid = |reason| Error::InvalidJointAction {
            node,
            joint: std::iter::once(own)
                .chain(children.iter().copied())
                .collect(),
            reason,
        };
        if node >= self.tree.len() {
            return Err(invalid("unknown node"));
        }
        if children.len() != self.tree.node(node).children.len() {
            return Err(invalid("arity does not match the number of children"));
        }
        if own >= self.arms || children.iter().any(|&b| b >= self.arms) {
            return Err(invalid("arm index out of range"));
        }
        Ok(joint_index(own, children, self.arms))
    }

    /// Mean reward `theta^v(own, children)`.
    pub fn mean(&self, node: usize, own: usize, children: &[usize]) -> Result<f64> {
        let idx = self.checked_index(node, own, children)?;
        Ok(self.rewards.tables[node][idx])
    }

    /// Mean reward without bounds checks beyond slice indexing.
    pub fn mean_unchecked(&self, node: usize, own: usize, children: &[usize]) -> f64 {
        self.rewards.tables[node][joint_index(own, children, self.arms)]
    }

    /// Realized reward: the mean plus one draw of the noise model.
    pub fn draw_reward<R: Rng + ?Sized>(
        &self,
        node: usize,
        own: usize,
        children: &[usize],
        rng: &mut R,
    ) -> Result<f64> {
        let mean = self.mean(node, own, children)?;
        Ok(mean + self.noise.sample(mean, rng))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Self = serde_json::from_str(text)?;
        env.validate()?;
        Ok(env)
    }
}
