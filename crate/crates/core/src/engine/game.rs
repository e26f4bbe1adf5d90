use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{run_round, NodeRegret, RegretLedger, RoundRecord};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::oracle::OracleSolution;
use crate::policies::{
    plan_layers, BestResponder, ConstantMode, Exponents, LayerPlan, MailPlayer, Policy,
};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone)]
pub struct GameConfig {
    pub horizon: u64,
    pub constants: ConstantMode,
    /// Exponents replacing the defaults at selected depths.
    pub overrides: BTreeMap<usize, Exponents>,
    /// Rounds at which the ledger is snapshotted (sorted, within `1..=horizon`).
    pub checkpoints: Vec<u64>,
    pub master_seed: u64,
    /// Keep every round record in the output (memory grows with the horizon).
    pub keep_records: bool,
    /// Nodes replaced by an exact best responder.
    pub scripted: BTreeSet<usize>,
    /// One JSON line per node per round.
    pub trace: Option<PathBuf>,
}

impl GameConfig {
    pub fn new(horizon: u64, master_seed: u64) -> Self {
        Self {
            horizon,
            constants: ConstantMode::default(),
            overrides: BTreeMap::new(),
            checkpoints: checkpoint_grid(horizon, 1000, 100),
            master_seed,
            keep_records: false,
            scripted: BTreeSet::new(),
            trace: None,
        }
    }
}

/// Every round up to `dense_until`, `geometric` log-spaced rounds from there
/// to the horizon, and `T/4`, `T/2`, `T`.
pub fn checkpoint_grid(horizon: u64, dense_until: u64, geometric: usize) -> Vec<u64> {
    let mut grid: BTreeSet<u64> = (1..=dense_until.min(horizon)).collect();
    let start = dense_until.max(1).min(horizon) as f64;
    let ratio = (horizon as f64 / start).ln();
    for i in 1..=geometric {
        let t = (start * (ratio * i as f64 / geometric as f64).exp()).round() as u64;
        grid.insert(t.clamp(1, horizon));
    }
    for t in [horizon / 4, horizon / 2, horizon] {
        if t >= 1 {
            grid.insert(t);
        }
    }
    grid.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub welfare: f64,
    pub nodes: Vec<NodeRegret>,
}

impl Checkpoint {
    pub fn w1(&self, v: usize) -> f64 {
        self.nodes[v].w1_sum / self.t as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Checkpoints where some node's cumulative total regret exceeded the
    /// sum of its three components.
    pub decomposition_violations: u64,
    /// Largest per-round `total - (action + payment + deviation)`.
    pub max_decomposition_gap: f64,
    /// Largest per-round `|sum u - sum X|`.
    pub max_conservation_error: f64,
    /// Rounds whose welfare regret increment was negative.
    pub negative_welfare_increments: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub checkpoints: Vec<Checkpoint>,
    pub ledger: RegretLedger,
    pub records: Vec<RoundRecord>,
    pub diagnostics: Diagnostics,
    pub layers: Vec<LayerPlan>,
    /// Final player states, by node.
    pub states: Vec<serde_json::Value>,
}

/// Rounding slack for sums of order one accumulated over many rounds.
const DECOMPOSITION_TOL: f64 = 1e-9;

fn build_players(
    env: &Environment,
    sol: &OracleSolution,
    cfg: &GameConfig,
    layers: &[LayerPlan],
) -> Vec<Box<dyn Policy>> {
    let tree = env.tree();
    tree.nodes()
        .iter()
        .map(|node| -> Box<dyn Policy> {
            if cfg.scripted.contains(&node.id) {
                Box::new(BestResponder::new(node.id, &node.children, sol))
            } else {
                Box::new(MailPlayer::new(
                    node.id,
                    node.children.len(),
                    env.arms(),
                    cfg.horizon,
                    &layers[node.depth - 1],
                    stream(cfg.master_seed, node.id, Purpose::Policy),
                ))
            }
        })
        .collect()
}

/// Plays the full horizon and snapshots the ledger at every checkpoint.
pub fn run_game(env: &Environment, sol: &OracleSolution, cfg: &GameConfig) -> Result<RunOutput> {
    let tree = env.tree();
    let layers = plan_layers(
        tree.depth(),
        tree.breadth(),
        env.arms(),
        cfg.horizon,
        cfg.constants,
        &cfg.overrides,
    )?;
    let root_plan = &layers[tree.depth() - 1];
    if cfg.horizon < root_plan.commit_after() {
        return Err(Error::HorizonTooShort {
            horizon: cfg.horizon,
            required: root_plan.commit_after(),
        });
    }
    let sweep = (0..tree.len())
        .map(|v| env.joint_arms(v) as u64)
        .max()
        .unwrap_or(1);
    if cfg.horizon < root_plan.commit_after() + sweep {
        log::warn!(
            "horizon {} leaves the root no room for a full UCB sweep after round {}",
            cfg.horizon,
            root_plan.commit_after()
        );
    }

    let mut players = build_players(env, sol, cfg, &layers);
    let mut noise: Vec<_> = (0..tree.len())
        .map(|v| stream(cfg.master_seed, v, Purpose::Noise))
        .collect();
    let mut trace = match &cfg.trace {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };

    let mut ledger = RegretLedger::new(tree.len());
    let mut diagnostics = Diagnostics {
        max_decomposition_gap: f64::NEG_INFINITY,
        ..Diagnostics::default()
    };
    let mut checkpoints = Vec::with_capacity(cfg.checkpoints.len());
    let mut next = cfg
        .checkpoints
        .iter()
        .copied()
        .filter(|&t| t <= cfg.horizon)
        .peekable();
    let mut records = Vec::new();

    for t in 1..=cfg.horizon {
        let rec = run_round(&mut players, env, t, &mut noise);

        let (u, x) = rec
            .nodes
            .iter()
            .fold((0.0, 0.0), |(u, x), n| (u + n.utility, x + n.reward));
        diagnostics.max_conservation_error = diagnostics.max_conservation_error.max((u - x).abs());
        let gap = ledger.accumulate_regret(env, sol, &rec);
        diagnostics.max_decomposition_gap = diagnostics.max_decomposition_gap.max(gap);
        if ledger.welfare_and_w1(env, sol, &rec) < -1e-12 {
            diagnostics.negative_welfare_increments += 1;
        }

        if let Some(w) = trace.as_mut() {
            for (v, n) in rec.nodes.iter().enumerate() {
                serde_json::to_writer(&mut *w, &json!({ "t": t, "node": v, "round": n }))?;
                w.write_all(b"\n")?;
            }
        }
        if next.peek() == Some(&t) {
            next.next();
            if ledger
                .nodes
                .iter()
                .any(|r| r.decomposition_gap() > DECOMPOSITION_TOL * r.total.abs().max(1.0))
            {
                diagnostics.decomposition_violations += 1;
            }
            checkpoints.push(Checkpoint {
                t,
                welfare: ledger.welfare,
                nodes: ledger.nodes.clone(),
            });
        }
        if cfg.keep_records {
            records.push(rec);
        }
    }

    let states: Vec<serde_json::Value> = players.iter().map(|p| p.snapshot()).collect();
    if let Some(mut w) = trace {
        for (v, s) in states.iter().enumerate() {
            serde_json::to_writer(&mut w, &json!({ "node": v, "final_state": s }))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok(RunOutput {
        checkpoints,
        ledger,
        records,
        diagnostics,
        layers,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{NoiseModel, Tree};
    use crate::oracle::solve_tree;

    #[test]
    fn grid_shape() {
        let g = checkpoint_grid(200_000, 1000, 100);
        assert_eq!(&g[..3], &[1, 2, 3]);
        assert!(g.contains(&1000) && g.contains(&50_000) && g.contains(&100_000));
        assert_eq!(*g.last().unwrap(), 200_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(checkpoint_grid(10, 1000, 100), (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn single_leaf_favors_best_arm() {
        let env = Environment::new(
            Tree::build(1, 1).unwrap(),
            2,
            vec![vec![0.3, 0.7]],
            NoiseModel::None,
        )
        .unwrap();
        let sol = solve_tree(&env);
        let mut cfg = GameConfig::new(5000, 0);
        cfg.keep_records = true;
        let out = run_game(&env, &sol, &cfg).unwrap();
        assert_eq!(out.records[0].nodes[0].action, 0);
        assert_eq!(out.records[1].nodes[0].action, 1);
        let worse = out
            .records
            .iter()
            .filter(|r| r.nodes[0].action == 0)
            .count();
        assert!(worse < 2500, "{worse}");
        for r in &out.records {
            assert_eq!(r.nodes[0].utility, [0.3, 0.7][r.nodes[0].action]);
        }
        let regret = out.ledger.nodes[0];
        assert!((regret.action - 0.4 * worse as f64).abs() < 1e-9);
        assert!((regret.total - regret.action).abs() < 1e-9);
    }

    #[test]
    fn horizon_shorter_than_exploration_is_rejected() {
        let env = Environment::sample(
            Tree::build(2, 1).unwrap(),
            2,
            NoiseModel::None,
            &mut stream(0, 0, Purpose::Environment),
        )
        .unwrap();
        let sol = solve_tree(&env);
        let err = run_game(&env, &sol, &GameConfig::new(1000, 0)).unwrap_err();
        assert!(matches!(err, Error::HorizonTooShort { .. }));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let env = Environment::sample(
            Tree::build(2, 2).unwrap(),
            2,
            NoiseModel::default(),
            &mut stream(5, 0, Purpose::Environment),
        )
        .unwrap();
        let sol = solve_tree(&env);
        let cfg = GameConfig::new(20_000, 9);
        let a = run_game(&env, &sol, &cfg).unwrap();
        let b = run_game(&env, &sol, &cfg).unwrap();
        assert_eq!(a.checkpoints, b.checkpoints);
        assert_eq!(a.diagnostics.decomposition_violations, 0);
        assert!(a.diagnostics.max_conservation_error < 1e-12);
        assert_eq!(a.diagnostics.negative_welfare_increments, 0);
    }
}
