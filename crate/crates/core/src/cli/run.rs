use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::ExperimentConfig;
use crate::engine::{checkpoint_grid, run_game, Checkpoint, Diagnostics, GameConfig};
use crate::environment::{Environment, Tree};
use crate::error::{Error, Result};
use crate::oracle::solve_tree;
use crate::policies::{horizon_guardrail, plan_layers, ConstantMode};
use crate::rng::{stream, Purpose};

pub const CSV_HEADER: &str =
    "t,player_id,depth,regret_total,regret_action,regret_payment,regret_deviation,welfare_regret,w1";

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub environment_seed: u64,
    pub welfare_optimum: f64,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub tree: Tree,
    pub runs: Vec<SeedRun>,
    pub output_dir: PathBuf,
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name))
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Samples the environment of one seed.
pub fn seed_environment(cfg: &ExperimentConfig, env_seed: u64) -> Result<Environment> {
    let tree = Tree::build(cfg.tree.depth, cfg.tree.breadth)?;
    let mut rng = stream(env_seed, 0, Purpose::Environment);
    Ok(Environment::sample(tree, cfg.arms, cfg.noise, &mut rng)?.with_seed(env_seed))
}

/// One row per `(checkpoint, node)`, in the fixed column order of [`CSV_HEADER`].
pub fn seed_csv(tree: &Tree, checkpoints: &[Checkpoint]) -> String {
    let mut out = String::with_capacity(checkpoints.len() * tree.len() * 80);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for cp in checkpoints {
        for (v, r) in cp.nodes.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                cp.t,
                v,
                tree.node(v).depth,
                r.total,
                r.action,
                r.payment,
                r.deviation,
                cp.welfare,
                cp.w1(v)
            )
            .expect("writing to a String cannot fail");
        }
    }
    out
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per `(t, depth)`: each seed contributes the average over the nodes at that
/// depth, then mean and sample standard deviation are taken across seeds.
pub fn aggregate_csv(tree: &Tree, runs: &[SeedRun]) -> String {
    let metrics = [
        "regret_total",
        "regret_action",
        "regret_payment",
        "regret_deviation",
        "welfare_regret",
        "w1",
    ];
    let mut out = String::from("t,depth,seeds");
    for m in metrics {
        write!(out, ",{m}_mean,{m}_std").expect("writing to a String cannot fail");
    }
    out.push('\n');
    let Some(first) = runs.first() else {
        return out;
    };
    for (i, cp) in first.checkpoints.iter().enumerate() {
        for depth in 1..=tree.depth() {
            let members: Vec<usize> = tree
                .nodes()
                .iter()
                .filter(|n| n.depth == depth)
                .map(|n| n.id)
                .collect();
            let mut per_metric = vec![Vec::with_capacity(runs.len()); metrics.len()];
            for run in runs {
                let c = &run.checkpoints[i];
                let avg = |f: &dyn Fn(usize) -> f64| {
                    members.iter().map(|&v| f(v)).sum::<f64>() / members.len() as f64
                };
                let values = [
                    avg(&|v| c.nodes[v].total),
                    avg(&|v| c.nodes[v].action),
                    avg(&|v| c.nodes[v].payment),
                    avg(&|v| c.nodes[v].deviation),
                    c.welfare,
                    avg(&|v| c.w1(v)),
                ];
                for (slot, x) in per_metric.iter_mut().zip(values) {
                    slot.push(x);
                }
            }
            write!(out, "{},{},{}", cp.t, depth, runs.len())
                .expect("writing to a String cannot fail");
            for xs in &per_metric {
                let (m, s) = mean_std(xs);
                write!(out, ",{m},{s}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
    }
    out
}

fn run_seed(cfg: &ExperimentConfig, dir: &Path, seed: u64) -> Result<SeedRun> {
    let environment_seed = if cfg.shared_environment {
        cfg.seeds[0]
    } else {
        seed
    };
    let env = seed_environment(cfg, environment_seed)?;
    let sol = solve_tree(&env);
    let mut game = GameConfig::new(cfg.horizon, seed);
    game.constants = cfg.constants;
    game.overrides = cfg.exponent_overrides.clone();
    game.checkpoints = checkpoint_grid(
        cfg.horizon,
        cfg.logging.dense_until,
        cfg.logging.geometric_points,
    );
    if cfg.trace {
        game.trace = Some(dir.join(format!("seed_{seed}.trace.jsonl")));
    }
    log::info!(
        "seed {seed}: {} players, horizon {}",
        env.tree().len(),
        cfg.horizon
    );
    let out = run_game(&env, &sol, &game)?;
    write_atomic(
        dir,
        &format!("seed_{seed}.csv"),
        seed_csv(env.tree(), &out.checkpoints).as_bytes(),
    )?;
    write_atomic(
        dir,
        &format!("seed_{seed}.environment.json"),
        env.to_json()?.as_bytes(),
    )?;
    if out.diagnostics.decomposition_violations > 0 {
        log::error!(
            "seed {seed}: {} checkpoints break the regret decomposition",
            out.diagnostics.decomposition_violations
        );
    }
    Ok(SeedRun {
        seed,
        environment_seed,
        welfare_optimum: sol.welfare,
        diagnostics: out.diagnostics,
        checkpoints: out.checkpoints,
    })
}

/// Runs every seed (in parallel, at most `workers` at a time when given) and
/// writes `seed_<s>.csv`, `aggregate.csv` and `run_metadata.json` into the
/// output directory.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let layers = plan_layers(
        cfg.tree.depth,
        cfg.tree.breadth,
        cfg.arms,
        cfg.horizon,
        cfg.constants,
        &cfg.exponent_overrides,
    )?;
    for layer in layers.iter().filter(|l| l.params.zeta <= 0.0) {
        log::warn!(
            "confidence exponent at depth {} is {:.4} <= 0: horizon {} is small for this tree",
            layer.depth,
            layer.params.zeta,
            cfg.horizon
        );
    }

    let runs: Vec<SeedRun> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, &dir, seed))
            .collect::<Result<Vec<_>>>()
    })?;

    let tree = Tree::build(cfg.tree.depth, cfg.tree.breadth)?;
    write_atomic(
        &dir,
        "aggregate.csv",
        aggregate_csv(&tree, &runs).as_bytes(),
    )?;

    let constants_note = match cfg.constants {
        ConstantMode::Theoretical => "propagated constants".to_string(),
        ConstantMode::Scaled { c_scale } => {
            format!("scaled constants: c = {c_scale} replaces the propagated c in search thresholds and extra payments")
        }
    };
    let metadata = json!({
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "players": tree.len(),
        "layers": layers,
        "constants_note": constants_note,
        "horizon_guardrail": horizon_guardrail(cfg.tree.depth, cfg.tree.breadth, cfg.arms, cfg.horizon),
        "runs": runs,
    });
    write_atomic(
        &dir,
        "run_metadata.json",
        serde_json::to_string_pretty(&metadata)?.as_bytes(),
    )?;
    Ok(ExperimentOutput {
        tree,
        runs,
        output_dir: dir,
    })
}
