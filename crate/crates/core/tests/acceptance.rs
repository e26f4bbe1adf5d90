//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use mail_tree::cli::{
    random_incentives, run_experiment, search_demo, ExperimentConfig, ExperimentOutput,
    SearchDemoConfig, SeedRun,
};
use mail_tree::engine::{run_game, Checkpoint, Diagnostics, GameConfig};
use mail_tree::environment::{Environment, NoiseModel, Tree};
use mail_tree::oracle::{brute_force_welfare, solve_tree, DEFAULT_ENUMERATION_CAP};
use mail_tree::rng::{stream, Purpose};

struct Suite {
    failed: usize,
    diagnostics: Vec<Diagnostics>,
}

impl Suite {
    fn report(&mut self, id: &str, pass: bool, detail: String, started: Instant) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "[{}] criterion {id}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn oracle_identity(suite: &mut Suite) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let depth = 1 + (seed % 3) as usize;
        let breadth = 1 + (seed / 3 % 2) as usize;
        let arms = 2 + (seed / 6 % 2) as usize;
        let tree = Tree::build(depth, breadth).unwrap();
        let env = Environment::sample(
            tree,
            arms,
            NoiseModel::None,
            &mut stream(seed, 0, Purpose::Environment),
        )
        .unwrap();
        let sol = solve_tree(&env);
        let (_, value) = brute_force_welfare(&env, DEFAULT_ENUMERATION_CAP).unwrap();
        worst = worst.max((sol.welfare - value).abs());
    }
    suite.report(
        "1",
        worst <= 1e-9,
        format!("100 instances, max |W* - brute force| = {worst:.2e}"),
        start,
    );
}

fn search_precision(suite: &mut Suite) {
    let start = Instant::now();
    let cfg = SearchDemoConfig::default();
    let mut bad = Vec::new();
    let mut widest = 0.0f64;
    for (i, tau) in random_incentives(50, 2024).into_iter().enumerate() {
        let r = search_demo(&cfg, tau).unwrap();
        widest = widest.max(r.final_width - r.width_bound);
        if !r.passed() {
            bad.push(i);
        }
    }
    suite.report(
        "2",
        bad.is_empty(),
        format!("50 incentives, failures {bad:?}, max width minus bound {widest:.4}"),
        start,
    );
}

fn leaf_rate(suite: &mut Suite) {
    let start = Instant::now();
    let (arms, horizon) = (5usize, 100_000u64);
    let k = arms as f64;
    let t = horizon as f64;
    let bound = 8.0 * (k * (k * t.powi(3)).ln()).sqrt() * t.sqrt();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let tree = Tree::build(1, 1).unwrap();
        let env = Environment::sample(
            tree,
            arms,
            NoiseModel::default(),
            &mut stream(seed, 0, Purpose::Environment),
        )
        .unwrap();
        let sol = solve_tree(&env);
        let out = run_game(&env, &sol, &GameConfig::new(horizon, seed)).unwrap();
        worst = worst.max(out.ledger.nodes[0].action);
        suite.diagnostics.push(out.diagnostics);
    }
    suite.report(
        "6",
        worst <= bound,
        format!("50 seeds, max leaf action regret {worst:.1} vs ceiling {bound:.1}"),
        start,
    );
}

fn fraction(hits: usize, n: usize) -> f64 {
    hits as f64 / n as f64
}

/// Least-squares slope of `ln y` against `ln t`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn at(run: &SeedRun, t: u64) -> &Checkpoint {
    run.checkpoints
        .iter()
        .find(|c| c.t == t)
        .expect("checkpoint on the grid")
}

fn desk_criteria(suite: &mut Suite, out: &ExperimentOutput, horizon: u64, started: Instant) {
    let runs = &out.runs;
    let n = runs.len();
    let tree = &out.tree;

    for run in runs {
        suite.diagnostics.push(run.diagnostics.clone());
    }

    // 5a: welfare regret per round falls between T/2 and T
    let hits = runs
        .iter()
        .filter(|r| {
            at(r, horizon).welfare / (horizon as f64)
                < at(r, horizon / 2).welfare / ((horizon / 2) as f64)
        })
        .count();
    suite.report(
        "5a",
        fraction(hits, n) >= 0.9,
        format!("welfare regret / t lower at T than at T/2 in {hits}/{n} seeds"),
        started,
    );

    // 5b: slope of the mean root regret over the last decade
    let grid: Vec<u64> = runs[0]
        .checkpoints
        .iter()
        .map(|c| c.t)
        .filter(|&t| t * 10 >= horizon)
        .collect();
    let mean_root: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| {
            (
                t as f64,
                runs.iter().map(|r| at(r, t).nodes[0].total).sum::<f64>() / n as f64,
            )
        })
        .collect();
    if mean_root.iter().all(|p| p.1 > 0.0) {
        let slope = loglog_slope(&mean_root);
        suite.report(
            "5b",
            slope <= 0.98,
            format!("root log-log slope over [T/10, T] = {slope:.3}"),
            Instant::now(),
        );
    } else {
        suite.report(
            "5b",
            false,
            "mean root regret is not positive on [T/10, T]".into(),
            Instant::now(),
        );
    }

    // 5c: leaves below the root
    let leaves: Vec<usize> = tree
        .nodes()
        .iter()
        .filter(|v| v.depth == 1)
        .map(|v| v.id)
        .collect();
    let hits = runs
        .iter()
        .filter(|r| {
            let c = at(r, horizon);
            let leaf = leaves.iter().map(|&v| c.nodes[v].total).sum::<f64>() / leaves.len() as f64;
            leaf < c.nodes[0].total
        })
        .count();
    suite.report(
        "5c",
        fraction(hits, n) >= 0.8,
        format!("mean leaf regret below root regret in {hits}/{n} seeds"),
        Instant::now(),
    );

    // 7: every node's W1 falls between T/4 and T in 90% of seeds
    let per_node: Vec<usize> = (0..tree.len())
        .map(|v| {
            runs.iter()
                .filter(|r| at(r, horizon).w1(v) < at(r, horizon / 4).w1(v))
                .count()
        })
        .collect();
    let pass = per_node.iter().all(|&h| fraction(h, n) >= 0.9);
    suite.report(
        "7",
        pass,
        format!("seeds with W1(T) < W1(T/4), per node: {per_node:?} of {n}"),
        Instant::now(),
    );
}

fn same_files(a: &Path, b: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
        .into_iter()
        .filter(|name| std::fs::read(a.join(name)).ok() != std::fs::read(b.join(name)).ok())
        .collect()
}

fn main() -> ExitCode {
    let mut suite = Suite {
        failed: 0,
        diagnostics: Vec::new(),
    };
    oracle_identity(&mut suite);
    search_precision(&mut suite);

    let start = Instant::now();
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let mut desk = ExperimentConfig::preset("desk").unwrap();
    desk.output_dir = first.path().to_path_buf();
    let out = run_experiment(&desk, None).unwrap();
    println!(
        "desk preset: {} seeds, {} players, T = {} ({:.1}s)",
        out.runs.len(),
        out.tree.len(),
        desk.horizon,
        start.elapsed().as_secs_f64()
    );
    desk_criteria(&mut suite, &out, desk.horizon, start);

    leaf_rate(&mut suite);

    let start = Instant::now();
    let violations: u64 = suite
        .diagnostics
        .iter()
        .map(|d| d.decomposition_violations)
        .sum();
    let gap = suite
        .diagnostics
        .iter()
        .map(|d| d.max_decomposition_gap)
        .fold(f64::NEG_INFINITY, f64::max);
    suite.report(
        "3",
        violations == 0,
        format!(
            "{} runs, {violations} checkpoints with total > action + payment + deviation, max per-round gap {gap:.2e}",
            suite.diagnostics.len()
        ),
        start,
    );
    let err = suite
        .diagnostics
        .iter()
        .map(|d| d.max_conservation_error)
        .fold(0.0, f64::max);
    suite.report(
        "4",
        err <= 1e-12,
        format!("max |sum u - sum X| per round = {err:.2e}"),
        start,
    );

    let start = Instant::now();
    desk.output_dir = second.path().to_path_buf();
    run_experiment(&desk, None).unwrap();
    let differing = same_files(first.path(), second.path());
    suite.report(
        "8",
        differing.is_empty(),
        format!("desk preset repeated, differing CSVs: {differing:?}"),
        start,
    );

    if suite.failed > 0 {
        println!("{} criteria failed", suite.failed);
        ExitCode::FAILURE
    } else {
        println!("all criteria passed");
        ExitCode::SUCCESS
    }
}
