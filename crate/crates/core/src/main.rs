use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mail_tree::cli::{
    random_incentives, reference_curve, run_experiment, search_demo, seed_environment,
    ExperimentConfig, SearchDemoConfig,
};
use mail_tree::engine::checkpoint_grid;
use mail_tree::environment::Environment;
use mail_tree::oracle::{brute_force_welfare, reward_gaps, solve_tree, DEFAULT_ENUMERATION_CAP};
use mail_tree::Error;

#[derive(Parser)]
#[command(
    name = "mail-tree",
    version,
    about = "Tree-structured principal-agent bandit simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-seed experiment and write CSVs.
    Run {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Built-in config: desk or paper-fig2.
        #[arg(long)]
        preset: Option<String>,
        /// Use seeds 0..N instead of the configured list.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Maximum number of seeds run at once.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve an instance in hindsight and check the welfare identity.
    Oracle {
        /// Experiment config; the environment of its first seed is solved.
        #[arg(
            long,
            conflicts_with = "environment",
            required_unless_present = "environment"
        )]
        config: Option<PathBuf>,
        /// Environment file as written next to the seed CSVs.
        #[arg(long)]
        environment: Option<PathBuf>,
    },
    /// Run the incentive search against an exact best responder.
    SearchDemo {
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        tau_star: Option<f64>,
        /// Number of incentives drawn uniformly from [0, 1].
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the t^(1 - 1/(2d^2)) reference curve.
    Reference {
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        horizon: u64,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
}

fn load_environment(
    config: Option<PathBuf>,
    environment: Option<PathBuf>,
) -> mail_tree::Result<Environment> {
    match (config, environment) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Environment::from_json(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        (Some(path), None) => {
            let cfg = ExperimentConfig::load(&path)?;
            seed_environment(&cfg, cfg.seeds[0])
        }
        (None, None) => Err(Error::Config(
            "either --config or --environment is required".into(),
        )),
    }
}

fn execute(cli: Cli) -> mail_tree::Result<()> {
    match cli.command {
        Command::Run {
            config,
            preset,
            seeds,
            out,
            workers,
        } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => ExperimentConfig::load(&path)?,
                (None, Some(name)) => ExperimentConfig::preset(&name)?,
                (None, None) => {
                    return Err(Error::Config(
                        "either --config or --preset is required".into(),
                    ))
                }
            };
            if let Some(n) = seeds {
                if n == 0 {
                    return Err(Error::Config("--seeds must be at least 1".into()));
                }
                cfg = cfg.with_seed_count(n);
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let output = run_experiment(&cfg, workers)?;
            let violations: u64 = output
                .runs
                .iter()
                .map(|r| r.diagnostics.decomposition_violations)
                .sum();
            println!(
                "{} seeds, {} players, horizon {} -> {}",
                output.runs.len(),
                output.tree.len(),
                cfg.horizon,
                output.output_dir.display()
            );
            for run in &output.runs {
                let last = run.checkpoints.last().expect("horizon >= 1");
                println!(
                    "seed {:>4}: welfare regret {:.2}, root regret {:.2}",
                    run.seed, last.welfare, last.nodes[0].total
                );
            }
            if violations > 0 {
                println!("warning: {violations} checkpoints break the regret decomposition");
            }
        }
        Command::Oracle {
            config,
            environment,
        } => {
            let env = load_environment(config, environment)?;
            let sol = solve_tree(&env);
            println!("{}", sol.to_json()?);
            let gaps = reward_gaps(&env, &sol);
            println!("{}", serde_json::to_string_pretty(&gaps)?);
            match brute_force_welfare(&env, DEFAULT_ENUMERATION_CAP) {
                Ok((profile, value)) => println!(
                    "identity: induction {} vs enumeration {} (profile {:?}), difference {:.3e}",
                    sol.welfare,
                    value,
                    profile,
                    (sol.welfare - value).abs()
                ),
                Err(e) => println!("identity: not checked ({e})"),
            }
        }
        Command::SearchDemo {
            tau_star,
            random,
            seed,
        } => {
            let cfg = SearchDemoConfig::default();
            let targets = match (tau_star, random) {
                (Some(x), _) if (0.0..=1.0).contains(&x) => vec![x],
                (Some(x), _) => {
                    return Err(Error::Config(format!(
                        "--tau-star must lie in [0, 1], got {x}"
                    )))
                }
                (None, Some(n)) => random_incentives(n, seed),
                (None, None) => {
                    return Err(Error::Config(
                        "either --tau-star or --random is required".into(),
                    ))
                }
            };
            let mut failed = 0;
            for target in targets {
                let report = search_demo(&cfg, target)?;
                println!("tau* = {:.6}", report.tau_star);
                println!("  batch        low        mid       high  refusals  outcome");
                for b in &report.batches {
                    let outcome = b.outcome.map_or("frozen".to_string(), |o| format!("{o:?}"));
                    println!(
                        "  {:>5} {:>10.6} {:>10.6} {:>10.6} {:>9}  {}",
                        b.batch, b.low, b.mid, b.high, b.refusals, outcome
                    );
                }
                println!(
                    "  tau_hat = {:.6}, width {:.6} (bound {:.6}), bracketed {}, sandwich {}",
                    report.tau_hat,
                    report.final_width,
                    report.width_bound,
                    report.bracketed,
                    report.sandwich
                );
                if !report.passed() {
                    failed += 1;
                }
            }
            if failed > 0 {
                return Err(Error::Schedule(format!(
                    "{failed} searches failed their checks"
                )));
            }
        }
        Command::Reference {
            depth,
            horizon,
            points,
        } => {
            if depth == 0 || horizon < 2 {
                return Err(Error::Config("need --depth >= 1 and --horizon >= 2".into()));
            }
            println!("t,reference");
            for (t, v) in reference_curve(depth, &checkpoint_grid(horizon, 1, points)) {
                println!("{t},{v}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
