use rand::Rng;
use serde::Serialize;

use crate::environment::{Environment, NoiseModel, Tree};
use crate::error::Result;
use crate::oracle::solve_tree;
use crate::policies::{
    finalize_incentive, BatchLog, BestResponder, Contract, Exponents, Policy, ScheduleParams,
    SearchConfig, SearchState,
};
use crate::rng::{stream, Purpose};

/// `t^(1 - 1/(2 d^2))` at each round of `grid`.
pub fn reference_curve(depth: usize, grid: &[u64]) -> Vec<(u64, f64)> {
    let exponent = 1.0 - 1.0 / (2.0 * (depth * depth) as f64);
    grid.iter()
        .map(|&t| (t, (t as f64).powf(exponent)))
        .collect()
}

/// Settings of the stand-alone search against an exact best responder.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchDemoConfig {
    pub horizon: u64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub kappa: f64,
    pub breadth: usize,
}

impl Default for SearchDemoConfig {
    fn default() -> Self {
        Self {
            horizon: 1_000_000,
            eta: 0.25,
            alpha: 2.0 / 3.0,
            beta: 0.25,
            c: 1.0,
            kappa: 0.5,
            breadth: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchDemoReport {
    pub tau_star: f64,
    pub batches: Vec<BatchLog>,
    pub tau_hat: f64,
    /// `tau*` lay in `[low, high]` before and after every batch.
    pub bracketed: bool,
    pub final_width: f64,
    /// `1/2^batches + 2/T^beta`.
    pub width_bound: f64,
    /// `tau_hat - 4/T^beta - c B T^-eta <= tau* <= tau_hat`.
    pub sandwich: bool,
}

impl SearchDemoReport {
    pub fn passed(&self) -> bool {
        self.bracketed && self.final_width <= self.width_bound && self.sandwich
    }
}

/// Searches the incentive of arm 0 of a leaf whose best arm is 1 and whose
/// utilities are `[1 - tau_star, 1]`; the leaf is the scripted best responder.
pub fn search_demo(cfg: &SearchDemoConfig, tau_star: f64) -> Result<SearchDemoReport> {
    let tree = Tree::build(2, 1)?;
    let env = Environment::new(
        tree,
        2,
        vec![vec![0.0; 4], vec![1.0 - tau_star, 1.0]],
        NoiseModel::None,
    )?;
    let sol = solve_tree(&env);
    let tau_star = sol.nodes[1].tau_star[0];
    let mut child = BestResponder::new(1, &[], &sol);

    let exps = Exponents {
        eta: cfg.eta,
        alpha: cfg.alpha,
        beta: cfg.beta,
    };
    let sched = ScheduleParams::from_exponents(2, exps, cfg.horizon)?;
    let search_cfg = SearchConfig {
        batch_len: sched.batch_len,
        batches: sched.batches,
        c: cfg.c,
        kappa: cfg.kappa,
        beta_over_alpha: sched.beta_over_alpha(),
        precision: sched.precision(cfg.horizon),
    };

    let mut state = SearchState::new();
    let mut batches = Vec::with_capacity(sched.batches as usize);
    let mut bracketed = true;
    let mut t = 0;
    for _ in 0..sched.batches {
        for _ in 0..sched.batch_len {
            t += 1;
            let offer = Contract {
                arm: 0,
                transfer: state.offer(),
            };
            let played = child.decide(t, Some(offer)).action;
            state.record(played == 0);
        }
        let log = state.close_batch(&search_cfg)?;
        bracketed &= log.low <= tau_star && tau_star <= log.high;
        bracketed &= log.new_low <= tau_star && tau_star <= log.new_high;
        batches.push(log);
    }
    let tau_hat = finalize_incentive(
        state.final_high(),
        cfg.horizon,
        cfg.beta,
        cfg.c,
        cfg.breadth,
        cfg.eta,
    );
    let t_f = cfg.horizon as f64;
    let extra = cfg.c * cfg.breadth as f64 * t_f.powf(-cfg.eta);
    Ok(SearchDemoReport {
        tau_star,
        batches,
        tau_hat,
        bracketed,
        final_width: state.high() - state.low(),
        width_bound: 0.5f64.powi(sched.batches as i32) + 2.0 * search_cfg.precision,
        sandwich: tau_hat - 4.0 * search_cfg.precision - extra <= tau_star && tau_star <= tau_hat,
    })
}

/// `n` incentives drawn uniformly from `[0, 1]`.
pub fn random_incentives(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, 0, Purpose::Policy);
    (0..n).map(|_| rng.random::<f64>()).collect()
}
