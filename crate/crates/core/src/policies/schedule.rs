//! Depth-indexed exponents and the propagation of good-behavior parameters
//! from the leaves to the root.
//!
//! A node at depth `d >= 2` explores with exponents `(eta, alpha, beta)`. Its
//! children are summarized by `(wait, c, kappa, zeta)`: how long they need
//! before they best-respond, and how fast their action regret grows. Running
//! the search and UCB phases turns the children's parameters into the node's
//! own, which its parent uses in turn.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ceil` that snaps values within float noise of an integer onto it, so
/// exact powers such as `10^4^(3/4)` give `1000`, not `1001`.
pub(crate) fn ceil_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Exponents {
    /// Default schedule for a node at depth `d` in a tree of depth `tree_depth`.
    pub fn default_for(d: usize, tree_depth: usize) -> Self {
        let (d, big_d) = (d as f64, tree_depth as f64);
        Self {
            eta: 1.0 / (2.0 * d * (d - 1.0)),
            alpha: (big_d + 1.0) * (d - 1.0) / (big_d * d),
            beta: 1.0 / (2.0 * d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub depth: usize,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `ceil(T^alpha)`: rounds per search batch.
    pub batch_len: u64,
    /// `ceil(log2(T^beta))`: batches per arm.
    pub batches: u32,
}

impl ScheduleParams {
    /// Default exponents for depth `d`, checked against the children's
    /// exponent `kappa_{d-1} = 1 - 1/(2(d-1))`.
    pub fn for_depth(d: usize, tree_depth: usize, horizon: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Schedule(format!(
                "no exploration schedule for leaves (depth {d})"
            )));
        }
        if d > tree_depth {
            return Err(Error::Schedule(format!(
                "depth {d} exceeds tree depth {tree_depth}"
            )));
        }
        let sched = Self::from_exponents(d, Exponents::default_for(d, tree_depth), horizon)?;
        let child_kappa = 1.0 - 1.0 / (2.0 * (d as f64 - 1.0));
        if let Err(e) = sched.check_condition(child_kappa) {
            panic!("default schedule violates its own search condition: {e}");
        }
        Ok(sched)
    }

    pub fn from_exponents(d: usize, exp: Exponents, horizon: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Schedule(format!(
                "no exploration schedule for leaves (depth {d})"
            )));
        }
        if horizon < 2 {
            return Err(Error::Schedule(format!(
                "horizon must be at least 2, got {horizon}"
            )));
        }
        for (name, v) in [("eta", exp.eta), ("alpha", exp.alpha), ("beta", exp.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Schedule(format!(
                    "{name} = {v} at depth {d} is outside (0, 1)"
                )));
            }
        }
        let t = horizon as f64;
        let batch_len = ceil_snapped(t.powf(exp.alpha)) as u64;
        let batches = ceil_snapped(exp.beta * t.log2()).max(1.0) as u32;
        Ok(Self {
            depth: d,
            eta: exp.eta,
            alpha: exp.alpha,
            beta: exp.beta,
            batch_len,
            batches,
        })
    }

    /// `beta/alpha < 1 - kappa`: without it a batch cannot separate accepting
    /// from refusing children.
    pub fn check_condition(&self, child_kappa: f64) -> Result<()> {
        let ratio = self.beta / self.alpha;
        if ratio < 1.0 - child_kappa {
            Ok(())
        } else {
            Err(Error::Schedule(format!(
                "depth {}: beta/alpha = {ratio:.4} is not below 1 - kappa = {:.4}",
                self.depth,
                1.0 - child_kappa
            )))
        }
    }

    pub fn beta_over_alpha(&self) -> f64 {
        self.beta / self.alpha
    }

    /// Search precision `1/T^beta`.
    pub fn precision(&self, horizon: u64) -> f64 {
        (horizon as f64).powf(-self.beta)
    }

    /// Rounds spent exploring payments: `K * batch_len * batches`.
    pub fn explore_len(&self, arms: usize) -> u64 {
        arms as u64 * self.batch_len * self.batches as u64
    }
}

/// Parameters of the no-regret guarantee a node offers its parent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionParams {
    /// Rounds before the node best-responds.
    pub wait: u64,
    pub c: f64,
    pub kappa: f64,
    pub zeta: f64,
}

fn ln_k_t3(arms_pow: f64, horizon: u64) -> f64 {
    arms_pow.ln() + 3.0 * (horizon as f64).ln()
}

/// Parameters of a UCB leaf: `(0, 8 sqrt(K ln(K T^3)), 1/2, 2)`.
pub fn leaf_params(arms: usize, horizon: u64) -> AssumptionParams {
    let k = arms as f64;
    AssumptionParams {
        wait: 0,
        c: 8.0 * (k * ln_k_t3(k, horizon)).sqrt(),
        kappa: 0.5,
        zeta: 2.0,
    }
}

/// Worst case over the children: max wait, max c, max kappa, min zeta.
pub fn aggregate(children: &[AssumptionParams]) -> Option<AssumptionParams> {
    children.iter().copied().reduce(|a, b| AssumptionParams {
        wait: a.wait.max(b.wait),
        c: a.c.max(b.c),
        kappa: a.kappa.max(b.kappa),
        zeta: a.zeta.min(b.zeta),
    })
}

/// Parameters of a node running the search-then-UCB policy over children
/// described by `children`.
pub fn propagate_params(
    children: &[AssumptionParams],
    sched: &ScheduleParams,
    arms: usize,
    breadth: usize,
    horizon: u64,
) -> Result<AssumptionParams> {
    let child = aggregate(children)
        .ok_or_else(|| Error::Schedule("no children to propagate from".into()))?;
    let t = horizon as f64;
    let joint = (arms as f64).powi(breadth as i32 + 1);
    let eps = (4.0 * breadth as f64 * arms as f64 * t.ln()).ln() / t.ln();
    let out = AssumptionParams {
        wait: child.wait + sched.explore_len(arms),
        c: 10.0 * (joint * ln_k_t3(joint, horizon)).sqrt(),
        kappa: 0.5_f64.max(child.kappa + sched.eta).max(1.0 - sched.beta),
        zeta: sched.alpha * child.zeta - eps,
    };
    if out.zeta <= 0.0 {
        log::debug!(
            "confidence exponent at depth {} is {:.4} <= 0: horizon {horizon} is small for this tree",
            sched.depth,
            out.zeta
        );
    }
    Ok(out)
}

/// Which constant `c` the search threshold and the extra payment use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstantMode {
    /// Propagated constants, as large as the guarantees require.
    Theoretical,
    /// `c = c_scale` at every depth.
    Scaled { c_scale: f64 },
}

impl Default for ConstantMode {
    fn default() -> Self {
        ConstantMode::Scaled { c_scale: 0.05 }
    }
}

impl ConstantMode {
    pub fn resolve(&self, theoretical: f64) -> f64 {
        match *self {
            ConstantMode::Theoretical => theoretical,
            ConstantMode::Scaled { c_scale } => c_scale,
        }
    }
}

/// Everything a depth needs: its schedule, what it assumes of its children,
/// what it guarantees upward, and when its phases start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub depth: usize,
    pub schedule: Option<ScheduleParams>,
    /// Aggregated parameters of the children (none for leaves).
    pub children: Option<AssumptionParams>,
    /// Parameters this depth guarantees to its parent.
    pub params: AssumptionParams,
    /// Constant used by the search threshold and the extra payment.
    pub search_c: f64,
    /// Last round of the wait phase (`0` when there is none).
    pub wait: u64,
    pub explore_len: u64,
}

impl LayerPlan {
    /// Last round before the commit phase.
    pub fn commit_after(&self) -> u64 {
        self.wait + self.explore_len
    }
}

/// Plans every depth of a `tree_depth`-deep tree, bottom-up. `overrides`
/// replaces the default exponents of selected depths; every depth is checked
/// against the `beta/alpha < 1 - kappa` condition using the propagated kappa.
pub fn plan_layers(
    tree_depth: usize,
    breadth: usize,
    arms: usize,
    horizon: u64,
    mode: ConstantMode,
    overrides: &BTreeMap<usize, Exponents>,
) -> Result<Vec<LayerPlan>> {
    if let Some(&d) = overrides.keys().find(|&&d| d < 2 || d > tree_depth) {
        return Err(Error::Schedule(format!(
            "exponent override for depth {d}, valid depths are 2..={tree_depth}"
        )));
    }
    let leaf = leaf_params(arms, horizon);
    let mut plans = vec![LayerPlan {
        depth: 1,
        schedule: None,
        children: None,
        params: leaf,
        search_c: mode.resolve(leaf.c),
        wait: 0,
        explore_len: 0,
    }];
    for d in 2..=tree_depth {
        let sched = match overrides.get(&d) {
            Some(&exp) => ScheduleParams::from_exponents(d, exp, horizon)?,
            None => ScheduleParams::for_depth(d, tree_depth, horizon)?,
        };
        let child = plans[d - 2].params;
        sched.check_condition(child.kappa)?;
        let params = propagate_params(&vec![child; breadth], &sched, arms, breadth, horizon)?;
        plans.push(LayerPlan {
            depth: d,
            schedule: Some(sched),
            children: Some(child),
            params,
            search_c: mode.resolve(child.c),
            wait: child.wait,
            explore_len: sched.explore_len(arms),
        });
    }
    Ok(plans)
}

/// `ln T >= D^2 ln(4 B K ln T)`: the horizon the guarantees ask for.
pub fn horizon_guardrail(tree_depth: usize, breadth: usize, arms: usize, horizon: u64) -> bool {
    let ln_t = (horizon as f64).ln();
    ln_t >= (tree_depth * tree_depth) as f64 * (4.0 * breadth as f64 * arms as f64 * ln_t).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn depth_two_of_three() {
        let s = ScheduleParams::for_depth(2, 3, 10_000).unwrap();
        assert!((s.eta - 0.25).abs() < EPS);
        assert!((s.alpha - 2.0 / 3.0).abs() < EPS);
        assert!((s.beta - 0.25).abs() < EPS);
    }

    #[test]
    fn depth_three_of_three() {
        let s = ScheduleParams::for_depth(3, 3, 10_000).unwrap();
        assert!((s.eta - 1.0 / 12.0).abs() < EPS);
        assert!((s.alpha - 8.0 / 9.0).abs() < EPS);
        assert!((s.beta - 1.0 / 6.0).abs() < EPS);
    }

    #[test]
    fn depth_two_of_two_condition() {
        let s = ScheduleParams::for_depth(2, 2, 10_000).unwrap();
        assert!((s.alpha - 0.75).abs() < EPS);
        assert!((s.beta_over_alpha() - 1.0 / 3.0).abs() < EPS);
        s.check_condition(0.5).unwrap();
    }

    #[test]
    fn leaves_have_no_schedule() {
        assert!(ScheduleParams::for_depth(1, 3, 10_000).is_err());
    }

    #[test]
    fn default_condition_holds_everywhere() {
        for big_d in 2..=8 {
            for d in 2..=big_d {
                ScheduleParams::for_depth(d, big_d, 1_000_000).unwrap();
            }
        }
    }

    #[test]
    fn batch_sizes() {
        // 10^(4*2/3) = 464.16 -> 465 rounds, log2(10) = 3.32 -> 4 batches
        let s = ScheduleParams::for_depth(2, 3, 10_000).unwrap();
        assert_eq!(s.batch_len, 465);
        assert_eq!(s.batches, 4);
        assert_eq!(s.explore_len(2), 3720);
        // exact power: 10^(4*3/4) = 1000
        let s = ScheduleParams::for_depth(2, 2, 10_000).unwrap();
        assert_eq!(s.batch_len, 1000);
        // log2(10^1.5) = 4.98 -> 5 batches
        let s = ScheduleParams::from_exponents(
            2,
            Exponents {
                eta: 0.25,
                alpha: 2.0 / 3.0,
                beta: 0.25,
            },
            1_000_000,
        )
        .unwrap();
        assert_eq!(s.batches, 5);
        assert_eq!(s.batch_len, 10_000);
    }

    #[test]
    fn leaf_constants() {
        let p = leaf_params(2, 10_000);
        // 8 * sqrt(2 * ln(2e12)) = 8 * sqrt(2 * 28.3241) = 60.21
        let expected = 8.0 * (2.0 * (2.0e12_f64).ln()).sqrt();
        assert!((p.c - expected).abs() < 1e-9);
        assert!((p.c - 60.21).abs() < 0.01);
        assert_eq!(p.wait, 0);
        assert_eq!(p.kappa, 0.5);
        assert_eq!(p.zeta, 2.0);
        assert_eq!(leaf_params(7, 123).kappa, 0.5);
    }

    #[test]
    fn propagation_from_leaves() {
        let leaf = leaf_params(2, 10_000);
        let sched = ScheduleParams::for_depth(2, 3, 10_000).unwrap();
        let p = propagate_params(&[leaf, leaf], &sched, 2, 2, 10_000).unwrap();
        assert!((p.kappa - 0.75).abs() < EPS);
        assert_eq!(p.wait, 2 * 465 * 4);
    }

    #[test]
    fn propagated_constant() {
        // 10 * sqrt(4 * ln(4e12)) = 10 * sqrt(4 * 29.0172) = 107.73
        let leaf = leaf_params(2, 10_000);
        let sched = ScheduleParams::for_depth(2, 2, 10_000).unwrap();
        let p = propagate_params(&[leaf], &sched, 2, 1, 10_000).unwrap();
        assert!((p.c - 107.73).abs() < 0.01);
    }

    #[test]
    fn wait_grows_linearly_with_shared_exponents() {
        let exp = Exponents {
            eta: 0.1,
            alpha: 0.8,
            beta: 0.1,
        };
        let t = 1_000_000;
        let sched2 = ScheduleParams::from_exponents(2, exp, t).unwrap();
        let sched3 = ScheduleParams::from_exponents(3, exp, t).unwrap();
        let per_layer = 3 * sched2.batch_len * sched2.batches as u64;
        let p2 = propagate_params(&[leaf_params(3, t)], &sched2, 3, 1, t).unwrap();
        let p3 = propagate_params(&[p2], &sched3, 3, 1, t).unwrap();
        assert_eq!(p2.wait, per_layer);
        assert_eq!(p3.wait, 2 * per_layer);
    }

    #[test]
    fn aggregation_is_worst_case() {
        let a = AssumptionParams {
            wait: 5,
            c: 1.0,
            kappa: 0.6,
            zeta: 1.5,
        };
        let b = AssumptionParams {
            wait: 3,
            c: 2.0,
            kappa: 0.5,
            zeta: 1.0,
        };
        let agg = aggregate(&[a, b]).unwrap();
        assert_eq!(
            agg,
            AssumptionParams {
                wait: 5,
                c: 2.0,
                kappa: 0.6,
                zeta: 1.0
            }
        );
        assert!(aggregate(&[]).is_none());
    }

    #[test]
    fn layer_plan_propagates_kappa() {
        let plans = plan_layers(
            4,
            2,
            2,
            1_000_000_000,
            ConstantMode::Theoretical,
            &BTreeMap::new(),
        )
        .unwrap();
        for plan in &plans {
            let d = plan.depth as f64;
            assert!(
                (plan.params.kappa - (1.0 - 1.0 / (2.0 * d))).abs() < 1e-12,
                "depth {d}"
            );
        }
        for w in plans.windows(2) {
            assert_eq!(w[1].wait, w[0].commit_after());
        }
    }

    #[test]
    fn overrides_are_checked() {
        let mut ov = BTreeMap::new();
        ov.insert(
            2,
            Exponents {
                eta: 0.25,
                alpha: 0.4,
                beta: 0.25,
            },
        );
        let err = plan_layers(3, 2, 3, 200_000, ConstantMode::default(), &ov);
        assert!(matches!(err, Err(Error::Schedule(_))));
        let mut ov = BTreeMap::new();
        ov.insert(
            5,
            Exponents {
                eta: 0.25,
                alpha: 0.7,
                beta: 0.25,
            },
        );
        assert!(plan_layers(3, 2, 3, 200_000, ConstantMode::default(), &ov).is_err());
    }

    #[test]
    fn scaled_mode_replaces_c() {
        let plans = plan_layers(
            3,
            2,
            3,
            1_000_000,
            ConstantMode::Scaled { c_scale: 0.05 },
            &BTreeMap::new(),
        )
        .unwrap();
        assert!(plans.iter().all(|p| p.search_c == 0.05));
        let plans = plan_layers(
            3,
            2,
            3,
            1_000_000,
            ConstantMode::Theoretical,
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(plans[1].search_c, leaf_params(3, 1_000_000).c);
    }
}
