//! Batched binary search for the smallest transfer a child accepts.
//!
//! For one `(child, arm)` pair the search keeps an interval `[low, high]` that
//! should contain the child's optimal incentive. Each batch offers the
//! midpoint for `batch_len` rounds and counts refusals. Few refusals mean the
//! midpoint was enough (ceiling drops to `mid + 1/T^beta`), many mean it was
//! not (floor rises to `mid - 1/T^beta`), and a count strictly in between means
//! the child is nearly indifferent, so the midpoint is already within
//! `1/T^beta` of the target.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchOutcome {
    Converged,
    ChildAccepted,
    ChildRefused,
}

/// `c * batch_len^(kappa + beta/alpha)`.
pub fn refusal_threshold(batch_len: u64, c: f64, kappa: f64, beta_over_alpha: f64) -> f64 {
    c * (batch_len as f64).powf(kappa + beta_over_alpha)
}

/// Classifies a finished batch from its refusal count, in the branch order
/// of the search: the converged window first, then acceptance, then refusal.
pub fn classify_batch(
    t_not: u64,
    batch_len: u64,
    c: f64,
    kappa: f64,
    beta_over_alpha: f64,
) -> Result<BatchOutcome> {
    if t_not > batch_len {
        return Err(Error::RefusalCount { t_not, batch_len });
    }
    let threshold = refusal_threshold(batch_len, c, kappa, beta_over_alpha);
    let refusals = t_not as f64;
    let len = batch_len as f64;
    Ok(if threshold < refusals && refusals < len - threshold {
        BatchOutcome::Converged
    } else if refusals <= len - threshold {
        BatchOutcome::ChildAccepted
    } else {
        BatchOutcome::ChildRefused
    })
}

/// Upper estimate `high + T^-beta + c B T^-eta`. Never clipped: transfers may
/// exceed the reward range.
pub fn finalize_incentive(
    high: f64,
    horizon: u64,
    beta: f64,
    c: f64,
    breadth: usize,
    eta: f64,
) -> f64 {
    let t = horizon as f64;
    high + t.powf(-beta) + c * breadth as f64 * t.powf(-eta)
}

/// Constants shared by every search a node runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub batch_len: u64,
    pub batches: u32,
    pub c: f64,
    pub kappa: f64,
    pub beta_over_alpha: f64,
    /// `1/T^beta`.
    pub precision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchStatus {
    Pending,
    Active,
    /// Exited early; the frozen midpoint keeps being offered.
    Converged,
    /// Ran every batch without an early exit.
    Exhausted,
}

/// One closed batch, for reports and tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchLog {
    /// 1-based batch number.
    pub batch: u32,
    pub low: f64,
    pub mid: f64,
    pub high: f64,
    pub refusals: u64,
    pub outcome: Option<BatchOutcome>,
    /// Interval after the update.
    pub new_low: f64,
    pub new_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    low: f64,
    high: f64,
    /// Batches closed so far.
    closed: u32,
    refusals: u64,
    status: SearchStatus,
    frozen_mid: Option<f64>,
    /// Ceiling at the point the search stopped updating.
    exit_high: Option<f64>,
}

impl Default for SearchState {
    fn default() -> Self {
        Self::new()
    }
}

impl SearchState {
    pub fn new() -> Self {
        Self {
            low: 0.0,
            high: 1.0,
            closed: 0,
            refusals: 0,
            status: SearchStatus::Pending,
            frozen_mid: None,
            exit_high: None,
        }
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn status(&self) -> SearchStatus {
        self.status
    }

    pub fn batches_closed(&self) -> u32 {
        self.closed
    }

    pub fn refusals(&self) -> u64 {
        self.refusals
    }

    /// Transfer offered during the current batch.
    pub fn offer(&self) -> f64 {
        self.frozen_mid.unwrap_or((self.low + self.high) / 2.0)
    }

    /// Records one probe round.
    pub fn record(&mut self, accepted: bool) {
        if self.status == SearchStatus::Pending {
            self.status = SearchStatus::Active;
        }
        if !accepted {
            self.refusals += 1;
        }
    }

    /// Closes the current batch and updates the interval. After an early
    /// exit the batch is still counted but the interval stays frozen.
    pub fn close_batch(&mut self, cfg: &SearchConfig) -> Result<BatchLog> {
        let (low, high, mid) = (self.low, self.high, self.offer());
        let refusals = std::mem::take(&mut self.refusals);
        self.closed += 1;
        let mut outcome = None;
        if self.status != SearchStatus::Converged {
            let out = classify_batch(
                refusals,
                cfg.batch_len,
                cfg.c,
                cfg.kappa,
                cfg.beta_over_alpha,
            )?;
            match out {
                BatchOutcome::Converged => {
                    self.status = SearchStatus::Converged;
                    self.frozen_mid = Some(mid);
                    self.exit_high = Some(high);
                }
                // clamps only matter when 1/T^beta > 1/2
                BatchOutcome::ChildAccepted => self.high = (mid + cfg.precision).min(1.0),
                BatchOutcome::ChildRefused => self.low = (mid - cfg.precision).max(0.0),
            }
            outcome = Some(out);
            if self.status == SearchStatus::Active && self.closed >= cfg.batches {
                self.status = SearchStatus::Exhausted;
                self.exit_high = Some(self.high);
            }
        }
        Ok(BatchLog {
            batch: self.closed,
            low,
            mid,
            high,
            refusals,
            outcome,
            new_low: self.low,
            new_high: self.high,
        })
    }

    /// Ceiling the final estimate is built from: the one at the early exit,
    /// or the last one.
    pub fn final_high(&self) -> f64 {
        self.exit_high.unwrap_or(self.high)
    }

    pub fn is_done(&self) -> bool {
        matches!(
            self.status,
            SearchStatus::Converged | SearchStatus::Exhausted
        )
    }
}
