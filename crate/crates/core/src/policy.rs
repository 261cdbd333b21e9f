//! Forwarding policies over statistics of answered interests.
//!
//! All three algorithms keep a per-arm sample mean of observed delays and
//! minimize an index: the mean itself for the two epsilon-greedy variants,
//! the mean minus a confidence width for UCB. Only replies that have already
//! arrived contribute; the simulation engine owns delivery timing.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("eps must lie in (0, 1), got {0}")]
    InvalidEps(f64),
    #[error("eps0 must lie in (0, t0) = (0, {t0}), got {eps0}")]
    InvalidEps0 { eps0: f64, t0: u32 },
    #[error("ucb exploration parameter l must be positive, got {0}")]
    InvalidL(f64),
    #[error("t0 must be at least 1 slot")]
    InvalidT0,
}

/// Algorithm choice plus its one tuning knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum Algorithm {
    EpsGreedy { eps: f64 },
    TunedEpsGreedy { eps0: f64 },
    Ucb { l: f64 },
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::EpsGreedy { .. } => "eps-greedy",
            Algorithm::TunedEpsGreedy { .. } => "tuned-eps-greedy",
            Algorithm::Ucb { .. } => "ucb",
        }
    }
}

/// How arms are chosen during the initial phase [0, t0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    RoundRobin,
    UniformRandom,
}

impl InitStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            InitStrategy::RoundRobin => "round-robin",
            InitStrategy::UniformRandom => "uniform-random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    #[serde(flatten)]
    pub algorithm: Algorithm,
    /// Initial (purely exploratory) phase length in slots.
    pub t0: u32,
    pub init_strategy: InitStrategy,
}

impl PolicyConfig {
    /// Enforces the parameter ranges the algorithms are stated with:
    /// eps in (0,1), eps0 in (0, t0), l > 0. Config-driven runs go through
    /// here; see [`Self::validate_runnable`] for the engine-level check.
    pub fn validate(&self) -> Result<(), PolicyError> {
        self.validate_runnable()?;
        match self.algorithm {
            Algorithm::EpsGreedy { eps } => {
                if !(eps > 0.0) {
                    return Err(PolicyError::InvalidEps(eps));
                }
            }
            Algorithm::TunedEpsGreedy { eps0 } => {
                if !(eps0 < self.t0 as f64) {
                    return Err(PolicyError::InvalidEps0 { eps0, t0: self.t0 });
                }
            }
            Algorithm::Ucb { l } => {
                if !(l > 0.0) {
                    return Err(PolicyError::InvalidL(l));
                }
            }
        }
        Ok(())
    }

    /// The weaker sanity check the simulation engine needs: degenerate but
    /// well-defined parameters (eps = 0 pure greedy, l = 0, large eps0) are
    /// allowed so edge-case experiments can be built in code.
    pub fn validate_runnable(&self) -> Result<(), PolicyError> {
        if self.t0 < 1 {
            return Err(PolicyError::InvalidT0);
        }
        match self.algorithm {
            Algorithm::EpsGreedy { eps } => {
                if !(eps >= 0.0 && eps < 1.0) {
                    return Err(PolicyError::InvalidEps(eps));
                }
            }
            Algorithm::TunedEpsGreedy { eps0 } => {
                if !(eps0 > 0.0 && eps0.is_finite()) {
                    return Err(PolicyError::InvalidEps0 { eps0, t0: self.t0 });
                }
            }
            Algorithm::Ucb { l } => {
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(PolicyError::InvalidL(l));
                }
            }
        }
        Ok(())
    }
}

/// Per-arm bookkeeping: interests sent, replies observed, summed delays.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArmStats {
    pub sent: u64,
    pub answered: u64,
    pub delay_sum: u64,
}

impl ArmStats {
    /// Sample mean of observed delays; None until the first reply arrives.
    pub fn average_delay(&self) -> Option<f64> {
        (self.answered > 0).then(|| self.delay_sum as f64 / self.answered as f64)
    }
}

/// UCB confidence width sqrt(l * ln_t / answered).
pub fn ucb_width(l: f64, ln_t: f64, answered: u64) -> f64 {
    (l * ln_t / answered as f64).sqrt()
}

/// The minimized per-arm index at slot `t`; None while the arm has no data.
pub fn index(policy: &PolicyConfig, stats: &ArmStats, t: u64) -> Option<f64> {
    let avg = stats.average_delay()?;
    Some(match policy.algorithm {
        Algorithm::EpsGreedy { .. } | Algorithm::TunedEpsGreedy { .. } => avg,
        // t counted from slot 1; t0 >= 1 keeps exploitation away from ln(0)
        Algorithm::Ucb { l } => avg - ucb_width(l, (t.max(1) as f64).ln(), stats.answered),
    })
}

/// Probability of a uniformly random pick at exploitation slot `t` (t >= t0).
pub fn exploration_prob(policy: &PolicyConfig, t: u64) -> f64 {
    match policy.algorithm {
        Algorithm::EpsGreedy { eps } => eps,
        Algorithm::TunedEpsGreedy { eps0 } => (eps0 / t as f64).min(1.0),
        Algorithm::Ucb { .. } => 0.0,
    }
}

/// Mutable state of one policy run: per-arm statistics, the current slot,
/// and the round-robin order fixed at slot 0.
#[derive(Debug, Clone)]
pub struct PolicyState {
    arms: Vec<ArmStats>,
    t: u64,
    rr_order: Vec<u32>,
    rr_cursor: usize,
}

impl PolicyState {
    /// Samples the round-robin order (uniformly random initial arm and order).
    pub fn new<R: Rng + ?Sized>(num_arms: usize, rng: &mut R) -> Self {
        assert!(num_arms > 0, "policy needs at least one arm");
        let mut rr_order: Vec<u32> = (0..num_arms as u32).collect();
        rr_order.shuffle(rng);
        Self { arms: vec![ArmStats::default(); num_arms], t: 0, rr_order, rr_cursor: 0 }
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn arms(&self) -> &[ArmStats] {
        &self.arms
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// Initial-phase pick for the given strategy.
    pub fn init_arm<R: Rng + ?Sized>(&mut self, strategy: InitStrategy, rng: &mut R) -> u32 {
        match strategy {
            InitStrategy::RoundRobin => {
                let arm = self.rr_order[self.rr_cursor % self.arms.len()];
                self.rr_cursor += 1;
                arm
            }
            InitStrategy::UniformRandom => rng.random_range(0..self.arms.len()) as u32,
        }
    }

    /// Chooses the arm for the current slot. Returns (arm, explored) where
    /// `explored` marks initial-phase and epsilon picks.
    ///
    /// Exploitation prefers arms that have never been answered (taken in
    /// round-robin order); otherwise the smallest index wins, ties going to
    /// the lowest arm id.
    pub fn select_arm<R: Rng + ?Sized>(&mut self, policy: &PolicyConfig, rng: &mut R) -> (u32, bool) {
        let k = self.arms.len();
        if self.t < policy.t0 as u64 {
            let arm = self.init_arm(policy.init_strategy, rng);
            return (arm, true);
        }
        let p = exploration_prob(policy, self.t);
        if p > 0.0 && rng.random::<f64>() < p {
            return (rng.random_range(0..k) as u32, true);
        }
        if self.arms.iter().any(|a| a.answered == 0) {
            for off in 0..k {
                let pos = (self.rr_cursor + off) % k;
                let arm = self.rr_order[pos];
                if self.arms[arm as usize].answered == 0 {
                    self.rr_cursor += off + 1;
                    return (arm, false);
                }
            }
            unreachable!("some arm had answered == 0");
        }
        let mut best = 0u32;
        let mut best_index = f64::INFINITY;
        for (arm, stats) in self.arms.iter().enumerate() {
            let idx = index(policy, stats, self.t).expect("all arms answered");
            if idx < best_index {
                best_index = idx;
                best = arm as u32;
            }
        }
        (best, false)
    }

    /// Books one sent interest and advances the slot counter.
    pub fn record_send(&mut self, arm: u32) {
        self.arms[arm as usize].sent += 1;
        self.t += 1;
    }

    /// Books an arrived reply. Panics on a reply without a matching
    /// outstanding send; that is a simulator bug, not a runtime condition.
    pub fn record_reply(&mut self, arm: u32, delay: u32) {
        let stats = &mut self.arms[arm as usize];
        assert!(
            stats.answered < stats.sent,
            "reply for arm {arm} without an outstanding interest"
        );
        debug_assert!(delay >= 1, "delays are at least one slot");
        stats.answered += 1;
        stats.delay_sum += delay as u64;
    }

    pub fn into_arms(self) -> Vec<ArmStats> {
        self.arms
    }
}
