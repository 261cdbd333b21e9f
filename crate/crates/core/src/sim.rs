//! Slot-based simulation of interest forwarding with delayed replies.
//!
//! Each slot delivers every reply whose arrival slot has been reached, asks
//! the policy for one arm, sends one interest, and samples its reply delay at
//! send time. A run is a pure function of (config, seed): the RNG is pinned
//! to ChaCha8 and per-replication seeds are derived from the master seed with
//! a fixed splitmix64 rule, so any scheduling of replications yields
//! identical aggregates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "rayon")]
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::delay::DelayDistribution;
use crate::math::splitmix64;
use crate::policy::{ArmStats, InitStrategy, PolicyConfig, PolicyError, PolicyState};

/// Name of the pinned RNG stream; part of the config digest.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("scenario needs at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("horizon {horizon} is shorter than the initial phase t0 = {t0}")]
    HorizonBeforeT0 { horizon: u32, t0: u32 },
    #[error("replications must be at least 1")]
    NoReplications,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Full description of one experiment scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub arms: Vec<DelayDistribution>,
    pub policy: PolicyConfig,
    pub horizon: u32,
    pub replications: u32,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.arms.len() < 2 {
            return Err(ConfigError::TooFewArms(self.arms.len()));
        }
        if self.horizon < self.policy.t0 {
            return Err(ConfigError::HorizonBeforeT0 {
                horizon: self.horizon,
                t0: self.policy.t0,
            });
        }
        if self.replications == 0 {
            return Err(ConfigError::NoReplications);
        }
        self.policy.validate_runnable()?;
        Ok(())
    }

    /// Arm with the smallest true mean delay (lowest id on ties).
    pub fn optimal_arm(&self) -> u32 {
        let mut best = 0usize;
        for (i, d) in self.arms.iter().enumerate().skip(1) {
            if d.mean() < self.arms[best].mean() {
                best = i;
            }
        }
        best as u32
    }

    /// Stable hex digest of everything that determines a run's outcome.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Canon<'a> {
            rng: &'static str,
            version: &'static str,
            arms: Vec<&'a crate::delay::DelayKind>,
            policy: &'a PolicyConfig,
            horizon: u32,
            replications: u32,
            seed: u64,
        }
        let canon = Canon {
            rng: RNG_ALGORITHM,
            version: env!("CARGO_PKG_VERSION"),
            arms: self.arms.iter().map(|d| d.kind()).collect(),
            policy: &self.policy,
            horizon: self.horizon,
            replications: self.replications,
            seed: self.seed,
        };
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Deterministic per-replication seed derived from the master seed.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    splitmix64(master, replication)
}

/// Hooks into the slot loop; all methods default to no-ops.
pub trait SimObserver {
    /// An interest was sent at `slot` to `arm`; `explored` marks initial-phase
    /// and epsilon picks.
    fn on_send(&mut self, slot: u32, arm: u32, explored: bool) {
        let _ = (slot, arm, explored);
    }
    /// A reply was delivered to the policy at `slot` (equal to its arrival slot).
    fn on_reply(&mut self, slot: u32, arm: u32, sent_at: u32, delay: u32) {
        let _ = (slot, arm, sent_at, delay);
    }
}

/// Runs one replication, streaming events into `obs`. Returns final arm stats.
pub fn run_observed<O: SimObserver>(
    config: &ScenarioConfig,
    seed: u64,
    obs: &mut O,
) -> Result<Vec<ArmStats>, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = PolicyState::new(config.arms.len(), &mut rng);
    let ring = config.arms.iter().map(|d| d.sampling_max()).max().unwrap() as usize + 1;
    // bucket b holds replies arriving at slots congruent to b; delays in
    // [1, ring-1] make the current slot's bucket always safe to reuse
    let mut buckets: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); ring];
    for t in 0..config.horizon {
        let b = t as usize % ring;
        let mut due = std::mem::take(&mut buckets[b]);
        for &(arm, sent_at, delay) in &due {
            state.record_reply(arm, delay);
            obs.on_reply(t, arm, sent_at, delay);
        }
        due.clear();
        buckets[b] = due;

        let (arm, explored) = state.select_arm(&config.policy, &mut rng);
        let delay = config.arms[arm as usize].sample(&mut rng);
        state.record_send(arm);
        obs.on_send(t, arm, explored);
        let arrives_at = t + delay;
        if arrives_at < config.horizon {
            buckets[arrives_at as usize % ring].push((arm, t, delay));
        }
    }
    Ok(state.into_arms())
}

/// One per-slot decision record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRecord {
    pub arm: u32,
    pub explored: bool,
}

/// Complete record of a single replication.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<SlotRecord>,
    pub final_stats: Vec<ArmStats>,
    pub seed: u64,
    pub config_digest: String,
}

impl RunTrace {
    /// Share of interests sent to `optimal_arm` in slots [0, t].
    pub fn fraction_optimal(&self, optimal_arm: u32, t: usize) -> f64 {
        assert!(t < self.records.len(), "slot {t} beyond horizon");
        let hits = self.records[..=t].iter().filter(|r| r.arm == optimal_arm).count();
        hits as f64 / (t + 1) as f64
    }

    /// Cumulative sends per arm at the end of slot `t`.
    pub fn cumulative_sends(&self, num_arms: usize, t: usize) -> Vec<u32> {
        let mut counts = vec![0u32; num_arms];
        for r in &self.records[..=t] {
            counts[r.arm as usize] += 1;
        }
        counts
    }
}

struct TraceCollector {
    records: Vec<SlotRecord>,
}

impl SimObserver for TraceCollector {
    fn on_send(&mut self, _slot: u32, arm: u32, explored: bool) {
        self.records.push(SlotRecord { arm, explored });
    }
}

/// Runs one replication and materializes its full trace.
pub fn run(config: &ScenarioConfig, seed: u64) -> Result<RunTrace, ConfigError> {
    let mut collector = TraceCollector { records: Vec::with_capacity(config.horizon as usize) };
    let final_stats = run_observed(config, seed, &mut collector)?;
    Ok(RunTrace {
        records: collector.records,
        final_stats,
        seed,
        config_digest: config.digest(),
    })
}

/// Per-slot aggregates over replications.
///
/// Everything is accumulated in integers, so parallel and sequential
/// replication schedules produce bit-identical curves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonteCarloCurves {
    pub horizon: u32,
    pub replications: u32,
    pub optimal_arm: u32,
    /// Replications that chose the optimal arm at each slot.
    pub optimal_choices: Vec<u32>,
    /// Sum over replications of the cumulative optimal-send count per slot.
    pub sum_cum_optimal: Vec<u64>,
    /// Sum of squares of the same, for the stderr of the fraction curve.
    pub sum_cum_optimal_sq: Vec<u64>,
}

impl MonteCarloCurves {
    fn empty(horizon: u32, optimal_arm: u32) -> Self {
        let n = horizon as usize;
        Self {
            horizon,
            replications: 0,
            optimal_arm,
            optimal_choices: vec![0; n],
            sum_cum_optimal: vec![0; n],
            sum_cum_optimal_sq: vec![0; n],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.replications += other.replications;
        for (a, b) in self.optimal_choices.iter_mut().zip(&other.optimal_choices) {
            *a += b;
        }
        for (a, b) in self.sum_cum_optimal.iter_mut().zip(&other.sum_cum_optimal) {
            *a += b;
        }
        for (a, b) in self.sum_cum_optimal_sq.iter_mut().zip(&other.sum_cum_optimal_sq) {
            *a += b;
        }
        self
    }

    /// Mean over replications of the cumulative fraction-optimal at slot `t`.
    pub fn mean_fraction_optimal(&self, t: usize) -> f64 {
        self.sum_cum_optimal[t] as f64 / (self.replications as f64 * (t + 1) as f64)
    }

    /// Standard error of that mean (0 for a single replication).
    pub fn stderr_fraction_optimal(&self, t: usize) -> f64 {
        let r = self.replications as f64;
        if self.replications < 2 {
            return 0.0;
        }
        let denom = (t + 1) as f64;
        let sum = self.sum_cum_optimal[t] as f64 / denom;
        let sum_sq = self.sum_cum_optimal_sq[t] as f64 / (denom * denom);
        let var = ((sum_sq - sum * sum / r) / (r - 1.0)).max(0.0);
        (var / r).sqrt()
    }

    /// Fraction of replications whose slot-`t` pick was suboptimal.
    pub fn suboptimal_frequency(&self, t: usize) -> f64 {
        1.0 - self.optimal_choices[t] as f64 / self.replications as f64
    }

    /// Mean cumulative count of suboptimal sends in [0, t].
    pub fn mean_cumulative_suboptimal(&self, t: usize) -> f64 {
        (t + 1) as f64 - self.sum_cum_optimal[t] as f64 / self.replications as f64
    }
}

struct CurveObserver {
    acc: MonteCarloCurves,
    cum_optimal: u32,
}

impl CurveObserver {
    fn begin_replication(&mut self) {
        self.cum_optimal = 0;
        self.acc.replications += 1;
    }
}

impl SimObserver for CurveObserver {
    fn on_send(&mut self, slot: u32, arm: u32, _explored: bool) {
        let t = slot as usize;
        if arm == self.acc.optimal_arm {
            self.cum_optimal += 1;
            self.acc.optimal_choices[t] += 1;
        }
        let c = self.cum_optimal as u64;
        self.acc.sum_cum_optimal[t] += c;
        self.acc.sum_cum_optimal_sq[t] += c * c;
    }
}

fn monte_carlo_chunk(
    config: &ScenarioConfig,
    reps: std::ops::Range<u64>,
) -> Result<MonteCarloCurves, ConfigError> {
    let mut obs = CurveObserver {
        acc: MonteCarloCurves::empty(config.horizon, config.optimal_arm()),
        cum_optimal: 0,
    };
    for rep in reps {
        obs.begin_replication();
        run_observed(config, replication_seed(config.seed, rep), &mut obs)?;
    }
    Ok(obs.acc)
}

/// Sequential replication loop; the reference the parallel path must match.
pub fn monte_carlo_seq(config: &ScenarioConfig) -> Result<MonteCarloCurves, ConfigError> {
    config.validate()?;
    monte_carlo_chunk(config, 0..config.replications as u64)
}

/// Aggregates `config.replications` independent runs into per-slot curves.
#[cfg(feature = "rayon")]
pub fn monte_carlo(config: &ScenarioConfig) -> Result<MonteCarloCurves, ConfigError> {
    config.validate()?;
    let total = config.replications as u64;
    let workers = rayon::current_num_threads() as u64 * 4;
    let chunk = (total / workers).max(1);
    let starts: Vec<u64> = (0..total).step_by(chunk as usize).collect();
    let parts: Result<Vec<_>, _> = starts
        .into_par_iter()
        .map(|s| monte_carlo_chunk(config, s..(s + chunk).min(total)))
        .collect();
    Ok(parts?
        .into_iter()
        .reduce(MonteCarloCurves::merge)
        .expect("at least one replication chunk"))
}

#[cfg(not(feature = "rayon"))]
pub fn monte_carlo(config: &ScenarioConfig) -> Result<MonteCarloCurves, ConfigError> {
    monte_carlo_seq(config)
}

/// Which observations enter the end-of-phase sample means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorCut {
    /// All t0 initial sends, counting a reply iff sent_at + delay <= t0.
    AnsweredByT0,
    /// Only the first t0 - D sends, every one of which is answered by t0
    /// when delays are bounded by D.
    SentByT0MinusD { max_delay: u32 },
}

/// Frequency estimate with its replication count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmpiricalEstimate {
    pub successes: u64,
    pub replications: u64,
}

impl EmpiricalEstimate {
    pub fn probability(&self) -> f64 {
        self.successes as f64 / self.replications as f64
    }

    /// Normal-approximation half-width at the given z value.
    pub fn half_width(&self, z: f64) -> f64 {
        let p = self.probability();
        z * (p * (1.0 - p) / self.replications as f64).sqrt()
    }

    /// 95% half-width.
    pub fn half_width_95(&self) -> f64 {
        self.half_width(1.959_963_984_540_054)
    }
}

fn estimator_chunk(
    arms: &[DelayDistribution],
    init: InitStrategy,
    t0: u32,
    cut: EstimatorCut,
    master_seed: u64,
    reps: std::ops::Range<u64>,
) -> u64 {
    let k = arms.len();
    let best = {
        let mut best = 0usize;
        for (i, d) in arms.iter().enumerate().skip(1) {
            if d.mean() < arms[best].mean() {
                best = i;
            }
        }
        best
    };
    let sends = match cut {
        EstimatorCut::AnsweredByT0 => t0,
        EstimatorCut::SentByT0MinusD { max_delay } => t0.saturating_sub(max_delay),
    };
    let mut successes = 0u64;
    let mut sums = vec![0u64; k];
    let mut counts = vec![0u64; k];
    for rep in reps {
        let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(master_seed, rep));
        let mut state = PolicyState::new(k, &mut rng);
        sums.fill(0);
        counts.fill(0);
        for s in 0..sends {
            let arm = state.init_arm(init, &mut rng) as usize;
            let delay = arms[arm].sample(&mut rng);
            let counted = match cut {
                EstimatorCut::AnsweredByT0 => s + delay <= t0,
                EstimatorCut::SentByT0MinusD { .. } => true,
            };
            if counted {
                sums[arm] += delay as u64;
                counts[arm] += 1;
            }
        }
        if counts.iter().any(|&c| c == 0) {
            continue;
        }
        // argmin of exact rational means S/n, lowest id on ties:
        // replace the leader only on a strict improvement
        let mut lead = 0usize;
        for j in 1..k {
            if sums[j] * counts[lead] < sums[lead] * counts[j] {
                lead = j;
            }
        }
        if lead == best {
            successes += 1;
        }
    }
    successes
}

/// Estimates the probability that the end-of-initial-phase sample means pick
/// the true best arm. Replications with any unanswered arm count as failure.
pub fn empirical_best_arm_prob(
    arms: &[DelayDistribution],
    init: InitStrategy,
    t0: u32,
    cut: EstimatorCut,
    replications: u64,
    master_seed: u64,
) -> EmpiricalEstimate {
    #[cfg(feature = "rayon")]
    let successes = {
        let workers = rayon::current_num_threads() as u64 * 4;
        let chunk = (replications / workers).max(1);
        let starts: Vec<u64> = (0..replications).step_by(chunk as usize).collect();
        starts
            .into_par_iter()
            .map(|s| {
                estimator_chunk(arms, init, t0, cut, master_seed, s..(s + chunk).min(replications))
            })
            .sum::<u64>()
    };
    #[cfg(not(feature = "rayon"))]
    let successes = estimator_chunk(arms, init, t0, cut, master_seed, 0..replications);
    EmpiricalEstimate { successes, replications }
}
