//! Discrete-time simulator, policy library, and bound toolkit for
//! multi-armed bandit interest forwarding with delayed replies.
//!
//! A user forwards one interest per slot to one of K neighbour routers; the
//! requested chunk arrives a random number of slots later, so the cost of a
//! decision only becomes observable in the future. The crate provides:
//!
//! - [`delay`]: bounded discrete delay laws (shifted negative binomial, its
//!   truncated variant, explicit tables) with exact moments and inverse-CDF
//!   sampling;
//! - [`policy`]: epsilon-greedy, tuned epsilon-greedy and UCB over statistics
//!   of answered interests only, plus the round-robin / uniform initial
//!   strategies;
//! - [`sim`]: the slot loop, replicated Monte Carlo aggregation, and the
//!   end-of-initial-phase best-arm estimator;
//! - [`analysis`]: the concentration inequalities and every closed-form
//!   success bound/approximation evaluated against the simulator.
//!
//! Runs are pure functions of (config, seed); with the default `rayon`
//! feature replications fan out across threads and still produce bit-identical
//! aggregates, because all accumulation is integral.

pub mod analysis;
pub mod delay;
mod math;
pub mod policy;
pub mod sim;

pub use analysis::{
    azuma_tail, bennett_tail, bernstein_tail, c_coefficient, hoeffding_tail, normal_cdf,
    thm1_success_lower_bound, thm2_success_approx, thm3_success_approx_rr,
    thm4_suboptimal_prob_bound, transient_slots_estimate, AnalysisError, ArmGapSpec,
    Theorem4Params, TransientEstimate,
};
pub use delay::{DelayDistribution, DelayError, DelayKind};
pub use policy::{Algorithm, ArmStats, InitStrategy, PolicyConfig, PolicyError, PolicyState};
pub use sim::{
    empirical_best_arm_prob, monte_carlo, monte_carlo_seq, replication_seed, run, run_observed,
    ConfigError, EmpiricalEstimate, EstimatorCut, MonteCarloCurves, RunTrace, ScenarioConfig,
    SimObserver,
};

/// Three-router example scenario used throughout the docs and presets:
/// shifted negative binomials with shift 2, r = 10 and p = 0.8 / 0.7 / 0.6.
pub fn example_arms() -> Vec<DelayDistribution> {
    [0.8, 0.7, 0.6]
        .iter()
        .map(|&p| DelayDistribution::shifted_neg_binomial(2, p, 10).expect("valid parameters"))
        .collect()
}
