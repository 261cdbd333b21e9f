//! Per-router reply-delay laws.
//!
//! A router answers an interest after a random number of whole slots, never
//! in the sending slot itself, so every law here has support in {1, 2, ...}.
//! The workhorse is the negative binomial (number of failures before the
//! r-th success) shifted right by a deterministic propagation delay; its
//! truncated variant conditions on the reply arriving within `d_max` slots
//! and renormalizes, which keeps the support exactly [shift, d_max].

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::ln_binomial;

/// Largest tolerated deviation of a probability table from total mass 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Tail mass below which the sampling table of an unbounded law is cut.
const SAMPLING_TAIL_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelayError {
    #[error("p must lie in (0, 1), got {0}")]
    InvalidP(f64),
    #[error("r must be a positive integer")]
    InvalidR,
    #[error("minimum support must be at least 1 slot (a reply never arrives in the sending slot)")]
    SupportBelowOne,
    #[error("truncation bound {d_max} lies below the minimum support {min}")]
    InvalidTruncation { d_max: u32, min: u32 },
    #[error("probability table must be nonempty with a positive last entry")]
    EmptyTable,
    #[error("probability table entries must be finite and nonnegative")]
    NegativeProbability,
    #[error("probability table sums to {0}, more than 1e-12 away from 1")]
    NotNormalized(f64),
}

/// Parameterization of a delay law, as written in scenario configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DelayKind {
    ShiftedNegBinomial { shift: u32, p: f64, r: u32 },
    TruncatedShiftedNegBinomial { shift: u32, p: f64, r: u32, truncation: u32 },
    ExplicitTable { first: u32, probs: Vec<f64> },
}

/// A validated delay distribution with precomputed sampling tables and moments.
///
/// Immutable after construction; cheap to share across replications.
#[derive(Debug, Clone)]
pub struct DelayDistribution {
    kind: DelayKind,
    min: u32,
    /// pmf[i] = P[X = min + i] over the (possibly cut) sampling support.
    pmf: Vec<f64>,
    /// Inclusive cumulative sums of `pmf`; last entry forced to 1 for bounded laws.
    cum: Vec<f64>,
    mean: f64,
    variance: f64,
    /// True when the law itself is bounded (truncated or table kind); false
    /// when the table is merely a 1e-12 tail cut of an unbounded law.
    bounded: bool,
}

impl DelayDistribution {
    pub fn new(kind: DelayKind) -> Result<Self, DelayError> {
        match kind {
            DelayKind::ShiftedNegBinomial { shift, p, r } => {
                validate_nb(shift, p, r)?;
                let raw = nb_table(shift, p, r, None);
                let (mean, variance) = nb_closed_form_moments(shift, p, r);
                let cum = cumulative(&raw, false);
                Ok(Self {
                    kind: DelayKind::ShiftedNegBinomial { shift, p, r },
                    min: shift,
                    pmf: raw,
                    cum,
                    mean,
                    variance,
                    bounded: false,
                })
            }
            DelayKind::TruncatedShiftedNegBinomial { shift, p, r, truncation } => {
                validate_nb(shift, p, r)?;
                if truncation < shift {
                    return Err(DelayError::InvalidTruncation { d_max: truncation, min: shift });
                }
                let mut table = nb_table(shift, p, r, Some(truncation));
                let mass: f64 = table.iter().sum();
                for q in &mut table {
                    *q /= mass;
                }
                let (mean, variance) = table_moments(shift, &table);
                let cum = cumulative(&table, true);
                Ok(Self {
                    kind: DelayKind::TruncatedShiftedNegBinomial { shift, p, r, truncation },
                    min: shift,
                    pmf: table,
                    cum,
                    mean,
                    variance,
                    bounded: true,
                })
            }
            DelayKind::ExplicitTable { first, probs } => {
                if first < 1 {
                    return Err(DelayError::SupportBelowOne);
                }
                if probs.iter().any(|q| !q.is_finite() || *q < 0.0) {
                    return Err(DelayError::NegativeProbability);
                }
                let sum: f64 = probs.iter().sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(DelayError::NotNormalized(sum));
                }
                let mut probs = probs;
                while probs.last() == Some(&0.0) {
                    probs.pop();
                }
                if probs.is_empty() {
                    return Err(DelayError::EmptyTable);
                }
                let table: Vec<f64> = probs.iter().map(|q| q / sum).collect();
                let (mean, variance) = table_moments(first, &table);
                let cum = cumulative(&table, true);
                Ok(Self {
                    kind: DelayKind::ExplicitTable { first, probs },
                    min: first,
                    pmf: table,
                    cum,
                    mean,
                    variance,
                    bounded: true,
                })
            }
        }
    }

    /// Convenience constructor for the untruncated shifted negative binomial.
    pub fn shifted_neg_binomial(shift: u32, p: f64, r: u32) -> Result<Self, DelayError> {
        Self::new(DelayKind::ShiftedNegBinomial { shift, p, r })
    }

    /// Point mass at `x`.
    pub fn point_mass(x: u32) -> Result<Self, DelayError> {
        Self::new(DelayKind::ExplicitTable { first: x, probs: vec![1.0] })
    }

    pub fn kind(&self) -> &DelayKind {
        &self.kind
    }

    /// P[X = x]. Out-of-support arguments return 0.
    pub fn pmf(&self, x: u32) -> f64 {
        match self.kind {
            DelayKind::ShiftedNegBinomial { shift, p, r } => {
                if x < shift {
                    0.0
                } else {
                    nb_pmf(x - shift, p, r)
                }
            }
            DelayKind::TruncatedShiftedNegBinomial { shift, truncation, .. } => {
                if x < shift || x > truncation {
                    0.0
                } else {
                    self.pmf[(x - shift) as usize]
                }
            }
            DelayKind::ExplicitTable { first, .. } => {
                if x < first || (x - first) as usize >= self.pmf.len() {
                    0.0
                } else {
                    self.pmf[(x - first) as usize]
                }
            }
        }
    }

    /// P[X <= x]; nondecreasing, exactly 1 at the max support of bounded laws.
    pub fn cdf(&self, x: u32) -> f64 {
        if x < self.min {
            return 0.0;
        }
        match self.kind {
            DelayKind::ShiftedNegBinomial { shift, p, r } => {
                let kmax = x - shift;
                let mut sum = 0.0;
                for k in 0..=kmax {
                    sum += nb_pmf(k, p, r);
                }
                sum.min(1.0)
            }
            _ => {
                let idx = (x - self.min) as usize;
                if idx >= self.cum.len() {
                    1.0
                } else {
                    self.cum[idx]
                }
            }
        }
    }

    /// Exact (mean, variance) in slots and slots².
    pub fn moments(&self) -> (f64, f64) {
        (self.mean, self.variance)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn min_support(&self) -> u32 {
        self.min
    }

    /// Exact upper support bound for bounded laws; None for unbounded ones.
    pub fn max_support(&self) -> Option<u32> {
        self.bounded.then(|| self.min + self.pmf.len() as u32 - 1)
    }

    /// Largest value the sampler can return (tail of unbounded laws is cut at
    /// mass < 1e-12, below every test tolerance in this crate).
    pub fn sampling_max(&self) -> u32 {
        self.min + self.pmf.len() as u32 - 1
    }

    /// Inverse-CDF draw over the precomputed table.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let idx = self.cum.partition_point(|&c| c < u);
        self.min + idx.min(self.pmf.len() - 1) as u32
    }

    /// Conditional law X | X <= d_max, renormalized.
    ///
    /// Truncating a bounded law at or beyond its max support returns an
    /// identical distribution (bit-exact pmf table).
    pub fn truncate(&self, d_max: u32) -> Result<Self, DelayError> {
        if d_max < self.min {
            return Err(DelayError::InvalidTruncation { d_max, min: self.min });
        }
        if let Some(max) = self.max_support() {
            if d_max >= max {
                return Ok(self.clone());
            }
        }
        match self.kind {
            DelayKind::ShiftedNegBinomial { shift, p, r }
            | DelayKind::TruncatedShiftedNegBinomial { shift, p, r, .. } => Self::new(
                DelayKind::TruncatedShiftedNegBinomial { shift, p, r, truncation: d_max },
            ),
            DelayKind::ExplicitTable { first, ref probs } => {
                let keep = (d_max - first + 1) as usize;
                let head: Vec<f64> = probs.iter().take(keep).copied().collect();
                let mass: f64 = head.iter().sum();
                if mass <= 0.0 {
                    return Err(DelayError::InvalidTruncation { d_max, min: self.min });
                }
                let renorm: Vec<f64> = head.iter().map(|q| q / mass).collect();
                Self::new(DelayKind::ExplicitTable { first, probs: renorm })
            }
        }
    }

    /// The sampling pmf table, starting at `min_support()`.
    pub fn pmf_table(&self) -> &[f64] {
        &self.pmf
    }
}

fn validate_nb(shift: u32, p: f64, r: u32) -> Result<(), DelayError> {
    if !(p > 0.0 && p < 1.0) || !p.is_finite() {
        return Err(DelayError::InvalidP(p));
    }
    if r == 0 {
        return Err(DelayError::InvalidR);
    }
    if shift < 1 {
        return Err(DelayError::SupportBelowOne);
    }
    Ok(())
}

// P[k failures before the r-th success], evaluated in log space.
fn nb_pmf(k: u32, p: f64, r: u32) -> f64 {
    let ln = ln_binomial((k + r - 1) as u64, k as u64) + r as f64 * p.ln() + k as f64 * (-p).ln_1p();
    ln.exp()
}

fn nb_closed_form_moments(shift: u32, p: f64, r: u32) -> (f64, f64) {
    let q = 1.0 - p;
    (shift as f64 + r as f64 * q / p, r as f64 * q / (p * p))
}

/// pmf values over {shift .. bound} (bound = truncation, or the 1e-12 tail cut).
fn nb_table(shift: u32, p: f64, r: u32, truncation: Option<u32>) -> Vec<f64> {
    let mut table = Vec::new();
    let mut cum = 0.0;
    let mut k = 0u32;
    loop {
        if let Some(d) = truncation {
            if shift + k > d {
                break;
            }
        }
        let q = nb_pmf(k, p, r);
        table.push(q);
        cum += q;
        // safety valve for extreme parameters; irrelevant at 1e-12 tail mass
        if truncation.is_none() && (1.0 - cum < SAMPLING_TAIL_EPS || table.len() >= 1_000_000) {
            break;
        }
        k += 1;
    }
    table
}

fn table_moments(min: u32, table: &[f64]) -> (f64, f64) {
    let mean: f64 = table
        .iter()
        .enumerate()
        .map(|(i, q)| (min + i as u32) as f64 * q)
        .sum();
    let variance: f64 = table
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let d = (min + i as u32) as f64 - mean;
            d * d * q
        })
        .sum();
    (mean, variance)
}

fn cumulative(pmf: &[f64], force_exact_one: bool) -> Vec<f64> {
    let mut cum = Vec::with_capacity(pmf.len());
    let mut s = 0.0;
    for q in pmf {
        s += q;
        cum.push(s.min(1.0));
    }
    if force_exact_one {
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
    }
    cum
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Independent pmf oracle: plain binomial-coefficient arithmetic.
    fn brute_pmf(k: u32, p: f64, r: u32) -> f64 {
        let mut binom = 1.0f64;
        for i in 0..k {
            binom *= (r + i) as f64 / (i + 1) as f64;
        }
        binom * p.powi(r as i32) * (1.0 - p).powi(k as i32)
    }

    fn table1() -> Vec<DelayDistribution> {
        [(0.8, "r1"), (0.7, "r2"), (0.6, "r3")]
            .iter()
            .map(|(p, _)| DelayDistribution::shifted_neg_binomial(2, *p, 10).unwrap())
            .collect()
    }

    #[test]
    fn pmf_below_support_is_zero() {
        let d = DelayDistribution::shifted_neg_binomial(2, 0.8, 10).unwrap();
        assert_eq!(d.pmf(0), 0.0);
        assert_eq!(d.pmf(1), 0.0);
        assert!(d.pmf(2) > 0.0);
    }

    #[test]
    fn table1_moments_match_published_values() {
        let expected = [(4.5, 1.77), (6.29, 2.47), (8.67, 3.33)];
        for (d, (mean, std)) in table1().iter().zip(expected) {
            assert!((d.mean() - mean).abs() < 0.005, "mean {} vs {}", d.mean(), mean);
            assert!((d.std() - std).abs() < 0.005, "std {} vs {}", d.std(), std);
        }
    }

    #[test]
    fn pmf_agrees_with_brute_force() {
        for &(p, r) in &[(0.8f64, 10u32), (0.6, 10), (0.3, 4), (0.95, 1)] {
            let d = DelayDistribution::shifted_neg_binomial(3, p, r).unwrap();
            for k in 0..60 {
                let expect = brute_pmf(k, p, r);
                assert!(
                    (d.pmf(3 + k) - expect).abs() <= 1e-12 * expect.max(1e-30) + 1e-300,
                    "p={p} r={r} k={k}: {} vs {}",
                    d.pmf(3 + k),
                    expect
                );
            }
        }
    }

    #[test]
    fn cdf_at_shift_is_p_to_the_r() {
        let d = DelayDistribution::shifted_neg_binomial(2, 0.8, 10).unwrap();
        assert!((d.cdf(2) - 0.8f64.powi(10)).abs() < 1e-12);
        assert_eq!(d.cdf(0), 0.0);
        assert_eq!(d.cdf(1), 0.0);
    }

    #[test]
    fn cdf_reaches_exactly_one_for_bounded_laws() {
        let d = DelayDistribution::shifted_neg_binomial(2, 0.8, 10)
            .unwrap()
            .truncate(15)
            .unwrap();
        assert_eq!(d.cdf(15), 1.0);
        assert_eq!(d.cdf(40), 1.0);
        let t = DelayDistribution::point_mass(3).unwrap();
        assert_eq!(t.cdf(3), 1.0);
    }

    #[test]
    fn normalization_within_tolerance() {
        for d in table1() {
            let sum: f64 = d.pmf_table().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_mean_shrinks_and_matches_finite_sum_oracle() {
        let d = DelayDistribution::shifted_neg_binomial(2, 0.8, 10).unwrap();
        let t = d.truncate(15).unwrap();
        assert!(t.mean() < d.mean());
        // oracle: renormalized brute-force sum over the 14 support points
        let raw: Vec<f64> = (0..=13).map(|k| brute_pmf(k, 0.8, 10)).collect();
        let mass: f64 = raw.iter().sum();
        let mean: f64 = raw.iter().enumerate().map(|(k, q)| (2 + k) as f64 * q).sum::<f64>() / mass;
        let var: f64 = raw
            .iter()
            .enumerate()
            .map(|(k, q)| ((2 + k) as f64 - mean).powi(2) * q)
            .sum::<f64>()
            / mass;
        assert!((t.mean() - mean).abs() < 1e-10);
        assert!((t.variance() - var).abs() < 1e-10);
        // reference values, mpmath at 50 digits
        assert!((t.mean() - 4.499_748_411_932_486).abs() < 1e-9);
        assert!((t.variance() - 3.122_043_776_910_160_3).abs() < 1e-9);
    }

    #[test]
    fn truncation_below_support_errors() {
        let d = DelayDistribution::shifted_neg_binomial(2, 0.8, 10).unwrap();
        assert!(matches!(d.truncate(1), Err(DelayError::InvalidTruncation { .. })));
    }

    #[test]
    fn truncating_a_point_mass_inside_bound_is_identity() {
        let d = DelayDistribution::point_mass(3).unwrap();
        let t = d.truncate(5).unwrap();
        assert_eq!(t.pmf_table(), d.pmf_table());
        assert_eq!(t.moments(), d.moments());
    }

    #[test]
    fn truncation_is_idempotent_bit_exactly() {
        let d = DelayDistribution::shifted_neg_binomial(2, 0.6, 10).unwrap();
        let once = d.truncate(15).unwrap();
        let twice = once.truncate(15).unwrap();
        assert_eq!(once.pmf_table(), twice.pmf_table());
    }

    #[test]
    fn point_mass_moments_and_sampling() {
        let d = DelayDistribution::point_mass(3).unwrap();
        assert_eq!(d.moments(), (3.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(d.sample(&mut rng), 3);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = DelayDistribution::shifted_neg_binomial(2, 0.7, 10).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn million_sample_mean_matches_table1() {
        let d = DelayDistribution::shifted_neg_binomial(2, 0.8, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000u32;
        let sum: u64 = (0..n).map(|_| d.sample(&mut rng) as u64).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 4.5).abs() < 0.01, "empirical mean {mean}");
    }

    #[test]
    fn moments_match_brute_force_sums_on_finite_support() {
        for base in table1() {
            let d = base.truncate(15).unwrap();
            let (mean, var) = d.moments();
            let bf_mean: f64 = (d.min_support()..=d.max_support().unwrap())
                .map(|x| x as f64 * d.pmf(x))
                .sum();
            let bf_var: f64 = (d.min_support()..=d.max_support().unwrap())
                .map(|x| (x as f64 - bf_mean).powi(2) * d.pmf(x))
                .sum();
            assert!((mean - bf_mean).abs() < 1e-10);
            assert!((var - bf_var).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(DelayDistribution::shifted_neg_binomial(2, 0.0, 10).is_err());
        assert!(DelayDistribution::shifted_neg_binomial(2, 1.0, 10).is_err());
        assert!(DelayDistribution::shifted_neg_binomial(2, 0.5, 0).is_err());
        assert!(DelayDistribution::shifted_neg_binomial(0, 0.5, 10).is_err());
        assert!(DelayDistribution::new(DelayKind::ExplicitTable {
            first: 1,
            probs: vec![0.5, 0.4]
        })
        .is_err());
        assert!(DelayDistribution::new(DelayKind::ExplicitTable {
            first: 0,
            probs: vec![1.0]
        })
        .is_err());
    }

    #[test]
    fn chi_square_goodness_of_fit_on_table1() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        for (arm, base) in table1().into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + arm as u64);
            let n = 1_000_000usize;
            let table = base.pmf_table();
            let mut observed = vec![0u64; table.len()];
            for _ in 0..n {
                let x = base.sample(&mut rng);
                observed[(x - base.min_support()) as usize] += 1;
            }
            // pool cells with expected count < 5 into the tail
            let mut obs_pooled = Vec::new();
            let mut exp_pooled = Vec::new();
            let (mut o_acc, mut e_acc) = (0f64, 0f64);
            for (i, q) in table.iter().enumerate() {
                o_acc += observed[i] as f64;
                e_acc += q * n as f64;
                if e_acc >= 5.0 {
                    obs_pooled.push(o_acc);
                    exp_pooled.push(e_acc);
                    o_acc = 0.0;
                    e_acc = 0.0;
                }
            }
            if e_acc > 0.0 {
                *obs_pooled.last_mut().unwrap() += o_acc;
                *exp_pooled.last_mut().unwrap() += e_acc;
            }
            let stat: f64 = obs_pooled
                .iter()
                .zip(&exp_pooled)
                .map(|(o, e)| (o - e) * (o - e) / e)
                .sum();
            let df = (obs_pooled.len() - 1) as f64;
            let crit = ChiSquared::new(df).unwrap().inverse_cdf(0.999);
            assert!(stat < crit, "arm {arm}: chi2 {stat:.2} >= crit {crit:.2}");
        }
    }
}
