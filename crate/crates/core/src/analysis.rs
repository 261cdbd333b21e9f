//! Closed-form bounds and approximations for the initial exploratory phase
//! and the exploitation phase, plus the concentration inequalities they rest
//! on. Everything here is a pure function of its inputs.

use thiserror::Error;

use crate::delay::DelayDistribution;

pub use crate::math::normal_cdf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("t0 = {t0} must exceed the maximum delay D = {max_delay}")]
    InitialPhaseTooShort { t0: u32, max_delay: u32 },
    #[error("arm {0} is not suboptimal (zero gap); a unique best arm is required")]
    NotSuboptimal(usize),
    #[error("two or more arms tie for the best mean; theorems assume a unique best arm")]
    TiedBestArm,
    #[error("need at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("initial-phase probabilities must be nonnegative and sum to 1")]
    BadInitProbs,
    #[error("the bound requires uniform initial probabilities p_j = 1/K")]
    NonUniformInitProbs,
    #[error("gaps, variances and delays must be finite and positive where required")]
    BadParameter,
    #[error("theorem 4 requires t >= t0 > aK/d^2 (= {eps0}); got t0 = {t0}, t = {t}")]
    Theorem4Precondition { eps0: f64, t0: u64, t: u64 },
}

/// Chernoff-Hoeffding tail bound for a sum of independent zero-mean variables
/// with ranges [a_t, b_t]: exp(-2 eta^2 / sum (b_t - a_t)^2), capped at 1.
pub fn hoeffding_tail(eta: f64, ranges: &[(f64, f64)]) -> f64 {
    debug_assert!(eta > 0.0);
    let denom: f64 = ranges.iter().map(|(a, b)| (b - a) * (b - a)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    (-2.0 * eta * eta / denom).exp().min(1.0)
}

/// The B function from Bennett's inequality: 2 lambda^-2 [(1+lambda)ln(1+lambda) - lambda].
///
/// Evaluated by its power series near zero to avoid cancellation; B(0+) = 1.
pub fn bennett_b(lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if lambda < 0.5 {
        // B(l) = sum_{m>=0} (-1)^m 2 l^m / ((m+1)(m+2))
        let mut sum = 0.0;
        let mut pow = 1.0;
        for m in 0..40u32 {
            let term = 2.0 * pow / ((m as f64 + 1.0) * (m as f64 + 2.0));
            sum += if m % 2 == 0 { term } else { -term };
            if term < 1e-17 {
                break;
            }
            pow *= lambda;
        }
        sum
    } else {
        2.0 / (lambda * lambda) * ((1.0 + lambda) * lambda.ln_1p() - lambda)
    }
}

/// Bennett tail bound: exp(-eta^2 / (2V) * B(M eta / V)), capped at 1.
pub fn bennett_tail(eta: f64, m: f64, v: f64) -> f64 {
    debug_assert!(eta > 0.0 && m > 0.0 && v > 0.0);
    let lambda = m * eta / v;
    (-0.5 * eta * eta / v * bennett_b(lambda)).exp().min(1.0)
}

/// Bernstein tail bound: exp(-eta^2 / (2(V + M eta / 3))), capped at 1.
pub fn bernstein_tail(eta: f64, m: f64, v: f64) -> f64 {
    debug_assert!(eta > 0.0 && m > 0.0 && v > 0.0);
    (-0.5 * eta * eta / (v + m * eta / 3.0)).exp().min(1.0)
}

/// Azuma tail bound for a zero-mean martingale with |Z_s - Z_{s-1}| <= c(s):
/// exp(-lambda^2 / (2 sum c^2)), capped at 1.
pub fn azuma_tail(lambda: f64, increments: &[f64]) -> f64 {
    debug_assert!(lambda > 0.0);
    let denom: f64 = increments.iter().map(|c| c * c).sum();
    if denom == 0.0 {
        return 0.0;
    }
    (-lambda * lambda / (2.0 * denom)).exp().min(1.0)
}

/// True per-arm quantities a scenario's bounds are evaluated from.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmGapSpec {
    means: Vec<f64>,
    variances: Vec<f64>,
    /// Index of the best (smallest-mean) arm.
    best: usize,
    /// gaps[j] = means[j] - means[best]; zero exactly at `best`.
    gaps: Vec<f64>,
    /// Maximum possible delay D in slots (1 means a reply in the next slot).
    max_delay: u32,
    /// Initial-phase selection probabilities p_j.
    init_probs: Vec<f64>,
}

impl ArmGapSpec {
    pub fn new(
        means: Vec<f64>,
        variances: Vec<f64>,
        max_delay: u32,
        init_probs: Vec<f64>,
    ) -> Result<Self, AnalysisError> {
        let k = means.len();
        if k < 2 {
            return Err(AnalysisError::TooFewArms(k));
        }
        if variances.len() != k || init_probs.len() != k {
            return Err(AnalysisError::BadParameter);
        }
        if means.iter().chain(&variances).any(|x| !x.is_finite()) || max_delay == 0 {
            return Err(AnalysisError::BadParameter);
        }
        if init_probs.iter().any(|p| *p < 0.0)
            || (init_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(AnalysisError::BadInitProbs);
        }
        let best = (0..k).fold(0, |b, i| if means[i] < means[b] { i } else { b });
        if means.iter().enumerate().any(|(i, m)| i != best && *m == means[best]) {
            return Err(AnalysisError::TiedBestArm);
        }
        let gaps = means.iter().map(|m| m - means[best]).collect();
        Ok(Self { means, variances, best, gaps, max_delay, init_probs })
    }

    /// Builds the spec from exact distribution moments with uniform p_j = 1/K.
    pub fn from_distributions(
        arms: &[DelayDistribution],
        max_delay: u32,
    ) -> Result<Self, AnalysisError> {
        let k = arms.len();
        let means = arms.iter().map(|d| d.mean()).collect();
        let variances = arms.iter().map(|d| d.variance()).collect();
        Self::new(means, variances, max_delay, vec![1.0 / k as f64; k])
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    pub fn best_arm(&self) -> usize {
        self.best
    }

    pub fn gap(&self, j: usize) -> f64 {
        self.gaps[j]
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.means[j]
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.variances[j]
    }

    pub fn max_delay(&self) -> u32 {
        self.max_delay
    }

    /// Smallest gap over suboptimal arms.
    pub fn min_gap(&self) -> f64 {
        self.gaps
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.best)
            .map(|(_, g)| *g)
            .fold(f64::INFINITY, f64::min)
    }

    fn suboptimal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.means.len()).filter(move |j| *j != self.best)
    }

    fn uniform_probs(&self) -> bool {
        let k = self.means.len() as f64;
        self.init_probs.iter().all(|p| (p - 1.0 / k).abs() < 1e-12)
    }
}

/// Martingale increment bound c_j = D^2 + (gap/2) D + (gap/2) p_* D.
pub fn c_coefficient(spec: &ArmGapSpec, j: usize) -> Result<f64, AnalysisError> {
    if j == spec.best {
        return Err(AnalysisError::NotSuboptimal(j));
    }
    let d = spec.max_delay as f64;
    let half_gap = spec.gaps[j] / 2.0;
    let p_star = spec.init_probs[spec.best];
    Ok(d * d + half_gap * d + half_gap * p_star * d)
}

fn require_t0(spec: &ArmGapSpec, t0: u32) -> Result<f64, AnalysisError> {
    if t0 <= spec.max_delay {
        Err(AnalysisError::InitialPhaseTooShort { t0, max_delay: spec.max_delay })
    } else {
        Ok((t0 - spec.max_delay) as f64)
    }
}

/// Exponential lower bound on the probability that the end-of-phase sample
/// means identify the best arm, under uniform independent initial picks:
/// prod_{j != *} (1 - exp(-gap_j^2 (t0-D)^2 / (8 K^2 c_j^2 t0)))^2, clamped to [0,1].
pub fn thm1_success_lower_bound(spec: &ArmGapSpec, t0: u32) -> Result<f64, AnalysisError> {
    if !spec.uniform_probs() {
        return Err(AnalysisError::NonUniformInitProbs);
    }
    let lead = require_t0(spec, t0)?;
    let k = spec.num_arms() as f64;
    let mut product = 1.0;
    for j in spec.suboptimal() {
        let c = c_coefficient(spec, j)?;
        let expo = spec.gaps[j].powi(2) * lead * lead / (8.0 * k * k * c * c * t0 as f64);
        let factor = (1.0 - (-expo).exp()).max(0.0);
        product *= factor * factor;
    }
    Ok(product.clamp(0.0, 1.0))
}

/// CLT approximation of the success probability for the uniformly random
/// initial strategy, using only the first t0 - D (all answered) sends.
pub fn thm2_success_approx(spec: &ArmGapSpec, t0: u32) -> Result<f64, AnalysisError> {
    let lead = require_t0(spec, t0)?;
    let p_star = spec.init_probs[spec.best];
    let var_star = spec.variances[spec.best];
    let mut product = 1.0;
    for j in spec.suboptimal() {
        let gap = spec.gaps[j];
        let p_j = spec.init_probs[j];
        let z = |p: f64, var: f64| {
            gap * p * lead.sqrt() / (2.0 * (p * var + gap * gap * p * (1.0 - p) / 4.0).sqrt())
        };
        product *= normal_cdf(z(p_j, spec.variances[j])) * normal_cdf(z(p_star, var_star));
    }
    Ok(product.clamp(0.0, 1.0))
}

/// Sharper CLT approximation for the round-robin initial strategy:
/// prod_{j != *} Phi(gap_j sqrt((t0-D) / (3 (Var_* + Var_j)))).
pub fn thm3_success_approx_rr(spec: &ArmGapSpec, t0: u32) -> Result<f64, AnalysisError> {
    let lead = require_t0(spec, t0)?;
    let var_star = spec.variances[spec.best];
    let mut product = 1.0;
    for j in spec.suboptimal() {
        let arg = spec.gaps[j] * (lead / (3.0 * (var_star + spec.variances[j]))).sqrt();
        product *= normal_cdf(arg);
    }
    Ok(product.clamp(0.0, 1.0))
}

/// Two-sigma estimate of the slots needed before sample means are reliable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientEstimate {
    /// D + 12 (Var_* + max_j Var_j) / min_j gap_j^2, before rounding.
    pub raw: f64,
    /// The same, rounded up to whole slots.
    pub slots: u64,
    /// 0.977^(K-1): the success probability the estimate guarantees.
    pub success_floor: f64,
}

pub fn transient_slots_estimate(spec: &ArmGapSpec) -> Result<TransientEstimate, AnalysisError> {
    let var_star = spec.variances[spec.best];
    let max_var = spec
        .suboptimal()
        .map(|j| spec.variances[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let min_gap = spec.min_gap();
    if !(min_gap > 0.0) {
        return Err(AnalysisError::TiedBestArm);
    }
    let raw = spec.max_delay as f64 + 12.0 * (var_star + max_var) / (min_gap * min_gap);
    Ok(TransientEstimate {
        raw,
        slots: raw.ceil() as u64,
        success_floor: 0.977f64.powi(spec.num_arms() as i32 - 1),
    })
}

/// Inputs of the logarithmic suboptimality bound for tuned epsilon-greedy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem4Params {
    pub a: f64,
    /// d in (0, min gap].
    pub d: f64,
    /// Maximum delay D; all delay laws must have support in [1, D].
    pub max_delay: u32,
    /// Number of arms K.
    pub num_arms: u32,
    /// Initial phase length; must exceed eps0 = aK/d^2.
    pub t0: u64,
}

impl Theorem4Params {
    /// eps0 = aK/d^2, the exploration budget the schedule eps_t = eps0/t uses.
    pub fn eps0(&self) -> f64 {
        self.a * self.num_arms as f64 / (self.d * self.d)
    }

    fn check(&self, t: u64) -> Result<(), AnalysisError> {
        let eps0 = self.eps0();
        if !(self.a > 0.0 && self.d > 0.0) || self.max_delay == 0 || self.num_arms < 2 {
            return Err(AnalysisError::BadParameter);
        }
        if !(self.t0 as f64 > eps0) || t < self.t0 {
            return Err(AnalysisError::Theorem4Precondition { eps0, t0: self.t0, t });
        }
        Ok(())
    }
}

/// The three terms of the theorem-4 bound, before capping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm4Terms {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
}

impl Thm4Terms {
    pub fn total(&self) -> f64 {
        self.term1 + self.term2 + self.term3
    }
}

/// Raw three-term bound on P[suboptimal arm at slot t]; power terms are
/// evaluated in log space so extreme exponents neither overflow nor panic.
pub fn thm4_bound_terms(params: &Theorem4Params, t: u64) -> Result<Thm4Terms, AnalysisError> {
    params.check(t)?;
    let a = params.a;
    let d2 = params.d * params.d;
    let big_d = params.max_delay as f64;
    let k = params.num_arms as f64;
    // x = aK / (t d^2 e^{1/2}) < e^{-1/2} < 1 under the precondition
    let ln_x = (a * k).ln() - (t as f64).ln() - d2.ln() - 0.5;
    let ln_inv_x = -ln_x;
    let pow = |ln_coef: f64, exponent: f64| {
        let ln_term = ln_coef + exponent * ln_x;
        if ln_term > 709.0 {
            f64::INFINITY
        } else {
            ln_term.exp()
        }
    };
    let term1 = pow(
        (2.0 * big_d * a / d2).ln() + ln_inv_x.ln(),
        3.0 * a / (14.0 * d2),
    );
    let term2 = pow(
        (16.0 * big_d.powi(3) / d2).ln() + (big_d + 1.0) / 8.0,
        a / (8.0 * big_d * big_d),
    );
    let term3 = a / (d2 * t as f64);
    Ok(Thm4Terms { term1, term2, term3 })
}

/// Probability bound on choosing a suboptimal arm at slot t, capped at 1.
pub fn thm4_suboptimal_prob_bound(params: &Theorem4Params, t: u64) -> Result<f64, AnalysisError> {
    Ok(thm4_bound_terms(params, t)?.total().min(1.0))
}
