//! Experiment file schema (TOML) and its validation.
//!
//! Parsing is deliberately two-phase: a permissive raw layer with optional
//! fields, then a validation pass that collects *every* problem at once and
//! names the offending key, so a bad file is fixable in one round.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use delaymab::{
    Algorithm, DelayDistribution, DelayKind, EstimatorCut, InitStrategy, PolicyConfig,
    Theorem4Params,
};

/// One named validation problem.
#[derive(Debug, Clone, Serialize)]
pub struct Issue {
    pub key: String,
    pub message: String,
}

/// Carries every validation problem found in a config; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigFailure {
    pub issues: Vec<Issue>,
}

impl fmt::Display for ConfigFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  {}: {}", issue.key, issue.message)?;
        }
        // machine-readable tail line
        write!(f, "errors-json: {}", serde_json::to_string(&self.issues).unwrap_or_default())
    }
}

impl std::error::Error for ConfigFailure {}

// ---------------------------------------------------------------------------
// raw (permissive) layer
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: Option<String>,
    horizon: Option<u32>,
    replications: Option<u32>,
    seed: Option<u64>,
    #[serde(default)]
    arms: Vec<RawArm>,
    #[serde(default)]
    policies: Vec<RawPolicy>,
    sweep: Option<RawSweep>,
    analysis: Option<RawAnalysis>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArm {
    kind: Option<String>,
    shift: Option<u32>,
    p: Option<f64>,
    r: Option<u32>,
    truncation: Option<u32>,
    first: Option<u32>,
    probs: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    label: Option<String>,
    algorithm: Option<String>,
    eps: Option<f64>,
    eps0: Option<f64>,
    l: Option<f64>,
    t0: Option<u32>,
    init_strategy: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    t0_values: Option<Vec<u32>>,
    strategies: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    t0_grid: Option<Vec<u32>>,
    init_strategy: Option<String>,
    estimator_cut: Option<String>,
    replications: Option<u64>,
    max_delay: Option<u32>,
    theorems: Option<Vec<String>>,
    thm4: Option<RawThm4>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThm4 {
    a: Option<f64>,
    d: Option<f64>,
    t0: Option<u64>,
    t_grid: Option<Vec<u64>>,
    replications: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    emit_trace: Option<bool>,
}

// ---------------------------------------------------------------------------
// validated layer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LabeledPolicy {
    pub label: String,
    pub config: PolicyConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub t0_values: Vec<u32>,
    pub strategies: Vec<InitStrategy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    Thm1,
    Thm2,
    Thm3,
    Transient,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSpec {
    pub t0_grid: Vec<u32>,
    pub init_strategy: InitStrategy,
    pub estimator_cut_answered: bool,
    pub replications: u64,
    pub max_delay: u32,
    pub theorems: Vec<Theorem>,
    pub thm4: Option<Thm4Spec>,
}

impl AnalysisSpec {
    pub fn cut(&self) -> EstimatorCut {
        if self.estimator_cut_answered {
            EstimatorCut::AnsweredByT0
        } else {
            EstimatorCut::SentByT0MinusD { max_delay: self.max_delay }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm4Spec {
    pub a: f64,
    pub d: f64,
    pub t0: u64,
    pub t_grid: Vec<u64>,
    pub replications: u64,
}

impl Thm4Spec {
    pub fn params(&self, max_delay: u32, num_arms: u32) -> Theorem4Params {
        Theorem4Params { a: self.a, d: self.d, max_delay, num_arms, t0: self.t0 }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub horizon: u32,
    pub replications: u32,
    pub seed: u64,
    pub arms: Vec<DelayDistribution>,
    pub policies: Vec<LabeledPolicy>,
    pub sweep: Option<SweepSpec>,
    pub analysis: Option<AnalysisSpec>,
    pub out_dir: Option<PathBuf>,
    pub emit_trace: bool,
}

impl ExperimentSpec {
    /// Parses and validates, reporting every problem at once.
    pub fn from_toml(text: &str) -> Result<Self, ConfigFailure> {
        let raw: RawExperiment = toml::from_str(text).map_err(|e| ConfigFailure {
            issues: vec![Issue { key: "<toml>".into(), message: e.to_string() }],
        })?;
        let mut issues = Vec::new();
        let spec = build(raw, &mut issues);
        match spec {
            Some(spec) if issues.is_empty() => Ok(spec),
            _ => Err(ConfigFailure { issues }),
        }
    }

    /// Stable hex digest over everything that determines the outputs.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Canon<'a> {
            rng: &'static str,
            version: &'static str,
            name: &'a str,
            horizon: u32,
            replications: u32,
            seed: u64,
            arms: Vec<&'a DelayKind>,
            policies: Vec<(&'a str, &'a PolicyConfig)>,
            sweep: &'a Option<SweepSpec>,
            analysis: &'a Option<AnalysisSpec>,
        }
        let canon = Canon {
            rng: delaymab::sim::RNG_ALGORITHM,
            version: env!("CARGO_PKG_VERSION"),
            name: &self.name,
            horizon: self.horizon,
            replications: self.replications,
            seed: self.seed,
            arms: self.arms.iter().map(|a| a.kind()).collect(),
            policies: self.policies.iter().map(|p| (p.label.as_str(), &p.config)).collect(),
            sweep: &self.sweep,
            analysis: &self.analysis,
        };
        let bytes = serde_json::to_vec(&canon).expect("spec serializes");
        Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn build(raw: RawExperiment, issues: &mut Vec<Issue>) -> Option<ExperimentSpec> {
    let mut push = |key: &str, message: String| {
        issues.push(Issue { key: key.into(), message });
    };

    let name = raw.name.unwrap_or_else(|| "experiment".into());
    let horizon = raw.horizon.unwrap_or(10_000);
    let replications = raw.replications.unwrap_or(200);
    let seed = raw.seed.unwrap_or(1);
    if horizon == 0 {
        push("horizon", "must be at least 1 slot".into());
    }
    if replications == 0 {
        push("replications", "must be at least 1".into());
    }

    if raw.arms.len() < 2 {
        push("arms", format!("at least two arms are required, got {}", raw.arms.len()));
    }
    let mut arms = Vec::new();
    for (i, arm) in raw.arms.iter().enumerate() {
        if let Some(dist) = build_arm(i, arm, issues) {
            arms.push(dist);
        }
    }

    let mut policies = Vec::new();
    let mut labels = std::collections::HashSet::new();
    for (i, p) in raw.policies.iter().enumerate() {
        if let Some(lp) = build_policy(i, p, issues) {
            if !labels.insert(lp.label.clone()) {
                issues.push(Issue {
                    key: format!("policies[{i}].label"),
                    message: format!("duplicate policy label '{}'", lp.label),
                });
            }
            policies.push(lp);
        }
    }
    for (i, p) in policies.iter().enumerate() {
        if horizon < p.config.t0 {
            issues.push(Issue {
                key: format!("policies[{i}].t0"),
                message: format!("t0 = {} exceeds the horizon {}", p.config.t0, horizon),
            });
        }
    }

    let sweep = raw.sweep.as_ref().map(|s| build_sweep(s, issues));
    let analysis = raw.analysis.as_ref().and_then(|a| build_analysis(a, &arms, issues));

    let (out_dir, emit_trace) = match raw.output {
        Some(o) => (o.dir, o.emit_trace.unwrap_or(false)),
        None => (None, false),
    };

    Some(ExperimentSpec {
        name,
        horizon,
        replications,
        seed,
        arms,
        policies,
        sweep: sweep.flatten(),
        analysis,
        out_dir,
        emit_trace,
    })
}

fn build_arm(i: usize, arm: &RawArm, issues: &mut Vec<Issue>) -> Option<DelayDistribution> {
    let key = |field: &str| format!("arms[{i}].{field}");
    let mut fail = |field: &str, message: String| {
        issues.push(Issue { key: key(field), message });
        None
    };
    let kind = match arm.kind.as_deref() {
        Some(k) => k,
        None => return fail("kind", "missing (shifted-negative-binomial | truncated-shifted-negative-binomial | explicit-table)".into()),
    };
    let delay_kind = match kind {
        "shifted-negative-binomial" | "truncated-shifted-negative-binomial" => {
            let Some(shift) = arm.shift else {
                return fail("shift", "missing propagation delay in slots".into());
            };
            let Some(p) = arm.p else {
                return fail("p", "missing success probability in (0,1)".into());
            };
            let Some(r) = arm.r else {
                return fail("r", "missing positive integer r".into());
            };
            match (kind, arm.truncation) {
                ("shifted-negative-binomial", None) => {
                    DelayKind::ShiftedNegBinomial { shift, p, r }
                }
                ("shifted-negative-binomial", Some(truncation))
                | ("truncated-shifted-negative-binomial", Some(truncation)) => {
                    DelayKind::TruncatedShiftedNegBinomial { shift, p, r, truncation }
                }
                ("truncated-shifted-negative-binomial", None) => {
                    return fail("truncation", "missing bound for the truncated kind".into());
                }
                _ => unreachable!(),
            }
        }
        "explicit-table" => {
            let Some(probs) = arm.probs.clone() else {
                return fail("probs", "missing probability list".into());
            };
            DelayKind::ExplicitTable { first: arm.first.unwrap_or(1), probs }
        }
        other => {
            return fail("kind", format!("unknown kind '{other}'"));
        }
    };
    match DelayDistribution::new(delay_kind) {
        Ok(d) => Some(d),
        Err(e) => fail("kind", e.to_string()),
    }
}

fn build_policy(i: usize, p: &RawPolicy, issues: &mut Vec<Issue>) -> Option<LabeledPolicy> {
    let key = |field: &str| format!("policies[{i}].{field}");
    let mut fail = |field: &str, message: String| {
        issues.push(Issue { key: key(field), message });
        None::<LabeledPolicy>
    };
    let Some(t0) = p.t0 else {
        return fail("t0", "missing initial phase length in slots".into());
    };
    let algorithm = match p.algorithm.as_deref() {
        // standard default for the plain variant when eps is omitted
        Some("eps-greedy") => Algorithm::EpsGreedy { eps: p.eps.unwrap_or(0.1) },
        Some("tuned-eps-greedy") => match p.eps0 {
            Some(eps0) => Algorithm::TunedEpsGreedy { eps0 },
            None => {
                return fail("eps0", "missing (no default: pick eps0 in (0, t0))".into());
            }
        },
        Some("ucb") => Algorithm::Ucb { l: p.l.unwrap_or(2.0) },
        Some(other) => {
            return fail("algorithm", format!("unknown algorithm '{other}'"));
        }
        None => {
            return fail("algorithm", "missing (eps-greedy | tuned-eps-greedy | ucb)".into());
        }
    };
    let init_strategy = match parse_strategy(p.init_strategy.as_deref().unwrap_or("round-robin")) {
        Some(s) => s,
        None => {
            return fail(
                "init_strategy",
                format!("unknown strategy '{}'", p.init_strategy.as_deref().unwrap_or("")),
            );
        }
    };
    let config = PolicyConfig { algorithm, t0, init_strategy };
    if let Err(e) = config.validate() {
        return fail("algorithm", e.to_string());
    }
    let label = p.label.clone().unwrap_or_else(|| algorithm.label().to_string());
    Some(LabeledPolicy { label, config })
}

pub fn parse_strategy(s: &str) -> Option<InitStrategy> {
    match s {
        "round-robin" | "rr" => Some(InitStrategy::RoundRobin),
        "uniform-random" | "uni" => Some(InitStrategy::UniformRandom),
        _ => None,
    }
}

fn build_sweep(s: &RawSweep, issues: &mut Vec<Issue>) -> Option<SweepSpec> {
    let t0_values = s.t0_values.clone().unwrap_or_else(|| vec![3, 9, 30]);
    if t0_values.iter().any(|&t| t == 0) {
        issues.push(Issue { key: "sweep.t0_values".into(), message: "t0 values must be >= 1".into() });
    }
    let mut strategies = Vec::new();
    for name in s
        .strategies
        .clone()
        .unwrap_or_else(|| vec!["round-robin".into(), "uniform-random".into()])
    {
        match parse_strategy(&name) {
            Some(st) => strategies.push(st),
            None => issues.push(Issue {
                key: "sweep.strategies".into(),
                message: format!("unknown strategy '{name}'"),
            }),
        }
    }
    Some(SweepSpec { t0_values, strategies })
}

fn build_analysis(
    a: &RawAnalysis,
    arms: &[DelayDistribution],
    issues: &mut Vec<Issue>,
) -> Option<AnalysisSpec> {
    let mut push = |key: &str, message: String| {
        issues.push(Issue { key: key.into(), message });
    };
    // D defaults to the exact support bound when every arm is bounded
    let derived_max = arms.iter().map(|d| d.max_support()).collect::<Option<Vec<_>>>();
    let max_delay = match (a.max_delay, derived_max) {
        (Some(d), _) => d,
        (None, Some(bounds)) => bounds.into_iter().max().unwrap_or(0),
        (None, None) => {
            push(
                "analysis.max_delay",
                "required when any arm has unbounded support (no truncation)".into(),
            );
            0
        }
    };
    let estimator_cut_answered = match a.estimator_cut.as_deref() {
        None | Some("sent-by-t0-minus-d") => false,
        Some("answered-by-t0") => true,
        Some(other) => {
            push("analysis.estimator_cut", format!("unknown cut '{other}'"));
            false
        }
    };
    let init_strategy = match parse_strategy(a.init_strategy.as_deref().unwrap_or("round-robin")) {
        Some(s) => s,
        None => {
            push(
                "analysis.init_strategy",
                format!("unknown strategy '{}'", a.init_strategy.as_deref().unwrap_or("")),
            );
            InitStrategy::RoundRobin
        }
    };
    let mut theorems = Vec::new();
    for name in a
        .theorems
        .clone()
        .unwrap_or_else(|| vec!["thm1".into(), "thm2".into(), "thm3".into(), "transient".into()])
    {
        match name.as_str() {
            "thm1" => theorems.push(Theorem::Thm1),
            "thm2" => theorems.push(Theorem::Thm2),
            "thm3" => theorems.push(Theorem::Thm3),
            "transient" => theorems.push(Theorem::Transient),
            other => push("analysis.theorems", format!("unknown theorem '{other}'")),
        }
    }
    let thm4 = a.thm4.as_ref().and_then(|t| {
        let mut ok = true;
        let mut need = |key: &str| {
            issues.push(Issue { key: key.into(), message: "missing".into() });
            ok = false;
        };
        if t.a.is_none() {
            need("analysis.thm4.a");
        }
        if t.d.is_none() {
            need("analysis.thm4.d");
        }
        if t.t0.is_none() {
            need("analysis.thm4.t0");
        }
        if t.t_grid.is_none() {
            need("analysis.thm4.t_grid");
        }
        let spec = ok.then(|| Thm4Spec {
            a: t.a.unwrap(),
            d: t.d.unwrap(),
            t0: t.t0.unwrap(),
            t_grid: t.t_grid.clone().unwrap(),
            replications: t.replications.unwrap_or(10_000),
        });
        if let Some(s) = &spec {
            if !arms.is_empty() {
                let eps0 = s.a * arms.len() as f64 / (s.d * s.d);
                if !(s.t0 as f64 > eps0) {
                    issues.push(Issue {
                        key: "analysis.thm4.t0".into(),
                        message: format!("must exceed eps0 = aK/d^2 = {eps0:.4}"),
                    });
                }
                for &t_val in &s.t_grid {
                    if t_val < s.t0 {
                        issues.push(Issue {
                            key: "analysis.thm4.t_grid".into(),
                            message: format!("t = {t_val} is below t0 = {}", s.t0),
                        });
                    }
                }
            }
        }
        spec
    });
    Some(AnalysisSpec {
        t0_grid: a.t0_grid.clone().unwrap_or_default(),
        init_strategy,
        estimator_cut_answered,
        replications: a.replications.unwrap_or(20_000),
        max_delay,
        theorems,
        thm4,
    })
}
