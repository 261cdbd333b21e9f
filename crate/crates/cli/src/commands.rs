//! The four subcommands: simulate, sweep-t0, bounds, validate.

use std::path::{Path, PathBuf};

use anyhow::Result;

use delaymab::{
    c_coefficient, empirical_best_arm_prob, monte_carlo, replication_seed, run,
    thm1_success_lower_bound, thm2_success_approx, thm3_success_approx_rr, thm4_suboptimal_prob_bound,
    transient_slots_estimate, AnalysisError, ArmGapSpec, InitStrategy, PolicyConfig,
    ScenarioConfig, Theorem4Params,
};

use crate::config::{ExperimentSpec, LabeledPolicy, Theorem};
use crate::output::{fmt_f64, CsvFile};

const Z95: f64 = 1.959_963_984_540_054;

fn scenario(spec: &ExperimentSpec, policy: &PolicyConfig) -> ScenarioConfig {
    ScenarioConfig {
        arms: spec.arms.clone(),
        policy: *policy,
        horizon: spec.horizon,
        replications: spec.replications,
        seed: spec.seed,
    }
}

/// Runs every configured policy and writes `curves.csv`
/// (slot, policy, mean_fraction_optimal, stderr, replications).
pub fn simulate(spec: &ExperimentSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    anyhow::ensure!(
        !spec.policies.is_empty(),
        "config has no [[policies]]; simulate needs at least one"
    );
    let digest = spec.digest();
    let mut files = Vec::new();
    let mut curves = CsvFile::create(
        out_dir,
        "curves.csv",
        &digest,
        spec.seed,
        "slot,policy,mean_fraction_optimal,stderr,replications",
    )?;
    for LabeledPolicy { label, config } in &spec.policies {
        let cfg = scenario(spec, config);
        let agg = monte_carlo(&cfg)?;
        for t in 0..spec.horizon as usize {
            curves.row(&[
                t.to_string(),
                label.clone(),
                fmt_f64(agg.mean_fraction_optimal(t)),
                fmt_f64(agg.stderr_fraction_optimal(t)),
                spec.replications.to_string(),
            ])?;
        }
        eprintln!(
            "policy {label}: final fraction-optimal {:.4} over {} replications",
            agg.mean_fraction_optimal(spec.horizon as usize - 1),
            spec.replications
        );
    }
    files.push(curves.finish()?);

    if spec.emit_trace {
        let single = spec.policies.len() == 1;
        for LabeledPolicy { label, config } in &spec.policies {
            let cfg = scenario(spec, config);
            for rep in 0..spec.replications as u64 {
                let seed = replication_seed(spec.seed, rep);
                let trace = run(&cfg, seed)?;
                let name = if single {
                    format!("trace_{seed}.csv")
                } else {
                    format!("trace_{label}_{seed}.csv")
                };
                let mut f =
                    CsvFile::create(out_dir, &name, &digest, spec.seed, "slot,arm,explored")?;
                for (t, rec) in trace.records.iter().enumerate() {
                    f.row(&[
                        t.to_string(),
                        rec.arm.to_string(),
                        (rec.explored as u8).to_string(),
                    ])?;
                }
                files.push(f.finish()?);
            }
        }
    }
    Ok(files)
}

/// One curve per (policy, t0, strategy); writes `sweep.csv`.
pub fn sweep_t0(
    spec: &ExperimentSpec,
    t0_values: &[u32],
    strategies: &[InitStrategy],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    anyhow::ensure!(
        !spec.policies.is_empty(),
        "config has no [[policies]]; sweep-t0 needs at least one"
    );
    anyhow::ensure!(!t0_values.is_empty(), "sweep needs at least one t0 value");
    let digest = spec.digest();
    let mut csv = CsvFile::create(
        out_dir,
        "sweep.csv",
        &digest,
        spec.seed,
        "slot,policy,t0,init_strategy,mean_fraction_optimal",
    )?;
    for LabeledPolicy { label, config } in &spec.policies {
        for &t0 in t0_values {
            for &init in strategies {
                let mut policy = *config;
                policy.t0 = t0;
                policy.init_strategy = init;
                policy.validate()?;
                let cfg = scenario(spec, &policy);
                let agg = monte_carlo(&cfg)?;
                for t in 0..spec.horizon as usize {
                    csv.row(&[
                        t.to_string(),
                        label.clone(),
                        t0.to_string(),
                        init.label().to_string(),
                        fmt_f64(agg.mean_fraction_optimal(t)),
                    ])?;
                }
                eprintln!(
                    "policy {label}, t0 = {t0}, {}: final fraction-optimal {:.4}",
                    init.label(),
                    agg.mean_fraction_optimal(spec.horizon as usize - 1)
                );
            }
        }
    }
    Ok(vec![csv.finish()?])
}

/// Evaluates the closed-form bounds next to their Monte Carlo estimates;
/// writes `bounds.csv` and, when configured, `thm4.csv`.
pub fn bounds(spec: &ExperimentSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let analysis = spec
        .analysis
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config has no [analysis] section"))?;
    let digest = spec.digest();
    let gap_spec = ArmGapSpec::from_distributions(&spec.arms, analysis.max_delay)
        .map_err(|e| anyhow::anyhow!("analysis inputs: {e}"))?;
    let mut files = Vec::new();

    if !analysis.t0_grid.is_empty() {
        let mut comments = Vec::new();
        if analysis.theorems.contains(&Theorem::Transient) {
            let est = transient_slots_estimate(&gap_spec)
                .map_err(|e| anyhow::anyhow!("transient estimate: {e}"))?;
            let line = format!(
                "transient_estimate raw={} slots={} success_floor={}",
                fmt_f64(est.raw),
                est.slots,
                fmt_f64(est.success_floor)
            );
            println!("{line}");
            comments.push(line);
        }
        let mut csv = CsvFile::create_with_comments(
            out_dir,
            "bounds.csv",
            &digest,
            spec.seed,
            &comments,
            "grid_value,thm1_bound,thm2_approx,thm3_approx,empirical,empirical_ci_halfwidth",
        )?;
        for &t0 in &analysis.t0_grid {
            let fmt_thm = |want: Theorem, value: Result<f64, AnalysisError>| -> String {
                if !analysis.theorems.contains(&want) {
                    return String::new();
                }
                match value {
                    Ok(v) => fmt_f64(v),
                    Err(_) => "invalid".into(),
                }
            };
            let thm1 = fmt_thm(Theorem::Thm1, thm1_success_lower_bound(&gap_spec, t0));
            let thm2 = fmt_thm(Theorem::Thm2, thm2_success_approx(&gap_spec, t0));
            let thm3 = fmt_thm(Theorem::Thm3, thm3_success_approx_rr(&gap_spec, t0));
            let est = empirical_best_arm_prob(
                &spec.arms,
                analysis.init_strategy,
                t0,
                analysis.cut(),
                analysis.replications,
                spec.seed.wrapping_add(t0 as u64),
            );
            csv.row(&[
                t0.to_string(),
                thm1,
                thm2,
                thm3,
                fmt_f64(est.probability()),
                fmt_f64(est.half_width(Z95)),
            ])?;
        }
        files.push(csv.finish()?);
    }

    if let Some(thm4) = &analysis.thm4 {
        let params: Theorem4Params = thm4.params(analysis.max_delay, spec.arms.len() as u32);
        let policy = PolicyConfig {
            algorithm: delaymab::Algorithm::TunedEpsGreedy { eps0: params.eps0() },
            t0: u32::try_from(thm4.t0).map_err(|_| anyhow::anyhow!("thm4.t0 too large"))?,
            init_strategy: InitStrategy::UniformRandom,
        };
        let horizon = u32::try_from(thm4.t_grid.iter().max().copied().unwrap_or(thm4.t0) + 1)
            .map_err(|_| anyhow::anyhow!("thm4.t_grid values too large"))?;
        let cfg = ScenarioConfig {
            arms: spec.arms.clone(),
            policy,
            horizon,
            replications: u32::try_from(thm4.replications)
                .map_err(|_| anyhow::anyhow!("thm4.replications too large"))?,
            seed: spec.seed,
        };
        eprintln!(
            "thm4: simulating {} replications to slot {} (eps0 = {:.2})",
            cfg.replications,
            horizon,
            params.eps0()
        );
        let agg = monte_carlo(&cfg)?;
        let mut csv = CsvFile::create(
            out_dir,
            "thm4.csv",
            &digest,
            spec.seed,
            "t,bound,empirical_suboptimal_freq",
        )?;
        for &t in &thm4.t_grid {
            let (bound, freq) = match thm4_suboptimal_prob_bound(&params, t) {
                Ok(b) => (fmt_f64(b), fmt_f64(agg.suboptimal_frequency(t as usize))),
                Err(_) => ("invalid".into(), "invalid".into()),
            };
            csv.row(&[t.to_string(), bound, freq])?;
        }
        files.push(csv.finish()?);
    }

    anyhow::ensure!(
        !files.is_empty(),
        "analysis section has neither a t0_grid nor a thm4 block; nothing to do"
    );
    Ok(files)
}

/// Dry-run report: per-arm moments, best arm, precondition checks.
/// Returns warnings to print; hard errors were already caught at load time.
pub fn validate(spec: &ExperimentSpec) -> Result<()> {
    println!("experiment: {}", spec.name);
    println!("digest: {}", spec.digest());
    println!(
        "horizon: {} slots, replications: {}, master seed: {}",
        spec.horizon, spec.replications, spec.seed
    );
    println!("arms:");
    for (i, arm) in spec.arms.iter().enumerate() {
        let (mean, var) = arm.moments();
        let support = match arm.max_support() {
            Some(max) => format!("support [{}, {}]", arm.min_support(), max),
            None => format!("support [{}, inf)", arm.min_support()),
        };
        println!("  arm {i}: mean {:.4}, std {:.4}, {}", mean, var.sqrt(), support);
    }
    let best = {
        let mut best = 0usize;
        for (i, d) in spec.arms.iter().enumerate().skip(1) {
            if d.mean() < spec.arms[best].mean() {
                best = i;
            }
        }
        best
    };
    println!("best arm: {best} (smallest mean delay)");
    let ties = spec
        .arms
        .iter()
        .enumerate()
        .filter(|(i, d)| *i != best && d.mean() == spec.arms[best].mean())
        .count();
    if ties > 0 {
        println!("warning: {ties} arm(s) tie for the best mean; the bounds assume a unique best arm");
    }
    for LabeledPolicy { label, config } in &spec.policies {
        println!(
            "policy {label}: t0 = {}, init = {}",
            config.t0,
            config.init_strategy.label()
        );
    }
    if let Some(analysis) = &spec.analysis {
        println!(
            "analysis: D = {}, {} grid point(s), estimator init = {}, replications = {}",
            analysis.max_delay,
            analysis.t0_grid.len(),
            analysis.init_strategy.label(),
            analysis.replications
        );
        for &t0 in &analysis.t0_grid {
            if t0 <= analysis.max_delay {
                println!(
                    "warning: grid point t0 = {t0} is within the maximum delay D = {}; bound rows will be marked invalid",
                    analysis.max_delay
                );
            }
        }
        if ties == 0 && !analysis.t0_grid.is_empty() {
            let gap_spec = ArmGapSpec::from_distributions(&spec.arms, analysis.max_delay)
                .map_err(|e| anyhow::anyhow!("analysis inputs: {e}"))?;
            for j in 0..spec.arms.len() {
                if j != gap_spec.best_arm() {
                    println!(
                        "  gap arm {j}: {:.4}, c-coefficient {:.2}",
                        gap_spec.gap(j),
                        c_coefficient(&gap_spec, j).unwrap()
                    );
                }
            }
        }
        if let Some(thm4) = &analysis.thm4 {
            let params = thm4.params(analysis.max_delay, spec.arms.len() as u32);
            println!(
                "thm4: a = {}, d = {}, eps0 = {:.4}, t0 = {}",
                thm4.a,
                thm4.d,
                params.eps0(),
                thm4.t0
            );
        }
    }
    println!("configuration is valid");
    Ok(())
}
