//! Executes configured experiments and writes their reports.
//!
//! Every experiment writes `<output>/<name>/seed-<seed>/report.json` and, when
//! an empirical order test ran, `ordering.csv` with the columns
//! `id,kind,params,diff,stderr,p,verdict`. Sweeps add `sweep.csv`,
//! propagation experiments add `propagation.csv` (`t,s,value,stderr`).

use super::config::{
    build_chains, build_comparison, nig_params, ConfigError, ExperimentDef, LoadedConfig, ScalarFnDef, TestDef,
};
use crate::error::Result;
use crate::harness::{
    check_gh_hypotheses, nig_two_time_test, run_comparison, run_nig_example, run_truncation_sweep, CombinedVerdict,
    HypothesisReport, Status, SweepSampling,
};
use crate::jumpdiff::{check_propagation_of_order, estimate_propagation, EulerConfig, StateGrid};
use crate::markov::{kernel_monotone, kernel_separated, verify_fdd_ordering};
use crate::orders::{exact_order_check_1d, FunctionClass, OrderTestConfig, OrderingReport, Verdict};
use crate::samplers::RngStream;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "STOCHORDER_OUTPUT_DIR";

/// The JSON report of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub stream_index: u64,
    pub config_digest: String,
    pub version: String,
    pub verdict: CombinedVerdict,
    pub hypothesis: HypothesisReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<OrderingReport>,
    pub details: Value,
}

/// A finished experiment: its report and any CSV side files.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub csv: Vec<(String, String)>,
}

/// Outcome of `run` for one experiment.
#[derive(Debug, Clone)]
pub struct RunEntry {
    pub name: String,
    pub result: std::result::Result<(CombinedVerdict, PathBuf), String>,
}

/// Directory reports go to: the environment override, else the config value.
pub fn output_root(loaded: &LoadedConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => loaded.config.output_dir.clone(),
    }
}

/// `<root>/<name>/seed-<seed>`.
pub fn experiment_dir(root: &Path, name: &str, seed: u64) -> PathBuf {
    root.join(name).join(format!("seed-{seed}"))
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let file_name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

fn order_verdict_of(holds: bool) -> Verdict {
    if holds {
        Verdict::Consistent
    } else {
        Verdict::Violation
    }
}

fn payoff_membership(g: &ScalarFnDef, class: FunctionClass) -> (bool, String) {
    let increasing = g.slope >= 0.0 && g.slope + g.hinge >= 0.0;
    let convex = g.hinge >= 0.0;
    // in one dimension the directionally convex classes are the convex ones
    // and the supermodular classes impose no curvature
    let need_inc = class.is_increasing();
    let need_cvx = class.is_axis_convex();
    let ok = (!need_inc || increasing) && (!need_cvx || convex);
    let mut parts = Vec::new();
    if need_inc {
        parts.push(format!("increasing: {increasing}"));
    }
    if need_cvx {
        parts.push(format!("convex: {convex}"));
    }
    if parts.is_empty() {
        parts.push("no constraint on the line".into());
    }
    (ok, parts.join(", "))
}

/// `f >= 0`, nondecreasing and convex on the whole line.
fn nonneg_increasing_convex(f: &ScalarFnDef) -> bool {
    f.slope == 0.0 && f.hinge >= 0.0 && f.intercept >= 0.0
}

fn increasing_convex(f: &ScalarFnDef) -> bool {
    f.slope >= 0.0 && f.hinge >= 0.0
}

/// Runs one experiment definition.
pub fn run_experiment(def: &ExperimentDef, loaded: &LoadedConfig) -> Result<ExperimentOutput> {
    let config = &loaded.config;
    let base = &loaded.base_dir;
    let stream = RngStream::new(config.seed, def.stream_index());
    let n = def.n.unwrap_or(config.n);
    let alpha = def.alpha.unwrap_or(config.alpha);
    let test_cfg = OrderTestConfig { alpha, ..Default::default() };
    let mut csv = Vec::new();
    let (mut hypothesis, ordering, order_verdict, details) = match &def.test {
        TestDef::Comparison { .. } => {
            let exp = build_comparison(def, config, base)?;
            let out = run_comparison(&exp, &stream)?;
            let (x, y) = (out.x.mean(), out.y.mean());
            let details = json!({
                "class": exp.class,
                "n": exp.plan.n,
                "alpha": exp.alpha,
                "horizon": exp.plan.horizon,
                "sampling": out.sampling,
                "mean1": x,
                "mean2": y,
            });
            // run_comparison already recorded the assumed flags
            let verdict = out.ordering.verdict;
            return finish(def, loaded, out.hypothesis, Some(out.ordering), verdict, details, csv);
        }
        TestDef::NigExample { .. } => {
            let (example, params) = nig_params(&def.test).expect("NIG example");
            let out = run_nig_example(example, &params, n, &test_cfg, &stream)?;
            let details = json!({
                "example": out.example,
                "n": n,
                "alpha": alpha,
                "smaller": out.smaller,
                "means": out.means,
                "variances": out.variances,
                "variance_stderrs": out.variance_stderrs,
                "exact_variances": out.exact_variances,
            });
            let v = out.ordering.verdict;
            (out.hypothesis, Some(out.ordering), v, details)
        }
        TestDef::TruncationSweep { class, measure1, measure2, drift, levels, horizon, anchors } => {
            let f1 = measure1.build(base)?;
            let f2 = measure2.build(base)?;
            let sampling = SweepSampling { n, horizon: *horizon, anchors: *anchors };
            let rep = run_truncation_sweep(&f1, &f2, *drift, *class, levels, &sampling, &test_cfg, &stream)?;
            let mut h = HypothesisReport::new();
            let mut table = String::from("level,eps,mass,zero_atom1,zero_atom2,moment1,moment2,moment_condition,measure_order,cut_criterion,verdict,error\n");
            for l in &rep.levels {
                match &l.error {
                    Some(e) => h.check(format!("level {}", l.level), false, e.clone()),
                    None => {
                        h.check(
                            format!("level {}: moment condition", l.level),
                            l.moment_condition,
                            format!("truncated first moments {:?}", l.first_moments),
                        );
                        h.check(format!("level {}: measure order", l.level), l.measure_order, l.measure_detail.clone());
                    }
                }
                table.push_str(&format!(
                    "{},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{},{},{}\n",
                    l.level,
                    l.eps,
                    l.mass,
                    l.zero_atoms[0],
                    l.zero_atoms[1],
                    l.first_moments[0],
                    l.first_moments[1],
                    l.moment_condition,
                    l.measure_order,
                    l.cut_criterion.map_or(String::new(), |c| c.to_string()),
                    l.verdict.map_or("", |v| v.as_str()),
                    l.error.as_deref().unwrap_or("").replace(',', ";"),
                ));
            }
            csv.push(("sweep.csv".to_string(), table));
            // the finest level approximates the Lévy pair best
            let finest = rep.levels.iter().rev().find_map(|l| l.ordering.clone());
            let v = finest.as_ref().map_or(Verdict::Inconclusive, |o| o.verdict);
            let verdicts: Vec<Option<Verdict>> = rep.levels.iter().map(|l| l.verdict).collect();
            let details = json!({
                "class": class,
                "route": drift,
                "n": n,
                "alpha": alpha,
                "levels": levels,
                "verdicts": verdicts,
                "measure_order_all": rep.measure_order_all,
                "stable_tail": rep.stable_tail,
            });
            (h, finest, v, details)
        }
        TestDef::NigTwoTime { process1, process2, case, horizon, anchors } => {
            let p1 = process1.build()?;
            let p2 = process2.build()?;
            let h = check_gh_hypotheses(&p1, &p2, *case)?;
            let (rep, x, y) = nig_two_time_test(&p1, &p2, *horizon, n, *anchors, &test_cfg, &stream)?;
            let details = json!({
                "case": case,
                "n": n,
                "alpha": alpha,
                "times": [0.5 * horizon, *horizon],
                "mean1": x.mean(),
                "mean2": y.mean(),
            });
            let v = rep.verdict;
            (h, Some(rep), v, details)
        }
        TestDef::Markov { class, points, .. } => {
            let (c1, q, c2) = build_chains(&def.test)?;
            let mut h = HypothesisReport::new();
            h.check(
                "initial laws",
                exact_order_check_1d(&c1.initial_distribution(), &c2.initial_distribution(), *class)?,
                format!("X_0 <={class} X*_0"),
            );
            h.check("monotone kernel", kernel_monotone(&q, *class)?, format!("Q maps {class} into itself"));
            h.check(
                "separation",
                kernel_separated(&c1.kernel, &q, &c2.kernel, *class)?,
                format!("Q1(x, .) <={class} Q(x, .) <={class} Q2(x, .) for every state"),
            );
            let fdd = verify_fdd_ordering(&c1, &c2, *class, *points)?;
            let details = serde_json::to_value(&fdd).expect("serializable");
            (h, None, order_verdict_of(fdd.holds), details)
        }
        TestDef::Propagation { class, process, payoff, grid, times, horizon, steps, max_violation_fraction } => {
            let spec = process.build(base)?;
            let mut h = HypothesisReport::new();
            let (ok, detail) = payoff_membership(payoff, *class);
            h.check("payoff in class", ok, detail);
            if spec.is_spatially_homogeneous() {
                h.check("spatial homogeneity", true, "constant coefficients and state-independent jumps");
            } else if *class == FunctionClass::Icx {
                h.check("drift increasing convex", increasing_convex(&process.drift), format!("{:?}", process.drift));
                h.check(
                    "diffusion nonnegative increasing convex",
                    nonneg_increasing_convex(&process.diffusion),
                    format!("{:?}", process.diffusion),
                );
                if let Some(j) = &process.jumps {
                    h.check(
                        "jump factor nonnegative increasing convex",
                        nonneg_increasing_convex(&j.phi),
                        format!("varphi {:?}", j.phi),
                    );
                }
                h.push("approximation AP(g)", Status::Assumed, "Euler propagation operators converge to G");
            } else {
                h.check(
                    "sufficient condition",
                    false,
                    format!("propagation of {class} is only established for spatially homogeneous processes"),
                );
            }
            let state_grid = StateGrid::uniform(grid.lower, grid.upper, grid.points)?;
            let cfg = EulerConfig::new(0.0, *horizon, *steps, n, stream.clone());
            let g = *payoff;
            let est = estimate_propagation(&spec, move |s: &[f64]| g.eval(s[0]), &state_grid, times, &cfg)?;
            let rep = check_propagation_of_order(&est, *class)?;
            let fraction = rep.violation_fraction();
            csv.push(("propagation.csv".to_string(), est.to_csv_string()));
            let v = order_verdict_of(fraction <= *max_violation_fraction);
            let details = json!({
                "class": class,
                "n_per_cell": n,
                "steps": steps,
                "checks": rep.total_checks(),
                "violations": rep.total_violations(),
                "violation_fraction": fraction,
                "max_violation_fraction": max_violation_fraction,
                "slices": rep.slices,
            });
            (h, None, v, details)
        }
    };
    hypothesis.assume_all(&def.assumed_flags);
    finish(def, loaded, hypothesis, ordering, order_verdict, details, csv)
}

fn finish(
    def: &ExperimentDef,
    loaded: &LoadedConfig,
    hypothesis: HypothesisReport,
    ordering: Option<OrderingReport>,
    order_verdict: Verdict,
    details: Value,
    mut csv: Vec<(String, String)>,
) -> Result<ExperimentOutput> {
    let verdict = CombinedVerdict::combine(&hypothesis, order_verdict);
    if let Some(o) = &ordering {
        csv.insert(0, ("ordering.csv".to_string(), o.to_csv_string()));
    }
    Ok(ExperimentOutput {
        report: ExperimentReport {
            name: def.name.clone(),
            kind: def.test.kind().to_string(),
            seed: loaded.config.seed,
            stream_index: def.stream_index(),
            config_digest: loaded.digest.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            verdict,
            hypothesis,
            ordering,
            details,
        },
        csv,
    })
}

/// Writes the report and side files of one experiment into `dir`.
pub fn write_output(out: &ExperimentOutput, dir: &Path) -> std::io::Result<()> {
    let mut json = serde_json::to_string_pretty(&out.report).expect("report serializes");
    json.push('\n');
    write_atomic(&dir.join("report.json"), json.as_bytes())?;
    for (file, body) in &out.csv {
        write_atomic(&dir.join(file), body.as_bytes())?;
    }
    Ok(())
}

/// Selects experiments (all, or the one named by `only`).
pub fn select<'a>(loaded: &'a LoadedConfig, only: Option<&str>) -> std::result::Result<Vec<&'a ExperimentDef>, ConfigError> {
    match only {
        None => Ok(loaded.config.experiments.iter().collect()),
        Some(name) => loaded.config.experiment(name).map(|e| vec![e]).ok_or_else(|| ConfigError {
            pointer: "--only".into(),
            message: format!("no experiment named `{name}`"),
        }),
    }
}

/// Runs the selected experiments with the configured parallelism and writes
/// their reports under `root`.
pub fn run_all(loaded: &LoadedConfig, defs: &[&ExperimentDef], root: &Path) -> Vec<RunEntry> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(loaded.config.parallelism)
        .build()
        .expect("thread pool");
    pool.install(|| {
        defs.par_iter()
            .map(|def| {
                let result = run_experiment(def, loaded)
                    .map_err(|e| e.with_context(&format!("experiment `{}`", def.name)).to_string())
                    .and_then(|out| {
                        let dir = experiment_dir(root, &def.name, loaded.config.seed);
                        write_output(&out, &dir).map_err(|e| format!("writing {}: {e}", dir.display()))?;
                        Ok((out.report.verdict, dir))
                    });
                RunEntry { name: def.name.clone(), result }
            })
            .collect()
    })
}
