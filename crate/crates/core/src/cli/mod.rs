//! Command-line front end: `run`, `check-order`, `simulate`,
//! `list-experiments` and `self-test`.
//!
//! Exit codes: 0 success, 1 a predicted-and-violated conclusion or a failed
//! test, 2 usage or configuration errors. Diagnostics go to standard error;
//! results go to files.

pub mod config;
pub mod run;
pub mod selftest;

use crate::harness::{CombinedVerdict, TerminalSampling};
use crate::orders::{empirical_order_test, generate_family, FunctionClass, OrderTestConfig, Verdict};
use crate::sample::SampleMatrix;
use crate::samplers::RngStream;
use clap::{Parser, Subcommand};
use config::{parse_config, ProcessDef};
use serde::Deserialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "stochorder", version, about = "Stochastic-order experiments for Lévy processes and jump diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiments of a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only the named experiment.
        #[arg(long)]
        only: Option<String>,
        /// Override the configured number of concurrent experiments.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Test `X <=_class Y` on two CSV samples (one row per draw).
    CheckOrder {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// ST, CX, DCX, SM, ICX, IDCX or ISM.
        #[arg(long)]
        class: String,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Anchors per axis of the generated test-function family.
        #[arg(long, default_value_t = 7)]
        anchors: usize,
        /// Rows of X and Y are coupled draws.
        #[arg(long)]
        paired: bool,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-function CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Draw terminal values of a process described in a JSON spec file.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// List the experiments of a configuration file.
    ListExperiments {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in invariant suites.
    SelfTest,
}

/// Process description for `simulate`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
    pub process: ProcessDef,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub truncation: Option<f64>,
    #[serde(default)]
    pub euler_steps: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn usage(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

fn cmd_run(config: &Path, only: Option<&str>, parallelism: Option<usize>) -> i32 {
    let mut loaded = match parse_config(config) {
        Ok(l) => l,
        Err(e) => return usage(format!("{}: {e}", config.display())),
    };
    match parallelism {
        Some(0) => return usage("--parallelism must be at least 1"),
        Some(p) => loaded.config.parallelism = p,
        None => {}
    }
    let defs = match run::select(&loaded, only) {
        Ok(d) => d,
        Err(e) => return usage(e),
    };
    let root = run::output_root(&loaded);
    let entries = run::run_all(&loaded, &defs, &root);
    let mut code = EXIT_OK;
    for e in &entries {
        match &e.result {
            Ok((verdict, dir)) => {
                eprintln!("{:<32} {:<24} {}", e.name, verdict.as_str(), dir.display());
                if *verdict == CombinedVerdict::PredictedViolated {
                    code = EXIT_FAILURE;
                }
            }
            Err(msg) => {
                eprintln!("{:<32} ERROR {msg}", e.name);
                code = EXIT_FAILURE;
            }
        }
    }
    code
}

#[allow(clippy::too_many_arguments)]
fn cmd_check_order(
    x: &Path,
    y: &Path,
    class: &str,
    alpha: f64,
    anchors: usize,
    paired: bool,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> i32 {
    let class: FunctionClass = match class.parse() {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let load = |p: &Path| SampleMatrix::read_csv(p).map_err(|e| format!("{}: {e}", p.display()));
    let (xs, ys) = match (load(x), load(y)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return usage(e),
    };
    let result = (|| {
        let pooled = SampleMatrix::new(xs.dim(), xs.as_slice().iter().chain(ys.as_slice()).copied().collect())?;
        let family = generate_family(class, xs.dim(), anchors, Some(&pooled))?;
        let cfg = OrderTestConfig { alpha, paired, ..Default::default() };
        Ok::<_, crate::Error>(empirical_order_test(&xs, &ys, &family, &cfg)?.with_class(class))
    })();
    let report = match result {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let json = report.to_json();
    match out {
        Some(p) => {
            if let Err(e) = run::write_atomic(p, format!("{json}\n").as_bytes()) {
                eprintln!("error: writing {}: {e}", p.display());
                return EXIT_FAILURE;
            }
        }
        None => println!("{json}"),
    }
    if let Some(p) = csv {
        if let Err(e) = run::write_atomic(p, report.to_csv_string().as_bytes()) {
            eprintln!("error: writing {}: {e}", p.display());
            return EXIT_FAILURE;
        }
    }
    eprintln!("verdict: {}", report.verdict.as_str());
    if report.verdict == Verdict::Violation {
        EXIT_FAILURE
    } else {
        EXIT_OK
    }
}

fn cmd_simulate(spec_path: &Path, n: usize, out: &Path) -> i32 {
    let text = match std::fs::read_to_string(spec_path) {
        Ok(t) => t,
        Err(e) => return usage(format!("cannot read {}: {e}", spec_path.display())),
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    let spec: SimulateSpec = match serde_path_to_error::deserialize(de) {
        Ok(s) => s,
        Err(e) => return usage(format!("{}: at `{}`: {}", spec_path.display(), e.path(), e.inner())),
    };
    let base = spec_path.parent().unwrap_or(Path::new(""));
    let process = match spec.process.build(base) {
        Ok(p) => p,
        Err(e) => return usage(format!("{}: at `process`: {e}", spec_path.display())),
    };
    let defaults = TerminalSampling::default();
    let plan = TerminalSampling {
        truncation: spec.truncation.unwrap_or(defaults.truncation),
        euler_steps: spec.euler_steps.unwrap_or(defaults.euler_steps),
    };
    let stream = RngStream::new(spec.seed, spec.stream);
    let sample = match process.sample_terminal(spec.horizon, n, &plan, &stream) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    if let Err(e) = sample.write_csv(out) {
        eprintln!("error: writing {}: {e}", out.display());
        return EXIT_FAILURE;
    }
    eprintln!("wrote {} draws of dimension {} to {}", sample.rows(), sample.dim(), out.display());
    EXIT_OK
}

fn cmd_list(config: &Path) -> i32 {
    match parse_config(config) {
        Ok(l) => {
            for e in &l.config.experiments {
                println!("{}\t{}", e.name, e.test.kind());
            }
            EXIT_OK
        }
        Err(e) => usage(format!("{}: {e}", config.display())),
    }
}

fn cmd_self_test() -> i32 {
    let results = selftest::run_self_test();
    let mut code = EXIT_OK;
    for r in &results {
        eprintln!("{} {:<40} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        if !r.passed {
            code = EXIT_FAILURE;
        }
    }
    code
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { config, only, parallelism } => cmd_run(&config, only.as_deref(), parallelism),
        Command::CheckOrder { x, y, class, alpha, anchors, paired, out, csv } => {
            cmd_check_order(&x, &y, &class, alpha, anchors, paired, out.as_deref(), csv.as_deref())
        }
        Command::Simulate { spec, n, out } => cmd_simulate(&spec, n, &out),
        Command::ListExperiments { config } => cmd_list(&config),
        Command::SelfTest => cmd_self_test(),
    }
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
