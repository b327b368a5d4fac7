//! Quick invariant suites behind the `self-test` subcommand. Each suite is
//! deterministic and finishes in well under a second.

use super::config::parse_config_str;
use crate::error::Result;
use crate::harness::{check_gh_hypotheses, check_table1, normal_process, GhCase};
use crate::markov::{random_separated_instance, verify_fdd_ordering};
use crate::orders::{
    atom_grid, cut_criterion_1d, empirical_order_test, exact_order_check_1d, generate_family, DiscreteMeasure,
    FunctionClass, OrderTestConfig, Verdict,
};
use crate::samplers::{sample_gig, sample_mvn, GhParams, GigParams, RngStream};
use nalgebra::DMatrix;
use rand::Rng;

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn suite(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> SuiteResult {
    match f() {
        Ok((passed, detail)) => SuiteResult { name, passed, detail },
        Err(e) => SuiteResult { name, passed: false, detail: format!("error: {e}") },
    }
}

fn random_pair<R: Rng>(rng: &mut R) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let mut side = |shift: f64| -> Vec<(f64, f64)> {
        let k = rng.random_range(2..6);
        let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.1).collect();
        let s: f64 = w.iter().sum();
        (0..k).map(|i| (rng.random_range(-3.0..3.0) + shift, w[i] / s)).collect()
    };
    let a = side(0.0);
    let mut b = side(0.0);
    let mean = |v: &[(f64, f64)]| v.iter().map(|(x, w)| x * w).sum::<f64>();
    let gap = mean(&a) - mean(&b);
    for p in b.iter_mut() {
        p.0 += gap;
    }
    Ok((DiscreteMeasure::from_1d(&a)?, DiscreteMeasure::from_1d(&b)?))
}

/// Runs every suite.
pub fn run_self_test() -> Vec<SuiteResult> {
    vec![
        suite("exact one-dimensional orders", || {
            let point = DiscreteMeasure::from_1d(&[(0.5, 1.0)])?;
            let spread = DiscreteMeasure::from_1d(&[(0.0, 0.5), (1.0, 0.5)])?;
            let shifted = DiscreteMeasure::from_1d(&[(1.0, 0.5), (2.0, 0.5)])?;
            let ok = exact_order_check_1d(&point, &spread, FunctionClass::Cx)?
                && !exact_order_check_1d(&spread, &point, FunctionClass::Cx)?
                && exact_order_check_1d(&spread, &shifted, FunctionClass::St)?
                && !exact_order_check_1d(&shifted, &spread, FunctionClass::Icx)?;
            Ok((ok, "point mass <=cx spread, spread <=st shift".into()))
        }),
        suite("cut criterion implies convex order", || {
            let mut rng = RngStream::new(11, 0).rng();
            let (mut cut, mut bad) = (0, 0);
            for _ in 0..200 {
                let (a, b) = random_pair(&mut rng)?;
                if cut_criterion_1d(&a, &b, &atom_grid(&a, &b))?.single_crossing {
                    cut += 1;
                    if !exact_order_check_1d(&a, &b, FunctionClass::Cx)? {
                        bad += 1;
                    }
                }
            }
            Ok((bad == 0, format!("{cut} single-crossing pairs, {bad} without convex order")))
        }),
        suite("separated Markov chains", || {
            let mut rng = RngStream::new(11, 1).rng();
            let mut bad = 0;
            for i in 0..60 {
                let class = [FunctionClass::St, FunctionClass::Icx, FunctionClass::Cx][i % 3];
                let inst = random_separated_instance(&mut rng, 2 + i % 3, class, 3)?;
                if !verify_fdd_ordering(&inst.chain1, &inst.chain2, class, 3)?.holds {
                    bad += 1;
                }
            }
            Ok((bad == 0, format!("{bad} counterexamples in 60 instances")))
        }),
        suite("characteristic comparison rows", || {
            let a = normal_process(vec![0.0, 0.0], DMatrix::identity(2, 2))?;
            let b = normal_process(vec![0.0, 0.0], DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0]))?;
            let cx = check_table1(&a, &b, FunctionClass::Cx)?.all_pass();
            let sm = check_table1(&a, &b, FunctionClass::Sm)?.predicted();
            let same = FunctionClass::ALL.iter().all(|c| check_table1(&a, &a, *c).map(|r| r.all_pass()).unwrap_or(false));
            Ok((cx && !sm && same, format!("CX pass {cx}, SM predicted {sm}, identical pairs pass {same}")))
        }),
        suite("GH parameter conditions", || {
            let p1 = GhParams::nig_1d(2.0, 0.0, 1.0, 0.0)?;
            let p2 = GhParams::nig_1d(1.8, 0.3, 1.2, 0.1)?;
            let ok = check_gh_hypotheses(&p1, &p2, GhCase::C28)?.all_pass()
                && !check_gh_hypotheses(&p1, &p2, GhCase::C29)?.predicted()
                && !check_gh_hypotheses(&p2, &p1, GhCase::C28)?.predicted();
            Ok((ok, "C28 instance passes, C29 with skewness and the reversed pair fail".into()))
        }),
        suite("empirical test on identical samples", || {
            let x = sample_mvn(&[0.0], &DMatrix::identity(1, 1), 2_000, &RngStream::new(11, 2))?;
            let fam = generate_family(FunctionClass::Cx, 1, 7, Some(&x))?;
            let rep = empirical_order_test(&x, &x, &fam, &OrderTestConfig { alpha: 0.01, ..Default::default() })?;
            Ok((rep.verdict == Verdict::Consistent, format!("verdict {}", rep.verdict.as_str())))
        }),
        suite("GIG sampler mean", || {
            let p = GigParams::new(-0.5, 1.0, 1.0)?;
            let s = sample_gig(&p, 20_000, &RngStream::new(11, 3))?;
            let m = crate::stats::mean(&s);
            let se = crate::stats::stderr(&s);
            // inverse Gaussian with delta = gamma = 1 has mean delta / gamma
            let ok = (m - 1.0).abs() <= 5.0 * se;
            Ok((ok, format!("mean {m:.4} (stderr {se:.4}), exact 1")))
        }),
        suite("configuration schema", || {
            let good = r#"{"seed": 1, "experiments": [{"name": "a", "test": {"kind": "nig_example",
                "example": "ALPHA", "first": 1, "second": 2, "shared": 1}}]}"#;
            let ok = parse_config_str(good).is_ok()
                && parse_config_str(&good.replace("\"seed\": 1,", "")).is_err()
                && parse_config_str(&good.replace("\"shared\": 1", "\"shared\": 1, \"extra\": 0")).is_err();
            Ok((ok, "valid config parses; missing seed and unknown keys are rejected".into()))
        }),
    ]
}
