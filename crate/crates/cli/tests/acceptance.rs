//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdict lines appear in order on
//! stdout; the process exits non-zero if any criterion fails.

use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use eicalg::bracket::symbolic;
use eicalg::eic::derive_eic;
use eicalg::exec::Execution;
use eicalg::expr::canonicalize_rv;
use eicalg::harness::{run_mc, Exact, McConfig, Sampler};
use eicalg::identities::{
    run_suite, symbolic_identity_suite, CheckMode, IdentityRecord, Suite, VerifyOptions,
};
use eicalg::random::stream;
use eicalg::syntax::{parse_expression, parse_rv_expression};
use eicalg::RvExpr;
use num::BigRational;
use rand::Rng;

const SEED: u64 = 42;
const MC_SEED: u64 = 7;
const BIN: &str = env!("CARGO_BIN_EXE_eicalg");

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    ok: bool,
    detail: String,
}

impl Outcome {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Outcome {
            ok,
            detail: detail.into(),
        }
    }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let took = start.elapsed();
    (
        took < limit,
        format!("{:.2}s < {}s", took.as_secs_f64(), limit.as_secs()),
    )
}

fn exact_records(records: &[IdentityRecord], name: &str) -> Option<IdentityRecord> {
    records
        .iter()
        .find(|r| r.name == name && r.mode == CheckMode::Exact)
        .cloned()
}

fn symbolic_passed(name: &str) -> bool {
    let suite = symbolic_identity_suite();
    let matching: Vec<_> = suite.iter().filter(|r| r.name == name).collect();
    !matching.is_empty() && matching.iter().all(|r| r.passed())
}

fn canon_eq(a: &RvExpr, b: &RvExpr) -> bool {
    matches!((canonicalize_rv(a), canonicalize_rv(b)), (Ok(x), Ok(y)) if x == y)
}

fn exact_passed(records: &[IdentityRecord], name: &str, trials: u64) -> bool {
    exact_records(records, name).is_some_and(|r| r.passed() && r.trials == trials)
}

fn jacobi() -> Outcome {
    let start = Instant::now();
    let recs = run_suite(Suite::Jacobi, &VerifyOptions::new(1000, SEED));
    let exact = exact_passed(&recs, "jacobi-identity", 1000);
    let sym =
        canon_eq(&symbolic::jacobi_sum(), &RvExpr::zero()) && symbolic_passed("jacobi-identity");
    let (fast, t) = within(start, Duration::from_secs(10));
    Outcome::new(
        exact && sym && fast,
        format!("1000 instances exact={exact}, canonical zero={sym}, {t}"),
    )
}

fn lemma() -> Outcome {
    let start = Instant::now();
    let recs = run_suite(Suite::Lemma, &VerifyOptions::new(1000, SEED));
    let names = ["lemma-piece-1", "lemma-piece-2", "lemma-piece-3"];
    let exact = names.iter().all(|n| exact_passed(&recs, n, 1000));
    let sym = names.iter().all(|n| symbolic_passed(n));
    let (fast, t) = within(start, Duration::from_secs(10));
    Outcome::new(
        exact && sym && fast,
        format!("3 pieces on 1000 instances exact={exact}, canonical={sym}, {t}"),
    )
}

fn corollaries() -> Outcome {
    let recs = run_suite(Suite::Corollaries, &VerifyOptions::new(500, SEED));
    let names = ["corollary-leibniz", "corollary-covariance"];
    let exact = names.iter().all(|n| exact_passed(&recs, n, 500));
    let (l, r) = symbolic::corollary_leibniz();
    let (cl, cr) = symbolic::corollary_cov();
    let sym = canon_eq(&l, &r) && canon_eq(&cl, &cr) && names.iter().all(|n| symbolic_passed(n));
    Outcome::new(
        exact && sym,
        format!("500 instances exact={exact}, canonical={sym}"),
    )
}

fn variance_eic() -> Outcome {
    let expected =
        canonicalize_rv(&parse_rv_expression("(X - E[X])^2 - E[(X - E[X])^2]").unwrap()).unwrap();
    let canon = |text: &str| {
        let psi = parse_expression(text).unwrap();
        canonicalize_rv(&derive_eic(&psi).unwrap().eic).unwrap()
    };
    let from_var = canon("Var(X)");
    let from_expanded = canon("E[X^2]-E[X]^2");
    let ok = from_var == expected && from_expanded == from_var;
    Outcome::new(ok, format!("EIC = {from_var}"))
}

fn certificates() -> Outcome {
    let start = Instant::now();
    let recs = run_suite(Suite::EicCertificates, &VerifyOptions::new(100, SEED));
    let exact = [
        "certificate-mean",
        "certificate-second-moment",
        "certificate-variance",
        "certificate-covariance",
        "certificate-product-of-means",
    ]
    .iter()
    .all(|n| exact_passed(&recs, n, 100));
    let numeric = recs.iter().any(|r| {
        r.name == "certificate-reciprocal-mean"
            && r.mode == CheckMode::Numeric
            && r.passed()
            && r.trials == 100
    });
    let (fast, t) = within(start, Duration::from_secs(30));
    Outcome::new(
        exact && numeric && fast,
        format!("5 exact x 100 trials={exact}, inv(E[X]) h=1e-6 rtol=1e-6: {numeric}, {t}"),
    )
}

fn ratio(n: i64, d: i64) -> Exact {
    Exact(BigRational::new(n.into(), d.into()))
}

fn mc_check(
    label: &str,
    sampler: Sampler,
    estimand: &str,
    oracle_bound: BigRational,
) -> (bool, String) {
    let start = Instant::now();
    let cfg = McConfig::new(sampler, estimand, 10_000, 1_000, MC_SEED);
    let rep = match run_mc(&cfg, Execution::default()) {
        Ok(r) => r,
        Err(e) => return (false, format!("{label}: {e}")),
    };
    let bound_ok = rep.bound_exact.as_deref() == Some(oracle_bound.to_string().as_str());
    let rel = rep.empirical_variance / rep.bound - 1.0;
    let var_ok = rel.abs() <= 0.10;
    let cov_ok = (0.93..=0.97).contains(&rep.coverage);
    let (fast, t) = within(start, Duration::from_secs(60));
    (
        bound_ok && var_ok && cov_ok && fast,
        format!(
            "{label}: bound {} var {:.4} ({:+.1}%) coverage {:.3} {t}",
            rep.bound_exact.unwrap_or_default(),
            rep.empirical_variance,
            100.0 * rel,
            rep.coverage
        ),
    )
}

fn efficiency() -> Outcome {
    // p(1 - p) at p = 3/10.
    let (a, da) = mc_check(
        "Bernoulli(3/10) mean",
        Sampler::Bernoulli { p: ratio(3, 10) },
        "E[X]",
        BigRational::new(21.into(), 100.into()),
    );
    // EIC of the variance at mean 1 is (X-1)^2 - 1/2 = ±1/2 with probability 1/2 each.
    let (b, db) = mc_check(
        "variance on {0,1,2}",
        Sampler::Discrete {
            support: vec![ratio(0, 1), ratio(1, 1), ratio(2, 1)],
            weights: vec![ratio(1, 4), ratio(1, 2), ratio(1, 4)],
        },
        "Var(X)",
        BigRational::new(1.into(), 4.into()),
    );
    Outcome::new(a && b, format!("{da}; {db}"))
}

fn decomposition() -> Outcome {
    let recs = run_suite(Suite::Decomposition, &VerifyOptions::new(500, SEED));
    let d = exact_passed(&recs, "orthogonal-decomposition", 500);
    let r = exact_passed(&recs, "riesz-representer", 500);
    Outcome::new(
        d && r,
        format!("500 instances: decomposition={d}, riesz={r}"),
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn number<R: Rng>(rng: &mut R) -> String {
    match rng.random_range(0..4) {
        0 => rng.random_range(0..10).to_string(),
        1 => format!("{}.{}", rng.random_range(0..10), rng.random_range(1..100)),
        2 => format!("0.{:03}", rng.random_range(1..1000)),
        _ => rng.random_range(1..40).to_string(),
    }
}

fn ident<R: Rng>(rng: &mut R) -> &'static str {
    ["X", "Y", "Z", "W1"][rng.random_range(0..4)]
}

fn power<R: Rng>(rng: &mut R, atom: String) -> String {
    if rng.random_bool(0.25) {
        format!("{atom}^{}", rng.random_range(0..4))
    } else {
        atom
    }
}

fn joined<R: Rng>(rng: &mut R, depth: u32, item: fn(&mut R, u32) -> String) -> String {
    let mut out = if rng.random_bool(0.2) {
        "-".to_string()
    } else {
        String::new()
    };
    for i in 0..rng.random_range(1..=3) {
        if i > 0 {
            out.push_str(if rng.random_bool(0.5) { " + " } else { " - " });
        }
        let factors: Vec<String> = (0..rng.random_range(1..=2))
            .map(|_| item(rng, depth))
            .collect();
        out.push_str(&factors.join("*"));
    }
    out
}

fn rv_factor<R: Rng>(rng: &mut R, depth: u32) -> String {
    let atom = match if depth == 0 {
        rng.random_range(0..2)
    } else {
        rng.random_range(0..4)
    } {
        0 => ident(rng).to_string(),
        1 => number(rng),
        2 => format!("({})", joined(rng, depth - 1, rv_factor)),
        _ => format!("E[{}]", joined(rng, depth - 1, rv_factor)),
    };
    power(rng, atom)
}

fn func_factor<R: Rng>(rng: &mut R, depth: u32) -> String {
    let atom = match if depth == 0 {
        rng.random_range(0..4)
    } else {
        rng.random_range(0..6)
    } {
        0 => number(rng),
        1 => format!("Var({})", ident(rng)),
        2 => format!("Cov({},{})", ident(rng), ident(rng)),
        3 => format!("E[{}]", joined(rng, depth.min(1), rv_factor)),
        4 => format!("inv({})", joined(rng, depth - 1, func_factor)),
        _ => format!("({})", joined(rng, depth - 1, func_factor)),
    };
    power(rng, atom)
}

/// Seeded corpus of grammar-conforming functional texts.
fn expression_corpus(n: u64, seed: u64) -> Vec<String> {
    (0..n)
        .map(|i| {
            let mut rng = stream(seed, i);
            let depth = rng.random_range(1..=3);
            joined(&mut rng, depth, func_factor)
        })
        .collect()
}

fn round_trip(text: &str) -> Result<(), String> {
    let psi = parse_expression(text).map_err(|e| format!("{text:?}: {e}"))?;
    let printed = psi.to_string();
    let again = parse_expression(&printed).map_err(|e| format!("{printed:?}: {e}"))?;
    if again != psi || again.to_string() != printed {
        return Err(format!(
            "{text:?} printed as {printed:?} reparsed as {again}"
        ));
    }
    Ok(())
}

fn contracts() -> Outcome {
    let verify = [
        "--output",
        "structured",
        "verify",
        "all",
        "--trials",
        "50",
        "--seed",
        "42",
    ];
    let simulate = [
        "--output",
        "structured",
        "simulate",
        "--family",
        "discrete",
        "--support",
        "0,1,2",
        "--weights",
        "1/4,1/2,1/4",
        "--estimand",
        "Var(X)",
        "--n",
        "500",
        "--replicates",
        "100",
        "--seed",
        "7",
    ];
    let (v1, v2) = (run(&verify), run(&verify));
    let (s1, s2) = (run(&simulate), run(&simulate));
    let deterministic = v1.status.success()
        && s1.status.success()
        && v1.stdout == v2.stdout
        && s1.stdout == s2.stdout
        && !v1.stdout.is_empty();

    let corpus = expression_corpus(200, SEED);
    let failures: Vec<String> = corpus.iter().filter_map(|t| round_trip(t).err()).collect();
    let cli_trip = run(&["parse-check", &corpus[0]]).status.success();
    let trips = failures.is_empty() && cli_trip;

    let fault = run(&[
        "--output",
        "structured",
        "verify",
        "jacobi",
        "--inject-fault",
        "negated-centering",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&fault.stdout).unwrap_or_default();
    let counterexample = report["results"]
        .as_array()
        .and_then(|rs| rs.iter().find(|r| r["verdict"] == "fail"))
        .map(|r| {
            r["counterexample"]["instance"].is_u64() && r["counterexample"]["binding"].is_object()
        })
        .unwrap_or(false);
    let caught = fault.status.code() == Some(1) && counterexample;

    let mut detail = format!(
        "byte-identical reports={deterministic}, round-trip {}/200 (cli={cli_trip}), negative control caught={caught}",
        200 - failures.len()
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first failure {f}"));
    }
    Outcome::new(deterministic && trips && caught, detail)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("jacobi identity", jacobi),
        ("lemma pieces", lemma),
        ("corollaries", corollaries),
        ("variance EIC", variance_eic),
        ("pathwise certificates", certificates),
        ("efficiency bound", efficiency),
        ("decomposition and riesz", decomposition),
        ("determinism and CLI contracts", contracts),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let verdict = if o.ok { "PASS" } else { "FAIL" };
        failed += usize::from(!o.ok);
        println!("{verdict} criterion {} {name}: {}", i + 1, o.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
