use std::fmt::Write as _;
use std::path::Path;

use eicalg::bracket::Centering;
use eicalg::eic::{derive_eic_with, Mode, TraceStep};
use eicalg::exec::Execution;
use eicalg::expr::{canonicalize_func, canonicalize_rv};
use eicalg::harness::{self, run_mc, Dataset, Estimator, Exact, HarnessError, McConfig, Sampler};
use eicalg::identities::{run_suite, Suite, Verdict, VerifyOptions};
use eicalg::report::Report;
use eicalg::syntax::parse_expression;
use eicalg::FuncExpr;
use serde::Serialize;

use crate::{EstimatorArg, Family, Fault, ModeArg, Output, SimulateArgs, VerifyArgs};

pub const PASS: u8 = 0;
pub const FAIL: u8 = 1;
pub const USAGE: u8 = 2;
pub const DATA: u8 = 3;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type Status = Result<u8, Failure>;

fn mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Float => Mode::Float,
    }
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn parse(text: &str) -> Result<FuncExpr, Failure> {
    parse_expression(text).map_err(|e| fail(USAGE, format!("parse error at {e}")))
}

fn emit<I: Serialize, R: Serialize>(
    report: &Report<I, R>,
    out: Output,
    text: impl FnOnce() -> String,
) {
    match out {
        Output::Structured => {
            println!(
                "{}",
                serde_json::to_string_pretty(report).expect("reports serialize")
            )
        }
        Output::Text => print!("{}", text()),
    }
}

fn exit_for(passed: bool) -> u8 {
    if passed {
        PASS
    } else {
        FAIL
    }
}

#[derive(Serialize)]
struct DeriveInputs<'a> {
    expression: &'a str,
    mode: Mode,
}

#[derive(Serialize)]
struct Derived {
    estimand: String,
    estimand_canonical: String,
    eic: String,
    eic_as_derived: String,
    trace: Vec<TraceStep>,
}

pub fn derive(expression: &str, m: ModeArg, out: Output) -> Status {
    let psi = parse(expression)?;
    let d = derive_eic_with(&psi, mode(m))
        .map_err(|e| fail(USAGE, format!("cannot differentiate: {e}")))?;
    let eic = canonicalize_rv(&d.eic)
        .map_err(|e| fail(USAGE, e.to_string()))?
        .to_string();
    let estimand_canonical = canonicalize_func(&d.estimand)
        .map_err(|e| fail(USAGE, e.to_string()))?
        .to_string();
    let mean_zero = d.is_mean_zero().unwrap_or(false);
    let result = Derived {
        estimand: d.estimand.to_string(),
        estimand_canonical,
        eic,
        eic_as_derived: d.eic.to_string(),
        trace: d.trace,
    };
    let report = Report::new(
        "derive",
        DeriveInputs {
            expression,
            mode: mode(m),
        },
        None,
    )
    .result(result)
    .verdict("mean-zero", Verdict::of(mean_zero));
    emit(&report, out, || {
        let r = &report.results[0];
        let mut s = String::new();
        let _ = writeln!(s, "estimand   {}", r.estimand);
        let _ = writeln!(s, "eic        {}", r.eic);
        let _ = writeln!(s, "mean-zero  {}", Verdict::of(mean_zero));
        let _ = writeln!(s, "trace");
        for step in &r.trace {
            let _ = writeln!(s, "  {step}");
        }
        s
    });
    Ok(exit_for(mean_zero))
}

#[derive(Serialize)]
struct VerifyInputs<'a> {
    suite: &'a str,
    trials: u64,
    max_outcomes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fault: Option<&'static str>,
}

pub fn verify(args: &VerifyArgs, out: Output) -> Status {
    let suite = Suite::from_name(&args.suite).ok_or_else(|| {
        let names: Vec<&str> = Suite::EACH.iter().map(|s| s.name()).collect();
        fail(
            USAGE,
            format!(
                "unknown suite {:?}; expected one of {}, all",
                args.suite,
                names.join(", ")
            ),
        )
    })?;
    let mut opts = VerifyOptions::new(args.trials, args.seed)
        .max_outcomes(args.max_outcomes as usize)
        .exec(exec(args.sequential));
    if args.inject_fault == Some(Fault::NegatedCentering) {
        opts = opts.centering(Centering::NegatedMean);
    }
    let records = run_suite(suite, &opts);
    let inputs = VerifyInputs {
        suite: suite.name(),
        trials: args.trials,
        max_outcomes: args.max_outcomes,
        fault: args.inject_fault.map(|_| "negated-centering"),
    };
    let report = Report::from_records("verify", inputs, Some(args.seed), records);
    let passed = report.passed();
    emit(&report, out, || {
        let mut s = String::new();
        for r in &report.results {
            let verdict = match r.verdict {
                Verdict::Pass => "PASS",
                Verdict::Fail => "FAIL",
            };
            let mode = serde_json::to_value(r.mode).expect("mode serializes");
            let _ = writeln!(
                s,
                "{verdict}  {}/{}  [{}, {} trials]  {}",
                r.suite,
                r.name,
                mode.as_str().unwrap_or_default(),
                r.trials,
                r.statement
            );
            if let Some(c) = &r.counterexample {
                if let Some(i) = c.instance {
                    let _ = writeln!(s, "      instance {i}");
                }
                if let Some(space) = &c.space {
                    let _ = writeln!(s, "      space    {space}");
                }
                for (k, v) in &c.binding {
                    let _ = writeln!(s, "      {k:<8} {v}");
                }
                let _ = writeln!(s, "      {}", c.detail);
            }
        }
        let failed = report.results.iter().filter(|r| !r.passed()).count();
        let _ = writeln!(
            s,
            "{} identities checked, {failed} failed (seed {})",
            report.results.len(),
            args.seed
        );
        s
    });
    Ok(exit_for(passed))
}

fn harness_failure(e: HarnessError) -> Failure {
    let code = match &e {
        HarnessError::Data(_) | HarnessError::Expr(_) | HarnessError::Measure(_) => DATA,
        HarnessError::Eic(_)
        | HarnessError::InvalidLevel(_)
        | HarnessError::NegativeStandardError(_)
        | HarnessError::InvalidSplit(_)
        | HarnessError::Config(_) => USAGE,
    };
    fail(code, e.to_string())
}

#[derive(Serialize)]
struct EstimateInputs<'a> {
    expression: &'a str,
    data: String,
    level: f64,
    mode: Mode,
    split: Option<f64>,
}

pub fn estimate(
    expression: &str,
    data: &Path,
    level: f64,
    m: ModeArg,
    split: Option<f64>,
    out: Output,
) -> Status {
    let psi = parse(expression)?;
    let dataset = Dataset::from_path(data).map_err(|e| fail(DATA, e.to_string()))?;
    let est = harness::estimate(&psi, &dataset, level, mode(m), split).map_err(harness_failure)?;
    let inputs = EstimateInputs {
        expression,
        data: data.display().to_string(),
        level,
        mode: mode(m),
        split,
    };
    let report = Report::new("estimate", inputs, None).result(est);
    emit(&report, out, || {
        let e = &report.results[0];
        let mut s = String::new();
        let _ = writeln!(s, "estimand   {}", e.estimand);
        let _ = writeln!(s, "n          {}", e.n);
        match &e.estimate_exact {
            Some(x) => {
                let _ = writeln!(s, "estimate   {} ({x})", e.estimate);
            }
            None => {
                let _ = writeln!(s, "estimate   {}", e.estimate);
            }
        }
        let _ = writeln!(s, "std error  {}", e.standard_error);
        let _ = writeln!(
            s,
            "{}% CI    [{}, {}]",
            e.level * 100.0,
            e.ci_low,
            e.ci_high
        );
        if let Some(o) = e.onestep {
            let _ = writeln!(s, "one-step   {o}");
        }
        s
    });
    Ok(PASS)
}

fn exact_arg(name: &str, v: &Option<String>) -> Result<Exact, Failure> {
    let text = v
        .as_deref()
        .ok_or_else(|| fail(USAGE, format!("--{name} is required for this family")))?;
    Exact::parse(text)
        .ok_or_else(|| fail(USAGE, format!("--{name}: {text:?} is not an exact number")))
}

fn exact_list(name: &str, v: &Option<String>) -> Result<Vec<Exact>, Failure> {
    let text = v
        .as_deref()
        .ok_or_else(|| fail(USAGE, format!("--{name} is required for this family")))?;
    text.split(',')
        .map(|t| {
            Exact::parse(t)
                .ok_or_else(|| fail(USAGE, format!("--{name}: {t:?} is not an exact number")))
        })
        .collect()
}

fn inline_config(args: &SimulateArgs) -> Result<McConfig, Failure> {
    let family = args
        .family
        .ok_or_else(|| fail(USAGE, "either --config or --family is required"))?;
    let sampler = match family {
        Family::Bernoulli => Sampler::Bernoulli {
            p: exact_arg("p", &args.p)?,
        },
        Family::Discrete => Sampler::Discrete {
            support: exact_list("support", &args.support)?,
            weights: exact_list("weights", &args.weights)?,
        },
        Family::UniformGrid => Sampler::UniformGrid {
            low: exact_arg("low", &args.low)?,
            high: exact_arg("high", &args.high)?,
            points: args
                .points
                .ok_or_else(|| fail(USAGE, "--points is required for this family"))?,
        },
    };
    let mut config = McConfig::new(sampler, &args.estimand, args.n, args.replicates, args.seed);
    config.variable = args.variable.clone();
    config.level = args.level;
    config.split = args.split;
    config.estimator = match args.estimator {
        EstimatorArg::Plugin => Estimator::Plugin,
        EstimatorArg::Onestep => Estimator::Onestep,
    };
    Ok(config)
}

pub fn simulate(args: &SimulateArgs, out: Output) -> Status {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| fail(DATA, format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<McConfig>(&text)
                .map_err(|e| fail(USAGE, format!("invalid configuration: {e}")))?
        }
        None => inline_config(args)?,
    };
    let mc = run_mc(&config, exec(args.sequential)).map_err(harness_failure)?;
    let seed = config.seed;
    let report = Report::new("simulate", config, Some(seed)).result(mc);
    emit(&report, out, || {
        let r = &report.results[0];
        let exact = |x: &Option<String>| x.as_ref().map(|e| format!(" ({e})")).unwrap_or_default();
        let mut s = String::new();
        let _ = writeln!(s, "estimand            {}", r.config.estimand);
        let _ = writeln!(
            s,
            "n, replicates       {}, {}",
            r.config.n, r.config.replicates
        );
        let _ = writeln!(
            s,
            "truth               {}{}",
            r.truth,
            exact(&r.truth_exact)
        );
        let _ = writeln!(
            s,
            "bound Var(EIC)      {}{}",
            r.bound,
            exact(&r.bound_exact)
        );
        let _ = writeln!(s, "mean estimate       {}", r.mean_estimate);
        let _ = writeln!(s, "Var sqrt(n)(est-ψ)  {}", r.empirical_variance);
        if let Some(ratio) = r.variance_ratio {
            let _ = writeln!(s, "variance / bound    {ratio}");
        }
        let _ = writeln!(
            s,
            "coverage            {} at level {}",
            r.coverage, r.config.level
        );
        let _ = writeln!(s, "estimates sha256    {}", r.estimates_digest);
        s
    });
    Ok(PASS)
}

#[derive(Serialize)]
struct ParseInputs<'a> {
    expression: &'a str,
}

#[derive(Serialize)]
struct ParseResult {
    printed: String,
    canonical: String,
    reprinted: String,
}

pub fn parse_check(expression: &str, out: Output) -> Status {
    let psi = parse(expression)?;
    let printed = psi.to_string();
    let again = parse(&printed)?;
    let reprinted = again.to_string();
    let canonical = canonicalize_func(&psi).map(|c| c.to_string());
    let same_canon =
        canonical.is_ok() && canonical == canonicalize_func(&again).map(|c| c.to_string());
    let ok = again == psi && reprinted == printed && same_canon;
    let result = ParseResult {
        printed,
        canonical: canonical.unwrap_or_else(|e| format!("error: {e}")),
        reprinted,
    };
    let report = Report::new("parse-check", ParseInputs { expression }, None)
        .result(result)
        .verdict("round-trip", Verdict::of(ok));
    emit(&report, out, || {
        let r = &report.results[0];
        format!(
            "printed    {}\ncanonical  {}\nround-trip {}\n",
            r.printed,
            r.canonical,
            Verdict::of(ok)
        )
    });
    Ok(exit_for(ok))
}
