use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::NamedTempFile;

fn eicalg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eicalg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn structured(args: &[&str]) -> (Option<i32>, Value) {
    let mut full = vec!["--output", "structured"];
    full.extend_from_slice(args);
    let out = eicalg(&full);
    let doc = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code(), doc)
}

fn file_with(contents: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

fn path(f: &NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

#[test]
fn derive_variance_is_mean_zero() {
    let (code, doc) = structured(&["derive", "Var(X)"]);
    assert_eq!(code, Some(0));
    assert_eq!(doc["command"], "derive");
    assert_eq!(
        doc["results"][0]["eic"],
        "X^2 - 2*X*E[X] + 2*E[X]^2 - E[X^2]"
    );
    assert_eq!(doc["verdicts"][0]["verdict"], "pass");
}

#[test]
fn derive_accepts_leading_minus() {
    let out = eicalg(&["derive", "-E[X]^2"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn usage_and_parse_errors_exit_two() {
    assert_eq!(eicalg(&["derive", "E[X"]).status.code(), Some(2));
    assert_eq!(
        eicalg(&["derive", "inv(E[X] - E[X])"]).status.code(),
        Some(2)
    );
    assert_eq!(eicalg(&["derive", "log(E[X])"]).status.code(), Some(2));
    assert_eq!(
        eicalg(&["derive", "log(E[X])", "--mode", "float"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(eicalg(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(
        eicalg(&["verify", "jacobi", "--max-outcomes", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(eicalg(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn parse_error_reports_position() {
    let out = eicalg(&["parse-check", "E[X] + * 2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1:8"));
}

#[test]
fn estimate_mean_of_two_rows() {
    let data = file_with("Y\n0\n1\n");
    let (code, doc) = structured(&["estimate", "E[Y]", "--data", path(&data)]);
    assert_eq!(code, Some(0));
    let r = &doc["results"][0];
    assert_eq!(r["estimate_exact"], "1/2");
    let se = r["standard_error"].as_f64().unwrap();
    assert!((se - (1.0f64 / 8.0).sqrt()).abs() < 1e-15);
}

#[test]
fn estimate_variance_and_constant() {
    let data = file_with("Y\n0\n1\n");
    let (_, var) = structured(&["estimate", "Var(Y)", "--data", path(&data)]);
    assert_eq!(var["results"][0]["estimate_exact"], "1/4");
    let (_, constant) = structured(&["estimate", "3", "--data", path(&data)]);
    assert_eq!(constant["results"][0]["estimate_exact"], "3");
    assert_eq!(constant["results"][0]["standard_error"].as_f64(), Some(0.0));
}

#[test]
fn data_errors_exit_three() {
    let data = file_with("Y\n0\n1\n");
    assert_eq!(
        eicalg(&["estimate", "E[Z]", "--data", path(&data)])
            .status
            .code(),
        Some(3)
    );
    let ragged = file_with("X,Y\n1,2\n3\n");
    assert_eq!(
        eicalg(&["estimate", "E[X]", "--data", path(&ragged)])
            .status
            .code(),
        Some(3)
    );
    let text = file_with("X\nabc\n");
    assert_eq!(
        eicalg(&["estimate", "E[X]", "--data", path(&text)])
            .status
            .code(),
        Some(3)
    );
    let empty = file_with("X\n");
    assert_eq!(
        eicalg(&["estimate", "E[X]", "--data", path(&empty)])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        eicalg(&["estimate", "E[X]", "--data", "/nonexistent/data.csv"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn bad_level_is_a_usage_error() {
    let data = file_with("X\n0\n1\n");
    assert_eq!(
        eicalg(&["estimate", "E[X]", "--data", path(&data), "--level", "1.5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn simulate_bernoulli_bound() {
    let (code, doc) = structured(&[
        "simulate",
        "--family",
        "bernoulli",
        "--p",
        "3/10",
        "--n",
        "200",
        "--replicates",
        "20",
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(doc["results"][0]["bound_exact"], "21/100");
    assert_eq!(doc["results"][0]["truth_exact"], "3/10");
    assert_eq!(doc["seed"], 42);
}

#[test]
fn simulate_point_mass_from_config() {
    let cfg = file_with(
        r#"{"sampler":{"family":"discrete","support":["2"],"weights":["1"]},"estimand":"E[X]","n":50,"replicates":20,"seed":3}"#,
    );
    let (code, doc) = structured(&["simulate", "--config", path(&cfg)]);
    assert_eq!(code, Some(0));
    let r = &doc["results"][0];
    assert_eq!(r["empirical_variance"].as_f64(), Some(0.0));
    assert_eq!(r["coverage"].as_f64(), Some(1.0));
    assert_eq!(r["bound_exact"], "0");
}

#[test]
fn simulate_rejects_unknown_config_fields() {
    let cfg = file_with(
        r#"{"sampler":{"family":"bernoulli","p":"1/2"},"estimand":"E[X]","n":5,"replicates":2,"seed":1,"bogus":1}"#,
    );
    assert_eq!(
        eicalg(&["simulate", "--config", path(&cfg)]).status.code(),
        Some(2)
    );
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = file_with(
        r#"{"sampler":{"family":"uniform-grid","low":"0","high":"1","points":5},"estimand":"Var(X)","n":100,"replicates":30,"seed":11,"estimator":"onestep"}"#,
    );
    let a = eicalg(&["--output", "structured", "simulate", "--config", path(&cfg)]);
    let b = eicalg(&["--output", "structured", "simulate", "--config", path(&cfg)]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sequential_and_parallel_reports_agree() {
    let args = [
        "--output",
        "structured",
        "simulate",
        "--family",
        "bernoulli",
        "--p",
        "0.4",
        "--n",
        "300",
        "--replicates",
        "40",
    ];
    let par = eicalg(&args);
    let mut seq_args = args.to_vec();
    seq_args.push("--sequential");
    let seq = eicalg(&seq_args);
    assert_eq!(par.stdout, seq.stdout);
}

#[test]
fn verify_report_shape() {
    let args = ["verify", "jacobi", "--trials", "20", "--seed", "5"];
    let raw = String::from_utf8(eicalg(&[&["--output", "structured"][..], &args].concat()).stdout)
        .unwrap();
    let top: Vec<usize> = [
        "command", "inputs", "results", "verdicts", "seed", "version",
    ]
    .iter()
    .map(|k| raw.find(&format!("\n  \"{k}\":")).expect(k))
    .collect();
    assert!(top.windows(2).all(|w| w[0] < w[1]), "{raw}");
    let (code, doc) = structured(&args);
    assert_eq!(code, Some(0));
    assert_eq!(doc["verdicts"][0]["name"], "jacobi/jacobi-identity:exact");
    assert_eq!(doc["seed"], 5);
}

#[test]
fn injected_fault_fails_with_counterexample() {
    let out = eicalg(&[
        "verify",
        "jacobi",
        "--inject-fault",
        "negated-centering",
        "--trials",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL  jacobi/jacobi-identity"));
    assert!(text.contains("instance 0"));
}

#[test]
fn fault_flag_is_hidden() {
    let help = eicalg(&["verify", "--help"]);
    assert!(!String::from_utf8_lossy(&help.stdout).contains("inject"));
}

#[test]
fn parse_check_round_trips() {
    let (code, doc) = structured(&["parse-check", "-E[X]^2 + 0.5*E[X*Y] - inv(3)*E[X]"]);
    assert_eq!(code, Some(0));
    assert_eq!(doc["verdicts"][0]["verdict"], "pass");
}
