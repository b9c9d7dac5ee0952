//! Efficient influence curves by the gradient algebra, and their
//! certification against the definition of pathwise differentiability.
//!
//! [`derive_eic`] recurses over a normalized functional with the rules
//!
//! ```text
//! T(c)        = 0
//! T(P[m])     = m − η(P[m])
//! T(ψ₁ + ψ₂)  = T(ψ₁) + T(ψ₂)
//! T(ψ₁ψ₂)     = T(ψ₁)·η(ψ₂) + η(ψ₁)·T(ψ₂)
//! T(ψⁿ)       = n·η(ψ)ⁿ⁻¹·T(ψ)
//! T(1/ψ)      = −η(1/ψ)²·T(ψ)
//! T(g(ψ))     = η(g′(ψ))·T(ψ)
//! ```
//!
//! The certificate tilts the law along `p_ε = p(1 + εs)` for a mean-zero
//! score `s`. For polynomial functionals `ψ(P_ε)` is a polynomial in ε, so
//! its derivative at zero is computed exactly and compared to `⟨φ, s⟩`.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigRational, One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::expr::{
    canonicalize_func, evaluate_func_in, evaluate_rv, evaluate_rv_in, normalize_functional,
    Binding, ExprError, FuncExpr, Law, RvExpr, Scalar, SmoothFn,
};
use crate::measure::{FiniteProbSpace, MeasureError, RandVar};
use crate::random::{random_instance, random_score, stream, InstanceSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EicError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Constant,
    Base,
    Linearity,
    Leibniz,
    Power,
    Reciprocal,
    Chain,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Constant => "constant",
            Rule::Base => "base",
            Rule::Linearity => "linearity",
            Rule::Leibniz => "leibniz",
            Rule::Power => "power",
            Rule::Reciprocal => "reciprocal",
            Rule::Chain => "chain",
        }
    }

    fn formula(self) -> &'static str {
        match self {
            Rule::Constant => "T(c) = 0",
            Rule::Base => "T(E[m]) = m - E[m]",
            Rule::Linearity => "T(a + b) = T(a) + T(b)",
            Rule::Leibniz => "T(ab) = T(a)*b + a*T(b)",
            Rule::Power => "T(a^n) = n*a^(n-1)*T(a)",
            Rule::Reciprocal => "T(inv(a)) = -inv(a)^2*T(a)",
            Rule::Chain => "T(g(a)) = g'(a)*T(a)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub rule: Rule,
    pub target: String,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<10} {:<28} on {}",
            self.rule.name(),
            self.rule.formula(),
            self.target
        )
    }
}

#[derive(Debug, Clone)]
pub struct EicResult {
    /// The normalized estimand.
    pub estimand: FuncExpr,
    pub eic: RvExpr,
    pub trace: Vec<TraceStep>,
}

impl EicResult {
    /// `P[φ]` canonicalizes to zero.
    pub fn is_mean_zero(&self) -> Result<bool, ExprError> {
        Ok(canonicalize_func(&FuncExpr::moment(self.eic.clone()))?.is_zero())
    }
}

/// Derives the EIC of `ψ` in exact mode (smooth outer functions rejected).
pub fn derive_eic(psi: &FuncExpr) -> Result<EicResult, EicError> {
    derive_eic_with(psi, Mode::Exact)
}

pub fn derive_eic_with(psi: &FuncExpr, mode: Mode) -> Result<EicResult, EicError> {
    if mode == Mode::Exact {
        if let Some(g) = first_smooth(psi) {
            return Err(ExprError::SmoothInExactMode(g).into());
        }
    }
    let estimand = normalize_functional(psi)?;
    let mut trace = Vec::new();
    let eic = derive(&estimand, &mut trace)?;
    Ok(EicResult {
        estimand,
        eic,
        trace,
    })
}

fn first_smooth(psi: &FuncExpr) -> Option<SmoothFn> {
    SmoothFn::ALL
        .into_iter()
        .find(|g| psi.any(&|f| matches!(f, FuncExpr::Smooth(h, _) if h == g)))
}

fn derive(psi: &FuncExpr, trace: &mut Vec<TraceStep>) -> Result<RvExpr, EicError> {
    let mut step = |rule| {
        trace.push(TraceStep {
            rule,
            target: psi.to_string(),
        })
    };
    Ok(match psi {
        FuncExpr::Const(_) => {
            step(Rule::Constant);
            RvExpr::zero()
        }
        FuncExpr::Moment(m) => {
            step(Rule::Base);
            (**m).clone().centered()
        }
        FuncExpr::Sum(ts) => {
            step(Rule::Linearity);
            let parts = ts
                .iter()
                .map(|t| derive(t, trace))
                .collect::<Result<Vec<_>, _>>()?;
            RvExpr::sum(parts)
        }
        FuncExpr::Product(fs) => {
            step(Rule::Leibniz);
            let mut terms = Vec::with_capacity(fs.len());
            for (i, fi) in fs.iter().enumerate() {
                if fi.is_const() {
                    continue;
                }
                let mut factors = vec![derive(fi, trace)?];
                factors.extend(
                    fs.iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, fj)| RvExpr::embed(fj.clone())),
                );
                terms.push(RvExpr::product(factors));
            }
            RvExpr::sum(terms)
        }
        FuncExpr::Pow(b, k) => {
            step(Rule::Power);
            let inner = derive(b, trace)?;
            RvExpr::product(vec![
                RvExpr::integer(i64::from(*k)),
                RvExpr::pow(RvExpr::embed((**b).clone()), k - 1),
                inner,
            ])
        }
        FuncExpr::Recip(b) => {
            step(Rule::Reciprocal);
            if canonicalize_func(b)?.is_zero() {
                return Err(ExprError::ZeroReciprocal(b.to_string()).into());
            }
            let inner = derive(b, trace)?;
            RvExpr::product(vec![
                RvExpr::integer(-1),
                RvExpr::pow(RvExpr::embed(psi.clone()), 2),
                inner,
            ])
        }
        FuncExpr::Smooth(g, b) => {
            step(Rule::Chain);
            let inner = derive(b, trace)?;
            RvExpr::product(vec![RvExpr::embed(g.derivative(b)), inner])
        }
    })
}

/// A one-dimensional submodel `p_ε = p(1 + εs)` through the law.
#[derive(Debug, Clone)]
pub struct PathSpec {
    space: FiniteProbSpace,
    score: RandVar,
    epsilon_bound: BigRational,
}

impl PathSpec {
    pub fn new(
        space: FiniteProbSpace,
        score: RandVar,
        epsilon_bound: BigRational,
    ) -> Result<Self, EicError> {
        let mean = space.expectation(&score)?;
        if !mean.is_zero() {
            return Err(EicError::InvalidPath(format!(
                "score has mean {mean}, not 0"
            )));
        }
        if !epsilon_bound.is_positive() {
            return Err(EicError::InvalidPath(
                "epsilon bound must be positive".into(),
            ));
        }
        let max = max_abs(&score);
        if &epsilon_bound * &max >= BigRational::one() {
            return Err(EicError::InvalidPath(format!(
                "1 + eps*s is not positive for |eps| <= {epsilon_bound} with max |s| = {max}"
            )));
        }
        Ok(PathSpec {
            space,
            score,
            epsilon_bound,
        })
    }

    /// Uses `ε ≤ 1 / (2 max|sᵢ|)`.
    pub fn with_default_bound(space: FiniteProbSpace, score: RandVar) -> Result<Self, EicError> {
        let max = max_abs(&score);
        let bound = if max.is_zero() {
            BigRational::one()
        } else {
            (max * BigRational::from_integer(2.into())).recip()
        };
        Self::new(space, score, bound)
    }

    pub fn space(&self) -> &FiniteProbSpace {
        &self.space
    }

    pub fn score(&self) -> &RandVar {
        &self.score
    }

    pub fn epsilon_bound(&self) -> &BigRational {
        &self.epsilon_bound
    }

    fn tilted_weights_f64(&self, eps: f64) -> Vec<f64> {
        self.space
            .weights()
            .iter()
            .zip(self.score.values())
            .map(|(w, s)| f64::from_rational(w) * (1.0 + eps * f64::from_rational(s)))
            .collect()
    }
}

fn max_abs(v: &RandVar) -> BigRational {
    v.values()
        .iter()
        .map(Signed::abs)
        .max()
        .unwrap_or_else(BigRational::zero)
}

/// Polynomial in ε with exact coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsPoly(Vec<BigRational>);

impl EpsPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        EpsPoly(coeffs)
    }

    pub fn coefficients(&self) -> &[BigRational] {
        &self.0
    }

    pub fn derivative(&self) -> EpsPoly {
        EpsPoly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * BigRational::from_integer(k.into()))
                .collect(),
        )
    }

    pub fn eval(&self, eps: &BigRational) -> BigRational {
        self.0
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * eps + c)
    }
}

impl Scalar for EpsPoly {
    fn nil() -> Self {
        EpsPoly(Vec::new())
    }
    fn unit() -> Self {
        EpsPoly(vec![BigRational::one()])
    }
    fn from_rational(r: &BigRational) -> Self {
        EpsPoly::new(vec![r.clone()])
    }
    fn plus(&self, rhs: &Self) -> Self {
        let n = self.0.len().max(rhs.0.len());
        let zero = BigRational::zero();
        EpsPoly::new(
            (0..n)
                .map(|i| self.0.get(i).unwrap_or(&zero) + rhs.0.get(i).unwrap_or(&zero))
                .collect(),
        )
    }
    fn times(&self, rhs: &Self) -> Self {
        if self.0.is_empty() || rhs.0.is_empty() {
            return Self::nil();
        }
        let mut out = vec![BigRational::zero(); self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        EpsPoly::new(out)
    }
    fn inverse(&self) -> Result<Self, ExprError> {
        Err(ExprError::NotPolynomial("reciprocal along a path".into()))
    }
    fn smooth(&self, g: SmoothFn) -> Result<Self, ExprError> {
        Err(ExprError::SmoothInExactMode(g))
    }
}

/// `ψ(P_ε)` as an exact polynomial in ε.
pub fn path_polynomial(
    psi: &FuncExpr,
    path: &PathSpec,
    binding: &Binding,
) -> Result<EpsPoly, EicError> {
    if !psi.is_polynomial() {
        return Err(ExprError::NotPolynomial(psi.to_string()).into());
    }
    for col in binding.values() {
        path.space.check(col)?;
    }
    let weights: Vec<EpsPoly> = path
        .space
        .weights()
        .iter()
        .zip(path.score.values())
        .map(|(w, s)| EpsPoly::new(vec![w.clone(), w * s]))
        .collect();
    let columns: BTreeMap<String, Vec<EpsPoly>> = binding
        .iter()
        .map(|(k, v)| {
            (
                k.clone(),
                v.values().iter().map(EpsPoly::from_rational).collect(),
            )
        })
        .collect();
    Ok(evaluate_func_in(psi, Law::new(&weights, &columns))?)
}

/// `d/dε ψ(P_ε)` at ε = 0, exactly.
pub fn pathwise_derivative_exact(
    psi: &FuncExpr,
    path: &PathSpec,
    binding: &Binding,
) -> Result<BigRational, EicError> {
    Ok(path_polynomial(psi, path, binding)?
        .derivative()
        .eval(&BigRational::zero()))
}

pub(crate) fn f64_columns(binding: &Binding) -> BTreeMap<String, Vec<f64>> {
    binding
        .iter()
        .map(|(k, v)| {
            (
                k.clone(),
                v.values().iter().map(f64::from_rational).collect(),
            )
        })
        .collect()
}

/// Central difference `(ψ(P_h) − ψ(P_−h)) / 2h` in double precision.
pub fn pathwise_derivative_numeric(
    psi: &FuncExpr,
    path: &PathSpec,
    binding: &Binding,
    h: f64,
) -> Result<f64, EicError> {
    let bound = path.epsilon_bound.to_f64().unwrap_or(0.0);
    if !(h > 0.0 && h <= bound) {
        return Err(EicError::InvalidPath(format!(
            "step {h} outside (0, {bound}]"
        )));
    }
    for col in binding.values() {
        path.space.check(col)?;
    }
    let columns = f64_columns(binding);
    let up = path.tilted_weights_f64(h);
    let down = path.tilted_weights_f64(-h);
    let f_up = evaluate_func_in(psi, Law::new(&up, &columns))?;
    let f_down = evaluate_func_in(psi, Law::new(&down, &columns))?;
    Ok((f_up - f_down) / (2.0 * h))
}

/// `⟨φ, s⟩` in double precision, for influence curves with smooth parts.
pub fn inner_with_score_f64(
    eic: &RvExpr,
    path: &PathSpec,
    binding: &Binding,
) -> Result<f64, EicError> {
    let columns = f64_columns(binding);
    let weights: Vec<f64> = path
        .space
        .weights()
        .iter()
        .map(f64::from_rational)
        .collect();
    let n = weights.len();
    let phi = evaluate_rv_in(eic, Law::new(&weights, &columns), &columns, n)?;
    Ok(weights
        .iter()
        .zip(&phi)
        .zip(path.score.values())
        .map(|((w, p), s)| w * p * f64::from_rational(s))
        .sum())
}

pub const NUMERIC_STEP: f64 = 1e-6;
pub const NUMERIC_RTOL: f64 = 1e-6;

/// `|a − b| ≤ rtol·max(|a|, |b|)`, with a tiny absolute floor for zero
/// derivatives.
pub fn close_relative(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()) + 1e-12
}

#[derive(Debug, Clone, Serialize)]
pub struct CertCounterexample {
    pub trial: u64,
    pub space: String,
    pub binding: BTreeMap<String, String>,
    pub score: String,
    pub pathwise_derivative: String,
    pub inner_product: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub estimand: String,
    pub eic: String,
    pub mode: Mode,
    pub trials: u64,
    pub passed: u64,
    pub counterexample: Option<CertCounterexample>,
}

impl Certificate {
    pub fn ok(&self) -> bool {
        self.passed == self.trials && self.counterexample.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub trials: u64,
    pub seed: u64,
    pub spec: InstanceSpec,
    pub exec: Execution,
}

impl CertifyOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        CertifyOptions {
            trials,
            seed,
            spec: InstanceSpec::default(),
            exec: Execution::default(),
        }
    }
}

/// Derives the EIC of `ψ` and checks the gradient identity on random paths.
pub fn certify_eic(psi: &FuncExpr, trials: u64, seed: u64) -> Result<Certificate, EicError> {
    let mode = if psi.has_smooth() {
        Mode::Float
    } else {
        Mode::Exact
    };
    let derived = derive_eic_with(psi, mode)?;
    Ok(certify_candidate(
        &derived.estimand,
        &derived.eic,
        &CertifyOptions::new(trials, seed),
    ))
}

enum Trial {
    Pass,
    Fail(CertCounterexample),
}

/// Checks a candidate influence curve `eic` for `ψ` on `opts.trials`
/// random `(space, binding, score)` triples. Polynomial functionals are
/// checked exactly; others by central differences at relative tolerance
/// [`NUMERIC_RTOL`].
pub fn certify_candidate(psi: &FuncExpr, eic: &RvExpr, opts: &CertifyOptions) -> Certificate {
    let exact = psi.is_polynomial();
    let mut vars: Vec<String> = psi.base_vars().into_iter().collect();
    for v in eic.base_vars() {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    let outcomes = opts.exec.map_indexed(opts.trials, |trial| {
        run_trial(psi, eic, &vars, exact, trial, opts)
    });
    let passed = outcomes.iter().filter(|t| matches!(t, Trial::Pass)).count() as u64;
    let counterexample = outcomes.into_iter().find_map(|t| match t {
        Trial::Fail(c) => Some(c),
        Trial::Pass => None,
    });
    Certificate {
        estimand: psi.to_string(),
        eic: eic.to_string(),
        mode: if exact { Mode::Exact } else { Mode::Float },
        trials: opts.trials,
        passed,
        counterexample,
    }
}

const MAX_RESAMPLES: usize = 256;
const CONDITIONING_FLOOR: f64 = 0.25;

/// Rejects instances where a reciprocal or a log/sqrt argument is near its
/// singularity, so central differences stay well conditioned.
fn well_conditioned(psi: &FuncExpr, space: &FiniteProbSpace, binding: &Binding) -> bool {
    let columns = f64_columns(binding);
    let weights: Vec<f64> = space.weights().iter().map(f64::from_rational).collect();
    let law = Law::new(&weights, &columns);
    let bad = |f: &FuncExpr| {
        let arg = match f {
            FuncExpr::Recip(b) => {
                return evaluate_func_in(b, law).map_or(true, |v| v.abs() < CONDITIONING_FLOOR)
            }
            FuncExpr::Smooth(SmoothFn::Log | SmoothFn::Sqrt, b) => b,
            _ => return false,
        };
        evaluate_func_in(arg, law).map_or(true, |v| v < CONDITIONING_FLOOR)
    };
    !psi.any(&bad) && evaluate_func_in(psi, law).is_ok()
}

fn run_trial(
    psi: &FuncExpr,
    eic: &RvExpr,
    vars: &[String],
    exact: bool,
    trial: u64,
    opts: &CertifyOptions,
) -> Trial {
    let mut rng = stream(opts.seed, trial);
    let mut attempt = 0;
    let inst = loop {
        let inst = random_instance(&mut rng, vars, &opts.spec);
        attempt += 1;
        if exact || well_conditioned(psi, &inst.space, &inst.binding) || attempt >= MAX_RESAMPLES {
            break inst;
        }
    };
    let score = random_score(&mut rng, &inst.space, &opts.spec);
    let fail = |lhs: String, rhs: String| {
        Trial::Fail(CertCounterexample {
            trial,
            space: inst.space.to_string(),
            binding: inst
                .binding
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect(),
            score: score.to_string(),
            pathwise_derivative: lhs,
            inner_product: rhs,
        })
    };
    let path = match PathSpec::with_default_bound(inst.space.clone(), score.clone()) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string(), String::new()),
    };
    if exact {
        let lhs = pathwise_derivative_exact(psi, &path, &inst.binding);
        let rhs = evaluate_rv(eic, &inst.space, &inst.binding)
            .map_err(EicError::from)
            .and_then(|phi| Ok(inst.space.inner(&phi, &score)?));
        match (lhs, rhs) {
            (Ok(l), Ok(r)) if l == r => Trial::Pass,
            (l, r) => fail(show(l), show(r)),
        }
    } else {
        let lhs = pathwise_derivative_numeric(psi, &path, &inst.binding, NUMERIC_STEP);
        let rhs = inner_with_score_f64(eic, &path, &inst.binding);
        match (lhs, rhs) {
            (Ok(l), Ok(r)) if close_relative(l, r, NUMERIC_RTOL) => Trial::Pass,
            (l, r) => fail(show(l), show(r)),
        }
    }
}

fn show<T: fmt::Display>(r: Result<T, EicError>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => format!("error: {e}"),
    }
}
