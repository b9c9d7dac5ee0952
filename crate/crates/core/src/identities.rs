//! Verification suites: every operator identity checked exactly on seeded
//! random finite spaces and symbolically at the canonical-form level.
//!
//! Exact checks compare the bracket operators against closed forms computed
//! directly from [`FiniteProbSpace`] primitives, and against evaluation of
//! the symbolic expressions, on a shared corpus: instance `i` of a run with
//! seed `s` is drawn from [`stream`]`(s, i)`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Mul, Neg, Sub};

use num::{BigRational, One};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bracket::{symbolic, Bracket, BracketValue, Brackets, Centering, X, Y};
use crate::eic::{certify_candidate, derive_eic, derive_eic_with, CertifyOptions, Mode};
use crate::exec::Execution;
use crate::expr::{canonicalize_rv, evaluate_rv, FuncExpr, RvExpr};
use crate::measure::{FiniteProbSpace, MeasureError, RandVar};
use crate::random::{random_instance, random_rational, stream, Instance, InstanceSpec};
use crate::syntax::parse_expression;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Decomposition,
    Brackets,
    Corollaries,
    Lemma,
    Jacobi,
    EicCertificates,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] = [
        Suite::Decomposition,
        Suite::Brackets,
        Suite::Corollaries,
        Suite::Lemma,
        Suite::Jacobi,
        Suite::EicCertificates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Decomposition => "decomposition",
            Suite::Brackets => "brackets",
            Suite::Corollaries => "corollaries",
            Suite::Lemma => "lemma",
            Suite::Jacobi => "jacobi",
            Suite::EicCertificates => "eic-certificates",
            Suite::All => "all",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|s| s.name() == name)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    /// Exact rational evaluation on random instances.
    Exact,
    /// Canonical-form equality over abstract base variables.
    Symbolic,
    /// Double precision, relative tolerance.
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn of(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    /// Corpus index of the failing instance; absent for symbolic checks.
    pub instance: Option<u64>,
    pub space: Option<String>,
    pub binding: BTreeMap<String, String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRecord {
    pub name: String,
    pub statement: String,
    pub suite: Suite,
    pub mode: CheckMode,
    pub verdict: Verdict,
    pub trials: u64,
    pub counterexample: Option<Counterexample>,
}

impl IdentityRecord {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub trials: u64,
    pub seed: u64,
    pub spec: InstanceSpec,
    pub exec: Execution,
    #[doc(hidden)]
    pub centering: Centering,
}

impl VerifyOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        VerifyOptions {
            trials,
            seed,
            spec: InstanceSpec::default(),
            exec: Execution::default(),
            centering: Centering::Standard,
        }
    }

    pub fn max_outcomes(mut self, max: usize) -> Self {
        self.spec = InstanceSpec::with_max_outcomes(max);
        self
    }

    pub fn exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    #[doc(hidden)]
    pub fn centering(mut self, centering: Centering) -> Self {
        self.centering = centering;
        self
    }

    fn brackets(&self) -> Brackets {
        Brackets::with_centering(self.centering)
    }
}

pub fn all_passed(records: &[IdentityRecord]) -> bool {
    records.iter().all(IdentityRecord::passed)
}

/// Runs one suite, or every suite in order for [`Suite::All`].
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<IdentityRecord> {
    match suite {
        Suite::All => Suite::EACH
            .into_iter()
            .flat_map(|s| run_suite(s, opts))
            .collect(),
        Suite::Decomposition => decomposition_suite(opts),
        Suite::Brackets => brackets_suite(opts),
        Suite::Corollaries => corollaries_suite(opts),
        Suite::Lemma => lemma_suite(opts),
        Suite::Jacobi => jacobi_suite(opts),
        Suite::EicCertificates => certificate_suite(opts),
    }
}

/// Every symbolic identity, independent of any random corpus.
pub fn symbolic_identity_suite() -> Vec<IdentityRecord> {
    let opts = VerifyOptions::new(0, 0);
    run_suite(Suite::All, &opts)
        .into_iter()
        .filter(|r| r.mode == CheckMode::Symbolic)
        .collect()
}

type Check<'a> =
    dyn Fn(&Instance, &mut ChaCha8Rng) -> Result<Option<String>, MeasureError> + Sync + 'a;

struct Spec<'a> {
    name: &'a str,
    statement: &'a str,
    suite: Suite,
    vars: &'a [&'a str],
}

fn exact(spec: Spec<'_>, opts: &VerifyOptions, check: &Check<'_>) -> IdentityRecord {
    let failures = opts.exec.map_indexed(opts.trials, |i| {
        let mut rng = stream(opts.seed, i);
        let inst = random_instance(&mut rng, spec.vars, &opts.spec);
        let outcome = match check(&inst, &mut rng) {
            Ok(None) => return None,
            Ok(Some(detail)) => detail,
            Err(e) => format!("error: {e}"),
        };
        Some(Counterexample {
            instance: Some(i),
            space: Some(inst.space.to_string()),
            binding: inst
                .binding
                .iter()
                .map(|(k, v)| (k.clone(), v.to_string()))
                .collect(),
            detail: outcome,
        })
    });
    let counterexample = failures.into_iter().flatten().next();
    IdentityRecord {
        name: spec.name.to_string(),
        statement: spec.statement.to_string(),
        suite: spec.suite,
        mode: CheckMode::Exact,
        verdict: Verdict::of(counterexample.is_none()),
        trials: opts.trials,
        counterexample,
    }
}

/// `None` when equal, otherwise a description of the mismatch.
fn differ<T: PartialEq + fmt::Display>(what: &str, lhs: &T, rhs: &T) -> Option<String> {
    (lhs != rhs).then(|| format!("{what}: {lhs} != {rhs}"))
}

fn first(mismatches: impl IntoIterator<Item = Option<String>>) -> Option<String> {
    mismatches.into_iter().flatten().next()
}

fn record(
    name: &str,
    statement: &str,
    suite: Suite,
    mode: CheckMode,
    failure: Option<String>,
) -> IdentityRecord {
    IdentityRecord {
        name: name.to_string(),
        statement: statement.to_string(),
        suite,
        mode,
        verdict: Verdict::of(failure.is_none()),
        trials: 1,
        counterexample: failure.map(|detail| Counterexample {
            instance: None,
            space: None,
            binding: BTreeMap::new(),
            detail,
        }),
    }
}

fn symbolic_record(
    name: &str,
    statement: &str,
    suite: Suite,
    lhs: &RvExpr,
    rhs: &RvExpr,
) -> IdentityRecord {
    let failure = match (canonicalize_rv(lhs), canonicalize_rv(rhs)) {
        (Ok(l), Ok(r)) if l == r => None,
        (Ok(l), Ok(r)) => Some(format!("canonical forms differ: {l} vs {r}")),
        (l, r) => Some(format!("canonicalization failed: {l:?} / {r:?}")),
    };
    record(name, statement, suite, CheckMode::Symbolic, failure)
}

fn x(inst: &Instance) -> &RandVar {
    inst.var(X)
}

fn y(inst: &Instance) -> &RandVar {
    inst.var(Y)
}

fn eval(e: &RvExpr, inst: &Instance) -> Result<RandVar, MeasureError> {
    evaluate_rv(e, &inst.space, &inst.binding).map_err(|e| match e {
        crate::expr::ExprError::Measure(m) => m,
        other => unreachable!("polynomial expressions evaluate totally: {other}"),
    })
}

fn mu(v: &str) -> RvExpr {
    RvExpr::embed(FuncExpr::mean(v))
}

fn decomposition_suite(opts: &VerifyOptions) -> Vec<IdentityRecord> {
    let suite = Suite::Decomposition;
    let vars: &[&str] = &[X];
    vec![
        exact(
            Spec {
                name: "orthogonal-decomposition",
                statement: "f = eta(P f) + T f with <eta(P f), T f> = 0",
                suite,
                vars,
            },
            opts,
            &|inst, _| {
                let s = &inst.space;
                let f = x(inst);
                let d = s.decompose(f)?;
                let constant = s.embed(&d.constant_part);
                Ok(first([
                    differ("reconstruction", &d.reconstruct(), f),
                    differ("constant part", &d.constant_part, &s.expectation(f)?),
                    differ(
                        "inner product of parts",
                        &s.inner(&constant, &d.centered_part)?,
                        &BigRational::from_integer(0.into()),
                    ),
                    differ(
                        "mean of centered part",
                        &s.expectation(&d.centered_part)?,
                        &num::zero(),
                    ),
                ]))
            },
        ),
        exact(
            Spec {
                name: "riesz-representer",
                statement: "<f, 1> = P f",
                suite,
                vars,
            },
            opts,
            &|inst, _| {
                let s = &inst.space;
                let f = x(inst);
                Ok(differ(
                    "<f, 1> vs P f",
                    &s.inner(f, &s.embed(&BigRational::one()))?,
                    &s.expectation(f)?,
                ))
            },
        ),
        symbolic_record(
            "centering-is-mean-zero",
            "P T = 0",
            suite,
            &RvExpr::embed(FuncExpr::moment(symbolic::tx())),
            &RvExpr::zero(),
        ),
    ]
}

fn combine(
    a: &BigRational,
    u: &BracketValue,
    c: &BigRational,
    v: &BracketValue,
) -> Option<BracketValue> {
    let comb = |u: &RandVar, v: &RandVar| u.scale(a).add(&v.scale(c)).ok();
    Some(match (u, v) {
        (BracketValue::Scalar(u), BracketValue::Scalar(v)) => BracketValue::Scalar(u * a + v * c),
        (BracketValue::Vector(u), BracketValue::Vector(v)) => BracketValue::Vector(comb(u, v)?),
        (BracketValue::Pair(u1, u2), BracketValue::Pair(v1, v2)) => {
            BracketValue::Pair(comb(u1, v1)?, comb(u2, v2)?)
        }
        _ => return None,
    })
}

/// `[P,x]` and `[x,T]` are bilinear; `[T,P] = (T, T)` is linear on `H×H`.
fn linearity_failure(
    br: &Brackets,
    b: Bracket,
    inst: &Instance,
    a: &BigRational,
    c: &BigRational,
) -> Result<Option<String>, MeasureError> {
    let s = &inst.space;
    let v = |n: &str| inst.var(n);
    let mix = |p: &str, q: &str| v(p).scale(a).add(&v(q).scale(c));
    let at = |p: &RandVar, q: &RandVar| br.bracket(b, s, p, q);
    let checks = match b {
        Bracket::CenteringExpectation => vec![(
            "jointly",
            at(&mix(X, "Z")?, &mix(Y, "W")?)?,
            at(v(X), v(Y))?,
            at(v("Z"), v("W"))?,
        )],
        _ => vec![
            (
                "in the first slot",
                at(&mix(X, "Z")?, v(Y))?,
                at(v(X), v(Y))?,
                at(v("Z"), v(Y))?,
            ),
            (
                "in the second slot",
                at(v(Y), &mix(X, "Z")?)?,
                at(v(Y), v(X))?,
                at(v(Y), v("Z"))?,
            ),
        ],
    };
    for (how, lhs, u, w) in checks {
        if combine(a, &u, c, &w).as_ref() != Some(&lhs) {
            return Ok(Some(format!(
                "{} not linear {how} (a = {a}, c = {c})",
                b.symbol()
            )));
        }
    }
    Ok(None)
}

fn brackets_suite(opts: &VerifyOptions) -> Vec<IdentityRecord> {
    let suite = Suite::Brackets;
    let br = opts.brackets();
    let vars: &[&str] = &[X, Y];
    vec![
        exact(
            Spec {
                name: "covariance-commutator",
                statement: "[P,x](X,Y) = P(XY) - (PX)(PY) = Cov(X,Y)",
                suite,
                vars,
            },
            opts,
            &|inst, _| {
                let s = &inst.space;
                let (x, y) = (x(inst), y(inst));
                let b = br.p_prod(s, x, y)?;
                Ok(first([
                    differ("[P,x] vs Cov", &b, &s.covariance(x, y)?),
                    differ("symmetry", &b, &br.p_prod(s, y, x)?),
                ]))
            },
        ),
        exact(
            Spec {
                name: "product-centering-commutator",
                statement: "[x,T](X,Y) = (TX)(TY) - T(XY), with P[x,T] = [P,x]",
                suite,
                vars,
            },
            opts,
            &|inst, _| {
                let s = &inst.space;
                let (x, y) = (x(inst), y(inst));
                let b = br.prod_t(s, x, y)?;
                let oracle = s
                    .center(x)?
                    .product(&s.center(y)?)?
                    .sub(&s.center(&x.product(y)?)?)?;
                Ok(first([
                    differ("[x,T] vs closed form", &b, &oracle),
                    differ("P[x,T] vs [P,x]", &s.expectation(&b)?, &br.p_prod(s, x, y)?),
                ]))
            },
        ),
        exact(
            Spec {
                name: "centering-expectation-commutator",
                statement: "[T,P](X,Y) = (X - PX, Y - PY)",
                suite,
                vars,
            },
            opts,
            &|inst, _| {
                let s = &inst.space;
                let (x, y) = (x(inst), y(inst));
                let (a, b) = br.t_p(s, x, y)?;
                let zero = BigRational::from_integer(0.into());
                Ok(first([
                    differ("first component", &a, &s.center(x)?),
                    differ("second component", &b, &s.center(y)?),
                    differ("P of first component", &s.expectation(&a)?, &zero),
                    differ("P of second component", &s.expectation(&b)?, &zero),
                ]))
            },
        ),
        exact(
            Spec {
                name: "bracket-codomains",
                statement: "[P,x]: HxH -> R, [x,T]: HxH -> H, [T,P]: HxH -> HxH",
                suite,
                vars,
            },
            opts,
            &|inst, _| {
                for b in Bracket::ALL {
                    let v = br.bracket(b, &inst.space, x(inst), y(inst))?;
                    if v.codomain() != b.codomain() {
                        return Ok(Some(format!("{} returned {:?}", b.symbol(), v.codomain())));
                    }
                }
                Ok(None)
            },
        ),
        exact(
            Spec {
                name: "bracket-bilinearity",
                statement: "[P,x] and [x,T] are bilinear; [T,P] is linear on HxH",
                suite,
                vars: &[X, Y, "Z", "W"],
            },
            opts,
            &|inst, rng| {
                let (a, c) = (random_rational(rng), random_rational(rng));
                for b in Bracket::ALL {
                    if let Some(d) = linearity_failure(&br, b, inst, &a, &c)? {
                        return Ok(Some(d));
                    }
                }
                Ok(None)
            },
        ),
        symbolic_record(
            "covariance-commutator",
            "[P,x](X,Y) = P(XY) - (PX)(PY) = Cov(X,Y)",
            suite,
            &RvExpr::embed(symbolic::p_prod()),
            &RvExpr::embed(FuncExpr::moment(symbolic::x().mul(symbolic::y())))
                .sub(mu(X).mul(mu(Y))),
        ),
        symbolic_record(
            "product-centering-commutator",
            "P[x,T](X,Y) = Cov(X,Y)",
            suite,
            &RvExpr::embed(FuncExpr::moment(symbolic::prod_t())),
            &symbolic::cov(),
        ),
        symbolic_record(
            "centering-expectation-commutator",
            "P T X = 0, so [T,P](X,Y) = (TX, TY)",
            suite,
            &RvExpr::embed(FuncExpr::moment(symbolic::t_p().0)),
            &RvExpr::zero(),
        ),
    ]
}

fn corollaries_suite(opts: &VerifyOptions) -> Vec<IdentityRecord> {
    let suite = Suite::Corollaries;
    let br = opts.brackets();
    let vars: &[&str] = &[X, Y];
    const LEIBNIZ: &str = "T(PX)T(PY) + T(PX PY) = T(PXY) + Cov(X,Y)";
    const COV: &str = "T(PX)T(PY) = T(Cov(X,Y)) + Cov(X,Y)";
    let (ll, lr) = symbolic::corollary_leibniz();
    let (cl, cr) = symbolic::corollary_cov();
    vec![
        exact(
            Spec {
                name: "corollary-leibniz",
                statement: LEIBNIZ,
                suite,
                vars,
            },
            opts,
            &|inst, _| {
                let s = &inst.space;
                let (x, y) = (x(inst), y(inst));
                let (lhs, rhs) = br.corollary_leibniz(s, x, y)?;
                let mx = s.expectation(x)?;
                let my = s.expectation(y)?;
                let oracle = x.product(y)?.sub(&s.embed(&(mx * my)))?;
                Ok(first([
                    differ("lhs vs rhs", &lhs, &rhs),
                    differ("lhs vs XY - PX PY", &lhs, &oracle),
                ]))
            },
        ),
        exact(
            Spec {
                name: "corollary-covariance",
                statement: COV,
                suite,
                vars,
            },
            opts,
            &|inst, _| {
                let s = &inst.space;
                let (x, y) = (x(inst), y(inst));
                let (lhs, rhs) = br.corollary_cov(s, x, y)?;
                let oracle = s.center(x)?.product(&s.center(y)?)?;
                Ok(first([
                    differ("lhs vs rhs", &lhs, &rhs),
                    differ("lhs vs (X - PX)(Y - PY)", &lhs, &oracle),
                ]))
            },
        ),
        symbolic_record("corollary-leibniz", LEIBNIZ, suite, &ll, &lr),
        symbolic_record("corollary-covariance", COV, suite, &cl, &cr),
    ]
}

pub const LEMMA_PIECES: [(&str, &str); 3] = [
    ("[T,[P,x]]", "T(Cov(X,Y)) - Cov(TX,TY)"),
    ("[P,[x,T]]", "Cov(X,Y) - (TX)(TY) + T(PX PY)"),
    ("[x,[T,P]]", "(TX)(TY) - T(PXY)"),
];

/// Fully expanded right-hand sides of the three lemma pieces.
pub fn lemma_closed_forms() -> [RvExpr; 3] {
    let txty = symbolic::tx().mul(symbolic::ty());
    let xy = symbolic::x().mul(symbolic::y());
    [
        txty.clone()
            .sub(symbolic::cov().scale(BigRational::from_integer(2.into()))),
        RvExpr::sum(vec![
            symbolic::cov(),
            txty.clone().neg(),
            symbolic::x().sub(mu(X)).mul(mu(Y)),
            mu(X).mul(symbolic::y().sub(mu(Y))),
        ]),
        txty.sub(xy.clone().sub(RvExpr::embed(FuncExpr::moment(xy)))),
    ]
}

fn lemma_oracles(
    s: &FiniteProbSpace,
    x: &RandVar,
    y: &RandVar,
) -> Result<[RandVar; 3], MeasureError> {
    let (tx, ty) = (s.center(x)?, s.center(y)?);
    let txty = tx.product(&ty)?;
    let cov = s.covariance(x, y)?;
    let (mx, my) = (s.expectation(x)?, s.expectation(y)?);
    let two = BigRational::from_integer(2.into());
    Ok([
        txty.sub(&s.embed(&(&cov * two)))?,
        s.embed(&cov)
            .sub(&txty)?
            .add(&tx.scale(&my))?
            .add(&ty.scale(&mx))?,
        txty.sub(&s.center(&x.product(y)?)?)?,
    ])
}

fn lemma_suite(opts: &VerifyOptions) -> Vec<IdentityRecord> {
    let suite = Suite::Lemma;
    let br = opts.brackets();
    let pieces = [
        symbolic::nested_t_p_prod(),
        symbolic::nested_p_prod_t(),
        symbolic::nested_prod_t_p(),
    ];
    let closed = lemma_closed_forms();
    let mut records = Vec::new();
    for (k, (symbol, printed)) in LEMMA_PIECES.iter().enumerate() {
        let name = format!("lemma-piece-{}", k + 1);
        let statement = format!("{symbol} = {printed}");
        let piece = &pieces[k];
        records.push(exact(
            Spec {
                name: &name,
                statement: &statement,
                suite,
                vars: &[X, Y],
            },
            opts,
            &|inst, _| {
                let s = &inst.space;
                let (x, y) = (x(inst), y(inst));
                let got = br.lemma_pieces(s, x, y)?;
                let oracle = lemma_oracles(s, x, y)?;
                Ok(first([
                    differ("bracket vs closed form", &got[k], &oracle[k]),
                    differ(
                        "symbolic evaluation vs closed form",
                        &eval(piece, inst)?,
                        &oracle[k],
                    ),
                ]))
            },
        ));
        records.push(symbolic_record(&name, &statement, suite, piece, &closed[k]));
    }
    records
}

fn jacobi_suite(opts: &VerifyOptions) -> Vec<IdentityRecord> {
    let suite = Suite::Jacobi;
    let br = opts.brackets();
    const STATEMENT: &str = "Jacobi identity: [T,[P,x]] + [P,[x,T]] + [x,[T,P]] = 0";
    vec![
        exact(
            Spec {
                name: "jacobi-identity",
                statement: STATEMENT,
                suite,
                vars: &[X, Y],
            },
            opts,
            &|inst, _| {
                let sum = br.jacobi_sum(&inst.space, x(inst), y(inst))?;
                Ok((!sum.is_zero()).then(|| format!("jacobi sum = {sum}, expected zero vector")))
            },
        ),
        symbolic_record(
            "jacobi-identity",
            STATEMENT,
            suite,
            &symbolic::jacobi_sum(),
            &RvExpr::zero(),
        ),
    ]
}

/// Functionals certified against the pathwise-derivative definition.
pub fn certificate_catalog() -> Vec<(&'static str, FuncExpr)> {
    vec![
        ("mean", FuncExpr::mean(X)),
        (
            "second-moment",
            FuncExpr::moment(RvExpr::pow(RvExpr::var(X), 2)),
        ),
        ("variance", FuncExpr::variance(X)),
        ("covariance", FuncExpr::covariance(X, Y)),
        ("product-of-means", FuncExpr::mean(X).mul(FuncExpr::mean(Y))),
        ("reciprocal-mean", FuncExpr::recip(FuncExpr::mean(X))),
    ]
}

fn certificate_suite(opts: &VerifyOptions) -> Vec<IdentityRecord> {
    let suite = Suite::EicCertificates;
    let cert_opts = CertifyOptions {
        trials: opts.trials,
        seed: opts.seed,
        spec: opts.spec.clone(),
        exec: opts.exec,
    };
    let mut records: Vec<IdentityRecord> = certificate_catalog()
        .into_iter()
        .map(|(name, psi)| {
            let mode = if psi.is_polynomial() {
                CheckMode::Exact
            } else {
                CheckMode::Numeric
            };
            let statement = format!("d/de psi(P_e) at 0 = <EIC, s> for psi = {psi}");
            let (verdict, counterexample) = match derive_eic_with(&psi, Mode::Float) {
                Ok(d) => {
                    let c = certify_candidate(&d.estimand, &d.eic, &cert_opts);
                    let cx = c.counterexample.map(|c| Counterexample {
                        instance: Some(c.trial),
                        space: Some(c.space),
                        binding: c.binding,
                        detail: format!(
                            "score {}: pathwise derivative {} vs <EIC, s> {}",
                            c.score, c.pathwise_derivative, c.inner_product
                        ),
                    });
                    (Verdict::of(cx.is_none()), cx)
                }
                Err(e) => (
                    Verdict::Fail,
                    Some(Counterexample {
                        instance: None,
                        space: None,
                        binding: BTreeMap::new(),
                        detail: e.to_string(),
                    }),
                ),
            };
            IdentityRecord {
                name: format!("certificate-{name}"),
                statement,
                suite,
                mode,
                verdict,
                trials: opts.trials,
                counterexample,
            }
        })
        .collect();

    let centered_sq = RvExpr::pow(symbolic::tx(), 2);
    let variance_eic = centered_sq
        .clone()
        .sub(RvExpr::embed(FuncExpr::moment(centered_sq)));
    let derived = |text: &str| -> RvExpr {
        parse_expression(text)
            .ok()
            .and_then(|psi| derive_eic(&psi).ok())
            .map(|d| d.eic)
            .unwrap_or_else(|| RvExpr::var("<underivable>"))
    };
    records.push(symbolic_record(
        "variance-eic",
        "EIC of Var(X) = (X - E[X])^2 - E[(X - E[X])^2]",
        suite,
        &derived("Var(X)"),
        &variance_eic,
    ));
    records.push(symbolic_record(
        "variance-eic-expanded",
        "EIC of E[X^2] - E[X]^2 = EIC of Var(X)",
        suite,
        &derived("E[X^2]-E[X]^2"),
        &derived("Var(X)"),
    ));
    records.push(symbolic_record(
        "covariance-eic",
        "EIC of Cov(X,Y) = (X - E[X])(Y - E[Y]) - Cov(X,Y)",
        suite,
        &derived("Cov(X,Y)"),
        &symbolic::tx().mul(symbolic::ty()).sub(symbolic::cov()),
    ));
    let not_mean_zero = certificate_catalog().into_iter().find_map(|(name, psi)| {
        match derive_eic_with(&psi, Mode::Float).map(|d| d.is_mean_zero()) {
            Ok(Ok(true)) => None,
            Ok(Ok(false)) => Some(format!("P EIC != 0 for {name}")),
            Ok(Err(e)) => Some(format!("{name}: {e}")),
            Err(e) => Some(format!("{name}: {e}")),
        }
    });
    records.push(record(
        "eic-mean-zero",
        "P EIC = 0 for every catalog functional",
        suite,
        CheckMode::Symbolic,
        not_mean_zero,
    ));
    records
}
