use std::fmt;

use num::{BigRational, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{eic_variance, eic_variance_f64, fold_sizes, normal_quantile, HarnessError};
use crate::eic::{derive_eic_with, f64_columns, Mode};
use crate::exec::Execution;
use crate::expr::{
    evaluate_func, evaluate_func_in, evaluate_rv_at, Binding, FuncExpr, Law, Scalar,
};
use crate::measure::{FiniteProbSpace, RandVar};
use crate::random::stream;
use crate::syntax::{parse_decimal, parse_expression};

/// Exact rational parameter; accepts `"3/10"`, `"0.3"` or a JSON number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exact(pub BigRational);

impl Exact {
    pub fn parse(text: &str) -> Option<Exact> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n = parse_decimal(n.trim())?;
            let d = parse_decimal(d.trim())?;
            return (!d.is_zero()).then(|| Exact(n / d));
        }
        parse_decimal(text).map(Exact)
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Exact;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a string like \"3/10\" or \"0.3\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Exact, E> {
                Exact::parse(v).ok_or_else(|| E::custom(format!("not an exact number: {v:?}")))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Exact, E> {
                Ok(Exact(BigRational::from_integer(v.into())))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Exact, E> {
                Ok(Exact(BigRational::from_integer(v.into())))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Exact, E> {
                // shortest round-trip decimal text, read exactly
                self.visit_str(&format!("{v}"))
            }
        }
        d.deserialize_any(V)
    }
}

/// Finite-support sampling laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Sampler {
    Bernoulli {
        p: Exact,
    },
    /// Weights are normalized by their sum.
    Discrete {
        support: Vec<Exact>,
        weights: Vec<Exact>,
    },
    /// `points` equally weighted midpoints of equal cells of `[low, high]`.
    UniformGrid {
        low: Exact,
        high: Exact,
        points: u32,
    },
}

impl Sampler {
    /// Support points with positive probability, and their probabilities.
    pub fn law(&self) -> Result<(Vec<BigRational>, Vec<BigRational>), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        let (support, weights): (Vec<BigRational>, Vec<BigRational>) = match self {
            Sampler::Bernoulli { p } => {
                if p.0.is_negative() || p.0 > BigRational::one() {
                    return bad("bernoulli p must lie in [0, 1]");
                }
                (
                    vec![BigRational::zero(), BigRational::one()],
                    vec![BigRational::one() - &p.0, p.0.clone()],
                )
            }
            Sampler::Discrete { support, weights } => {
                if support.is_empty() || support.len() != weights.len() {
                    return bad("discrete law needs equally many support points and weights");
                }
                if weights.iter().any(|w| w.0.is_negative()) {
                    return bad("discrete weights must be nonnegative");
                }
                let total: BigRational = weights.iter().map(|w| &w.0).sum();
                if total.is_zero() {
                    return bad("discrete weights sum to zero");
                }
                (
                    support.iter().map(|s| s.0.clone()).collect(),
                    weights.iter().map(|w| &w.0 / &total).collect(),
                )
            }
            Sampler::UniformGrid { low, high, points } => {
                if *points == 0 || low.0 >= high.0 {
                    return bad("uniform grid needs low < high and at least one point");
                }
                let k = BigRational::from_integer((*points).into());
                let cell = (&high.0 - &low.0) / &k;
                let half = BigRational::new(1.into(), 2.into());
                (
                    (0..*points)
                        .map(|i| &low.0 + &cell * (BigRational::from_integer(i.into()) + &half))
                        .collect(),
                    vec![k.recip(); *points as usize],
                )
            }
        };
        let mut pairs: Vec<(BigRational, BigRational)> = support
            .into_iter()
            .zip(weights)
            .filter(|(_, w)| w.is_positive())
            .collect();
        pairs.sort();
        pairs.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1.clone();
                true
            } else {
                false
            }
        });
        Ok(pairs.into_iter().unzip())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Plugin,
    Onestep,
}

fn default_variable() -> String {
    "X".into()
}

fn default_level() -> f64 {
    0.95
}

fn default_split() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub sampler: Sampler,
    /// Functional in the expression grammar, over `variable`.
    pub estimand: String,
    #[serde(default = "default_variable")]
    pub variable: String,
    pub n: u64,
    pub replicates: u64,
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default = "default_split")]
    pub split: f64,
}

impl McConfig {
    pub fn new(sampler: Sampler, estimand: &str, n: u64, replicates: u64, seed: u64) -> Self {
        McConfig {
            sampler,
            estimand: estimand.to_string(),
            variable: default_variable(),
            n,
            replicates,
            seed,
            level: default_level(),
            estimator: Estimator::Plugin,
            split: default_split(),
        }
    }

    fn validate(&self) -> Result<FuncExpr, HarnessError> {
        if self.n < 2 {
            return Err(HarnessError::Config("n must be at least 2".into()));
        }
        if self.replicates < 1 {
            return Err(HarnessError::Config("replicates must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(HarnessError::InvalidLevel(self.level));
        }
        let psi = parse_expression(&self.estimand)
            .map_err(|e| HarnessError::Config(format!("estimand: {e}")))?;
        if let Some(v) = psi.base_vars().into_iter().find(|v| *v != self.variable) {
            return Err(HarnessError::Config(format!(
                "estimand uses {v:?} but the sampler only draws {:?}",
                self.variable
            )));
        }
        if self.estimator == Estimator::Onestep {
            fold_sizes(self.n as usize, self.split)?;
        }
        Ok(psi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub config: McConfig,
    /// `ψ(P₀)`.
    pub truth: f64,
    pub truth_exact: Option<String>,
    /// `Var_{P₀}(φ)`, the efficiency bound.
    pub bound: f64,
    pub bound_exact: Option<String>,
    pub mean_estimate: f64,
    /// Sample variance of `√n(ψ̂ − ψ(P₀))` over replicates.
    pub empirical_variance: f64,
    /// `empirical_variance / bound`, when the bound is positive.
    pub variance_ratio: Option<f64>,
    /// Fraction of Wald intervals containing `ψ(P₀)`.
    pub coverage: f64,
    /// SHA-256 of the little-endian bytes of every replicate estimate.
    pub estimates_digest: String,
}

/// Multinomial counts by sequential conditional binomials.
fn multinomial<R: Rng>(rng: &mut R, n: u64, conditional: &[f64]) -> Vec<u64> {
    let mut left = n;
    let mut out = Vec::with_capacity(conditional.len() + 1);
    for &p in conditional {
        let c = if left == 0 {
            0
        } else {
            Binomial::new(left, p.clamp(0.0, 1.0))
                .expect("probability in [0, 1]")
                .sample(rng)
        };
        out.push(c);
        left -= c;
    }
    out.push(left);
    out
}

/// `p_k / (p_k + ... + p_K)` for every point but the last.
fn conditional_probabilities(probs: &[BigRational]) -> Vec<f64> {
    let mut tail: BigRational = probs.iter().sum();
    let mut out = Vec::new();
    for p in &probs[..probs.len() - 1] {
        out.push((p / &tail).to_f64().unwrap_or(0.0));
        tail -= p;
    }
    out
}

struct Law0 {
    support: Vec<BigRational>,
    conditional: Vec<f64>,
    variable: String,
    smooth: bool,
}

impl Law0 {
    fn empirical(&self, counts: &[u64]) -> (FiniteProbSpace, Binding) {
        let (masses, values): (Vec<u64>, Vec<BigRational>) = counts
            .iter()
            .zip(&self.support)
            .filter(|(c, _)| **c > 0)
            .map(|(c, v)| (*c, v.clone()))
            .unzip();
        let space = FiniteProbSpace::from_masses(&masses).expect("positive counts");
        let binding = [(self.variable.clone(), RandVar::new(values))].into();
        (space, binding)
    }

    fn value(&self, psi: &FuncExpr, counts: &[u64]) -> Result<f64, HarnessError> {
        let (space, binding) = self.empirical(counts);
        if self.smooth {
            let w: Vec<f64> = space.weights().iter().map(f64::from_rational).collect();
            let cols = f64_columns(&binding);
            Ok(evaluate_func_in(psi, Law::new(&w, &cols))?)
        } else {
            Ok(evaluate_func(psi, &space, &binding)?
                .to_f64()
                .unwrap_or(f64::NAN))
        }
    }

    fn eic_variance(&self, psi: &FuncExpr, counts: &[u64]) -> Result<f64, HarnessError> {
        let (space, binding) = self.empirical(counts);
        if self.smooth {
            eic_variance_f64(psi, &space, &binding)
        } else {
            Ok(eic_variance(psi, &space, &binding)?
                .to_f64()
                .unwrap_or(f64::NAN))
        }
    }

    /// Mean over the counts `held` of `φ` at the empirical law of `fit`.
    fn correction(
        &self,
        eic: &crate::expr::RvExpr,
        fit: &[u64],
        held: &[u64],
    ) -> Result<f64, HarnessError> {
        let (space, binding) = self.empirical(fit);
        let points: Binding = [(self.variable.clone(), RandVar::new(self.support.clone()))].into();
        let total: u64 = held.iter().sum();
        if self.smooth {
            let w: Vec<f64> = space.weights().iter().map(f64::from_rational).collect();
            let cols = f64_columns(&binding);
            let pts = f64_columns(&points);
            let phi =
                crate::expr::evaluate_rv_in(eic, Law::new(&w, &cols), &pts, self.support.len())?;
            let s: f64 = phi.iter().zip(held).map(|(p, c)| p * *c as f64).sum();
            Ok(s / total as f64)
        } else {
            let phi = evaluate_rv_at(eic, &space, &binding, &points)?;
            let s: BigRational = phi
                .values()
                .iter()
                .zip(held)
                .map(|(p, c)| p * BigRational::from_integer((*c).into()))
                .sum();
            Ok((s / BigRational::from_integer(total.into()))
                .to_f64()
                .unwrap_or(f64::NAN))
        }
    }
}

struct Replicate {
    estimate: f64,
    covered: bool,
}

/// Runs `R` independent replicates; replicate `r` draws from
/// [`stream`]`(seed, r)`. Reductions run in replicate order, so the report
/// is identical under any [`Execution`].
pub fn run_mc(config: &McConfig, exec: Execution) -> Result<McReport, HarnessError> {
    let psi = config.validate()?;
    let (support, probs) = config.sampler.law()?;
    let smooth = psi.has_smooth();
    let mode = if smooth { Mode::Float } else { Mode::Exact };
    let eic = derive_eic_with(&psi, mode)?.eic;

    let space0 = FiniteProbSpace::from_weights(probs.clone())?;
    let binding0: Binding = [(config.variable.clone(), RandVar::new(support.clone()))].into();
    let (truth, truth_exact, bound, bound_exact) = if smooth {
        let w: Vec<f64> = probs.iter().map(f64::from_rational).collect();
        let cols = f64_columns(&binding0);
        let t = evaluate_func_in(&psi, Law::new(&w, &cols))?;
        (t, None, eic_variance_f64(&psi, &space0, &binding0)?, None)
    } else {
        let t = evaluate_func(&psi, &space0, &binding0)?;
        let b = eic_variance(&psi, &space0, &binding0)?;
        (
            t.to_f64().unwrap_or(f64::NAN),
            Some(t.to_string()),
            b.to_f64().unwrap_or(f64::NAN),
            Some(b.to_string()),
        )
    };

    let law = Law0 {
        conditional: conditional_probabilities(&probs),
        support,
        variable: config.variable.clone(),
        smooth,
    };
    let n = config.n;
    let z = normal_quantile((1.0 + config.level) / 2.0);
    let replicate = |r: u64| -> Result<Replicate, HarnessError> {
        let mut rng = stream(config.seed, r);
        let (estimate, counts) = match config.estimator {
            Estimator::Plugin => {
                let counts = multinomial(&mut rng, n, &law.conditional);
                (law.value(&psi, &counts)?, counts)
            }
            Estimator::Onestep => {
                let (n1, n2) = fold_sizes(n as usize, config.split)?;
                let fit = multinomial(&mut rng, n1 as u64, &law.conditional);
                let held = multinomial(&mut rng, n2 as u64, &law.conditional);
                let mut est = law.value(&psi, &fit)?;
                if n2 > 0 {
                    est += law.correction(&eic, &fit, &held)?;
                }
                let all: Vec<u64> = fit.iter().zip(&held).map(|(a, b)| a + b).collect();
                (est, all)
            }
        };
        let se = (law.eic_variance(&psi, &counts)? / n as f64).sqrt();
        let covered = (estimate - z * se) <= truth && truth <= (estimate + z * se);
        Ok(Replicate { estimate, covered })
    };
    let results = exec
        .map_indexed(config.replicates, replicate)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let r = results.len() as f64;
    let root_n = (n as f64).sqrt();
    let scaled: Vec<f64> = results
        .iter()
        .map(|x| root_n * (x.estimate - truth))
        .collect();
    let mean_scaled = scaled.iter().sum::<f64>() / r;
    let empirical_variance = if results.len() > 1 {
        scaled
            .iter()
            .map(|s| (s - mean_scaled) * (s - mean_scaled))
            .sum::<f64>()
            / (r - 1.0)
    } else {
        0.0
    };
    let mut hasher = Sha256::new();
    for x in &results {
        hasher.update(x.estimate.to_le_bytes());
    }
    let estimates_digest = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(McReport {
        config: config.clone(),
        truth,
        truth_exact,
        bound,
        bound_exact,
        mean_estimate: results.iter().map(|x| x.estimate).sum::<f64>() / r,
        empirical_variance,
        variance_ratio: (bound > 0.0).then(|| empirical_variance / bound),
        coverage: results.iter().filter(|x| x.covered).count() as f64 / r,
        estimates_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ratio;

    fn ex(n: i64, d: i64) -> Exact {
        Exact(ratio(n, d))
    }

    #[test]
    fn exact_parameters() {
        assert_eq!(Exact::parse("3/10"), Some(ex(3, 10)));
        assert_eq!(Exact::parse("0.3"), Some(ex(3, 10)));
        assert_eq!(Exact::parse("1/0"), None);
        assert_eq!(Exact::parse("x"), None);
    }

    #[test]
    fn laws() {
        let (s, p) = Sampler::Bernoulli { p: ex(3, 10) }.law().unwrap();
        assert_eq!(s, [ratio(0, 1), ratio(1, 1)]);
        assert_eq!(p, [ratio(7, 10), ratio(3, 10)]);
        let (s, p) = Sampler::Bernoulli { p: ex(1, 1) }.law().unwrap();
        assert_eq!((s.len(), p[0].clone()), (1, ratio(1, 1)));
        let (s, p) = Sampler::Discrete {
            support: vec![ex(2, 1), ex(0, 1), ex(2, 1)],
            weights: vec![ex(1, 1), ex(2, 1), ex(1, 1)],
        }
        .law()
        .unwrap();
        assert_eq!(s, [ratio(0, 1), ratio(2, 1)]);
        assert_eq!(p, [ratio(1, 2), ratio(1, 2)]);
        let (s, p) = Sampler::UniformGrid {
            low: ex(0, 1),
            high: ex(1, 1),
            points: 4,
        }
        .law()
        .unwrap();
        assert_eq!(s, [ratio(1, 8), ratio(3, 8), ratio(5, 8), ratio(7, 8)]);
        assert!(p.iter().all(|w| *w == ratio(1, 4)));
        assert!(Sampler::Bernoulli { p: ex(3, 2) }.law().is_err());
    }

    #[test]
    fn multinomial_counts_sum_to_n() {
        let mut rng = stream(1, 0);
        let cond = conditional_probabilities(&[ratio(1, 4), ratio(1, 2), ratio(1, 4)]);
        assert_eq!(cond, [0.25, 2.0 / 3.0]);
        let c = multinomial(&mut rng, 1000, &cond);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn bernoulli_bound_and_determinism() {
        let cfg = McConfig::new(Sampler::Bernoulli { p: ex(1, 2) }, "E[X]", 200, 50, 3);
        let a = run_mc(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a.bound_exact.as_deref(), Some("1/4"));
        assert_eq!(a.truth_exact.as_deref(), Some("1/2"));
        let b = run_mc(&cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.coverage));
    }

    #[test]
    fn point_mass_is_exact() {
        let cfg = McConfig::new(
            Sampler::Discrete {
                support: vec![ex(5, 2)],
                weights: vec![ex(1, 1)],
            },
            "E[X]",
            10,
            20,
            1,
        );
        let r = run_mc(&cfg, Execution::default()).unwrap();
        assert_eq!(r.bound, 0.0);
        assert_eq!(r.empirical_variance, 0.0);
        assert_eq!(r.coverage, 1.0);
        assert_eq!(r.variance_ratio, None);
    }

    #[test]
    fn onestep_and_smooth_run() {
        let mut cfg = McConfig::new(
            Sampler::UniformGrid {
                low: ex(1, 1),
                high: ex(3, 1),
                points: 5,
            },
            "Var(X)",
            400,
            40,
            9,
        );
        cfg.estimator = Estimator::Onestep;
        let r = run_mc(&cfg, Execution::default()).unwrap();
        assert!((r.mean_estimate - r.truth).abs() < 0.1);
        cfg.estimand = "log(E[X])".into();
        let r = run_mc(&cfg, Execution::default()).unwrap();
        assert!(r.truth_exact.is_none());
        assert!((r.truth - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let base = McConfig::new(Sampler::Bernoulli { p: ex(1, 2) }, "E[X]", 10, 5, 0);
        let mut c = base.clone();
        c.n = 1;
        assert!(run_mc(&c, Execution::Sequential).is_err());
        let mut c = base.clone();
        c.estimand = "E[Y]".into();
        assert!(run_mc(&c, Execution::Sequential).is_err());
        let mut c = base;
        c.level = 1.5;
        assert!(matches!(
            run_mc(&c, Execution::Sequential),
            Err(HarnessError::InvalidLevel(_))
        ));
    }
}
