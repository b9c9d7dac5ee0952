//! Estimation from data: plug-in and one-step estimators built from derived
//! influence curves, EIC standard errors, Wald intervals, and a seeded Monte
//! Carlo runner for the efficiency bound.

mod data;
mod mc;

use num::{BigRational, ToPrimitive};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub use data::{empirical_space, DataError, Dataset};
pub use mc::{run_mc, Estimator, Exact, McConfig, McReport, Sampler};

use crate::eic::{derive_eic_with, f64_columns, EicError, Mode};
use crate::expr::{
    evaluate_func, evaluate_func_in, evaluate_rv, evaluate_rv_at, evaluate_rv_in, Binding,
    ExprError, FuncExpr, Law, Scalar,
};
use crate::measure::{FiniteProbSpace, MeasureError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eic(#[from] EicError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("confidence level {0} is not in (0, 1)")]
    InvalidLevel(f64),
    #[error("standard error {0} is negative")]
    NegativeStandardError(f64),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

fn float_law(space: &FiniteProbSpace) -> Vec<f64> {
    space.weights().iter().map(f64::from_rational).collect()
}

/// `ψ(P̂ₙ)`, exactly.
pub fn plugin_estimate(psi: &FuncExpr, data: &Dataset) -> Result<BigRational, HarnessError> {
    data.require(psi.base_vars())?;
    let (space, binding) = empirical_space(data);
    Ok(evaluate_func(psi, &space, &binding)?)
}

pub fn plugin_estimate_f64(psi: &FuncExpr, data: &Dataset) -> Result<f64, HarnessError> {
    data.require(psi.base_vars())?;
    let (space, binding) = empirical_space(data);
    let columns = f64_columns(&binding);
    Ok(evaluate_func_in(
        psi,
        Law::new(&float_law(&space), &columns),
    )?)
}

/// `Var_P(φ)` for the EIC `φ` of `ψ` at the law `(space, binding)`, exactly.
pub fn eic_variance(
    psi: &FuncExpr,
    space: &FiniteProbSpace,
    binding: &Binding,
) -> Result<BigRational, HarnessError> {
    let eic = derive_eic_with(psi, Mode::Exact)?.eic;
    let phi = evaluate_rv(&eic, space, binding)?;
    Ok(space.variance(&phi)?)
}

pub fn eic_variance_f64(
    psi: &FuncExpr,
    space: &FiniteProbSpace,
    binding: &Binding,
) -> Result<f64, HarnessError> {
    let eic = derive_eic_with(psi, Mode::Float)?.eic;
    let weights = float_law(space);
    let columns = f64_columns(binding);
    let phi = evaluate_rv_in(&eic, Law::new(&weights, &columns), &columns, weights.len())?;
    let mean: f64 = weights.iter().zip(&phi).map(|(w, p)| w * p).sum();
    Ok(weights
        .iter()
        .zip(&phi)
        .map(|(w, p)| w * (p - mean) * (p - mean))
        .sum())
}

/// `sqrt(Var_{P̂ₙ}(φ) / n)`; the variance is exact unless `ψ` has smooth
/// parts.
pub fn eic_standard_error(psi: &FuncExpr, data: &Dataset) -> Result<f64, HarnessError> {
    data.require(psi.base_vars())?;
    let (space, binding) = empirical_space(data);
    let var = if psi.has_smooth() {
        eic_variance_f64(psi, &space, &binding)?
    } else {
        eic_variance(psi, &space, &binding)?
            .to_f64()
            .unwrap_or(f64::NAN)
    };
    Ok((var / data.len() as f64).sqrt())
}

/// Sizes of the two folds: the first `round(ratio·n)` rows, clamped to
/// `[1, n]`, and the rest.
pub fn fold_sizes(n: usize, split_ratio: f64) -> Result<(usize, usize), HarnessError> {
    if !(split_ratio > 0.0 && split_ratio <= 1.0) {
        return Err(HarnessError::InvalidSplit(format!(
            "ratio {split_ratio} is not in (0, 1]"
        )));
    }
    let first = ((split_ratio * n as f64).round() as usize).clamp(1, n);
    Ok((first, n - first))
}

/// Sample-split one-step estimator: `ψ(P̂⁽¹⁾) + mean over fold 2 of φ_{P̂⁽¹⁾}`.
/// With an empty second fold the correction is zero.
pub fn onestep_estimate(
    psi: &FuncExpr,
    data: &Dataset,
    split_ratio: f64,
) -> Result<BigRational, HarnessError> {
    data.require(psi.base_vars())?;
    let (n1, n2) = fold_sizes(data.len(), split_ratio)?;
    let fold1 = data.slice(0..n1)?;
    let (space, binding) = empirical_space(&fold1);
    let base = evaluate_func(psi, &space, &binding)?;
    if n2 == 0 {
        return Ok(base);
    }
    let eic = derive_eic_with(psi, Mode::Exact)?.eic;
    let held_out = data.slice(n1..data.len())?.points();
    let phi = evaluate_rv_at(&eic, &space, &binding, &held_out)?;
    let total: BigRational = phi.values().iter().sum();
    Ok(base + total / BigRational::from_integer(n2.into()))
}

/// Standard normal quantile `Φ⁻¹(p)`, via the rational approximations of
/// the inverse complementary error function in `statrs`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `estimate ± z_{(1+level)/2} · se`.
pub fn wald_ci(estimate: f64, se: f64, level: f64) -> Result<(f64, f64), HarnessError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(HarnessError::InvalidLevel(level));
    }
    if se < 0.0 || se.is_nan() {
        return Err(HarnessError::NegativeStandardError(se));
    }
    let half = normal_quantile((1.0 + level) / 2.0) * se;
    Ok((estimate - half, estimate + half))
}

/// Everything `estimate` reports for one functional and dataset.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub estimand: String,
    pub mode: Mode,
    pub n: usize,
    /// Exact value; absent in float mode.
    pub estimate_exact: Option<String>,
    pub estimate: f64,
    pub standard_error: f64,
    pub level: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub onestep: Option<f64>,
}

pub fn estimate(
    psi: &FuncExpr,
    data: &Dataset,
    level: f64,
    mode: Mode,
    split: Option<f64>,
) -> Result<Estimate, HarnessError> {
    if mode == Mode::Exact {
        derive_eic_with(psi, Mode::Exact)?;
    }
    let (exact, value) = match mode {
        Mode::Exact => {
            let v = plugin_estimate(psi, data)?;
            let f = v.to_f64().unwrap_or(f64::NAN);
            (Some(v.to_string()), f)
        }
        Mode::Float => (None, plugin_estimate_f64(psi, data)?),
    };
    let se = eic_standard_error(psi, data)?;
    let (lo, hi) = wald_ci(value, se, level)?;
    let onestep = match split {
        Some(r) => Some(onestep_estimate(psi, data, r)?.to_f64().unwrap_or(f64::NAN)),
        None => None,
    };
    Ok(Estimate {
        estimand: psi.to_string(),
        mode,
        n: data.len(),
        estimate_exact: exact,
        estimate: value,
        standard_error: se,
        level,
        ci_low: lo,
        ci_high: hi,
        onestep,
    })
}
