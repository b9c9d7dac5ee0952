//! Interpretation of expressions on a concrete finite law.
//!
//! The evaluator is generic over the scalar field so the same tree walk
//! serves exact rationals, `f64`, and the polynomial-in-ε scalars used by
//! the pathwise-derivative oracle.

use std::collections::BTreeMap;

use num::{BigRational, One, ToPrimitive, Zero};

use super::{ExprError, FuncExpr, RvExpr, SmoothFn};
use crate::measure::{FiniteProbSpace, RandVar};

pub type Binding = BTreeMap<String, RandVar>;

pub trait Scalar: Clone {
    fn nil() -> Self;
    fn unit() -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn plus(&self, rhs: &Self) -> Self;
    fn times(&self, rhs: &Self) -> Self;
    fn inverse(&self) -> Result<Self, ExprError>;
    fn smooth(&self, g: SmoothFn) -> Result<Self, ExprError>;

    fn power(&self, k: u32) -> Self {
        let mut out = Self::unit();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                out = out.times(&base);
            }
            base = base.times(&base);
            k >>= 1;
        }
        out
    }
}

impl Scalar for BigRational {
    fn nil() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn plus(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn times(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn inverse(&self) -> Result<Self, ExprError> {
        if self.is_zero() {
            Err(ExprError::DivisionByZero)
        } else {
            Ok(self.recip())
        }
    }
    fn smooth(&self, g: SmoothFn) -> Result<Self, ExprError> {
        Err(ExprError::SmoothInExactMode(g))
    }
}

impl Scalar for f64 {
    fn nil() -> Self {
        0.0
    }
    fn unit() -> Self {
        1.0
    }
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn plus(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn times(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn inverse(&self) -> Result<Self, ExprError> {
        if *self == 0.0 {
            Err(ExprError::DivisionByZero)
        } else {
            Ok(1.0 / self)
        }
    }
    fn smooth(&self, g: SmoothFn) -> Result<Self, ExprError> {
        g.apply(*self)
    }
}

/// Named value columns, one entry per outcome.
pub trait Columns<S> {
    fn column(&self, name: &str) -> Option<&[S]>;
}

impl Columns<BigRational> for Binding {
    fn column(&self, name: &str) -> Option<&[BigRational]> {
        self.get(name).map(RandVar::values)
    }
}

impl<S> Columns<S> for BTreeMap<String, Vec<S>> {
    fn column(&self, name: &str) -> Option<&[S]> {
        self.get(name).map(Vec::as_slice)
    }
}

/// A finite law: outcome weights plus the columns observed at each outcome.
pub struct Law<'a, S> {
    pub weights: &'a [S],
    pub columns: &'a dyn Columns<S>,
}

impl<S> Clone for Law<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S> Copy for Law<'_, S> {}

impl<'a, S: Scalar> Law<'a, S> {
    pub fn new(weights: &'a [S], columns: &'a dyn Columns<S>) -> Self {
        Law { weights, columns }
    }

    fn expectation(&self, values: &[S]) -> S {
        self.weights
            .iter()
            .zip(values)
            .fold(S::nil(), |acc, (w, v)| acc.plus(&w.times(v)))
    }
}

fn lookup<'c, S>(cols: &'c dyn Columns<S>, name: &str, len: usize) -> Result<&'c [S], ExprError> {
    let col = cols
        .column(name)
        .ok_or_else(|| ExprError::UnboundVariable(name.to_string()))?;
    if col.len() != len {
        return Err(ExprError::ColumnLength {
            name: name.to_string(),
            expected: len,
            found: col.len(),
        });
    }
    Ok(col)
}

/// Evaluates `ψ` at the law.
pub fn evaluate_func_in<S: Scalar>(psi: &FuncExpr, law: Law<'_, S>) -> Result<S, ExprError> {
    Ok(match psi {
        FuncExpr::Moment(u) => {
            let n = law.weights.len();
            let values = evaluate_rv_in(u, law, law.columns, n)?;
            law.expectation(&values)
        }
        FuncExpr::Const(c) => S::from_rational(c),
        FuncExpr::Sum(ts) => {
            let mut acc = S::nil();
            for t in ts {
                acc = acc.plus(&evaluate_func_in(t, law)?);
            }
            acc
        }
        FuncExpr::Product(fs) => {
            let mut acc = S::unit();
            for f in fs {
                acc = acc.times(&evaluate_func_in(f, law)?);
            }
            acc
        }
        FuncExpr::Pow(b, k) => evaluate_func_in(b, law)?.power(*k),
        FuncExpr::Recip(b) => evaluate_func_in(b, law)?.inverse()?,
        FuncExpr::Smooth(g, b) => evaluate_func_in(b, law)?.smooth(*g)?,
    })
}

/// Evaluates `e` pointwise at `len` points given by `points`; embedded
/// functionals are evaluated at `law`.
pub fn evaluate_rv_in<S: Scalar>(
    e: &RvExpr,
    law: Law<'_, S>,
    points: &dyn Columns<S>,
    len: usize,
) -> Result<Vec<S>, ExprError> {
    Ok(match e {
        RvExpr::Var(v) => lookup(points, v, len)?.to_vec(),
        RvExpr::Const(c) => vec![S::from_rational(c); len],
        RvExpr::Sum(ts) => {
            let mut acc = vec![S::nil(); len];
            for t in ts {
                let v = evaluate_rv_in(t, law, points, len)?;
                acc.iter_mut().zip(&v).for_each(|(a, b)| *a = a.plus(b));
            }
            acc
        }
        RvExpr::Product(fs) => {
            let mut acc = vec![S::unit(); len];
            for f in fs {
                let v = evaluate_rv_in(f, law, points, len)?;
                acc.iter_mut().zip(&v).for_each(|(a, b)| *a = a.times(b));
            }
            acc
        }
        RvExpr::Pow(b, k) => evaluate_rv_in(b, law, points, len)?
            .iter()
            .map(|v| v.power(*k))
            .collect(),
        RvExpr::Embed(psi) => vec![evaluate_func_in(psi, law)?; len],
    })
}

/// Exact value of `ψ` at the law `(space, binding)`.
pub fn evaluate_func(
    psi: &FuncExpr,
    space: &FiniteProbSpace,
    binding: &Binding,
) -> Result<BigRational, ExprError> {
    evaluate_func_in(psi, Law::new(space.weights(), binding))
}

/// Exact pointwise value of `e` on `(space, binding)`.
pub fn evaluate_rv(
    e: &RvExpr,
    space: &FiniteProbSpace,
    binding: &Binding,
) -> Result<RandVar, ExprError> {
    evaluate_rv_on(e, space, binding, binding, space.len())
}

/// Evaluates `e` at the rows of `points` while embedded functionals use the
/// law `(space, binding)`. Used for held-out evaluation of influence curves.
pub fn evaluate_rv_at(
    e: &RvExpr,
    space: &FiniteProbSpace,
    binding: &Binding,
    points: &Binding,
) -> Result<RandVar, ExprError> {
    let len = points.values().next().map_or(0, RandVar::len);
    evaluate_rv_on(e, space, binding, points, len)
}

fn evaluate_rv_on(
    e: &RvExpr,
    space: &FiniteProbSpace,
    binding: &Binding,
    points: &Binding,
    len: usize,
) -> Result<RandVar, ExprError> {
    for col in binding.values() {
        space.check(col)?;
    }
    let law = Law::new(space.weights(), binding);
    evaluate_rv_in(e, law, points, len).map(RandVar::new)
}

/// Float evaluation of `ψ`; required for smooth outer functions.
pub fn evaluate_func_f64(
    psi: &FuncExpr,
    weights: &[f64],
    columns: &BTreeMap<String, Vec<f64>>,
) -> Result<f64, ExprError> {
    evaluate_func_in(psi, Law::new(weights, columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ratio;
    use std::ops::Mul;

    fn half_half() -> FiniteProbSpace {
        FiniteProbSpace::from_weights(vec![ratio(1, 2), ratio(1, 2)]).unwrap()
    }

    fn bind(pairs: &[(&str, &[i64])]) -> Binding {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), RandVar::from_integers(v.iter().copied())))
            .collect()
    }

    #[test]
    fn rv_examples() {
        let s = half_half();
        let b = bind(&[("X", &[0, 1])]);
        let x = RvExpr::var("X");
        assert_eq!(evaluate_rv(&x, &s, &b).unwrap(), b["X"]);
        assert_eq!(
            evaluate_rv(&x.clone().centered(), &s, &b).unwrap(),
            s.center(&b["X"]).unwrap()
        );
        let b = bind(&[("X", &[0, 1]), ("Y", &[0, 1])]);
        let e = RvExpr::embed(FuncExpr::moment(x.mul(RvExpr::var("Y"))));
        assert_eq!(
            evaluate_rv(&e, &s, &b).unwrap(),
            RandVar::new(vec![ratio(1, 2), ratio(1, 2)])
        );
    }

    #[test]
    fn func_examples() {
        let s = half_half();
        let b = bind(&[("X", &[0, 1])]);
        assert_eq!(
            evaluate_func(&FuncExpr::variance("X"), &s, &b).unwrap(),
            ratio(1, 4)
        );
        assert_eq!(
            evaluate_func(&FuncExpr::Const(ratio(5, 7)), &s, &b).unwrap(),
            ratio(5, 7)
        );
        let b = bind(&[("X", &[3, -2]), ("Y", &[3, -2])]);
        assert_eq!(
            evaluate_func(&FuncExpr::covariance("X", "Y"), &s, &b).unwrap(),
            evaluate_func(&FuncExpr::variance("X"), &s, &b).unwrap()
        );
    }

    #[test]
    fn errors() {
        let s = half_half();
        let b = bind(&[("X", &[0, 0])]);
        assert!(matches!(
            evaluate_func(&FuncExpr::mean("Z"), &s, &b),
            Err(ExprError::UnboundVariable(v)) if v == "Z"
        ));
        assert!(matches!(
            evaluate_func(&FuncExpr::recip(FuncExpr::mean("X")), &s, &b),
            Err(ExprError::DivisionByZero)
        ));
        assert!(matches!(
            evaluate_func(
                &FuncExpr::smooth(SmoothFn::Exp, FuncExpr::mean("X")),
                &s,
                &b
            ),
            Err(ExprError::SmoothInExactMode(SmoothFn::Exp))
        ));
        let bad = bind(&[("X", &[0, 0, 1])]);
        assert!(evaluate_rv(&RvExpr::var("X"), &s, &bad).is_err());
    }

    #[test]
    fn float_mode_handles_smooth() {
        let cols: BTreeMap<String, Vec<f64>> = [("X".to_string(), vec![1.0, 3.0])].into();
        let psi = FuncExpr::smooth(SmoothFn::Log, FuncExpr::mean("X"));
        let v = evaluate_func_f64(&psi, &[0.5, 0.5], &cols).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }
}
