//! Symbolic expressions over random variables and functionals of the law.
//!
//! [`RvExpr`] denotes an element of `L²(P)` built from base variables,
//! constants, sums, products, integer powers, and embedded scalars `η(ψ)`.
//! [`FuncExpr`] denotes a parameter `ψ(P)`: a rational combination of
//! moments `P[U]`, optionally wrapped in a smooth outer function.
//!
//! Constructors flatten nested sums and products and fold constants, so a
//! `Sum` or `Product` node always has at least two children.

mod canon;
mod eval;
mod poly;
mod render;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Mul, Sub};

use num::{BigRational, One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{canonicalize_func, canonicalize_rv, moment_of, normalize_functional};
pub use eval::{
    evaluate_func, evaluate_func_f64, evaluate_func_in, evaluate_rv, evaluate_rv_at,
    evaluate_rv_in, Binding, Columns, Law, Scalar,
};
pub use poly::{Atom, CanonForm, Monomial, Poly};

use crate::measure::MeasureError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unbound random variable `{0}`")]
    UnboundVariable(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("column `{name}` has {found} values, expected {expected}")]
    ColumnLength {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("reciprocal of a functional that evaluates to zero")]
    DivisionByZero,
    #[error("reciprocal of `{0}`, which is identically zero")]
    ZeroReciprocal(String),
    #[error("`{0}` has no exact rational value; use float mode")]
    SmoothInExactMode(SmoothFn),
    #[error("`{func}` is undefined at {arg}")]
    Domain { func: SmoothFn, arg: f64 },
    #[error("`{0}` is not a polynomial in moments")]
    NotPolynomial(String),
}

/// Outer functions admitted by the chain rule in float mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothFn {
    Exp,
    Log,
    Sqrt,
}

impl SmoothFn {
    pub const ALL: [SmoothFn; 3] = [SmoothFn::Exp, SmoothFn::Log, SmoothFn::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            SmoothFn::Exp => "exp",
            SmoothFn::Log => "log",
            SmoothFn::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, x: f64) -> Result<f64, ExprError> {
        match self {
            SmoothFn::Exp => Ok(x.exp()),
            SmoothFn::Log if x > 0.0 => Ok(x.ln()),
            SmoothFn::Sqrt if x >= 0.0 => Ok(x.sqrt()),
            func => Err(ExprError::Domain { func, arg: x }),
        }
    }

    /// `g′(ψ)` as a functional of `ψ`.
    pub fn derivative(self, arg: &FuncExpr) -> FuncExpr {
        match self {
            SmoothFn::Exp => FuncExpr::smooth(SmoothFn::Exp, arg.clone()),
            SmoothFn::Log => FuncExpr::recip(arg.clone()),
            SmoothFn::Sqrt => FuncExpr::product(vec![
                FuncExpr::Const(BigRational::new(1.into(), 2.into())),
                FuncExpr::recip(FuncExpr::smooth(SmoothFn::Sqrt, arg.clone())),
            ]),
        }
    }
}

impl fmt::Display for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RvExpr {
    Var(String),
    Const(BigRational),
    Sum(Vec<RvExpr>),
    Product(Vec<RvExpr>),
    Pow(Box<RvExpr>, u32),
    /// `η(ψ)`: the constant random variable equal to the parameter value.
    Embed(Box<FuncExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FuncExpr {
    /// `P[U]`.
    Moment(Box<RvExpr>),
    Const(BigRational),
    Sum(Vec<FuncExpr>),
    Product(Vec<FuncExpr>),
    Pow(Box<FuncExpr>, u32),
    Recip(Box<FuncExpr>),
    Smooth(SmoothFn, Box<FuncExpr>),
}

/// Shared flattening and constant folding for the two expression kinds.
trait Node: Sized {
    fn constant(c: BigRational) -> Self;
    fn as_const(&self) -> Option<&BigRational>;
    fn raw_sum(terms: Vec<Self>) -> Self;
    fn raw_product(factors: Vec<Self>) -> Self;
    fn raw_pow(base: Self, k: u32) -> Self;
    fn take_sum(self) -> Result<Vec<Self>, Self>;
    fn take_product(self) -> Result<Vec<Self>, Self>;
    fn take_pow(self) -> Result<(Self, u32), Self>;
}

fn build_sum<N: Node>(terms: Vec<N>) -> N {
    let mut flat = Vec::with_capacity(terms.len());
    let mut constant = BigRational::zero();
    let mut pending = terms;
    pending.reverse();
    while let Some(t) = pending.pop() {
        match t.take_sum() {
            Ok(inner) => pending.extend(inner.into_iter().rev()),
            Err(t) => match t.as_const() {
                Some(c) => constant += c,
                None => flat.push(t),
            },
        }
    }
    if !constant.is_zero() {
        flat.push(N::constant(constant));
    }
    match flat.len() {
        0 => N::constant(BigRational::zero()),
        1 => flat.pop().unwrap(),
        _ => N::raw_sum(flat),
    }
}

fn build_product<N: Node>(factors: Vec<N>) -> N {
    let mut flat = Vec::with_capacity(factors.len() + 1);
    let mut constant = BigRational::one();
    let mut pending = factors;
    pending.reverse();
    while let Some(t) = pending.pop() {
        match t.take_product() {
            Ok(inner) => pending.extend(inner.into_iter().rev()),
            Err(t) => match t.as_const() {
                Some(c) => constant *= c,
                None => flat.push(t),
            },
        }
    }
    if constant.is_zero() {
        return N::constant(constant);
    }
    if !constant.is_one() {
        flat.insert(0, N::constant(constant));
    }
    match flat.len() {
        0 => N::constant(BigRational::one()),
        1 => flat.pop().unwrap(),
        _ => N::raw_product(flat),
    }
}

fn build_pow<N: Node>(base: N, k: u32) -> N {
    match k {
        0 => N::constant(BigRational::one()),
        1 => base,
        _ => {
            if let Some(c) = base.as_const() {
                return N::constant(num::pow(c.clone(), k as usize));
            }
            match base.take_pow() {
                Ok((inner, j)) => N::raw_pow(inner, j * k),
                Err(base) => N::raw_pow(base, k),
            }
        }
    }
}

macro_rules! impl_node {
    ($ty:ident) => {
        impl Node for $ty {
            fn constant(c: BigRational) -> Self {
                $ty::Const(c)
            }
            fn as_const(&self) -> Option<&BigRational> {
                match self {
                    $ty::Const(c) => Some(c),
                    _ => None,
                }
            }
            fn raw_sum(terms: Vec<Self>) -> Self {
                $ty::Sum(terms)
            }
            fn raw_product(factors: Vec<Self>) -> Self {
                $ty::Product(factors)
            }
            fn raw_pow(base: Self, k: u32) -> Self {
                $ty::Pow(Box::new(base), k)
            }
            fn take_sum(self) -> Result<Vec<Self>, Self> {
                match self {
                    $ty::Sum(v) => Ok(v),
                    other => Err(other),
                }
            }
            fn take_product(self) -> Result<Vec<Self>, Self> {
                match self {
                    $ty::Product(v) => Ok(v),
                    other => Err(other),
                }
            }
            fn take_pow(self) -> Result<(Self, u32), Self> {
                match self {
                    $ty::Pow(b, k) => Ok((*b, k)),
                    other => Err(other),
                }
            }
        }

        impl $ty {
            pub fn constant(c: BigRational) -> Self {
                $ty::Const(c)
            }

            pub fn integer(n: i64) -> Self {
                $ty::Const(BigRational::from_integer(n.into()))
            }

            pub fn zero() -> Self {
                $ty::integer(0)
            }

            pub fn one() -> Self {
                $ty::integer(1)
            }

            pub fn sum(terms: Vec<Self>) -> Self {
                build_sum(terms)
            }

            pub fn product(factors: Vec<Self>) -> Self {
                build_product(factors)
            }

            pub fn pow(base: Self, k: u32) -> Self {
                build_pow(base, k)
            }

            pub fn scale(self, c: BigRational) -> Self {
                build_product(vec![$ty::Const(c), self])
            }

            pub fn is_const(&self) -> bool {
                matches!(self, $ty::Const(_))
            }

            /// If the node carries a leading negative sign, its absolute
            /// counterpart.
            pub(crate) fn split_sign(&self) -> Option<Self> {
                match self {
                    $ty::Const(c) if c.is_negative() => Some($ty::Const(-c)),
                    $ty::Product(fs) => match fs.first() {
                        Some($ty::Const(c)) if c.is_negative() => {
                            let mut rest = fs.clone();
                            rest[0] = $ty::Const(-c);
                            Some(build_product(rest))
                        }
                        _ => None,
                    },
                    _ => None,
                }
            }
        }

        impl std::ops::Neg for $ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                build_product(vec![$ty::integer(-1), self])
            }
        }

        impl std::ops::Add for $ty {
            type Output = $ty;
            fn add(self, rhs: $ty) -> $ty {
                build_sum(vec![self, rhs])
            }
        }

        impl std::ops::Sub for $ty {
            type Output = $ty;
            fn sub(self, rhs: $ty) -> $ty {
                build_sum(vec![self, -rhs])
            }
        }

        impl std::ops::Mul for $ty {
            type Output = $ty;
            fn mul(self, rhs: $ty) -> $ty {
                build_product(vec![self, rhs])
            }
        }
    };
}

impl_node!(RvExpr);
impl_node!(FuncExpr);

impl RvExpr {
    pub fn var(name: impl Into<String>) -> Self {
        RvExpr::Var(name.into())
    }

    /// `η(ψ)`; constant functionals become plain constants.
    pub fn embed(psi: FuncExpr) -> Self {
        match psi {
            FuncExpr::Const(c) => RvExpr::Const(c),
            other => RvExpr::Embed(Box::new(other)),
        }
    }

    /// `η(ψ)` with the embedding pushed through sums, products and powers,
    /// so that only moments, reciprocals and smooth applications are wrapped.
    pub fn embed_distributed(psi: FuncExpr) -> Self {
        match psi {
            FuncExpr::Const(c) => RvExpr::Const(c),
            FuncExpr::Sum(ts) => RvExpr::sum(ts.into_iter().map(Self::embed_distributed).collect()),
            FuncExpr::Product(fs) => {
                RvExpr::product(fs.into_iter().map(Self::embed_distributed).collect())
            }
            FuncExpr::Pow(b, k) => RvExpr::pow(Self::embed_distributed(*b), k),
            other => RvExpr::Embed(Box::new(other)),
        }
    }

    /// `U − η(P[U])`, the centering operator applied symbolically.
    pub fn centered(self) -> Self {
        let mean = FuncExpr::moment(self.clone());
        self.sub(RvExpr::embed(mean))
    }

    pub fn base_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            RvExpr::Var(v) => {
                out.insert(v.clone());
            }
            RvExpr::Const(_) => {}
            RvExpr::Sum(xs) | RvExpr::Product(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
            RvExpr::Pow(b, _) => b.collect_vars(out),
            RvExpr::Embed(f) => f.collect_vars(out),
        }
    }

    pub(crate) fn any_func(&self, pred: &impl Fn(&FuncExpr) -> bool) -> bool {
        match self {
            RvExpr::Var(_) | RvExpr::Const(_) => false,
            RvExpr::Sum(xs) | RvExpr::Product(xs) => xs.iter().any(|x| x.any_func(pred)),
            RvExpr::Pow(b, _) => b.any_func(pred),
            RvExpr::Embed(f) => f.any(pred),
        }
    }
}

impl FuncExpr {
    pub fn moment(u: RvExpr) -> Self {
        match u {
            RvExpr::Const(c) => FuncExpr::Const(c),
            other => FuncExpr::Moment(Box::new(other)),
        }
    }

    pub fn recip(f: Self) -> Self {
        match f {
            FuncExpr::Const(c) if !c.is_zero() => FuncExpr::Const(c.recip()),
            other => FuncExpr::Recip(Box::new(other)),
        }
    }

    pub fn smooth(g: SmoothFn, f: Self) -> Self {
        FuncExpr::Smooth(g, Box::new(f))
    }

    /// `P[X]`.
    pub fn mean(var: &str) -> Self {
        FuncExpr::moment(RvExpr::var(var))
    }

    /// `P[X²] − P[X]²`.
    pub fn variance(var: &str) -> Self {
        let x = RvExpr::var(var);
        FuncExpr::moment(RvExpr::pow(x, 2)).sub(FuncExpr::pow(FuncExpr::mean(var), 2))
    }

    /// `P[XY] − P[X]·P[Y]`.
    pub fn covariance(x: &str, y: &str) -> Self {
        FuncExpr::moment(RvExpr::var(x).mul(RvExpr::var(y)))
            .sub(FuncExpr::mean(x).mul(FuncExpr::mean(y)))
    }

    pub fn base_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            FuncExpr::Moment(u) => u.collect_vars(out),
            FuncExpr::Const(_) => {}
            FuncExpr::Sum(xs) | FuncExpr::Product(xs) => {
                xs.iter().for_each(|x| x.collect_vars(out))
            }
            FuncExpr::Pow(b, _) | FuncExpr::Recip(b) | FuncExpr::Smooth(_, b) => {
                b.collect_vars(out)
            }
        }
    }

    /// True if `pred` holds on this node or any functional below it,
    /// including functionals embedded inside moments.
    pub(crate) fn any(&self, pred: &impl Fn(&FuncExpr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            FuncExpr::Moment(u) => u.any_func(pred),
            FuncExpr::Const(_) => false,
            FuncExpr::Sum(xs) | FuncExpr::Product(xs) => xs.iter().any(|x| x.any(pred)),
            FuncExpr::Pow(b, _) | FuncExpr::Recip(b) | FuncExpr::Smooth(_, b) => b.any(pred),
        }
    }

    pub fn has_smooth(&self) -> bool {
        self.any(&|f| matches!(f, FuncExpr::Smooth(..)))
    }

    /// No reciprocals and no smooth applications anywhere.
    pub fn is_polynomial(&self) -> bool {
        !self.any(&|f| matches!(f, FuncExpr::Smooth(..) | FuncExpr::Recip(_)))
    }
}
