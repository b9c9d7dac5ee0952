#![allow(dead_code)]

use eicalg::expr::Binding;
use eicalg::random::{random_instance, stream, InstanceSpec};
use eicalg::{FiniteProbSpace, FuncExpr, RandVar, RvExpr};
use num::BigRational;
use proptest::prelude::*;

pub const VARS: [&str; 3] = ["X", "Y", "Z"];

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub fn rational() -> impl Strategy<Value = BigRational> {
    (-9i64..=9, 1i64..=6).prop_map(|(n, d)| q(n, d))
}

/// Random law with integer columns for `X`, `Y`, `Z`, drawn from a seed.
pub fn instance() -> impl Strategy<Value = (FiniteProbSpace, Binding)> {
    any::<u64>().prop_map(|seed| {
        let inst = random_instance(&mut stream(seed, 0), &VARS, &InstanceSpec::default());
        (inst.space, inst.binding)
    })
}

pub fn column(b: &Binding, name: &str) -> RandVar {
    b[name].clone()
}

/// Polynomial random variables in the base variables.
pub fn rv_expr() -> impl Strategy<Value = RvExpr> {
    let leaf = prop_oneof![
        prop::sample::select(VARS.to_vec()).prop_map(RvExpr::var),
        rational().prop_map(RvExpr::constant),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(RvExpr::sum),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(RvExpr::product),
            (inner, 0u32..=2).prop_map(|(b, k)| RvExpr::pow(b, k)),
        ]
    })
}

/// Rational functionals of moments; reciprocals are of strictly positive
/// quantities so every instance is in the domain.
pub fn func_expr() -> impl Strategy<Value = FuncExpr> {
    let leaf = prop_oneof![
        3 => rv_expr().prop_map(FuncExpr::moment),
        1 => rational().prop_map(FuncExpr::constant),
        1 => prop::sample::select(VARS.to_vec()).prop_map(FuncExpr::variance),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..=3).prop_map(FuncExpr::sum),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(FuncExpr::product),
            (inner.clone(), 0u32..=2).prop_map(|(b, k)| FuncExpr::pow(b, k)),
            inner.clone().prop_map(|f| -f),
            inner.prop_map(|f| FuncExpr::recip(FuncExpr::one() + FuncExpr::pow(f, 2))),
        ]
    })
}
