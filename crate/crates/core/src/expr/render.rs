//! Textual rendering in the surface grammar accepted by [`crate::syntax`].
//!
//! Rendering is deterministic and parenthesizes only where the grammar
//! requires it, so `parse(render(e))` rebuilds `e` for parser output.

use std::fmt::{self, Write};

use num::{BigInt, BigRational, Integer, One, Signed, Zero};

use super::{FuncExpr, RvExpr};

const SUM: u8 = 0;
const PRODUCT: u8 = 1;
const POWER: u8 = 2;
const ATOM: u8 = 3;

/// Exact decimal text when the denominator divides a power of ten.
pub(crate) fn decimal_string(c: &BigRational) -> Option<String> {
    let mut d = c.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0usize, 0usize);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scale = num::pow(BigInt::from(10), places);
    let scaled = c.numer() * (&scale / c.denom());
    let sign = if scaled.is_negative() { "-" } else { "" };
    let digits = scaled.abs().to_string();
    if places == 0 {
        return Some(format!("{sign}{digits}"));
    }
    let padded = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = padded.split_at(padded.len() - places);
    Some(format!("{sign}{int}.{frac}"))
}

fn const_level(c: &BigRational) -> u8 {
    if c.is_negative() {
        SUM
    } else if decimal_string(c).is_some() || c.numer().is_one() {
        ATOM
    } else {
        PRODUCT
    }
}

fn write_const(out: &mut String, c: &BigRational) {
    if let Some(s) = decimal_string(c) {
        out.push_str(&s);
        return;
    }
    if c.is_negative() {
        out.push('-');
    }
    let n = c.numer().abs();
    if n.is_one() {
        let _ = write!(out, "inv({})", c.denom());
    } else {
        let _ = write!(out, "{n}*inv({})", c.denom());
    }
}

fn rv_level(e: &RvExpr) -> u8 {
    match e {
        RvExpr::Var(_) => ATOM,
        RvExpr::Const(c) => const_level(c),
        RvExpr::Sum(_) => SUM,
        RvExpr::Product(_) if e.split_sign().is_some() => SUM,
        RvExpr::Product(_) => PRODUCT,
        RvExpr::Pow(..) => POWER,
        RvExpr::Embed(f) => func_level(f),
    }
}

fn func_level(f: &FuncExpr) -> u8 {
    match f {
        FuncExpr::Const(c) => const_level(c),
        FuncExpr::Sum(_) => SUM,
        FuncExpr::Product(_) if f.split_sign().is_some() => SUM,
        FuncExpr::Product(_) => PRODUCT,
        FuncExpr::Pow(..) => POWER,
        FuncExpr::Moment(_) | FuncExpr::Recip(_) | FuncExpr::Smooth(..) => ATOM,
    }
}

/// The three node shapes shared by both expression kinds.
trait Render: Sized {
    fn level(&self) -> u8;
    fn write_node(&self, out: &mut String);
    fn split_sign(&self) -> Option<Self>;
    fn as_const(&self) -> Option<&BigRational>;

    fn write_at(&self, out: &mut String, min: u8) {
        if self.level() < min {
            out.push('(');
            self.write_node(out);
            out.push(')');
        } else {
            self.write_node(out);
        }
    }
}

fn write_sum<N: Render>(out: &mut String, terms: &[N]) {
    for (i, t) in terms.iter().enumerate() {
        match t.split_sign() {
            Some(abs) => {
                out.push_str(if i == 0 { "-" } else { " - " });
                abs.write_at(out, PRODUCT);
            }
            None => {
                if i > 0 {
                    out.push_str(" + ");
                }
                t.write_at(out, PRODUCT);
            }
        }
    }
}

fn write_product<N: Render>(out: &mut String, node: &N, factors: &[N]) {
    if let Some(abs) = node.split_sign() {
        out.push('-');
        abs.write_at(out, PRODUCT);
        return;
    }
    for (i, f) in factors.iter().enumerate() {
        if i > 0 {
            out.push('*');
        }
        let min = if i == 0 && f.as_const().is_some() {
            PRODUCT
        } else {
            POWER
        };
        f.write_at(out, min);
    }
}

impl Render for RvExpr {
    fn level(&self) -> u8 {
        rv_level(self)
    }

    fn split_sign(&self) -> Option<Self> {
        RvExpr::split_sign(self)
    }

    fn as_const(&self) -> Option<&BigRational> {
        match self {
            RvExpr::Const(c) => Some(c),
            _ => None,
        }
    }

    fn write_node(&self, out: &mut String) {
        match self {
            RvExpr::Var(v) => out.push_str(v),
            RvExpr::Const(c) => write_const(out, c),
            RvExpr::Sum(ts) => write_sum(out, ts),
            RvExpr::Product(fs) => write_product(out, self, fs),
            RvExpr::Pow(b, k) => {
                b.write_at(out, ATOM);
                let _ = write!(out, "^{k}");
            }
            RvExpr::Embed(f) => f.write_node(out),
        }
    }
}

impl Render for FuncExpr {
    fn level(&self) -> u8 {
        func_level(self)
    }

    fn split_sign(&self) -> Option<Self> {
        FuncExpr::split_sign(self)
    }

    fn as_const(&self) -> Option<&BigRational> {
        match self {
            FuncExpr::Const(c) => Some(c),
            _ => None,
        }
    }

    fn write_node(&self, out: &mut String) {
        match self {
            FuncExpr::Moment(u) => {
                out.push_str("E[");
                u.write_node(out);
                out.push(']');
            }
            FuncExpr::Const(c) => write_const(out, c),
            FuncExpr::Sum(ts) => write_sum(out, ts),
            FuncExpr::Product(fs) => write_product(out, self, fs),
            FuncExpr::Pow(b, k) => {
                b.write_at(out, ATOM);
                let _ = write!(out, "^{k}");
            }
            FuncExpr::Recip(b) => {
                out.push_str("inv(");
                b.write_node(out);
                out.push(')');
            }
            FuncExpr::Smooth(g, b) => {
                out.push_str(g.name());
                out.push('(');
                b.write_node(out);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for RvExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_node(&mut s);
        f.write_str(&s)
    }
}

impl fmt::Display for FuncExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_node(&mut s);
        f.write_str(&s)
    }
}
