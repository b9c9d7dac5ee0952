//! Expanded multivariate polynomials and rational functions over atoms.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num::{BigRational, One, Zero};

use super::{ExprError, FuncExpr, RvExpr, SmoothFn};

/// An indeterminate of the canonical form.
///
/// The derived order puts base variables first (alphabetically), then
/// moment atoms ordered by the rendering of their inner monomial, then
/// opaque smooth applications.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Var(String),
    /// `P[m]` for a monomial `m` in base variables.
    Moment {
        key: String,
        factors: Vec<(String, u32)>,
    },
    /// `g(ψ)` for a smooth `g`, keyed by the canonical rendering of `ψ`.
    Opaque {
        key: String,
        func: SmoothFn,
        arg: Box<FuncExpr>,
    },
}

impl Atom {
    pub fn var(name: &str) -> Self {
        Atom::Var(name.to_string())
    }

    pub(crate) fn moment(factors: Vec<(String, u32)>) -> Self {
        let key = render_var_monomial(&factors);
        Atom::Moment { key, factors }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Atom::Var(_))
    }

    fn to_rv(&self) -> RvExpr {
        match self {
            Atom::Var(v) => RvExpr::var(v.clone()),
            other => RvExpr::Embed(Box::new(other.to_func().expect("scalar atom"))),
        }
    }

    fn to_func(&self) -> Option<FuncExpr> {
        match self {
            Atom::Var(_) => None,
            Atom::Moment { factors, .. } => Some(FuncExpr::Moment(Box::new(RvExpr::product(
                factors
                    .iter()
                    .map(|(v, k)| RvExpr::pow(RvExpr::var(v.clone()), *k))
                    .collect(),
            )))),
            Atom::Opaque { func, arg, .. } => Some(FuncExpr::smooth(*func, (**arg).clone())),
        }
    }
}

fn render_var_monomial(factors: &[(String, u32)]) -> String {
    factors
        .iter()
        .map(|(v, k)| {
            if *k == 1 {
                v.clone()
            } else {
                format!("{v}^{k}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

/// A power product of atoms; exponents are positive and atoms sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Atom, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn atom(a: Atom) -> Self {
        Monomial(vec![(a, 1)])
    }

    pub fn factors(&self) -> &[(Atom, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, k)| k).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Splits into the base-variable part and the scalar (moment/opaque) part.
    pub(crate) fn split_vars(&self) -> (Vec<(String, u32)>, Monomial) {
        let mut vars = Vec::new();
        let mut rest = Vec::new();
        for (a, k) in &self.0 {
            match a {
                Atom::Var(v) => vars.push((v.clone(), *k)),
                other => rest.push((other.clone(), *k)),
            }
        }
        (vars, Monomial(rest))
    }
}

/// Graded lexicographic order.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            for (a, b) in self.0.iter().zip(&other.0) {
                match a.0.cmp(&b.0) {
                    // `self` has a positive power of an earlier atom.
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match a.1.cmp(&b.1) {
                        Ordering::Equal => {}
                        ord => return ord,
                    },
                }
            }
            self.0.len().cmp(&other.0.len())
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Expanded polynomial with exact coefficients; no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn atom(a: Atom) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::atom(a), BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.is_one())
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn leading_coefficient(&self) -> Option<&BigRational> {
        self.terms.iter().next_back().map(|(_, c)| c)
    }

    pub fn has_var_atoms(&self) -> bool {
        self.terms
            .keys()
            .any(|m| m.factors().iter().any(|(a, _)| a.is_var()))
    }

    pub(crate) fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&-BigRational::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    fn to_rv(&self) -> RvExpr {
        RvExpr::sum(
            self.terms
                .iter()
                .rev()
                .map(|(m, c)| {
                    let mut fs = vec![RvExpr::Const(c.clone())];
                    fs.extend(m.factors().iter().map(|(a, k)| RvExpr::pow(a.to_rv(), *k)));
                    RvExpr::product(fs)
                })
                .collect(),
        )
    }

    fn to_func(&self) -> Result<FuncExpr, ExprError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in self.terms.iter().rev() {
            let mut fs = vec![FuncExpr::Const(c.clone())];
            for (a, k) in m.factors() {
                let f = a
                    .to_func()
                    .ok_or_else(|| ExprError::UnboundVariable(format!("{a:?}")))?;
                fs.push(FuncExpr::pow(f, *k));
            }
            terms.push(FuncExpr::product(fs));
        }
        Ok(FuncExpr::sum(terms))
    }
}

/// A rational function `num / den` in fully expanded form.
///
/// The denominator is normalized to leading coefficient one, and constant
/// denominators are folded into the numerator, so polynomial forms compare
/// as plain term lists. Equality is decided by cross-multiplication.
#[derive(Debug, Clone)]
pub struct CanonForm {
    num: Poly,
    den: Poly,
}

impl CanonForm {
    pub fn from_poly(p: Poly) -> Self {
        CanonForm {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn constant(c: BigRational) -> Self {
        Self::from_poly(Poly::constant(c))
    }

    pub fn zero() -> Self {
        Self::from_poly(Poly::zero())
    }

    pub fn atom(a: Atom) -> Self {
        Self::from_poly(Poly::atom(a))
    }

    fn normalized(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        if let Some(c) = den.as_constant() {
            return Self::from_poly(num.scale(&c.recip()));
        }
        if num == den {
            return Self::constant(BigRational::one());
        }
        let lead = den
            .leading_coefficient()
            .cloned()
            .unwrap_or_else(BigRational::one);
        let inv = lead.recip();
        CanonForm {
            num: num.scale(&inv),
            den: den.scale(&inv),
        }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_polynomial() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.den == other.den {
            return Self::normalized(self.num.add(&other.num), self.den.clone());
        }
        Self::normalized(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn neg(&self) -> Self {
        CanonForm {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.den.is_one() && other.den.is_one() {
            return Self::from_poly(self.num.mul(&other.num));
        }
        Self::normalized(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn pow(&self, k: u32) -> Self {
        if self.den.is_one() {
            return Self::from_poly(self.num.pow(k));
        }
        Self::normalized(self.num.pow(k), self.den.pow(k))
    }

    /// `None` when the form is zero.
    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Self::normalized(self.den.clone(), self.num.clone()))
        }
    }

    /// Rebuilds an expression denoting this form.
    pub fn to_rv_expr(&self) -> RvExpr {
        let num = self.num.to_rv();
        if self.den.is_one() {
            return num;
        }
        let den = self
            .den
            .to_func()
            .expect("denominators carry no base variables");
        RvExpr::product(vec![num, RvExpr::embed(FuncExpr::recip(den))])
    }

    /// Rebuilds a functional; fails if base variables occur outside moments.
    pub fn to_func_expr(&self) -> Result<FuncExpr, ExprError> {
        let num = self.num.to_func()?;
        if self.den.is_one() {
            return Ok(num);
        }
        Ok(FuncExpr::product(vec![
            num,
            FuncExpr::recip(self.den.to_func()?),
        ]))
    }
}

impl PartialEq for CanonForm {
    fn eq(&self, other: &Self) -> bool {
        if self.den == other.den {
            return self.num == other.num;
        }
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }
}

impl Eq for CanonForm {}

impl fmt::Display for CanonForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_rv_expr())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::atom(Atom::var("X"))
    }
    fn y() -> Poly {
        Poly::atom(Atom::var("Y"))
    }

    #[test]
    fn graded_lex_order() {
        let mx = Monomial::atom(Atom::var("X"));
        let my = Monomial::atom(Atom::var("Y"));
        let xy = mx.mul(&my);
        let xx = mx.mul(&mx);
        assert!(
            mx > my,
            "X precedes Y, so X is the larger degree-one monomial"
        );
        assert!(xy > mx);
        assert!(xx > xy);
        assert!(Monomial::one() < my);
        let moment = Monomial::atom(Atom::moment(vec![("X".into(), 1)]));
        assert!(my > moment);
    }

    #[test]
    fn commutativity_and_expansion() {
        assert!(x().mul(&y()).sub(&y().mul(&x())).is_zero());
        let sq = x().add(&y()).pow(2);
        let expanded = x()
            .mul(&x())
            .add(&x().mul(&y()).scale(&BigRational::from_integer(2.into())))
            .add(&y().mul(&y()));
        assert_eq!(sq, expanded);
    }

    #[test]
    fn rational_forms() {
        let a = CanonForm::from_poly(x());
        let inv = a.recip().unwrap();
        assert_eq!(a.mul(&inv), CanonForm::constant(BigRational::one()));
        assert!(CanonForm::zero().recip().is_none());
        let half = CanonForm::constant(BigRational::new(1.into(), 2.into()));
        // (X/2) * 2 / X == 1 regardless of denominator bookkeeping
        let lhs = a
            .mul(&half)
            .mul(&CanonForm::constant(BigRational::from_integer(2.into())))
            .mul(&inv);
        assert_eq!(lhs.as_constant(), Some(BigRational::one()));
        // cross-multiplied equality: 1/(2X) vs (1/2)/X
        let l = CanonForm::from_poly(x().scale(&BigRational::from_integer(2.into())))
            .recip()
            .unwrap();
        let r = half.mul(&inv);
        assert_eq!(l, r);
        assert_eq!(
            l.denominator().leading_coefficient(),
            Some(&BigRational::one())
        );
    }
}
