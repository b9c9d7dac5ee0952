//! Commutator brackets of expectation `P`, centering `T` and the pointwise
//! product `⊗`, with the nested brackets whose cyclic sum is the Jacobi
//! identity.
//!
//! ```text
//! [P,⊗](X,Y) = P(XY) − (PX)(PY)                       ∈ ℝ
//! [⊗,T](X,Y) = (TX)(TY) − T(XY)                       ∈ H
//! [T,P](X,Y) = (TX, TY)                               ∈ H×H
//!
//! [T,[P,⊗]]  = T(Cov(X,Y)) − Cov(TX,TY)
//! [P,[⊗,T]]  = Cov(X,Y) − (TX)(TY) + T(PX·PY)
//! [⊗,[T,P]]  = (TX)(TY) − T(PXY)
//! ```
//!
//! `T` applied to a scalar parameter is that parameter's efficient influence
//! curve, obtained from [`derive_eic`]. Scalar results are embedded as
//! constant vectors when added to vectors.
//!
//! Every operator exists twice: exactly on a [`FiniteProbSpace`] through
//! [`Brackets`], and symbolically over base variables `X`, `Y` in
//! [`symbolic`].

use std::sync::OnceLock;

use num::BigRational;
use serde::Serialize;

use crate::eic::derive_eic;
use crate::expr::{evaluate_rv, Binding, ExprError, FuncExpr, RvExpr};
use crate::measure::{FiniteProbSpace, MeasureError, RandVar};

pub const X: &str = "X";
pub const Y: &str = "Y";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BracketValue {
    Scalar(BigRational),
    Vector(RandVar),
    Pair(RandVar, RandVar),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Codomain {
    Real,
    Hilbert,
    HilbertPair,
}

impl BracketValue {
    pub fn codomain(&self) -> Codomain {
        match self {
            BracketValue::Scalar(_) => Codomain::Real,
            BracketValue::Vector(_) => Codomain::Hilbert,
            BracketValue::Pair(..) => Codomain::HilbertPair,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Bracket {
    /// `[P,⊗]`
    ExpectationProduct,
    /// `[⊗,T]`
    ProductCentering,
    /// `[T,P]`
    CenteringExpectation,
}

impl Bracket {
    pub const ALL: [Bracket; 3] = [
        Bracket::ExpectationProduct,
        Bracket::ProductCentering,
        Bracket::CenteringExpectation,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Bracket::ExpectationProduct => "[P,x]",
            Bracket::ProductCentering => "[x,T]",
            Bracket::CenteringExpectation => "[T,P]",
        }
    }

    pub fn codomain(self) -> Codomain {
        match self {
            Bracket::ExpectationProduct => Codomain::Real,
            Bracket::ProductCentering => Codomain::Hilbert,
            Bracket::CenteringExpectation => Codomain::HilbertPair,
        }
    }
}

/// Scalar parameters of `(X, Y)` that appear under `T` in the nested
/// brackets and corollaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    MeanX,
    MeanY,
    /// `P(XY)`
    MomentXY,
    /// `PX·PY`
    ProductOfMeans,
    /// `Cov(X,Y)`
    Covariance,
}

impl Parameter {
    const ALL: [Parameter; 5] = [
        Parameter::MeanX,
        Parameter::MeanY,
        Parameter::MomentXY,
        Parameter::ProductOfMeans,
        Parameter::Covariance,
    ];

    pub fn functional(self) -> FuncExpr {
        match self {
            Parameter::MeanX => FuncExpr::mean(X),
            Parameter::MeanY => FuncExpr::mean(Y),
            Parameter::MomentXY => FuncExpr::moment(RvExpr::var(X) * RvExpr::var(Y)),
            Parameter::ProductOfMeans => FuncExpr::mean(X) * FuncExpr::mean(Y),
            Parameter::Covariance => FuncExpr::covariance(X, Y),
        }
    }

    /// `T(ψ)`, the derived influence curve of this parameter.
    pub fn influence_curve(self) -> &'static RvExpr {
        static CURVES: OnceLock<Vec<RvExpr>> = OnceLock::new();
        let curves = CURVES.get_or_init(|| {
            Parameter::ALL
                .iter()
                .map(|p| {
                    derive_eic(&p.functional())
                        .expect("moment polynomials are differentiable")
                        .eic
                })
                .collect()
        });
        &curves[self as usize]
    }
}

/// How vectors are centered. Only [`Centering::Standard`] is correct; the
/// other variant exists to check that the verifiers catch a broken `T`.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    #[default]
    Standard,
    /// `f ↦ f + Ef`
    NegatedMean,
}

/// Exact bracket operators on a finite space.
#[derive(Debug, Clone, Copy, Default)]
pub struct Brackets {
    centering: Centering,
}

fn binding(x: &RandVar, y: &RandVar) -> Binding {
    [(X.to_string(), x.clone()), (Y.to_string(), y.clone())].into()
}

fn measure_only(e: ExprError) -> MeasureError {
    match e {
        ExprError::Measure(m) => m,
        other => unreachable!("polynomial influence curves evaluate totally: {other}"),
    }
}

impl Brackets {
    pub fn new() -> Self {
        Self::default()
    }

    #[doc(hidden)]
    pub fn with_centering(centering: Centering) -> Self {
        Brackets { centering }
    }

    pub fn centering(&self) -> Centering {
        self.centering
    }

    /// `T` on a vector.
    pub fn center(&self, space: &FiniteProbSpace, f: &RandVar) -> Result<RandVar, MeasureError> {
        match self.centering {
            Centering::Standard => space.center(f),
            Centering::NegatedMean => Ok(f.add(&space.embed(&space.expectation(f)?))?),
        }
    }

    /// `T` on a scalar parameter of `(X, Y)`, evaluated at this law.
    pub fn center_parameter(
        &self,
        param: Parameter,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<RandVar, MeasureError> {
        evaluate_rv(param.influence_curve(), space, &binding(x, y)).map_err(measure_only)
    }

    fn check(space: &FiniteProbSpace, x: &RandVar, y: &RandVar) -> Result<(), MeasureError> {
        space.check(x)?;
        space.check(y)
    }

    /// `[P,⊗](X,Y) = P(XY) − PX·PY`.
    pub fn p_prod(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<BigRational, MeasureError> {
        Self::check(space, x, y)?;
        Ok(space.expectation(&x.product(y)?)? - space.expectation(x)? * space.expectation(y)?)
    }

    /// `[⊗,T](X,Y) = (TX)(TY) − T(XY)`.
    pub fn prod_t(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<RandVar, MeasureError> {
        Self::check(space, x, y)?;
        let txty = self.center(space, x)?.product(&self.center(space, y)?)?;
        txty.sub(&self.center(space, &x.product(y)?)?)
    }

    /// `[T,P](X,Y) = (TX, TY)`; the `P∘T` term vanishes.
    pub fn t_p(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<(RandVar, RandVar), MeasureError> {
        Self::check(space, x, y)?;
        Ok((self.center(space, x)?, self.center(space, y)?))
    }

    pub fn bracket(
        &self,
        which: Bracket,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<BracketValue, MeasureError> {
        Ok(match which {
            Bracket::ExpectationProduct => BracketValue::Scalar(self.p_prod(space, x, y)?),
            Bracket::ProductCentering => BracketValue::Vector(self.prod_t(space, x, y)?),
            Bracket::CenteringExpectation => {
                let (a, b) = self.t_p(space, x, y)?;
                BracketValue::Pair(a, b)
            }
        })
    }

    /// `[T,[P,⊗]] = T(Cov(X,Y)) − Cov(TX,TY)`.
    pub fn nested_t_p_prod(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<RandVar, MeasureError> {
        Self::check(space, x, y)?;
        let t_cov = self.center_parameter(Parameter::Covariance, space, x, y)?;
        let (tx, ty) = self.t_p(space, x, y)?;
        t_cov.sub(&space.embed(&space.covariance(&tx, &ty)?))
    }

    /// `[P,[⊗,T]] = Cov(X,Y) − (TX)(TY) + T(PX·PY)`.
    pub fn nested_p_prod_t(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<RandVar, MeasureError> {
        Self::check(space, x, y)?;
        let cov = space.embed(&space.covariance(x, y)?);
        let (tx, ty) = self.t_p(space, x, y)?;
        let t_means = self.center_parameter(Parameter::ProductOfMeans, space, x, y)?;
        cov.sub(&tx.product(&ty)?)?.add(&t_means)
    }

    /// `[⊗,[T,P]] = (TX)(TY) − T(PXY)`, where `T(PXY) = XY − P(XY)` is the
    /// centered product.
    pub fn nested_prod_t_p(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<RandVar, MeasureError> {
        Self::check(space, x, y)?;
        let (tx, ty) = self.t_p(space, x, y)?;
        tx.product(&ty)?.sub(&self.center(space, &x.product(y)?)?)
    }

    /// The three nested brackets, in cyclic order.
    pub fn lemma_pieces(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<[RandVar; 3], MeasureError> {
        Ok([
            self.nested_t_p_prod(space, x, y)?,
            self.nested_p_prod_t(space, x, y)?,
            self.nested_prod_t_p(space, x, y)?,
        ])
    }

    /// `[T,[P,⊗]] + [P,[⊗,T]] + [⊗,[T,P]]`.
    pub fn jacobi_sum(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<RandVar, MeasureError> {
        let [a, b, c] = self.lemma_pieces(space, x, y)?;
        a.add(&b)?.add(&c)
    }

    /// `(T(PX)·T(PY) + T(PX·PY), T(PXY) + Cov)`.
    pub fn corollary_leibniz(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<(RandVar, RandVar), MeasureError> {
        Self::check(space, x, y)?;
        let t = |p| self.center_parameter(p, space, x, y);
        let lhs = t(Parameter::MeanX)?
            .product(&t(Parameter::MeanY)?)?
            .add(&t(Parameter::ProductOfMeans)?)?;
        let rhs = t(Parameter::MomentXY)?.add(&space.embed(&space.covariance(x, y)?))?;
        Ok((lhs, rhs))
    }

    /// `(T(PX)·T(PY), T(Cov) + Cov)`.
    pub fn corollary_cov(
        &self,
        space: &FiniteProbSpace,
        x: &RandVar,
        y: &RandVar,
    ) -> Result<(RandVar, RandVar), MeasureError> {
        Self::check(space, x, y)?;
        let t = |p| self.center_parameter(p, space, x, y);
        let lhs = t(Parameter::MeanX)?.product(&t(Parameter::MeanY)?)?;
        let rhs = t(Parameter::Covariance)?.add(&space.embed(&space.covariance(x, y)?))?;
        Ok((lhs, rhs))
    }
}

pub fn bracket_p_prod(
    space: &FiniteProbSpace,
    x: &RandVar,
    y: &RandVar,
) -> Result<BigRational, MeasureError> {
    Brackets::new().p_prod(space, x, y)
}

pub fn bracket_prod_t(
    space: &FiniteProbSpace,
    x: &RandVar,
    y: &RandVar,
) -> Result<RandVar, MeasureError> {
    Brackets::new().prod_t(space, x, y)
}

pub fn bracket_t_p(
    space: &FiniteProbSpace,
    x: &RandVar,
    y: &RandVar,
) -> Result<(RandVar, RandVar), MeasureError> {
    Brackets::new().t_p(space, x, y)
}

pub fn jacobi_sum(
    space: &FiniteProbSpace,
    x: &RandVar,
    y: &RandVar,
) -> Result<RandVar, MeasureError> {
    Brackets::new().jacobi_sum(space, x, y)
}

/// The same operators as expressions over base variables `X` and `Y`.
pub mod symbolic {
    use std::ops::{Add, Mul, Sub};

    use super::{Parameter, X, Y};
    use crate::expr::{FuncExpr, RvExpr};

    pub fn x() -> RvExpr {
        RvExpr::var(X)
    }

    pub fn y() -> RvExpr {
        RvExpr::var(Y)
    }

    pub fn tx() -> RvExpr {
        x().centered()
    }

    pub fn ty() -> RvExpr {
        y().centered()
    }

    pub fn t(param: Parameter) -> RvExpr {
        param.influence_curve().clone()
    }

    pub fn cov() -> RvExpr {
        RvExpr::embed(FuncExpr::covariance(X, Y))
    }

    /// `Cov(U, V)` for arbitrary random-variable expressions.
    pub fn covariance_of(u: RvExpr, v: RvExpr) -> FuncExpr {
        FuncExpr::moment(u.clone().mul(v.clone())).sub(FuncExpr::moment(u).mul(FuncExpr::moment(v)))
    }

    pub fn p_prod() -> FuncExpr {
        covariance_of(x(), y())
    }

    pub fn prod_t() -> RvExpr {
        tx().mul(ty()).sub(x().mul(y()).centered())
    }

    pub fn t_p() -> (RvExpr, RvExpr) {
        (tx(), ty())
    }

    pub fn nested_t_p_prod() -> RvExpr {
        t(Parameter::Covariance).sub(RvExpr::embed(covariance_of(tx(), ty())))
    }

    pub fn nested_p_prod_t() -> RvExpr {
        cov().sub(tx().mul(ty())).add(t(Parameter::ProductOfMeans))
    }

    pub fn nested_prod_t_p() -> RvExpr {
        tx().mul(ty()).sub(x().mul(y()).centered())
    }

    pub fn jacobi_sum() -> RvExpr {
        RvExpr::sum(vec![
            nested_t_p_prod(),
            nested_p_prod_t(),
            nested_prod_t_p(),
        ])
    }

    pub fn corollary_leibniz() -> (RvExpr, RvExpr) {
        (
            t(Parameter::MeanX)
                .mul(t(Parameter::MeanY))
                .add(t(Parameter::ProductOfMeans)),
            t(Parameter::MomentXY).add(cov()),
        )
    }

    pub fn corollary_cov() -> (RvExpr, RvExpr) {
        (
            t(Parameter::MeanX).mul(t(Parameter::MeanY)),
            t(Parameter::Covariance).add(cov()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::canonicalize_rv;
    use crate::measure::ratio;
    use num::Zero;

    fn halves() -> FiniteProbSpace {
        FiniteProbSpace::from_weights(vec![ratio(1, 2), ratio(1, 2)]).unwrap()
    }

    fn rv(v: &[(i64, i64)]) -> RandVar {
        RandVar::new(v.iter().map(|&(n, d)| ratio(n, d)).collect())
    }

    fn ints(v: &[i64]) -> RandVar {
        RandVar::from_integers(v.iter().copied())
    }

    #[test]
    fn simple_brackets() {
        let s = halves();
        let x = ints(&[0, 1]);
        assert_eq!(bracket_p_prod(&s, &x, &x).unwrap(), ratio(1, 4));
        let c = s.embed(&ratio(3, 1));
        assert!(bracket_p_prod(&s, &c, &x).unwrap().is_zero());

        assert_eq!(bracket_prod_t(&s, &x, &x).unwrap(), rv(&[(3, 4), (-1, 4)]));
        let one = s.embed(&ratio(1, 1));
        assert_eq!(
            bracket_prod_t(&s, &one, &x).unwrap(),
            rv(&[(1, 2), (-1, 2)])
        );

        let (a, b) = bracket_t_p(&s, &x, &ints(&[1, 0])).unwrap();
        assert_eq!(a, rv(&[(-1, 2), (1, 2)]));
        assert_eq!(b, rv(&[(1, 2), (-1, 2)]));
        let (a, b) = bracket_t_p(&s, &c, &c).unwrap();
        assert!(a.is_zero() && b.is_zero());

        let bad = ints(&[1, 2, 3]);
        assert!(matches!(
            bracket_p_prod(&s, &x, &bad),
            Err(MeasureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn codomains_match_tags() {
        let s = halves();
        let x = ints(&[0, 1]);
        for b in Bracket::ALL {
            let v = Brackets::new().bracket(b, &s, &x, &x).unwrap();
            assert_eq!(v.codomain(), b.codomain());
        }
    }

    #[test]
    fn nested_brackets_on_two_points() {
        let s = halves();
        let x = ints(&[0, 1]);
        let br = Brackets::new();
        assert_eq!(
            br.nested_t_p_prod(&s, &x, &x).unwrap(),
            rv(&[(-1, 4), (-1, 4)])
        );
        // Cov - (TX)^2 + T(PX PX) = 1/4 - 1/4 + 2*(1/2)*(X - 1/2)
        assert_eq!(
            br.nested_p_prod_t(&s, &x, &x).unwrap(),
            rv(&[(-1, 2), (1, 2)])
        );
        // (TX)^2 - (X^2 - 1/2) = (1/4 + 1/2, 1/4 - 1/2)
        assert_eq!(
            br.nested_prod_t_p(&s, &x, &x).unwrap(),
            rv(&[(3, 4), (-1, 4)])
        );
        assert!(br.jacobi_sum(&s, &x, &x).unwrap().is_zero());
        let c = s.embed(&ratio(2, 1));
        assert!(br.jacobi_sum(&s, &c, &c).unwrap().is_zero());
        for p in br.lemma_pieces(&s, &c, &c).unwrap() {
            assert!(p.is_zero());
        }
    }

    #[test]
    fn corollaries_on_two_points() {
        let s = halves();
        let x = ints(&[0, 1]);
        let br = Brackets::new();
        let (l, r) = br.corollary_leibniz(&s, &x, &x).unwrap();
        assert_eq!(l, rv(&[(-1, 4), (3, 4)]));
        assert_eq!(l, r);
        let (l, r) = br.corollary_cov(&s, &x, &x).unwrap();
        assert_eq!(l, rv(&[(1, 4), (1, 4)]));
        assert_eq!(l, r);
    }

    #[test]
    fn negated_centering_breaks_jacobi() {
        let s = halves();
        let x = ints(&[1, 2]);
        let y = ints(&[3, -1]);
        let bad = Brackets::with_centering(Centering::NegatedMean);
        let sum = bad.jacobi_sum(&s, &x, &y).unwrap();
        // -2 P(XY), with P(XY) = (3 - 2)/2
        assert_eq!(sum, s.embed(&ratio(-1, 1)));
        assert!(Brackets::new().jacobi_sum(&s, &x, &y).unwrap().is_zero());
    }

    #[test]
    fn symbolic_jacobi_is_zero() {
        assert!(canonicalize_rv(&symbolic::jacobi_sum()).unwrap().is_zero());
        let (l, r) = symbolic::corollary_cov();
        assert_eq!(canonicalize_rv(&l).unwrap(), canonicalize_rv(&r).unwrap());
    }
}
