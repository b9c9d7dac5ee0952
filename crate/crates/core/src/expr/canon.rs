use num::{BigRational, One};

use super::poly::{Atom, CanonForm, Poly};
use super::{ExprError, FuncExpr, RvExpr};

/// Fully expanded normal form of a random-variable expression.
///
/// Atoms are base variables and moment atoms `P[m]`; embedded functionals
/// are expanded in place.
pub fn canonicalize_rv(e: &RvExpr) -> Result<CanonForm, ExprError> {
    Ok(match e {
        RvExpr::Var(v) => CanonForm::atom(Atom::var(v)),
        RvExpr::Const(c) => CanonForm::constant(c.clone()),
        RvExpr::Sum(ts) => {
            let mut acc = CanonForm::zero();
            for t in ts {
                acc = acc.add(&canonicalize_rv(t)?);
            }
            acc
        }
        RvExpr::Product(fs) => {
            let mut acc = CanonForm::constant(BigRational::one());
            for f in fs {
                acc = acc.mul(&canonicalize_rv(f)?);
            }
            acc
        }
        RvExpr::Pow(b, k) => canonicalize_rv(b)?.pow(*k),
        RvExpr::Embed(psi) => canonicalize_func(psi)?,
    })
}

/// Normal form of a functional over moment atoms only.
pub fn canonicalize_func(psi: &FuncExpr) -> Result<CanonForm, ExprError> {
    Ok(match psi {
        FuncExpr::Moment(u) => moment_of(&canonicalize_rv(u)?),
        FuncExpr::Const(c) => CanonForm::constant(c.clone()),
        FuncExpr::Sum(ts) => {
            let mut acc = CanonForm::zero();
            for t in ts {
                acc = acc.add(&canonicalize_func(t)?);
            }
            acc
        }
        FuncExpr::Product(fs) => {
            let mut acc = CanonForm::constant(BigRational::one());
            for f in fs {
                acc = acc.mul(&canonicalize_func(f)?);
            }
            acc
        }
        FuncExpr::Pow(b, k) => canonicalize_func(b)?.pow(*k),
        FuncExpr::Recip(b) => canonicalize_func(b)?
            .recip()
            .ok_or_else(|| ExprError::ZeroReciprocal(b.to_string()))?,
        FuncExpr::Smooth(g, b) => {
            let inner = canonicalize_func(b)?;
            let arg = inner.to_func_expr()?;
            CanonForm::atom(Atom::Opaque {
                key: format!("{}({})", g.name(), inner),
                func: *g,
                arg: Box::new(arg),
            })
        }
    })
}

/// Applies `P` to a canonical random variable by linearity: scalar atoms
/// factor out, and each base-variable monomial becomes a moment atom.
pub fn moment_of(form: &CanonForm) -> CanonForm {
    debug_assert!(!form.denominator().has_var_atoms());
    let mut num = Poly::zero();
    for (m, c) in form.numerator().terms() {
        let (vars, scalar) = m.split_vars();
        let mut term = Poly::zero();
        term.add_term(scalar, c.clone());
        if !vars.is_empty() {
            term = term.mul(&Poly::atom(Atom::moment(vars)));
        }
        num = num.add(&term);
    }
    CanonForm::from_poly(num).mul(
        &CanonForm::from_poly(form.denominator().clone())
            .recip()
            .expect("canonical denominators are nonzero"),
    )
}

/// Rewrites `ψ` so that every moment argument is a monomial in base
/// variables, distributing `P` over sums and pulling embedded scalars out.
///
/// Two functionals denote the same parameter exactly when their normalized
/// forms canonicalize identically.
pub fn normalize_functional(psi: &FuncExpr) -> Result<FuncExpr, ExprError> {
    Ok(match psi {
        FuncExpr::Const(c) => FuncExpr::Const(c.clone()),
        FuncExpr::Moment(u) => moment_of(&canonicalize_rv(u)?).to_func_expr()?,
        FuncExpr::Sum(ts) => FuncExpr::sum(
            ts.iter()
                .map(normalize_functional)
                .collect::<Result<_, _>>()?,
        ),
        FuncExpr::Product(fs) => FuncExpr::product(
            fs.iter()
                .map(normalize_functional)
                .collect::<Result<_, _>>()?,
        ),
        FuncExpr::Pow(b, k) => FuncExpr::pow(normalize_functional(b)?, *k),
        FuncExpr::Recip(b) => {
            let inner = normalize_functional(b)?;
            if canonicalize_func(&inner)?.is_zero() {
                return Err(ExprError::ZeroReciprocal(b.to_string()));
            }
            FuncExpr::recip(inner)
        }
        FuncExpr::Smooth(g, b) => FuncExpr::smooth(*g, normalize_functional(b)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ratio;
    use std::ops::{Mul, Neg, Sub};

    fn x() -> RvExpr {
        RvExpr::var("X")
    }
    fn y() -> RvExpr {
        RvExpr::var("Y")
    }
    fn mean(v: &str) -> FuncExpr {
        FuncExpr::mean(v)
    }

    #[test]
    fn variance_normalizes_to_second_moment_minus_square() {
        let mu = RvExpr::embed(mean("X"));
        let psi = FuncExpr::moment(RvExpr::pow(x().sub(mu), 2));
        let norm = normalize_functional(&psi).unwrap();
        assert_eq!(
            canonicalize_func(&norm).unwrap(),
            canonicalize_func(&FuncExpr::variance("X")).unwrap()
        );
        assert!(norm.to_string().contains("E[X^2]"));
    }

    #[test]
    fn moment_of_constant_and_scalar_factor() {
        assert_eq!(
            normalize_functional(&FuncExpr::Moment(Box::new(RvExpr::Const(ratio(3, 2))))).unwrap(),
            FuncExpr::Const(ratio(3, 2))
        );
        let psi = FuncExpr::moment(x().mul(RvExpr::embed(mean("Y"))));
        let norm = normalize_functional(&psi).unwrap();
        assert_eq!(
            canonicalize_func(&norm).unwrap(),
            canonicalize_func(&mean("X").mul(mean("Y"))).unwrap()
        );
    }

    #[test]
    fn zero_reciprocal_is_rejected() {
        let psi = FuncExpr::recip(mean("X").sub(mean("X")));
        assert!(matches!(
            normalize_functional(&psi),
            Err(ExprError::ZeroReciprocal(_))
        ));
        assert!(matches!(
            canonicalize_func(&psi),
            Err(ExprError::ZeroReciprocal(_))
        ));
    }

    #[test]
    fn rv_forms() {
        assert!(canonicalize_rv(&x().mul(y()).sub(y().mul(x())))
            .unwrap()
            .is_zero());
        assert!(canonicalize_rv(&RvExpr::pow(x(), 2).sub(x().mul(x())))
            .unwrap()
            .is_zero());
        let tx = x().centered();
        let ty = y().centered();
        let got = canonicalize_rv(&tx.mul(ty)).unwrap();
        let mx = RvExpr::embed(mean("X"));
        let my = RvExpr::embed(mean("Y"));
        let want = RvExpr::sum(vec![
            x().mul(y()),
            x().mul(my.clone()).neg(),
            y().mul(mx.clone()).neg(),
            mx.mul(my),
        ]);
        assert_eq!(got, canonicalize_rv(&want).unwrap());
    }

    #[test]
    fn func_forms() {
        let cov = canonicalize_func(&FuncExpr::covariance("X", "Y")).unwrap();
        assert_eq!(cov.to_string(), "-E[X]*E[Y] + E[X*Y]");
        let v = FuncExpr::variance("X");
        assert!(canonicalize_func(&v.clone().sub(v)).unwrap().is_zero());
        let unit = FuncExpr::recip(mean("X")).mul(mean("X"));
        assert_eq!(
            canonicalize_func(&unit).unwrap(),
            CanonForm::constant(BigRational::one())
        );
    }
}
