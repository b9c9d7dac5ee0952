//! Exact operator algebra for efficient influence curves.
//!
//! The crate models `L²(P)` on finite probability spaces with exact
//! rational arithmetic and builds on it:
//!
//! - [`measure`]: the expectation, centering, embedding and product operators;
//! - [`expr`]: symbolic random variables and functionals with a canonical form;
//! - [`syntax`]: the textual grammar for functionals;
//! - [`eic`]: derivation of efficient influence curves by the gradient algebra,
//!   with an exact pathwise-derivative certificate;
//! - [`bracket`] and [`identities`]: the commutator brackets, their nested
//!   forms and the Jacobi identity, checked exactly and symbolically;
//! - [`harness`]: empirical estimation and a Monte Carlo efficiency study.

pub mod bracket;
pub mod eic;
pub mod exec;
pub mod expr;
pub mod harness;
pub mod identities;
pub mod measure;
pub mod random;
pub mod report;
pub mod syntax;

pub use expr::{CanonForm, FuncExpr, RvExpr};
pub use measure::{FiniteProbSpace, RandVar};
