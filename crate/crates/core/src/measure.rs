//! Exact finite model of `L²(P)`.
//!
//! A [`FiniteProbSpace`] is a finite outcome set with strictly positive
//! rational weights summing to one. Random variables are positional value
//! vectors over its outcomes. Everything here is exact: there is no floating
//! point anywhere in this module.

use std::collections::HashSet;
use std::fmt;

use num::{BigRational, One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("probability space must have at least one outcome")]
    Empty,
    #[error("{labels} outcome labels for {weights} weights")]
    LabelCount { labels: usize, weights: usize },
    #[error("weight of outcome `{outcome}` is {weight}, weights must be strictly positive")]
    NonPositiveWeight {
        outcome: String,
        weight: BigRational,
    },
    #[error("weights sum to {0}, not 1")]
    NotNormalized(BigRational),
    #[error("duplicate outcome label `{0}`")]
    DuplicateOutcome(String),
    #[error("dimension mismatch: space has {expected} outcomes, random variable has {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A finite probability space with exact rational weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteProbSpace {
    outcomes: Vec<String>,
    weights: Vec<BigRational>,
}

/// An element of `H = L²(P)`: one exact value per outcome.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RandVar {
    values: Vec<BigRational>,
}

/// `f = c·1 + g` with `E[g] = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub constant_part: BigRational,
    pub centered_part: RandVar,
}

impl FiniteProbSpace {
    pub fn new(outcomes: Vec<String>, weights: Vec<BigRational>) -> Result<Self, MeasureError> {
        if weights.is_empty() {
            return Err(MeasureError::Empty);
        }
        if outcomes.len() != weights.len() {
            return Err(MeasureError::LabelCount {
                labels: outcomes.len(),
                weights: weights.len(),
            });
        }
        let mut seen = HashSet::with_capacity(outcomes.len());
        for label in &outcomes {
            if !seen.insert(label.as_str()) {
                return Err(MeasureError::DuplicateOutcome(label.clone()));
            }
        }
        for (label, w) in outcomes.iter().zip(&weights) {
            if !w.is_positive() {
                return Err(MeasureError::NonPositiveWeight {
                    outcome: label.clone(),
                    weight: w.clone(),
                });
            }
        }
        let total: BigRational = weights.iter().sum();
        if !total.is_one() {
            return Err(MeasureError::NotNormalized(total));
        }
        Ok(Self { outcomes, weights })
    }

    /// Space with outcomes labelled `w0, w1, ...`.
    pub fn from_weights(weights: Vec<BigRational>) -> Result<Self, MeasureError> {
        let outcomes = (0..weights.len()).map(|i| format!("w{i}")).collect();
        Self::new(outcomes, weights)
    }

    /// Normalizes positive integer masses into weights.
    pub fn from_masses(masses: &[u64]) -> Result<Self, MeasureError> {
        let total: u64 = masses.iter().sum();
        if total == 0 {
            return Err(MeasureError::Empty);
        }
        let weights = masses
            .iter()
            .map(|&m| BigRational::new(m.into(), total.into()))
            .collect();
        Self::from_weights(weights)
    }

    pub fn uniform(n: usize) -> Result<Self, MeasureError> {
        Self::from_masses(&vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn check(&self, f: &RandVar) -> Result<(), MeasureError> {
        if f.len() == self.len() {
            Ok(())
        } else {
            Err(MeasureError::DimensionMismatch {
                expected: self.len(),
                found: f.len(),
            })
        }
    }

    /// `P f = Σ wᵢ fᵢ`.
    pub fn expectation(&self, f: &RandVar) -> Result<BigRational, MeasureError> {
        self.check(f)?;
        Ok(self.weights.iter().zip(&f.values).map(|(w, v)| w * v).sum())
    }

    /// `η(a) = a·1`.
    pub fn embed(&self, a: &BigRational) -> RandVar {
        RandVar::constant(a.clone(), self.len())
    }

    /// `T f = f − (P f)·1`.
    pub fn center(&self, f: &RandVar) -> Result<RandVar, MeasureError> {
        let mean = self.expectation(f)?;
        Ok(f.map(|v| v - &mean))
    }

    /// `⟨f, g⟩ = P(fg)`.
    pub fn inner(&self, f: &RandVar, g: &RandVar) -> Result<BigRational, MeasureError> {
        self.check(f)?;
        self.check(g)?;
        Ok(self
            .weights
            .iter()
            .zip(f.values.iter().zip(&g.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    pub fn covariance(&self, f: &RandVar, g: &RandVar) -> Result<BigRational, MeasureError> {
        let fg = self.inner(f, g)?;
        Ok(fg - self.expectation(f)? * self.expectation(g)?)
    }

    pub fn variance(&self, f: &RandVar) -> Result<BigRational, MeasureError> {
        self.covariance(f, f)
    }

    /// Splits `f` along `H = η(ℝ) ⊕ ker P`.
    pub fn decompose(&self, f: &RandVar) -> Result<Decomposition, MeasureError> {
        let constant_part = self.expectation(f)?;
        let centered_part = f.map(|v| v - &constant_part);
        Ok(Decomposition {
            constant_part,
            centered_part,
        })
    }
}

impl Decomposition {
    pub fn reconstruct(&self) -> RandVar {
        self.centered_part.map(|v| v + &self.constant_part)
    }
}

impl RandVar {
    pub fn new(values: Vec<BigRational>) -> Self {
        Self { values }
    }

    pub fn from_integers<I: IntoIterator<Item = i64>>(values: I) -> Self {
        Self::new(
            values
                .into_iter()
                .map(BigRational::from_integer_i64)
                .collect(),
        )
    }

    pub fn constant(a: BigRational, len: usize) -> Self {
        Self::new(vec![a; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self::constant(BigRational::zero(), len)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    pub fn into_values(self) -> Vec<BigRational> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    pub fn map(&self, f: impl FnMut(&BigRational) -> BigRational) -> Self {
        Self::new(self.values.iter().map(f).collect())
    }

    fn zip_with(
        &self,
        other: &Self,
        op: impl Fn(&BigRational, &BigRational) -> BigRational,
    ) -> Result<Self, MeasureError> {
        if self.len() != other.len() {
            return Err(MeasureError::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| op(a, b))
                .collect(),
        ))
    }

    /// The pointwise product `f ⊗ g`.
    pub fn product(&self, other: &Self) -> Result<Self, MeasureError> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self, MeasureError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MeasureError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, a: &BigRational) -> Self {
        self.map(|v| v * a)
    }
}

/// Convenience for building rationals from machine integers.
pub trait FromIntegerI64 {
    fn from_integer_i64(n: i64) -> Self;
}

impl FromIntegerI64 for BigRational {
    fn from_integer_i64(n: i64) -> Self {
        BigRational::from_integer(n.into())
    }
}

/// `n / d` as an exact rational. Panics when `d == 0`.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

impl fmt::Display for RandVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for FiniteProbSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (o, w)) in self.outcomes.iter().zip(&self.weights).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{o}: {w}")?;
        }
        f.write_str("}")
    }
}
