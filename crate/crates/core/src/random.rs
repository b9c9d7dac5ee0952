//! Seeded generation of random finite spaces, variables and scores.
//!
//! Every trial or replicate `i` of a run with seed `s` draws from its own
//! ChaCha8 stream seeded with `splitmix64(s ^ splitmix64(i))`. Streams are
//! therefore independent of execution order and thread count.

use std::ops::RangeInclusive;

use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::Binding;
use crate::measure::{FiniteProbSpace, RandVar};

/// One round of the splitmix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}

/// Shape of randomly generated instances.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub outcomes: RangeInclusive<usize>,
    pub values: RangeInclusive<i64>,
    /// Unnormalized integer masses; weights are `mass / total`.
    pub masses: RangeInclusive<u64>,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            outcomes: 2..=8,
            values: -5..=5,
            masses: 1..=20,
        }
    }
}

impl InstanceSpec {
    pub fn with_max_outcomes(max: usize) -> Self {
        let max = max.max(1);
        InstanceSpec {
            outcomes: 2.min(max)..=max,
            ..Self::default()
        }
    }
}

/// A random law together with values for a set of base variables.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: FiniteProbSpace,
    pub binding: Binding,
}

impl Instance {
    pub fn var(&self, name: &str) -> &RandVar {
        &self.binding[name]
    }
}

pub fn random_space<R: Rng>(rng: &mut R, spec: &InstanceSpec) -> FiniteProbSpace {
    let n = rng.random_range(spec.outcomes.clone());
    let masses: Vec<u64> = (0..n)
        .map(|_| rng.random_range(spec.masses.clone()))
        .collect();
    FiniteProbSpace::from_masses(&masses).expect("positive masses")
}

pub fn random_rv<R: Rng>(rng: &mut R, len: usize, spec: &InstanceSpec) -> RandVar {
    RandVar::from_integers((0..len).map(|_| rng.random_range(spec.values.clone())))
}

pub fn random_rational<R: Rng>(rng: &mut R) -> BigRational {
    let n: i64 = rng.random_range(-9..=9);
    let d: i64 = rng.random_range(1..=9);
    BigRational::new(n.into(), d.into())
}

pub fn random_instance<R: Rng, S: AsRef<str>>(
    rng: &mut R,
    vars: &[S],
    spec: &InstanceSpec,
) -> Instance {
    let space = random_space(rng, spec);
    let binding = vars
        .iter()
        .map(|v| (v.as_ref().to_string(), random_rv(rng, space.len(), spec)))
        .collect();
    Instance { space, binding }
}

/// A mean-zero direction: the centered version of a random integer vector.
pub fn random_score<R: Rng>(rng: &mut R, space: &FiniteProbSpace, spec: &InstanceSpec) -> RandVar {
    let raw = random_rv(rng, space.len(), spec);
    space.center(&raw).expect("same space")
}
