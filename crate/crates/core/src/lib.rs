//! Random trees, their additive functionals, contour processes and
//! discretized Brownian excursions.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod embedding;
pub mod excursion;
pub mod experiments;
pub mod functionals;
pub mod offspring;
pub mod rmq;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod stats;
pub mod tree;
pub mod verify;

pub use excursion::{Excursion, ExcursionSampler};
pub use functionals::{IndexBundle, Toll, WeightFunction};
pub use offspring::OffspringDistribution;
pub use scalar::{Real, Scalar};
pub use tree::{Tree, TreeError};

/// Exact rational scalar used for zero-tolerance checks of the measure.
pub type Rational = num_rational::Ratio<i128>;

pub type Weight64 = WeightFunction<f64>;
pub type WeightRational = WeightFunction<Rational>;

pub type Excursion64 = Excursion<f64>;
pub type Excursion32 = Excursion<f32>;
