//! Meal engineering toolkit: turns dietary reference intakes into portioned
//! meals and minimal-change substitutions.
//!
//! The numeric kernels (LOF, statistics, metrics, portion optimization) are
//! generic over [`Scalar`]; the aliases below fix them to `f64` (and `f32`
//! where that is useful) for everyday use.

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod corpus;
pub mod error;
pub mod features;
pub mod generator;
pub mod metrics;
pub mod nutrient;
pub mod portioner;
pub mod pricing;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod substitution;
pub mod synth;

pub use error::{Error, Result};
pub use nutrient::{MainCategory, MealType, Nutrient, NutrientArray, NUTRIENT_COUNT};
pub use scalar::Scalar;

pub type RdiProfile64 = portioner::RdiProfile<f64>;
pub type PortionObjective64 = portioner::PortionObjective<f64>;
pub type PortionSolution64 = portioner::PortionSolution<f64>;
pub type NutrientTarget64 = portioner::NutrientTarget<f64>;
pub type Interval64 = stats::Interval<f64>;
pub type Standardized64 = features::Standardized<f64>;
pub type Standardized32 = features::Standardized<f32>;
