//! Gram portioning against meal-scaled RDI targets.

mod constraints;
mod lp;
mod profile;
mod solver;

pub use constraints::PortionConstraints;
pub use profile::{convert_vitamin_d, ConstraintKind, MealEnergyPlan, NutrientTarget, RdiProfile};
pub use solver::{
    nutrient_totals, reproject, solve_portions, Orientation, PortionObjective, PortionSolution, Reprojection,
    SolverOptions,
};
