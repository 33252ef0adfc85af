use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nutrient::{MealType, Nutrient, NutrientArray, NUTRIENT_COUNT};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Equality,
    Adequacy,
    UpperBound,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NutrientTarget<T> {
    pub nutrient: Nutrient,
    /// Daily reference amount in the panel unit (vitamin D in micrograms).
    pub daily: T,
    pub weight_under: T,
    pub weight_over: T,
    pub kind: ConstraintKind,
}

/// Daily reference intakes with the asymmetric penalty weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdiProfile<T> {
    pub reference_energy: T,
    pub targets: Vec<NutrientTarget<T>>,
}

const STANDARD: [(Nutrient, f64, f64, f64, ConstraintKind); NUTRIENT_COUNT] = {
    use ConstraintKind::*;
    use Nutrient::*;
    [
        (Energy, 2000.0, 2.0, 2.0, Equality),
        (Protein, 50.0, 2.0, 1.5, Adequacy),
        (Carbohydrate, 275.0, 1.5, 1.5, Adequacy),
        (TotalFat, 78.0, 1.5, 1.5, Adequacy),
        (Fiber, 28.0, 2.0, 1.0, Adequacy),
        (Sodium, 2300.0, 1.0, 3.0, UpperBound),
        (SaturatedFat, 20.0, 1.0, 3.0, UpperBound),
        (AddedSugars, 50.0, 1.0, 3.0, UpperBound),
        (Potassium, 4700.0, 2.0, 1.0, Adequacy),
        (Calcium, 1300.0, 2.0, 1.0, Adequacy),
        (Iron, 18.0, 2.0, 1.0, Adequacy),
        (VitaminD, 20.0, 1.5, 1.0, Adequacy),
        (Zinc, 11.0, 1.0, 1.0, Neutral),
        (VitaminA, 900.0, 1.0, 1.0, Neutral),
        (VitaminC, 90.0, 1.0, 1.0, Neutral),
        (VitaminB6, 1.7, 1.0, 1.0, Neutral),
        (VitaminB12, 2.4, 1.0, 1.0, Neutral),
        (Thiamin, 1.2, 1.0, 1.0, Neutral),
        (Riboflavin, 1.3, 1.0, 1.0, Neutral),
        (Niacin, 16.0, 1.0, 1.0, Neutral),
        (Folate, 400.0, 1.0, 1.0, Neutral),
    ]
};

impl<T: Scalar> Default for RdiProfile<T> {
    fn default() -> Self {
        RdiProfile {
            reference_energy: T::c(2000.0),
            targets: STANDARD
                .iter()
                .map(|&(nutrient, daily, wu, wo, kind)| NutrientTarget {
                    nutrient,
                    daily: T::c(daily),
                    weight_under: T::c(wu),
                    weight_over: T::c(wo),
                    kind,
                })
                .collect(),
        }
    }
}

impl<T: Scalar> RdiProfile<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_energy > T::zero()) {
            return Err(Error::Config("reference energy must be positive".into()));
        }
        if self.targets.len() != NUTRIENT_COUNT {
            return Err(Error::Config(format!("profile needs {NUTRIENT_COUNT} nutrients, got {}", self.targets.len())));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.nutrient.index() != i {
                return Err(Error::Config(format!("profile entry {i} is `{}`, expected panel order", t.nutrient)));
            }
            if !(t.weight_under > T::zero() && t.weight_over > T::zero()) {
                return Err(Error::Config(format!("weights for `{}` must be positive", t.nutrient)));
            }
            if t.kind != ConstraintKind::Neutral && !(t.daily > T::zero()) {
                return Err(Error::Config(format!("daily value for `{}` must be positive", t.nutrient)));
            }
        }
        let equalities = self.targets.iter().filter(|t| t.kind == ConstraintKind::Equality).count();
        if equalities != 1 || self.targets[Nutrient::Energy.index()].kind != ConstraintKind::Equality {
            return Err(Error::Config("energy must be the only equality nutrient".into()));
        }
        Ok(())
    }

    pub fn target(&self, n: Nutrient) -> &NutrientTarget<T> {
        &self.targets[n.index()]
    }

    /// `t_k = R_k / R_energy`.
    pub fn per_kcal_targets(&self) -> NutrientArray<T> {
        let mut t = [T::zero(); NUTRIENT_COUNT];
        for (slot, target) in t.iter_mut().zip(&self.targets) {
            *slot = target.daily / self.reference_energy;
        }
        t
    }

    /// `r_k = t_k * f_m * R_energy`.
    pub fn meal_targets(&self, meal_type: MealType, plan: &MealEnergyPlan) -> NutrientArray<T> {
        let scale = T::c(plan.fraction(meal_type)) * self.reference_energy;
        let mut r = self.per_kcal_targets();
        for v in r.iter_mut() {
            *v = *v * scale;
        }
        r
    }

    /// Nutrients scored by deviation metrics: everything except neutral rows.
    pub fn deviation_panel(&self) -> Vec<Nutrient> {
        self.targets.iter().filter(|t| t.kind != ConstraintKind::Neutral).map(|t| t.nutrient).collect()
    }
}

/// Share of daily energy assigned to each meal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MealEnergyPlan {
    pub breakfast: f64,
    pub lunch: f64,
    pub dinner: f64,
}

impl Default for MealEnergyPlan {
    fn default() -> Self {
        MealEnergyPlan { breakfast: 0.25, lunch: 0.35, dinner: 0.40 }
    }
}

impl MealEnergyPlan {
    pub fn fraction(&self, meal_type: MealType) -> f64 {
        match meal_type {
            MealType::Breakfast => self.breakfast,
            MealType::Lunch => self.lunch,
            MealType::Dinner => self.dinner,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.breakfast, self.lunch, self.dinner];
        if all.iter().any(|f| !(*f > 0.0)) || ((all.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("meal energy fractions must be positive and sum to 1".into()));
        }
        Ok(())
    }

    /// Meal energy target in kcal for a given daily reference energy.
    pub fn energy_target(&self, meal_type: MealType, reference_energy: f64) -> f64 {
        self.fraction(meal_type) * reference_energy
    }
}

/// Converts a vitamin D amount to micrograms (40 IU per microgram).
pub fn convert_vitamin_d<T: Scalar>(value: T, unit: &str) -> Result<T> {
    match unit.trim().to_ascii_lowercase().as_str() {
        "iu" => Ok(value / T::c(40.0)),
        "ug" | "mcg" | "\u{3bc}g" | "\u{b5}g" => Ok(value),
        other => Err(Error::validation(format!("unknown vitamin D unit `{other}`"))),
    }
}
