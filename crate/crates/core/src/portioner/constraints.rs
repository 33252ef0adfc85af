use serde::{Deserialize, Serialize};

use crate::corpus::FoodRecord;
use crate::error::{Error, Result};
use crate::nutrient::{MainCategory, MealType};
use crate::scalar::Scalar;

/// Realism caps applied while portioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PortionConstraints {
    pub total_grams_max: f64,
    pub beverage_kcal_frac_max: f64,
    pub beverage_grams_breakfast: f64,
    pub beverage_grams_lunch: f64,
    pub beverage_grams_dinner: f64,
    /// Gram caps on the summed portions of a main category.
    pub category_caps: Vec<(MainCategory, f64)>,
    pub per_solid_item_max: f64,
    pub min_solids_breakfast: usize,
    pub min_solids_lunch: usize,
    pub min_solids_dinner: usize,
    /// Smallest portion of any selected food, shrunk inside tight category caps.
    pub min_portion: f64,
    /// Allowed relative deviation from the meal energy target.
    pub energy_tolerance: f64,
}

impl Default for PortionConstraints {
    fn default() -> Self {
        PortionConstraints {
            total_grams_max: 900.0,
            beverage_kcal_frac_max: 0.25,
            beverage_grams_breakfast: 300.0,
            beverage_grams_lunch: 350.0,
            beverage_grams_dinner: 350.0,
            category_caps: vec![
                (MainCategory::Sugars, 12.0),
                (MainCategory::FatsOils, 20.0),
                (MainCategory::CondimentsSauces, 20.0),
                (MainCategory::SnacksSweets, 60.0),
            ],
            per_solid_item_max: 300.0,
            min_solids_breakfast: 2,
            min_solids_lunch: 3,
            min_solids_dinner: 3,
            min_portion: 5.0,
            energy_tolerance: 0.01,
        }
    }
}

impl PortionConstraints {
    pub fn beverage_grams_max(&self, meal_type: MealType) -> f64 {
        match meal_type {
            MealType::Breakfast => self.beverage_grams_breakfast,
            MealType::Lunch => self.beverage_grams_lunch,
            MealType::Dinner => self.beverage_grams_dinner,
        }
    }

    pub fn min_solids(&self, meal_type: MealType) -> usize {
        match meal_type {
            MealType::Breakfast => self.min_solids_breakfast,
            MealType::Lunch => self.min_solids_lunch,
            MealType::Dinner => self.min_solids_dinner,
        }
    }

    pub fn category_cap(&self, m: MainCategory) -> Option<f64> {
        self.category_caps.iter().find(|(c, _)| *c == m).map(|(_, v)| *v)
    }

    pub fn validate(&self) -> Result<()> {
        let caps = [
            self.total_grams_max,
            self.beverage_kcal_frac_max,
            self.beverage_grams_breakfast,
            self.beverage_grams_lunch,
            self.beverage_grams_dinner,
            self.per_solid_item_max,
            self.energy_tolerance,
        ];
        if caps.iter().chain(self.category_caps.iter().map(|(_, v)| v)).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("portion caps must be positive".into()));
        }
        if !(self.min_portion >= 0.0) {
            return Err(Error::Config("min_portion must be non-negative".into()));
        }
        Ok(())
    }
}

/// One linear inequality `coef . x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Row<T> {
    pub name: String,
    pub coef: Vec<T>,
    pub rhs: T,
}

impl<T: Scalar> Row<T> {
    pub fn lhs(&self, x: &[T]) -> T {
        self.coef.iter().zip(x).map(|(a, b)| *a * *b).sum()
    }

    pub fn slack(&self, x: &[T]) -> T {
        self.rhs - self.lhs(x)
    }
}

/// The constraint polytope of one portioning problem.
#[derive(Debug, Clone)]
pub(crate) struct Polytope<T> {
    pub rows: Vec<Row<T>>,
}

impl<T: Scalar> Polytope<T> {
    pub fn build(foods: &[&FoodRecord], meal_type: MealType, energy_target: T, c: &PortionConstraints) -> Self {
        let n = foods.len();
        let e: Vec<T> = foods.iter().map(|f| T::c(f.energy_per_gram())).collect();
        let tol = T::c(c.energy_tolerance);
        let mut rows = Vec::new();
        let unit = |i: usize, v: T| {
            let mut coef = vec![T::zero(); n];
            coef[i] = v;
            coef
        };

        rows.push(Row { name: "energy_high".into(), coef: e.clone(), rhs: energy_target * (T::one() + tol) });
        rows.push(Row {
            name: "energy_low".into(),
            coef: e.iter().map(|v| -*v).collect(),
            rhs: -(energy_target * (T::one() - tol)),
        });
        rows.push(Row { name: "total_grams".into(), coef: vec![T::one(); n], rhs: T::c(c.total_grams_max) });

        let bev: Vec<bool> = foods.iter().map(|f| f.counts_as_beverage()).collect();
        if bev.iter().any(|b| *b) {
            rows.push(Row {
                name: "beverage_grams".into(),
                coef: bev.iter().map(|b| if *b { T::one() } else { T::zero() }).collect(),
                rhs: T::c(c.beverage_grams_max(meal_type)),
            });
            let frac = T::c(c.beverage_kcal_frac_max);
            rows.push(Row {
                name: "beverage_kcal".into(),
                coef: (0..n).map(|i| if bev[i] { e[i] * (T::one() - frac) } else { -e[i] * frac }).collect(),
                rhs: T::zero(),
            });
        }

        let mut min_portion = vec![T::c(c.min_portion); n];
        for &(cat, cap) in &c.category_caps {
            let members: Vec<usize> = (0..n).filter(|&i| foods[i].main_category == cat).collect();
            if members.is_empty() {
                continue;
            }
            let share = T::c(cap * 0.5 / members.len() as f64);
            for &i in &members {
                min_portion[i] = min_portion[i].min(share);
            }
            rows.push(Row {
                name: format!("category:{}", cat.as_str()),
                coef: (0..n).map(|i| if foods[i].main_category == cat { T::one() } else { T::zero() }).collect(),
                rhs: T::c(cap),
            });
        }

        for (i, f) in foods.iter().enumerate() {
            if !bev[i] {
                rows.push(Row {
                    name: format!("per_item:{}", f.food_code),
                    coef: unit(i, T::one()),
                    rhs: T::c(c.per_solid_item_max),
                });
            }
        }
        for (i, f) in foods.iter().enumerate() {
            rows.push(Row { name: format!("min_portion:{}", f.food_code), coef: unit(i, -T::one()), rhs: -min_portion[i] });
        }
        Polytope { rows }
    }

    pub fn is_feasible(&self, x: &[T], tol: T) -> bool {
        self.rows.iter().all(|r| r.slack(x) >= -tol * (T::one() + r.rhs.abs()))
    }

    pub fn binding(&self, x: &[T], tol: T) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| r.slack(x) <= tol * (T::one() + r.rhs.abs()))
            .map(|r| r.name.clone())
            .collect()
    }

    /// Largest step interval `[lo, hi]` (lo <= 0 <= hi) keeping `x + t d` feasible.
    pub fn step_interval(&self, x: &[T], d: &[T]) -> (T, T) {
        let mut lo = T::neg_infinity();
        let mut hi = T::infinity();
        for r in &self.rows {
            let ad: T = r.coef.iter().zip(d).map(|(a, b)| *a * *b).sum();
            if ad == T::zero() {
                continue;
            }
            let s = r.slack(x).max(T::zero());
            let t = s / ad;
            if ad > T::zero() {
                hi = hi.min(t);
            } else {
                lo = lo.max(t);
            }
        }
        (lo.min(T::zero()), hi.max(T::zero()))
    }
}
