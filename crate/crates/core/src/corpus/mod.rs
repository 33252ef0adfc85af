//! Food and meal records, CSV loading, and the preprocessing operations
//! that turn a raw intake corpus into the filtered datasets used downstream.

mod harmonize;
mod io;
mod lof;
mod presence;
mod prototype;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nutrient::{MainCategory, MealType, Nutrient, NutrientArray, NUTRIENT_COUNT};

pub use harmonize::{apply_code_harmonization, CodeMap, CodeMapEntry, MapReason};
pub use io::{read_codemap, read_foods, read_labels, read_meals, write_foods, write_meals};
pub use lof::{lof_filter, lof_scores, LofConfig, LofOutcome, LofRepresentation};
pub use presence::{bootstrap_presence_filter, PresenceFilterOutcome};
pub use prototype::{
    aggregate_prototypes, mass_coverage, PrototypeAssignment, PrototypeConfig, PrototypeOutcome,
    PrototypeReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodRecord {
    pub food_code: String,
    pub name: String,
    pub main_category: MainCategory,
    pub sub_category: String,
    pub nutrients_per_100g: NutrientArray<f64>,
    pub is_beverage: bool,
    pub is_solid: bool,
}

impl FoodRecord {
    pub fn validate(&self) -> Result<()> {
        if let Some(n) = Nutrient::ALL
            .iter()
            .find(|n| !(self.nutrients_per_100g[n.index()].is_finite() && self.nutrients_per_100g[n.index()] >= 0.0))
        {
            return Err(Error::validation(format!(
                "food `{}`: {} density must be finite and non-negative",
                self.food_code, n
            )));
        }
        // Fluid dairy may carry both flags: it is a solid-group food that counts as a beverage.
        let both_ok = self.is_beverage && self.is_solid && self.main_category == MainCategory::MilkDairy;
        if self.is_beverage == self.is_solid && !both_ok {
            return Err(Error::validation(format!(
                "food `{}`: exactly one of is_beverage/is_solid must be set",
                self.food_code
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn nutrient(&self, n: Nutrient) -> f64 {
        self.nutrients_per_100g[n.index()]
    }

    /// kcal per gram.
    #[inline]
    pub fn energy_per_gram(&self) -> f64 {
        self.nutrient(Nutrient::Energy) / 100.0
    }

    /// Beverages, including fluid dairy, fall under the beverage caps.
    #[inline]
    pub fn counts_as_beverage(&self) -> bool {
        self.is_beverage
    }

    #[inline]
    pub fn counts_as_solid(&self) -> bool {
        self.is_solid && !self.is_beverage
    }

    pub fn is_mixed_dish(&self) -> bool {
        self.main_category == MainCategory::MixedDishes
    }

    /// Subcategory as a lowercase slug, e.g. `"Breads & rolls"` -> `breads_rolls`.
    pub fn sub_slug(&self) -> String {
        slug(&self.sub_category)
    }
}

/// Lowercase, with runs of non-alphanumerics collapsed to one underscore.
pub fn slug(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.trim().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealItem {
    pub food_code: String,
    pub grams: f64,
}

impl MealItem {
    pub fn new(food_code: impl Into<String>, grams: f64) -> Self {
        Self { food_code: food_code.into(), grams }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meal {
    pub meal_id: String,
    pub meal_type: MealType,
    pub items: Vec<MealItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_label: Option<i64>,
}

impl Meal {
    pub fn new(meal_id: impl Into<String>, meal_type: MealType, items: Vec<MealItem>) -> Self {
        Self { meal_id: meal_id.into(), meal_type, items, cluster_label: None }
    }

    pub fn with_cluster(mut self, label: i64) -> Self {
        self.cluster_label = Some(label);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for item in &self.items {
            if !seen.insert(item.food_code.as_str()) {
                return Err(Error::validation(format!(
                    "meal `{}`: duplicate food code `{}`",
                    self.meal_id, item.food_code
                )));
            }
            if !(item.grams.is_finite() && item.grams > 0.0) {
                return Err(Error::validation(format!(
                    "meal `{}`: grams for `{}` must be finite and positive",
                    self.meal_id, item.food_code
                )));
            }
        }
        Ok(())
    }

    pub fn total_grams(&self) -> f64 {
        self.items.iter().map(|i| i.grams).sum()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.items.iter().any(|i| i.food_code == code)
    }

    pub fn grams_of(&self, code: &str) -> f64 {
        self.items.iter().filter(|i| i.food_code == code).map(|i| i.grams).sum()
    }

    /// Merges repeated food codes, summing grams, keeping first-seen order.
    pub fn merge_duplicates(&mut self) {
        let mut merged: Vec<MealItem> = Vec::with_capacity(self.items.len());
        for item in self.items.drain(..) {
            match merged.iter_mut().find(|m| m.food_code == item.food_code) {
                Some(m) => m.grams += item.grams,
                None => merged.push(item),
            }
        }
        self.items = merged;
    }
}

/// Immutable food lookup table.
#[derive(Debug, Clone, Default)]
pub struct FoodTable {
    foods: Vec<FoodRecord>,
    index: HashMap<String, usize>,
}

impl FoodTable {
    pub fn new(foods: Vec<FoodRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(foods.len());
        for (i, f) in foods.iter().enumerate() {
            f.validate()?;
            if index.insert(f.food_code.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate food code `{}`", f.food_code)));
            }
        }
        Ok(Self { foods, index })
    }

    pub fn get(&self, code: &str) -> Result<&FoodRecord> {
        self.index
            .get(code)
            .map(|&i| &self.foods[i])
            .ok_or_else(|| Error::UnknownFood(code.to_string()))
    }

    pub fn contains(&self, code: &str) -> bool {
        self.index.contains_key(code)
    }

    pub fn foods(&self) -> &[FoodRecord] {
        &self.foods
    }

    pub fn len(&self) -> usize {
        self.foods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.foods.is_empty()
    }

    /// Nutrient totals of a meal: sum over items of grams/100 times the per-100 g row.
    pub fn meal_totals(&self, meal: &Meal) -> Result<NutrientArray<f64>> {
        let mut totals = [0.0; NUTRIENT_COUNT];
        for item in &meal.items {
            let food = self.get(&item.food_code)?;
            for (t, d) in totals.iter_mut().zip(food.nutrients_per_100g.iter()) {
                *t += item.grams / 100.0 * d;
            }
        }
        Ok(totals)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub fn food(code: &str, main: MainCategory, sub: &str, beverage: bool) -> FoodRecord {
        let mut n = [0.0; NUTRIENT_COUNT];
        n[Nutrient::Energy.index()] = 100.0;
        FoodRecord {
            food_code: code.into(),
            name: code.into(),
            main_category: main,
            sub_category: sub.into(),
            nutrients_per_100g: n,
            is_beverage: beverage,
            is_solid: !beverage,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::food;
    use super::*;

    #[test]
    fn role_flags_validated() {
        let mut f = food("1", MainCategory::Grains, "cereals", false);
        assert!(f.validate().is_ok());
        f.is_beverage = true;
        assert!(f.validate().is_err());
        f.main_category = MainCategory::MilkDairy;
        assert!(f.validate().is_ok());
        assert!(f.counts_as_beverage() && !f.counts_as_solid());
    }

    #[test]
    fn negative_density_rejected() {
        let mut f = food("1", MainCategory::Grains, "cereals", false);
        f.nutrients_per_100g[Nutrient::Sodium.index()] = -1.0;
        assert!(matches!(f.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn meal_validation_and_merge() {
        let mut m = Meal::new("m", MealType::Lunch, vec![MealItem::new("a", 10.0), MealItem::new("a", 5.0)]);
        assert!(m.validate().is_err());
        m.merge_duplicates();
        assert_eq!(m.items, vec![MealItem::new("a", 15.0)]);
        m.items[0].grams = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn totals_are_linear() {
        let mut a = food("a", MainCategory::Grains, "cereals", false);
        a.nutrients_per_100g[Nutrient::Protein.index()] = 10.0;
        let mut b = food("b", MainCategory::Grains, "cereals", false);
        b.nutrients_per_100g[Nutrient::Protein.index()] = 20.0;
        let table = FoodTable::new(vec![a, b]).unwrap();
        let meal = Meal::new("m", MealType::Lunch, vec![MealItem::new("a", 50.0), MealItem::new("b", 50.0)]);
        let t = table.meal_totals(&meal).unwrap();
        assert!((t[Nutrient::Protein.index()] - 15.0).abs() < 1e-12);
        assert!((t[Nutrient::Energy.index()] - 100.0).abs() < 1e-12);
        assert!(matches!(table.get("zzz"), Err(Error::UnknownFood(_))));
    }
}
