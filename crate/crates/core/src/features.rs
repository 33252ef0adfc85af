//! Meal-level feature vectors for cluster profiling.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{FoodTable, Meal};
use crate::error::{Error, Result};
use crate::metrics::{amdr_composite, hill_diversity, AmdrBounds};
use crate::nutrient::{MainCategory, MealType, Nutrient};
use crate::scalar::{quantile_sorted, sort_floats, Scalar};

pub const FEATURE_COUNT: usize = 84;

const CORE: usize = 0;
const DERIVED: usize = 5;
const MAIN: usize = 21;
const SUB: usize = 45;
const COMPOSITION: usize = 74;
const LOG: usize = 79;

/// Subgroups reported alongside the 15 main categories.
const MAIN_SUBGROUPS: [&str; 9] = [
    "milk",
    "flavored_milk",
    "dairy_drinks",
    "cooked_grains",
    "savory_snacks",
    "diet_beverages",
    "sweetened_beverages",
    "plain_water",
    "flavored_water",
];

const SUBGROUPS: [&str; 29] = [
    "cheese",
    "yogurt",
    "meats",
    "poultry",
    "seafood",
    "eggs",
    "cured_meats",
    "plant_proteins",
    "mixed_meat_dishes",
    "mixed_bean_dishes",
    "mixed_grain_dishes",
    "asian_dishes",
    "mexican_dishes",
    "pizza",
    "sandwiches",
    "soups",
    "breads_rolls",
    "quick_breads",
    "cereals",
    "crackers",
    "snack_bars",
    "sweet_bakery",
    "candy",
    "desserts",
    "juice",
    "coffee_tea",
    "infant_formulas",
    "baby_beverages",
    "human_milk",
];

/// Feature names in vector order.
pub static FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "energy_kcal",
    "protein_g",
    "carbohydrate_g",
    "total_fat_g",
    "fiber_g",
    "protein_energy_ratio",
    "carbohydrate_energy_ratio",
    "fat_energy_ratio",
    "protein_level",
    "carbohydrate_level",
    "fat_level",
    "energy_level",
    "protein_carb_balance",
    "protein_fat_balance",
    "carb_fat_balance",
    "meal_balance_score",
    "nutritional_balance",
    "grain_ratio",
    "vegetable_ratio",
    "fruit_ratio",
    "dairy_ratio",
    "main_milk_dairy_g",
    "main_protein_foods_g",
    "main_mixed_dishes_g",
    "main_grains_g",
    "main_snacks_sweets_g",
    "main_fruits_g",
    "main_vegetables_g",
    "main_beverages_g",
    "main_alcoholic_beverages_g",
    "main_water_g",
    "main_fats_oils_g",
    "main_condiments_sauces_g",
    "main_sugars_g",
    "main_baby_foods_g",
    "main_other_g",
    "main_milk_g",
    "main_flavored_milk_g",
    "main_dairy_drinks_g",
    "main_cooked_grains_g",
    "main_savory_snacks_g",
    "main_diet_beverages_g",
    "main_sweetened_beverages_g",
    "main_plain_water_g",
    "main_flavored_water_g",
    "sub_cheese_g",
    "sub_yogurt_g",
    "sub_meats_g",
    "sub_poultry_g",
    "sub_seafood_g",
    "sub_eggs_g",
    "sub_cured_meats_g",
    "sub_plant_proteins_g",
    "sub_mixed_meat_dishes_g",
    "sub_mixed_bean_dishes_g",
    "sub_mixed_grain_dishes_g",
    "sub_asian_dishes_g",
    "sub_mexican_dishes_g",
    "sub_pizza_g",
    "sub_sandwiches_g",
    "sub_soups_g",
    "sub_breads_rolls_g",
    "sub_quick_breads_g",
    "sub_cereals_g",
    "sub_crackers_g",
    "sub_snack_bars_g",
    "sub_sweet_bakery_g",
    "sub_candy_g",
    "sub_desserts_g",
    "sub_juice_g",
    "sub_coffee_tea_g",
    "sub_infant_formulas_g",
    "sub_baby_beverages_g",
    "sub_human_milk_g",
    "macro_diversity",
    "category_diversity",
    "ingredient_count",
    "portion_variability",
    "calorie_density",
    "log_energy",
    "log_protein",
    "log_fiber",
    "log_sodium",
    "log_total_grams",
];

/// Indices of the level features and the raw features they bin.
const LEVELS: [(usize, usize); 4] = [(8, 1), (9, 2), (10, 3), (11, 0)];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

/// Gram-valued feature columns (main categories, subgroups and subcategories).
pub fn gram_feature_range() -> std::ops::Range<usize> {
    MAIN..COMPOSITION
}

/// The 15 main-category columns, which partition total meal grams.
pub fn main_category_range() -> std::ops::Range<usize> {
    MAIN..MAIN + MainCategory::ALL.len()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub meal_id: String,
    pub meal_type: MealType,
    #[serde(with = "values_serde")]
    pub values: [f64; FEATURE_COUNT],
}

mod values_serde {
    use super::FEATURE_COUNT;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &[f64; FEATURE_COUNT], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

fn pair_balance(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        1.0 - (a - b).abs() / (a + b)
    } else {
        0.0
    }
}

/// Raw features of one meal. Level features stay 0 until [`LevelBins`] are applied.
///
/// Macronutrient ratios use energy from 4/4/9 kcal per gram of protein,
/// carbohydrate and fat; zero-energy meals get zero ratios. The balance
/// scores are proxies: pairwise balance is `1 - |a - b| / (a + b)` of two
/// energy shares, the meal balance score is the AMDR composite of those shares,
/// and nutritional balance is `1 - (max share - min share)`.
pub fn extract_features(meal: &Meal, foods: &FoodTable) -> Result<FeatureVector> {
    let mut v = [0.0; FEATURE_COUNT];
    let totals = foods.meal_totals(meal)?;
    let t = |n: Nutrient| totals[n.index()];

    v[CORE] = t(Nutrient::Energy);
    v[CORE + 1] = t(Nutrient::Protein);
    v[CORE + 2] = t(Nutrient::Carbohydrate);
    v[CORE + 3] = t(Nutrient::TotalFat);
    v[CORE + 4] = t(Nutrient::Fiber);

    let macro_kcal = [4.0 * t(Nutrient::Protein), 4.0 * t(Nutrient::Carbohydrate), 9.0 * t(Nutrient::TotalFat)];
    let macro_total: f64 = macro_kcal.iter().sum();
    let shares = if macro_total > 0.0 { macro_kcal.map(|k| k / macro_total) } else { [0.0; 3] };
    let [p, c, f] = shares;
    v[DERIVED] = p;
    v[DERIVED + 1] = c;
    v[DERIVED + 2] = f;
    v[DERIVED + 7] = pair_balance(p, c);
    v[DERIVED + 8] = pair_balance(p, f);
    v[DERIVED + 9] = pair_balance(c, f);
    if macro_total > 0.0 {
        v[DERIVED + 10] = amdr_composite([p * 100.0, f * 100.0, c * 100.0], &AmdrBounds::default());
        let max = p.max(c).max(f);
        let min = p.min(c).min(f);
        v[DERIVED + 11] = 1.0 - (max - min);
    }

    let mut total_grams = 0.0;
    let mut item_grams = Vec::with_capacity(meal.items.len());
    for item in &meal.items {
        let food = foods.get(&item.food_code)?;
        total_grams += item.grams;
        item_grams.push(item.grams);
        v[MAIN + food.main_category.index()] += item.grams;
        let sub = food.sub_slug();
        if let Some(j) = MAIN_SUBGROUPS.iter().position(|s| *s == sub) {
            v[MAIN + 15 + j] += item.grams;
        }
        if let Some(j) = SUBGROUPS.iter().position(|s| *s == sub) {
            v[SUB + j] += item.grams;
        }
    }
    if total_grams > 0.0 {
        let groups = [MainCategory::Grains, MainCategory::Vegetables, MainCategory::Fruits, MainCategory::MilkDairy];
        for (k, m) in groups.into_iter().enumerate() {
            v[DERIVED + 12 + k] = v[MAIN + m.index()] / total_grams;
        }
    }

    if macro_total > 0.0 {
        v[COMPOSITION] = hill_diversity(&macro_kcal, 1.0)?;
    }
    if total_grams > 0.0 {
        v[COMPOSITION + 1] = hill_diversity(&v[MAIN..MAIN + 15], 1.0)?;
    }
    v[COMPOSITION + 2] = meal.items.len() as f64;
    v[COMPOSITION + 3] = coefficient_of_variation(&item_grams);
    v[COMPOSITION + 4] = if total_grams > 0.0 { t(Nutrient::Energy) / total_grams } else { 0.0 };

    v[LOG] = t(Nutrient::Energy).ln_1p();
    v[LOG + 1] = t(Nutrient::Protein).ln_1p();
    v[LOG + 2] = t(Nutrient::Fiber).ln_1p();
    v[LOG + 3] = t(Nutrient::Sodium).ln_1p();
    v[LOG + 4] = total_grams.ln_1p();

    Ok(FeatureVector { meal_id: meal.meal_id.clone(), meal_type: meal.meal_type, values: v })
}

/// Population coefficient of variation; 0 for fewer than two values or zero mean.
fn coefficient_of_variation(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if m <= 0.0 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    var.sqrt() / m
}

/// Quantile cut points per meal type for the level features.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelBins {
    pub bins: usize,
    cuts: BTreeMap<MealType, Vec<Vec<f64>>>,
}

impl LevelBins {
    /// Fits equal-frequency cut points (quartiles when `bins` is 4).
    pub fn fit(vectors: &[FeatureVector], bins: usize) -> Result<Self> {
        if bins < 1 {
            return Err(Error::Config("level binning needs at least one bin".into()));
        }
        let mut cuts = BTreeMap::new();
        for mt in MealType::ALL {
            let group: Vec<&FeatureVector> = vectors.iter().filter(|v| v.meal_type == mt).collect();
            if group.is_empty() {
                continue;
            }
            let per_feature = LEVELS
                .iter()
                .map(|&(_, src)| {
                    let mut xs: Vec<f64> = group.iter().map(|v| v.values[src]).collect();
                    sort_floats(&mut xs);
                    (1..bins).map(|i| quantile_sorted(&xs, i as f64 / bins as f64)).collect()
                })
                .collect();
            cuts.insert(mt, per_feature);
        }
        Ok(LevelBins { bins, cuts })
    }

    /// Bin index = number of cut points strictly below the value.
    pub fn apply(&self, vectors: &mut [FeatureVector]) {
        for v in vectors.iter_mut() {
            let Some(per_feature) = self.cuts.get(&v.meal_type) else { continue };
            for (&(dst, src), cut) in LEVELS.iter().zip(per_feature) {
                v.values[dst] = cut.iter().filter(|c| **c < v.values[src]).count() as f64;
            }
        }
    }
}

/// Extracts features for every meal (in parallel, order kept) and fills the
/// level features from bins fitted on this batch.
pub fn extract_batch(meals: &[Meal], foods: &FoodTable, bins: usize) -> Result<Vec<FeatureVector>> {
    let mut out = meals.par_iter().map(|m| extract_features(m, foods)).collect::<Result<Vec<_>>>()?;
    LevelBins::fit(&out, bins)?.apply(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NearZeroVariance,
    MostlyZero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedFeature {
    pub name: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized<T> {
    /// Surviving column indices into the input matrix.
    pub columns: Vec<usize>,
    pub names: Vec<String>,
    pub rows: Vec<Vec<T>>,
    pub dropped: Vec<DroppedFeature>,
}

/// Drops near-constant (variance < 1e-12) and mostly-zero (> 95% zeros)
/// columns, then z-scores the rest within each meal type.
///
/// Columns that are constant inside one meal type standardize to 0 there.
pub fn standardize<T: Scalar>(rows: &[Vec<T>], meal_types: &[MealType], names: &[&str]) -> Standardized<T> {
    let n = rows.len();
    let width = names.len();
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..width {
        let col: Vec<T> = rows.iter().map(|r| r[j]).collect();
        let zeros = col.iter().filter(|v| **v == T::zero()).count();
        let var = if n == 0 { T::zero() } else { crate::scalar::variance(&col, 0) };
        if n == 0 || var < T::c(1e-12) {
            dropped.push(DroppedFeature { name: names[j].to_string(), reason: DropReason::NearZeroVariance });
        } else if zeros as f64 > 0.95 * n as f64 {
            dropped.push(DroppedFeature { name: names[j].to_string(), reason: DropReason::MostlyZero });
        } else {
            columns.push(j);
        }
    }

    let mut out: Vec<Vec<T>> = vec![vec![T::zero(); columns.len()]; n];
    for mt in MealType::ALL {
        let idx: Vec<usize> = (0..n).filter(|&i| meal_types[i] == mt).collect();
        if idx.is_empty() {
            continue;
        }
        for (k, &j) in columns.iter().enumerate() {
            let col: Vec<T> = idx.iter().map(|&i| rows[i][j]).collect();
            let m = crate::scalar::mean(&col);
            let sd = crate::scalar::variance(&col, 0).sqrt();
            for &i in &idx {
                out[i][k] = if sd > T::zero() { (rows[i][j] - m) / sd } else { T::zero() };
            }
        }
    }
    Standardized { names: columns.iter().map(|&j| names[j].to_string()).collect(), columns, rows: out, dropped }
}

/// Writes `features.csv`: `meal_id` plus one column per feature.
pub fn write_features<W: Write>(writer: W, vectors: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["meal_id"];
    header.extend(FEATURE_NAMES.iter());
    w.write_record(&header)?;
    for v in vectors {
        let mut rec = vec![v.meal_id.clone()];
        rec.extend(v.values.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("features.csv", e))?;
    Ok(())
}

pub fn write_features_file(path: &Path, vectors: &[FeatureVector]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(file, vectors)
}
