//! Seeded synthetic corpora: a food catalogue built from subcategory
//! templates, archetype-driven meals with cluster labels, and random
//! portioning instances for solver checks.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{FoodRecord, Meal, MealItem};
use crate::nutrient::{MainCategory, MealType, Nutrient, NUTRIENT_COUNT};
use crate::portioner::RdiProfile;
use crate::pricing::{FallbackPrice, PortionEntry, PriceBook};
use crate::seed::rng_for;

struct Template {
    main: MainCategory,
    sub: &'static str,
    beverage: bool,
    /// kcal per gram range.
    density: (f64, f64),
    /// Energy shares of protein, carbohydrate, fat.
    shares: (f64, f64, f64),
    fiber_per_carb: f64,
    sugar_per_carb: f64,
    satfat_per_fat: f64,
    /// Sodium in mg per kcal.
    sodium: f64,
    /// Micronutrients emphasized by this group, with a multiplier.
    rich: &'static [(Nutrient, f64)],
    /// Typical grams in a meal.
    grams: f64,
}

#[allow(clippy::too_many_arguments)]
const fn t(
    main: MainCategory,
    sub: &'static str,
    beverage: bool,
    density: (f64, f64),
    shares: (f64, f64, f64),
    fiber_sugar_satfat: (f64, f64, f64),
    sodium: f64,
    rich: &'static [(Nutrient, f64)],
    grams: f64,
) -> Template {
    Template {
        main,
        sub,
        beverage,
        density,
        shares,
        fiber_per_carb: fiber_sugar_satfat.0,
        sugar_per_carb: fiber_sugar_satfat.1,
        satfat_per_fat: fiber_sugar_satfat.2,
        sodium,
        rich,
        grams,
    }
}

use MainCategory as C;
use Nutrient as N;

const TEMPLATES: &[Template] = &[
    t(C::Grains, "Breads & rolls", false, (2.4, 2.9), (0.13, 0.75, 0.12), (0.08, 0.06, 0.25), 1.7, &[(N::Thiamin, 2.5), (N::Folate, 2.0), (N::Iron, 1.5)], 80.0),
    t(C::Grains, "Cereals", false, (3.4, 3.9), (0.10, 0.82, 0.08), (0.12, 0.20, 0.20), 1.2, &[(N::Iron, 4.0), (N::Folate, 3.0), (N::VitaminB12, 2.0), (N::VitaminB6, 2.5)], 45.0),
    t(C::Grains, "Cooked grains", false, (1.2, 1.6), (0.08, 0.88, 0.04), (0.03, 0.0, 0.25), 0.05, &[(N::Thiamin, 1.5), (N::Niacin, 1.5)], 160.0),
    t(C::ProteinFoods, "Poultry", false, (1.5, 2.1), (0.65, 0.0, 0.35), (0.0, 0.0, 0.28), 0.5, &[(N::Niacin, 4.0), (N::VitaminB6, 3.0)], 120.0),
    t(C::ProteinFoods, "Meats", false, (2.0, 2.8), (0.45, 0.0, 0.55), (0.0, 0.0, 0.40), 0.3, &[(N::Zinc, 4.0), (N::VitaminB12, 5.0), (N::Iron, 2.0)], 110.0),
    t(C::ProteinFoods, "Seafood", false, (1.0, 1.8), (0.75, 0.0, 0.25), (0.0, 0.0, 0.20), 0.6, &[(N::VitaminD, 6.0), (N::VitaminB12, 6.0), (N::Niacin, 3.0)], 120.0),
    t(C::ProteinFoods, "Eggs", false, (1.4, 1.6), (0.35, 0.02, 0.63), (0.0, 0.0, 0.32), 0.9, &[(N::Riboflavin, 3.0), (N::VitaminB12, 3.0), (N::VitaminD, 2.0), (N::VitaminA, 2.0)], 100.0),
    t(C::ProteinFoods, "Plant proteins", false, (1.2, 1.6), (0.28, 0.62, 0.10), (0.25, 0.0, 0.15), 0.3, &[(N::Folate, 3.0), (N::Potassium, 2.0), (N::Iron, 2.5)], 130.0),
    t(C::ProteinFoods, "Cured meats", false, (2.0, 3.0), (0.30, 0.05, 0.65), (0.0, 0.1, 0.38), 4.5, &[(N::Thiamin, 2.0)], 50.0),
    t(C::MilkDairy, "Milk", true, (0.45, 0.65), (0.22, 0.40, 0.38), (0.0, 0.0, 0.62), 0.8, &[(N::Calcium, 5.0), (N::VitaminD, 3.0), (N::Riboflavin, 3.0), (N::VitaminB12, 3.0)], 240.0),
    t(C::MilkDairy, "Cheese", false, (3.0, 4.0), (0.27, 0.02, 0.71), (0.0, 0.0, 0.62), 2.0, &[(N::Calcium, 4.5), (N::VitaminA, 1.5)], 30.0),
    t(C::MilkDairy, "Yogurt", false, (0.6, 1.0), (0.25, 0.50, 0.25), (0.0, 0.30, 0.62), 0.6, &[(N::Calcium, 5.0), (N::Riboflavin, 2.5), (N::VitaminB12, 2.5)], 170.0),
    t(C::Fruits, "Fresh fruits", false, (0.45, 0.75), (0.04, 0.93, 0.03), (0.15, 0.0, 0.10), 0.02, &[(N::VitaminC, 8.0), (N::Potassium, 2.5), (N::Folate, 1.5)], 140.0),
    t(C::Fruits, "Berries", false, (0.35, 0.55), (0.05, 0.88, 0.07), (0.25, 0.0, 0.05), 0.02, &[(N::VitaminC, 10.0), (N::Fiber, 1.0)], 100.0),
    t(C::Vegetables, "Leafy greens", false, (0.15, 0.30), (0.30, 0.58, 0.12), (0.40, 0.0, 0.15), 0.8, &[(N::VitaminA, 12.0), (N::Folate, 8.0), (N::Calcium, 4.0), (N::Potassium, 5.0), (N::Iron, 4.0)], 80.0),
    t(C::Vegetables, "Starchy vegetables", false, (0.7, 1.0), (0.09, 0.88, 0.03), (0.10, 0.0, 0.20), 0.1, &[(N::Potassium, 4.0), (N::VitaminB6, 3.0), (N::VitaminC, 3.0)], 150.0),
    t(C::Vegetables, "Other vegetables", false, (0.2, 0.4), (0.18, 0.75, 0.07), (0.30, 0.0, 0.15), 0.3, &[(N::VitaminC, 6.0), (N::VitaminA, 5.0), (N::Potassium, 4.0)], 100.0),
    t(C::MixedDishes, "Mixed meat dishes", false, (1.3, 1.9), (0.25, 0.35, 0.40), (0.04, 0.02, 0.35), 2.5, &[(N::Zinc, 2.0), (N::VitaminB12, 2.0), (N::Iron, 1.5)], 250.0),
    t(C::MixedDishes, "Pizza", false, (2.5, 2.9), (0.17, 0.45, 0.38), (0.05, 0.03, 0.45), 2.2, &[(N::Calcium, 2.0), (N::Thiamin, 1.5)], 200.0),
    t(C::MixedDishes, "Sandwiches", false, (2.0, 2.6), (0.22, 0.43, 0.35), (0.05, 0.03, 0.35), 2.4, &[(N::Niacin, 2.0), (N::Iron, 1.5)], 200.0),
    t(C::MixedDishes, "Soups", false, (0.3, 0.7), (0.22, 0.48, 0.30), (0.06, 0.02, 0.35), 6.0, &[(N::VitaminA, 2.0)], 300.0),
    t(C::MixedDishes, "Mixed grain dishes", false, (1.3, 1.8), (0.15, 0.60, 0.25), (0.04, 0.02, 0.30), 1.8, &[(N::Thiamin, 1.5), (N::Folate, 1.5)], 250.0),
    t(C::SnacksSweets, "Savory snacks", false, (4.8, 5.4), (0.06, 0.50, 0.44), (0.08, 0.02, 0.25), 1.1, &[(N::VitaminB6, 0.5)], 30.0),
    t(C::SnacksSweets, "Sweet bakery", false, (3.6, 4.4), (0.06, 0.55, 0.39), (0.03, 0.45, 0.45), 0.9, &[(N::Thiamin, 0.8)], 70.0),
    t(C::Beverages, "Juice", true, (0.40, 0.50), (0.02, 0.97, 0.01), (0.01, 0.0, 0.10), 0.05, &[(N::VitaminC, 5.0), (N::Potassium, 1.5)], 240.0),
    t(C::Beverages, "Sweetened beverages", true, (0.38, 0.45), (0.0, 1.0, 0.0), (0.0, 1.0, 0.0), 0.2, &[], 350.0),
    t(C::Beverages, "Coffee & tea", true, (0.01, 0.03), (0.3, 0.6, 0.1), (0.0, 0.0, 0.2), 2.0, &[(N::Riboflavin, 4.0), (N::Niacin, 4.0), (N::Potassium, 8.0)], 300.0),
    t(C::FatsOils, "Butter & oils", false, (7.2, 8.8), (0.0, 0.0, 1.0), (0.0, 0.0, 0.40), 0.8, &[(N::VitaminA, 1.0)], 10.0),
    t(C::CondimentsSauces, "Condiments", false, (1.0, 2.0), (0.05, 0.70, 0.25), (0.02, 0.50, 0.20), 7.0, &[], 20.0),
    t(C::Sugars, "Jams & syrups", false, (2.5, 3.0), (0.0, 1.0, 0.0), (0.01, 0.90, 0.0), 0.1, &[], 20.0),
];

fn template_index(sub: &str) -> usize {
    TEMPLATES.iter().position(|t| t.sub == sub).expect("template exists")
}

/// Builds one food from a template. `spread` is the relative noise applied
/// to every density (0.03 keeps subcategory members near-identical).
fn make_food<R: Rng>(rng: &mut R, code: String, tpl: &Template, base: &[f64; NUTRIENT_COUNT], spread: f64) -> FoodRecord {
    let mut n = *base;
    for v in n.iter_mut() {
        *v *= 1.0 + rng.gen_range(-spread..=spread);
    }
    // Keep the energy identity consistent with the perturbed macros.
    n[N::Energy.index()] = 4.0 * n[N::Protein.index()] + 4.0 * n[N::Carbohydrate.index()] + 9.0 * n[N::TotalFat.index()];
    let fluid_dairy = tpl.beverage && tpl.main == C::MilkDairy;
    FoodRecord {
        name: format!("{} {}", tpl.sub.to_lowercase(), code),
        food_code: code,
        main_category: tpl.main,
        sub_category: tpl.sub.to_string(),
        nutrients_per_100g: n,
        is_beverage: tpl.beverage,
        is_solid: !tpl.beverage || fluid_dairy,
    }
}

/// Per-100 g densities for a template with the given energy density.
fn template_densities<R: Rng>(rng: &mut R, tpl: &Template, kcal_per_g: f64, micro_sd: f64) -> [f64; NUTRIENT_COUNT] {
    let profile = RdiProfile::<f64>::default();
    let per_kcal = profile.per_kcal_targets();
    let kcal = kcal_per_g * 100.0;
    let (p, c, f) = tpl.shares;
    let total = p + c + f;
    let mut n = [0.0; NUTRIENT_COUNT];
    n[N::Energy.index()] = kcal;
    n[N::Protein.index()] = kcal * p / total / 4.0;
    n[N::Carbohydrate.index()] = kcal * c / total / 4.0;
    n[N::TotalFat.index()] = kcal * f / total / 9.0;
    n[N::Fiber.index()] = n[N::Carbohydrate.index()] * tpl.fiber_per_carb;
    n[N::AddedSugars.index()] = n[N::Carbohydrate.index()] * tpl.sugar_per_carb;
    n[N::SaturatedFat.index()] = n[N::TotalFat.index()] * tpl.satfat_per_fat;
    n[N::Sodium.index()] = kcal * tpl.sodium;
    let noise = LogNormal::new(0.0, micro_sd).expect("valid sd");
    for nut in [
        N::Potassium,
        N::Calcium,
        N::Iron,
        N::VitaminD,
        N::Zinc,
        N::VitaminA,
        N::VitaminC,
        N::VitaminB6,
        N::VitaminB12,
        N::Thiamin,
        N::Riboflavin,
        N::Niacin,
        N::Folate,
    ] {
        let boost = tpl.rich.iter().find(|(r, _)| *r == nut).map_or(0.35, |(_, m)| *m);
        n[nut.index()] = per_kcal[nut.index()] * kcal * boost * noise.sample(rng);
    }
    // Coffee and tea carry micronutrients with almost no energy.
    if kcal < 5.0 {
        for nut in [N::Potassium, N::Riboflavin, N::Niacin] {
            n[nut.index()] = per_kcal[nut.index()] * 40.0 * noise.sample(rng);
        }
    }
    n
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub meals_per_type: usize,
    pub foods_per_subcategory: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { seed: 42, meals_per_type: 400, foods_per_subcategory: 3 }
    }
}

/// A cluster archetype: subcategory slots with inclusion probabilities.
struct Archetype {
    meal_type: MealType,
    slots: &'static [(&'static str, f64)],
}

const ARCHETYPES: &[Archetype] = &[
    Archetype { meal_type: MealType::Breakfast, slots: &[("Cereals", 1.0), ("Milk", 0.9), ("Fresh fruits", 0.6), ("Berries", 0.5), ("Coffee & tea", 0.3)] },
    Archetype { meal_type: MealType::Breakfast, slots: &[("Eggs", 1.0), ("Breads & rolls", 1.0), ("Butter & oils", 0.6), ("Cured meats", 0.4), ("Juice", 0.4)] },
    Archetype { meal_type: MealType::Breakfast, slots: &[("Yogurt", 1.0), ("Berries", 0.9), ("Cereals", 0.6), ("Jams & syrups", 0.3), ("Coffee & tea", 0.4)] },
    Archetype { meal_type: MealType::Breakfast, slots: &[("Sweet bakery", 1.0), ("Breads & rolls", 0.6), ("Jams & syrups", 0.7), ("Cheese", 0.5), ("Coffee & tea", 0.8)] },
    Archetype { meal_type: MealType::Lunch, slots: &[("Sandwiches", 1.0), ("Savory snacks", 0.7), ("Fresh fruits", 0.5), ("Other vegetables", 0.4), ("Sweetened beverages", 0.5)] },
    Archetype { meal_type: MealType::Lunch, slots: &[("Leafy greens", 1.0), ("Poultry", 0.9), ("Other vegetables", 0.8), ("Cheese", 0.5), ("Condiments", 0.7), ("Breads & rolls", 0.4)] },
    Archetype { meal_type: MealType::Lunch, slots: &[("Soups", 1.0), ("Breads & rolls", 1.0), ("Cheese", 0.5), ("Berries", 0.3), ("Coffee & tea", 0.3)] },
    Archetype { meal_type: MealType::Lunch, slots: &[("Pizza", 1.0), ("Savory snacks", 0.5), ("Leafy greens", 0.4), ("Sweet bakery", 0.3), ("Sweetened beverages", 0.7)] },
    Archetype { meal_type: MealType::Dinner, slots: &[("Meats", 1.0), ("Starchy vegetables", 0.9), ("Other vegetables", 0.8), ("Butter & oils", 0.5), ("Breads & rolls", 0.3)] },
    Archetype { meal_type: MealType::Dinner, slots: &[("Mixed grain dishes", 1.0), ("Cheese", 0.6), ("Leafy greens", 0.6), ("Plant proteins", 0.4), ("Condiments", 0.3)] },
    Archetype { meal_type: MealType::Dinner, slots: &[("Seafood", 1.0), ("Cooked grains", 1.0), ("Other vegetables", 0.8), ("Condiments", 0.6), ("Butter & oils", 0.3)] },
    Archetype { meal_type: MealType::Dinner, slots: &[("Mixed meat dishes", 1.0), ("Cooked grains", 0.6), ("Leafy greens", 0.5), ("Sweet bakery", 0.4), ("Sweetened beverages", 0.5)] },
];

/// A labeled synthetic corpus. Cluster ids are global across meal types.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub foods: Vec<FoodRecord>,
    pub meals: Vec<Meal>,
}

impl SyntheticCorpus {
    pub fn cluster_count(&self) -> usize {
        ARCHETYPES.len()
    }
}

pub fn synthetic_corpus(cfg: &SynthConfig) -> SyntheticCorpus {
    let mut rng = rng_for(cfg.seed, &[0]);
    let mut foods = Vec::new();
    let mut by_sub: Vec<Vec<usize>> = Vec::with_capacity(TEMPLATES.len());
    for (ti, tpl) in TEMPLATES.iter().enumerate() {
        let kcal_per_g = rng.gen_range(tpl.density.0..=tpl.density.1);
        let base = template_densities(&mut rng, tpl, kcal_per_g, 0.3);
        let mut members = Vec::new();
        for j in 0..cfg.foods_per_subcategory.max(1) {
            let code = format!("{}{:02}", 10 + ti, j + 1);
            members.push(foods.len());
            foods.push(make_food(&mut rng, code, tpl, &base, 0.03));
        }
        by_sub.push(members);
    }

    let grams_noise = LogNormal::new(0.0, 0.35).expect("valid sd");
    let mut meals = Vec::new();
    for mt in MealType::ALL {
        let clusters: Vec<usize> = (0..ARCHETYPES.len()).filter(|&i| ARCHETYPES[i].meal_type == mt).collect();
        let mut mrng = rng_for(cfg.seed, &[1, mt.index() as u64]);
        for i in 0..cfg.meals_per_type {
            let cluster = clusters[i % clusters.len()];
            let mut items = Vec::new();
            for &(sub, p) in ARCHETYPES[cluster].slots {
                if mrng.gen::<f64>() >= p {
                    continue;
                }
                let ti = template_index(sub);
                let fi = *by_sub[ti].choose(&mut mrng).expect("non-empty subcategory");
                let grams = (TEMPLATES[ti].grams * grams_noise.sample(&mut mrng)).max(1.0);
                items.push(MealItem::new(foods[fi].food_code.clone(), (grams * 10.0).round() / 10.0));
            }
            let id = format!("{}{:05}", &mt.as_str()[..1], i + 1);
            meals.push(Meal::new(id, mt, items).with_cluster(cluster as i64));
        }
    }
    SyntheticCorpus { foods, meals }
}

fn base_portion_price(main: MainCategory) -> f64 {
    match main {
        C::MixedDishes => 5.0,
        C::ProteinFoods => 3.5,
        C::Vegetables => 1.5,
        C::Fruits | C::MilkDairy => 1.2,
        C::Grains => 1.0,
        C::SnacksSweets | C::Beverages => 1.5,
        C::Sugars => 0.4,
        _ => 0.3,
    }
}

/// Portion prices for most foods and per-100 g fallbacks for every sixth one.
pub fn synthetic_pricebook(foods: &[FoodRecord], seed: u64) -> PriceBook {
    let mut rng = rng_for(seed, &[2]);
    let mut portions = Vec::new();
    let mut fallback = Vec::new();
    for (i, f) in foods.iter().enumerate() {
        let grams = TEMPLATES.iter().find(|t| t.sub == f.sub_category).map_or(100.0, |t| t.grams);
        let price = (base_portion_price(f.main_category) * rng.gen_range(0.7..1.3) * 100.0).round() / 100.0;
        if i % 6 == 5 {
            fallback.push(FallbackPrice { food_code: f.food_code.clone(), price: (price / grams * 10_000.0).round() / 100.0 });
        } else {
            portions.push(PortionEntry { food_code: f.food_code.clone(), grams_per_portion: grams, price, cap: None, category: None });
        }
    }
    PriceBook::new(portions, fallback).expect("synthetic prices are valid")
}

/// A random combination for portioning: a meal type and its foods.
#[derive(Debug, Clone)]
pub struct PortionInstance {
    pub meal_type: MealType,
    pub foods: Vec<FoodRecord>,
}

const DENSE: &[&str] = &["Breads & rolls", "Poultry", "Meats", "Mixed meat dishes", "Pizza", "Sandwiches", "Mixed grain dishes", "Cereals"];
const SIDES: &[&str] = &[
    "Cooked grains",
    "Seafood",
    "Eggs",
    "Plant proteins",
    "Cheese",
    "Yogurt",
    "Fresh fruits",
    "Berries",
    "Leafy greens",
    "Starchy vegetables",
    "Other vegetables",
    "Soups",
    "Savory snacks",
    "Sweet bakery",
    "Cured meats",
];
const CAPPED: &[&str] = &["Butter & oils", "Condiments", "Jams & syrups"];
const DRINKS: &[&str] = &["Milk", "Juice", "Sweetened beverages", "Coffee & tea"];

/// Draws a 4 to 8 food instance. Two energy-dense solids are always
/// included so the energy target is reachable under the gram caps; at most
/// one beverage and one capped-category food appear.
pub fn portion_instance(seed: u64) -> PortionInstance {
    let mut rng = rng_for(seed, &[7]);
    let meal_type = MealType::ALL[rng.gen_range(0..3)];
    let n = rng.gen_range(4..=8usize);
    let mut subs: Vec<&str> = DENSE.choose_multiple(&mut rng, 2).copied().collect();
    if rng.gen_bool(0.5) {
        subs.push(DRINKS.choose(&mut rng).copied().expect("non-empty"));
    }
    if subs.len() < n && rng.gen_bool(0.4) {
        subs.push(CAPPED.choose(&mut rng).copied().expect("non-empty"));
    }
    let mut pool: Vec<&str> = SIDES.iter().chain(DENSE.iter()).copied().filter(|s| !subs.contains(s)).collect();
    pool.shuffle(&mut rng);
    subs.extend(pool.into_iter().take(n - subs.len()));
    let foods = subs
        .iter()
        .enumerate()
        .map(|(i, sub)| {
            let tpl = &TEMPLATES[template_index(sub)];
            let kcal_per_g = rng.gen_range(tpl.density.0..=tpl.density.1);
            let base = template_densities(&mut rng, tpl, kcal_per_g, 0.6);
            make_food(&mut rng, format!("p{i}"), tpl, &base, 0.15)
        })
        .collect();
    PortionInstance { meal_type, foods }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FoodTable;
    use std::collections::BTreeSet;

    #[test]
    fn corpus_meets_scale_floor() {
        let c = synthetic_corpus(&SynthConfig::default());
        assert!(c.foods.len() >= 60);
        assert!(c.meals.len() >= 1000);
        let table = FoodTable::new(c.foods.clone()).unwrap();
        let mut clusters = BTreeSet::new();
        for m in &c.meals {
            m.validate().unwrap();
            assert!(!m.items.is_empty());
            for it in &m.items {
                table.get(&it.food_code).unwrap();
            }
            clusters.insert(m.cluster_label.unwrap());
        }
        assert!(clusters.len() >= 4);
        let types: BTreeSet<_> = c.meals.iter().map(|m| m.meal_type).collect();
        assert_eq!(types.len(), 3);
    }

    #[test]
    fn corpus_is_seeded() {
        let a = synthetic_corpus(&SynthConfig::default());
        let b = synthetic_corpus(&SynthConfig::default());
        assert_eq!(a.meals, b.meals);
        assert_eq!(a.foods, b.foods);
        let c = synthetic_corpus(&SynthConfig { seed: 7, ..Default::default() });
        assert_ne!(a.meals, c.meals);
    }

    #[test]
    fn pricebook_covers_every_food() {
        let c = synthetic_corpus(&SynthConfig::default());
        let book = synthetic_pricebook(&c.foods, 1);
        let table = FoodTable::new(c.foods.clone()).unwrap();
        for m in c.meals.iter().take(100) {
            assert!(crate::pricing::meal_cost(m, &book, Some(&table)).unwrap().total > book.overhead);
        }
    }

    #[test]
    fn instances_have_valid_foods() {
        for s in 0..50 {
            let inst = portion_instance(s);
            assert!((4..=8).contains(&inst.foods.len()));
            assert!(inst.foods.iter().filter(|f| f.counts_as_beverage()).count() <= 1);
            for f in &inst.foods {
                f.validate().unwrap();
            }
        }
    }
}
