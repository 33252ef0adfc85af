use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{l1_gram_change, swap_effort, SubstitutionCandidate};
use crate::corpus::{FoodTable, Meal, MealItem};
use crate::error::{Error, Result};
use crate::metrics::rdi_deviation;
use crate::nutrient::{MainCategory, MealType, Nutrient, NutrientArray};
use crate::portioner::{MealEnergyPlan, RdiProfile};
use crate::pricing::{cost_delta, meal_cost, PriceBook};

/// `0.7 * Jaccard(presence) + 0.3 * cosine(grams over the union)`.
/// Two empty meals score 0.
pub fn meal_similarity(a: &Meal, b: &Meal) -> f64 {
    let union: BTreeSet<&str> = a.items.iter().chain(&b.items).map(|i| i.food_code.as_str()).collect();
    if union.is_empty() {
        return 0.0;
    }
    let inter = a.items.iter().filter(|i| b.contains(&i.food_code)).count();
    let jaccard = inter as f64 / union.len() as f64;
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for code in &union {
        let (x, y) = (a.grams_of(code), b.grams_of(code));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let cosine = if na > 0.0 && nb > 0.0 { dot / (na.sqrt() * nb.sqrt()) } else { 0.0 };
    0.7 * jaccard + 0.3 * cosine
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub k_neighbors: usize,
    /// Relative energy window for real-meal candidates.
    pub energy_tolerance: f64,
    pub item_count_tolerance: usize,
    pub exclude_beverage_edits: bool,
    pub include_swaps: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k_neighbors: 50, energy_tolerance: 0.05, item_count_tolerance: 1, exclude_beverage_edits: true, include_swaps: true }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    meal: Meal,
    energy: f64,
    deviation: f64,
    cost: f64,
}

/// Real-meal pool indexed by meal type, with energies, deviations and costs cached.
#[derive(Debug, Clone)]
pub struct SubstitutionIndex<'a> {
    foods: &'a FoodTable,
    book: &'a PriceBook,
    profile: RdiProfile<f64>,
    plan: MealEnergyPlan,
    panel: Vec<Nutrient>,
    cfg: RetrievalConfig,
    by_type: BTreeMap<MealType, Vec<Entry>>,
    swap_pool: BTreeMap<MealType, Vec<String>>,
}

impl<'a> SubstitutionIndex<'a> {
    pub fn new(
        meals: &[Meal],
        foods: &'a FoodTable,
        book: &'a PriceBook,
        profile: &RdiProfile<f64>,
        plan: &MealEnergyPlan,
        cfg: RetrievalConfig,
    ) -> Result<Self> {
        if !(cfg.energy_tolerance >= 0.0) {
            return Err(Error::Config("energy_tolerance must be >= 0".into()));
        }
        let mut idx = Self {
            foods,
            book,
            profile: profile.clone(),
            plan: *plan,
            panel: profile.deviation_panel(),
            cfg,
            by_type: BTreeMap::new(),
            swap_pool: BTreeMap::new(),
        };
        for m in meals {
            let e = idx.entry(m)?;
            idx.by_type.entry(m.meal_type).or_default().push(e);
        }
        for (mt, entries) in &idx.by_type {
            let codes: BTreeSet<&str> = entries.iter().flat_map(|e| e.meal.items.iter().map(|i| i.food_code.as_str())).collect();
            idx.swap_pool.insert(*mt, codes.into_iter().map(str::to_string).collect());
        }
        Ok(idx)
    }

    fn entry(&self, m: &Meal) -> Result<Entry> {
        let totals = self.foods.meal_totals(m)?;
        Ok(Entry {
            meal: m.clone(),
            energy: totals[Nutrient::Energy.index()],
            deviation: self.deviation_of(&totals, m.meal_type),
            cost: meal_cost(m, self.book, Some(self.foods))?.total,
        })
    }

    fn deviation_of(&self, totals: &NutrientArray<f64>, mt: MealType) -> f64 {
        rdi_deviation(totals, &self.profile.meal_targets(mt, &self.plan), &self.panel)
    }

    /// RDI deviation of a meal against its per-meal targets, percent.
    pub fn deviation(&self, meal: &Meal) -> Result<f64> {
        Ok(self.deviation_of(&self.foods.meal_totals(meal)?, meal.meal_type))
    }

    pub fn meals(&self, mt: MealType) -> impl Iterator<Item = &Meal> {
        self.by_type.get(&mt).into_iter().flatten().map(|e| &e.meal)
    }

    fn main_of(&self, code: &str) -> Result<MainCategory> {
        Ok(self.foods.get(code)?.main_category)
    }

    fn is_beverage(&self, code: &str) -> Result<bool> {
        Ok(self.foods.get(code)?.counts_as_beverage())
    }

    fn build(&self, orig: &Entry, id: String, cand: &Entry, k_allowed: usize) -> Result<Option<SubstitutionCandidate>> {
        let added: Vec<String> = cand.meal.items.iter().filter(|i| !orig.meal.contains(&i.food_code)).map(|i| i.food_code.clone()).collect();
        let removed: Vec<String> = orig.meal.items.iter().filter(|i| !cand.meal.contains(&i.food_code)).map(|i| i.food_code.clone()).collect();
        if self.cfg.exclude_beverage_edits {
            for c in added.iter().chain(&removed) {
                if self.is_beverage(c)? {
                    return Ok(None);
                }
            }
        }
        let health = orig.deviation - cand.deviation;
        if health < 0.0 {
            return Ok(None);
        }
        let mut cats_added = added.iter().map(|c| self.main_of(c)).collect::<Result<Vec<_>>>()?;
        let mut cats_removed = removed.iter().map(|c| self.main_of(c)).collect::<Result<Vec<_>>>()?;
        cats_added.sort();
        cats_removed.sort();
        let delta = cost_delta(orig.cost, cand.cost)?;
        let total = orig.meal.total_grams();
        Ok(Some(SubstitutionCandidate {
            source_meal_id: orig.meal.meal_id.clone(),
            candidate_id: id,
            k_sub: added.len().max(removed.len()),
            adds_mixed_dish: cats_added.contains(&MainCategory::MixedDishes),
            within_category: cats_added == cats_removed,
            added,
            removed,
            health_gain: health,
            saving: delta.saving,
            cost_increase: delta.increase,
            effort: swap_effort(&orig.meal, &cand.meal, k_allowed),
            portion_shift_pct: if total > 0.0 { l1_gram_change(&orig.meal, &cand.meal) / total * 100.0 } else { 0.0 },
        }))
    }

    /// Candidates editing exactly `k_sub` foods: nearest real meals plus,
    /// for `k_sub == 1`, same-category single-item swaps.
    pub fn retrieve(&self, meal: &Meal, k_sub: usize) -> Result<Vec<SubstitutionCandidate>> {
        let orig = self.entry(meal)?;
        let mut out = Vec::new();
        let Some(pool) = self.by_type.get(&meal.meal_type) else { return Ok(out) };

        let n = meal.items.len();
        let mut near: Vec<(f64, &Entry)> = pool
            .iter()
            .filter(|e| e.meal.meal_id != meal.meal_id)
            .filter(|e| (e.energy - orig.energy).abs() <= self.cfg.energy_tolerance * orig.energy)
            .filter(|e| e.meal.items.len().abs_diff(n) <= self.cfg.item_count_tolerance)
            .map(|e| (meal_similarity(meal, &e.meal), e))
            .collect();
        near.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.meal.meal_id.cmp(&b.1.meal.meal_id)));
        near.truncate(self.cfg.k_neighbors);
        for (_, e) in near {
            let k = e.meal.items.iter().filter(|i| !meal.contains(&i.food_code)).count().max(
                meal.items.iter().filter(|i| !e.meal.contains(&i.food_code)).count(),
            );
            if k != k_sub {
                continue;
            }
            if let Some(c) = self.build(&orig, e.meal.meal_id.clone(), e, k_sub)? {
                out.push(c);
            }
        }

        if self.cfg.include_swaps && k_sub == 1 {
            let codes = &self.swap_pool[&meal.meal_type];
            for (pos, item) in meal.items.iter().enumerate() {
                let from = self.foods.get(&item.food_code)?;
                if self.cfg.exclude_beverage_edits && from.counts_as_beverage() {
                    continue;
                }
                for code in codes {
                    if meal.contains(code) {
                        continue;
                    }
                    let to = self.foods.get(code)?;
                    if to.main_category != from.main_category || (self.cfg.exclude_beverage_edits && to.counts_as_beverage()) {
                        continue;
                    }
                    let mut swapped = meal.clone();
                    swapped.items[pos] = MealItem::new(code.clone(), item.grams);
                    let id = format!("swap:{}->{}", item.food_code, code);
                    swapped.meal_id = id.clone();
                    let e = self.entry(&swapped)?;
                    if let Some(c) = self.build(&orig, id, &e, k_sub)? {
                        out.push(c);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FoodRecord;
    use crate::pricing::PortionEntry;
    use crate::NUTRIENT_COUNT;

    fn meal(id: &str, items: &[(&str, f64)]) -> Meal {
        Meal::new(id, MealType::Lunch, items.iter().map(|(c, g)| MealItem::new(*c, *g)).collect())
    }

    #[test]
    fn similarity_examples() {
        let a = meal("a", &[("A", 100.0), ("B", 100.0)]);
        assert!((meal_similarity(&a, &a) - 1.0).abs() < 1e-12);
        let d = meal("d", &[("X", 100.0)]);
        assert_eq!(meal_similarity(&a, &d), 0.0);
        let b = meal("b", &[("B", 100.0), ("C", 100.0)]);
        assert!((meal_similarity(&a, &b) - (0.7 / 3.0 + 0.15)).abs() < 1e-12);
        assert_eq!(meal_similarity(&meal("e", &[]), &meal("f", &[])), 0.0);
    }

    fn food(code: &str, main: MainCategory, kcal: f64, protein: f64, beverage: bool) -> FoodRecord {
        let mut n = [0.0; NUTRIENT_COUNT];
        n[Nutrient::Energy.index()] = kcal;
        n[Nutrient::Protein.index()] = protein;
        FoodRecord {
            food_code: code.into(),
            name: code.into(),
            main_category: main,
            sub_category: "x".into(),
            nutrients_per_100g: n,
            is_beverage: beverage,
            is_solid: !beverage,
        }
    }

    fn fixture() -> (FoodTable, PriceBook) {
        let foods = FoodTable::new(vec![
            food("rice", MainCategory::Grains, 130.0, 2.0, false),
            food("quinoa", MainCategory::Grains, 120.0, 2.0, false),
            food("chicken", MainCategory::ProteinFoods, 200.0, 15.0, false),
            food("beans", MainCategory::ProteinFoods, 200.0, 5.0, false),
            food("stew", MainCategory::MixedDishes, 200.0, 15.0, false),
            food("soda", MainCategory::Beverages, 40.0, 0.0, true),
            food("tea", MainCategory::Beverages, 40.0, 0.0, true),
        ])
        .unwrap();
        let price = |c: &str, p: f64| PortionEntry { food_code: c.into(), grams_per_portion: 100.0, price: p, cap: Some(10.0), category: None };
        let book = PriceBook::new(
            vec![price("rice", 1.0), price("quinoa", 2.0), price("chicken", 3.0), price("beans", 1.0), price("stew", 2.0), price("soda", 1.0), price("tea", 1.0)],
            vec![],
        )
        .unwrap();
        (foods, book)
    }

    #[test]
    fn retrieval_rules() {
        let (foods, book) = fixture();
        let orig = meal("o", &[("rice", 200.0), ("beans", 100.0), ("soda", 300.0)]);
        let corpus = vec![
            orig.clone(),
            // same energy, swaps beans for chicken (k = 1)
            meal("near", &[("rice", 200.0), ("chicken", 100.0), ("soda", 300.0)]),
            // energy +6%
            meal("far", &[("rice", 200.0), ("chicken", 100.0), ("soda", 390.0)]),
            // adds two, removes one (k = 2)
            meal("k2", &[("quinoa", 180.0), ("chicken", 100.0), ("beans", 20.0), ("soda", 300.0)]),
            // edits the beverage
            meal("bev", &[("rice", 200.0), ("chicken", 100.0), ("tea", 300.0)]),
        ];
        let idx = SubstitutionIndex::new(&corpus, &foods, &book, &RdiProfile::default(), &MealEnergyPlan::default(), RetrievalConfig::default()).unwrap();
        let c1 = idx.retrieve(&orig, 1).unwrap();
        let ids: Vec<&str> = c1.iter().map(|c| c.candidate_id.as_str()).collect();
        assert!(ids.contains(&"near"), "{ids:?}");
        assert!(!ids.contains(&"far") && !ids.contains(&"k2") && !ids.contains(&"bev"));
        assert!(ids.iter().all(|i| !i.contains("soda")));
        let swap = c1.iter().find(|c| c.candidate_id == "swap:beans->chicken").unwrap();
        assert!(swap.within_category && !swap.adds_mixed_dish);
        assert_eq!(swap.portion_shift_pct, 200.0 / 600.0 * 100.0);
        for c in &c1 {
            assert_eq!(c.k_sub, c.recomputed_k_sub());
            assert!(c.health_gain >= 0.0);
            assert!(c.saving == 0.0 || c.cost_increase == 0.0);
        }
        let c2 = idx.retrieve(&orig, 2).unwrap();
        assert!(c2.iter().any(|c| c.candidate_id == "k2"));
        assert!(c2.iter().all(|c| c.k_sub == 2));
    }
}
