//! Portion-based meal pricing: capped portion multipliers, cross-item caps,
//! per-100 g fallback prices and a fixed overhead.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{FoodTable, Meal};
use crate::error::{Error, Result};
use crate::nutrient::MainCategory;

pub const SOUPS: &str = "soups";
pub const FRUIT_SALAD: &str = "fruit_salad";
pub const SIDES: &str = "sides";
pub const MAINS: &str = "mains";
pub const DEFAULT: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortionEntry {
    pub food_code: String,
    pub grams_per_portion: f64,
    pub price: f64,
    /// Overrides the category default cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    /// Price category (`soups`, `fruit_salad`, `sides`, `mains`, ...). Inferred from the food when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FallbackPrice {
    pub food_code: String,
    pub price: f64,
}

fn default_category_caps() -> BTreeMap<String, f64> {
    [(SOUPS, 1.0), (FRUIT_SALAD, 1.0), (SIDES, 2.0), (MAINS, 1.5), (DEFAULT, 3.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

fn default_cross_item() -> BTreeMap<String, f64> {
    [(SOUPS, 1.0), (FRUIT_SALAD, 1.0)].into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn default_overhead() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceBook {
    #[serde(default)]
    pub portions: Vec<PortionEntry>,
    #[serde(default)]
    pub fallback_per_100g: Vec<FallbackPrice>,
    #[serde(default = "default_category_caps")]
    pub category_caps: BTreeMap<String, f64>,
    /// Per-meal ceiling on total portions within a price category.
    #[serde(default = "default_cross_item")]
    pub cross_item: BTreeMap<String, f64>,
    #[serde(default = "default_overhead")]
    pub overhead: f64,
    /// Optional scalar per main category applied to fallback prices.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub category_multipliers: BTreeMap<MainCategory, f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    fallback_index: HashMap<String, usize>,
}

impl Default for PriceBook {
    fn default() -> Self {
        Self {
            portions: Vec::new(),
            fallback_per_100g: Vec::new(),
            category_caps: default_category_caps(),
            cross_item: default_cross_item(),
            overhead: default_overhead(),
            category_multipliers: BTreeMap::new(),
            index: HashMap::new(),
            fallback_index: HashMap::new(),
        }
    }
}

impl PriceBook {
    pub fn new(portions: Vec<PortionEntry>, fallback: Vec<FallbackPrice>) -> Result<Self> {
        let mut book = Self { portions, fallback_per_100g: fallback, ..Default::default() };
        book.reindex()?;
        Ok(book)
    }

    /// Validates and rebuilds the lookup tables. Call after editing fields.
    pub fn reindex(&mut self) -> Result<()> {
        for e in &self.portions {
            if !(e.grams_per_portion.is_finite() && e.grams_per_portion > 0.0) {
                return Err(Error::validation(format!("price book `{}`: grams_per_portion must be > 0", e.food_code)));
            }
            if !(e.price.is_finite() && e.price >= 0.0) {
                return Err(Error::validation(format!("price book `{}`: price must be >= 0", e.food_code)));
            }
            if let Some(c) = e.cap {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::validation(format!("price book `{}`: cap must be > 0", e.food_code)));
                }
            }
        }
        for f in &self.fallback_per_100g {
            if !(f.price.is_finite() && f.price >= 0.0) {
                return Err(Error::validation(format!("fallback price `{}` must be >= 0", f.food_code)));
            }
        }
        for (k, v) in self.category_caps.iter().chain(self.cross_item.iter()) {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::validation(format!("price book cap `{k}` must be > 0")));
            }
        }
        if !(self.overhead.is_finite() && self.overhead >= 0.0) {
            return Err(Error::validation("price book overhead must be >= 0"));
        }
        if self.category_multipliers.values().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation("category multipliers must be >= 0"));
        }
        self.index.clear();
        for (i, e) in self.portions.iter().enumerate() {
            if self.index.insert(e.food_code.clone(), i).is_some() {
                return Err(Error::validation(format!("price book: duplicate portion entry `{}`", e.food_code)));
            }
        }
        self.fallback_index.clear();
        for (i, f) in self.fallback_per_100g.iter().enumerate() {
            if self.fallback_index.insert(f.food_code.clone(), i).is_some() {
                return Err(Error::validation(format!("price book: duplicate fallback entry `{}`", f.food_code)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut book: PriceBook = serde_json::from_str(text)?;
        book.reindex()?;
        Ok(book)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn entry(&self, code: &str) -> Option<&PortionEntry> {
        self.index.get(code).map(|&i| &self.portions[i])
    }

    pub fn fallback(&self, code: &str) -> Option<f64> {
        self.fallback_index.get(code).map(|&i| self.fallback_per_100g[i].price)
    }

    pub fn category_cap(&self, category: &str) -> f64 {
        self.category_caps
            .get(category)
            .or_else(|| self.category_caps.get(DEFAULT))
            .copied()
            .unwrap_or(3.0)
    }

    pub fn cap_for(&self, entry: &PortionEntry, foods: Option<&FoodTable>) -> f64 {
        entry.cap.unwrap_or_else(|| self.category_cap(&self.price_category(entry, foods)))
    }

    /// The entry's declared category, else one inferred from the food's taxonomy.
    pub fn price_category(&self, entry: &PortionEntry, foods: Option<&FoodTable>) -> String {
        if let Some(c) = &entry.category {
            return c.clone();
        }
        let Some(food) = foods.and_then(|t| t.get(&entry.food_code).ok()) else {
            return DEFAULT.to_string();
        };
        let sub = food.sub_slug();
        if sub.contains("soup") {
            SOUPS.to_string()
        } else if sub.contains("fruit_salad") {
            FRUIT_SALAD.to_string()
        } else {
            match food.main_category {
                MainCategory::MixedDishes | MainCategory::ProteinFoods => MAINS.to_string(),
                MainCategory::Grains | MainCategory::Vegetables | MainCategory::Fruits => SIDES.to_string(),
                _ => DEFAULT.to_string(),
            }
        }
    }
}

impl PriceBook {
    /// Adds entries for prototype codes by averaging the prices of their
    /// members. Codes that already have an entry are left alone.
    pub fn with_prototypes(&self, mapping: &BTreeMap<String, String>) -> Result<PriceBook> {
        let mut members: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (food, proto) in mapping {
            members.entry(proto.as_str()).or_default().push(food.as_str());
        }
        let mut out = self.clone();
        for (proto, foods) in members {
            if self.entry(proto).is_some() || self.fallback(proto).is_some() {
                continue;
            }
            let entries: Vec<&PortionEntry> = foods.iter().filter_map(|f| self.entry(f)).collect();
            if !entries.is_empty() {
                let n = entries.len() as f64;
                out.portions.push(PortionEntry {
                    food_code: proto.to_string(),
                    grams_per_portion: entries.iter().map(|e| e.grams_per_portion).sum::<f64>() / n,
                    price: entries.iter().map(|e| e.price).sum::<f64>() / n,
                    cap: entries[0].cap,
                    category: entries[0].category.clone(),
                });
                continue;
            }
            let prices: Vec<f64> = foods.iter().filter_map(|f| self.fallback(f)).collect();
            if !prices.is_empty() {
                out.fallback_per_100g.push(FallbackPrice {
                    food_code: proto.to_string(),
                    price: prices.iter().sum::<f64>() / prices.len() as f64,
                });
            }
        }
        out.reindex()?;
        Ok(out)
    }
}

/// min(w / g, c).
pub fn portion_multiplier(grams: f64, grams_per_portion: f64, cap: f64) -> f64 {
    (grams / grams_per_portion).min(cap).max(0.0)
}

/// Priced line of a meal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricedItem {
    pub food_code: String,
    pub multiplier: Option<f64>,
    pub cost: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealCost {
    pub items: Vec<PricedItem>,
    pub overhead: f64,
    pub total: f64,
}

/// Prices a meal. Within each cross-item group, the remaining portion
/// allowance is handed to the most expensive portions first.
pub fn meal_cost(meal: &Meal, book: &PriceBook, foods: Option<&FoodTable>) -> Result<MealCost> {
    let mut items: Vec<PricedItem> = Vec::with_capacity(meal.items.len());
    // (item index, price per portion, multiplier) grouped by price category
    let mut groups: BTreeMap<String, Vec<(usize, f64, f64)>> = BTreeMap::new();
    for (i, it) in meal.items.iter().enumerate() {
        if let Some(e) = book.entry(&it.food_code) {
            let m = portion_multiplier(it.grams, e.grams_per_portion, book.cap_for(e, foods));
            groups.entry(book.price_category(e, foods)).or_default().push((i, e.price, m));
            items.push(PricedItem { food_code: it.food_code.clone(), multiplier: Some(m), cost: m * e.price, fallback: false });
        } else if let Some(p) = book.fallback(&it.food_code) {
            let mult = foods
                .and_then(|t| t.get(&it.food_code).ok())
                .and_then(|f| book.category_multipliers.get(&f.main_category))
                .copied()
                .unwrap_or(1.0);
            items.push(PricedItem {
                food_code: it.food_code.clone(),
                multiplier: None,
                cost: it.grams / 100.0 * p * mult,
                fallback: true,
            });
        } else {
            return Err(Error::Pricing(it.food_code.clone()));
        }
    }
    for (cat, members) in &mut groups {
        let Some(&limit) = book.cross_item.get(cat) else { continue };
        if members.iter().map(|m| m.2).sum::<f64>() <= limit {
            continue;
        }
        // Ties on price fall back to item order so the result is order-stable.
        members.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| meal.items[a.0].food_code.cmp(&meal.items[b.0].food_code)));
        let mut left = limit;
        for &(i, price, m) in members.iter() {
            let take = m.min(left);
            left -= take;
            items[i].multiplier = Some(take);
            items[i].cost = take * price;
        }
    }
    let sum: f64 = items.iter().map(|i| i.cost).sum();
    Ok(MealCost { items, overhead: book.overhead, total: sum + book.overhead })
}

/// Cost saving S and increase CI, both in percent of the real meal's cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostDelta {
    pub saving: f64,
    pub increase: f64,
}

pub fn cost_delta(cost_real: f64, cost_sub: f64) -> Result<CostDelta> {
    if !(cost_real > 0.0) {
        return Err(Error::validation(format!("cost_delta: real meal cost must be > 0, got {cost_real}")));
    }
    let rel = (cost_real - cost_sub) / cost_real * 100.0;
    Ok(CostDelta { saving: rel.max(0.0), increase: (-rel).max(0.0) })
}

pub fn meal_cost_delta(real: &Meal, sub: &Meal, book: &PriceBook, foods: Option<&FoodTable>) -> Result<CostDelta> {
    cost_delta(meal_cost(real, book, foods)?.total, meal_cost(sub, book, foods)?.total)
}
