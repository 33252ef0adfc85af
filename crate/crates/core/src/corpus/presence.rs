//! Bootstrap filtering of rarely present foods.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Meal;
use crate::error::{Error, Result};
use crate::scalar::{quantile_sorted, sort_floats};

#[derive(Debug, Clone)]
pub struct PresenceFilterOutcome {
    pub retained: BTreeSet<String>,
    /// Lower percentile bound of the resampled mean presence per food.
    pub lower_bounds: BTreeMap<String, f64>,
    /// Input meals restricted to retained foods; meals left empty are dropped.
    pub meals: Vec<Meal>,
}

/// Retains a food iff the lower `(1 - level) / 2` percentile of its bootstrap
/// mean presence rate is strictly positive.
pub fn bootstrap_presence_filter(
    meals: &[Meal],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<PresenceFilterOutcome> {
    if resamples < 100 {
        return Err(Error::Config(format!("presence filter needs at least 100 resamples, got {resamples}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} outside (0, 1)")));
    }
    let vocab: Vec<&str> = {
        let set: BTreeSet<&str> =
            meals.iter().flat_map(|m| m.items.iter().map(|i| i.food_code.as_str())).collect();
        set.into_iter().collect()
    };
    if meals.is_empty() || vocab.is_empty() {
        return Ok(PresenceFilterOutcome {
            retained: BTreeSet::new(),
            lower_bounds: BTreeMap::new(),
            meals: Vec::new(),
        });
    }
    let pos: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let rows: Vec<Vec<usize>> = meals
        .iter()
        .map(|m| m.items.iter().map(|i| pos[i.food_code.as_str()]).collect())
        .collect();

    let n = meals.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = vec![Vec::with_capacity(resamples); vocab.len()];
    let mut counts = vec![0u32; vocab.len()];
    for _ in 0..resamples {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            for &f in &rows[rng.gen_range(0..n)] {
                counts[f] += 1;
            }
        }
        for (series, &c) in means.iter_mut().zip(&counts) {
            series.push(c as f64 / n as f64);
        }
    }

    let q = (1.0 - level) / 2.0;
    let mut retained = BTreeSet::new();
    let mut lower_bounds = BTreeMap::new();
    for (code, mut series) in vocab.iter().zip(means) {
        sort_floats(&mut series);
        let lo = quantile_sorted(&series, q);
        if lo > 0.0 {
            retained.insert(code.to_string());
        }
        lower_bounds.insert(code.to_string(), lo);
    }

    let filtered = meals
        .iter()
        .filter_map(|m| {
            let mut m = m.clone();
            m.items.retain(|i| retained.contains(&i.food_code));
            (!m.items.is_empty()).then_some(m)
        })
        .collect();
    Ok(PresenceFilterOutcome { retained, lower_bounds, meals: filtered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::MealItem;
    use crate::nutrient::MealType;

    fn corpus(n: usize, rare: &[(&str, usize)]) -> Vec<Meal> {
        (0..n)
            .map(|i| {
                let mut items = vec![MealItem::new("always", 10.0)];
                for (code, count) in rare {
                    if i < *count {
                        items.push(MealItem::new(*code, 5.0));
                    }
                }
                Meal::new(format!("m{i}"), MealType::Breakfast, items)
            })
            .collect()
    }

    #[test]
    fn ubiquitous_kept_and_rare_dropped() {
        let meals = corpus(1000, &[("five", 5), ("one", 1)]);
        let out = bootstrap_presence_filter(&meals, 1000, 0.95, 7).unwrap();
        assert!(out.retained.contains("always"));
        assert!(out.retained.contains("five"));
        assert!(!out.retained.contains("one"));
        assert_eq!(out.lower_bounds["always"], 1.0);
        assert_eq!(out.meals.len(), 1000);
        assert!(out.meals.iter().all(|m| !m.contains("one")));
    }

    #[test]
    fn emptied_meals_dropped() {
        let mut meals = corpus(300, &[]);
        meals.push(Meal::new("lonely", MealType::Breakfast, vec![MealItem::new("solo", 3.0)]));
        let out = bootstrap_presence_filter(&meals, 200, 0.95, 1).unwrap();
        assert!(!out.retained.contains("solo"));
        assert!(out.meals.iter().all(|m| m.meal_id != "lonely"));
    }

    #[test]
    fn empty_corpus_and_bad_config() {
        assert!(bootstrap_presence_filter(&[], 100, 0.95, 0).unwrap().retained.is_empty());
        assert!(bootstrap_presence_filter(&[], 50, 0.95, 0).is_err());
    }

    #[test]
    fn seeded_runs_agree() {
        let meals = corpus(400, &[("a", 3), ("b", 2)]);
        let x = bootstrap_presence_filter(&meals, 300, 0.95, 11).unwrap();
        let y = bootstrap_presence_filter(&meals, 300, 0.95, 11).unwrap();
        assert_eq!(x.lower_bounds, y.lower_bounds);
    }
}
