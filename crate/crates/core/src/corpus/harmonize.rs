//! Food-code harmonization across survey waves.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Meal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapReason {
    Dropped,
    Expanded,
    Consolidated,
    Renumbered,
    Revised,
}

impl MapReason {
    /// Dropped and revised codes stay in the data under their old code.
    pub fn replaces_code(self) -> bool {
        matches!(self, MapReason::Expanded | MapReason::Consolidated | MapReason::Renumbered)
    }
}

impl FromStr for MapReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dropped" => Ok(MapReason::Dropped),
            "expanded" => Ok(MapReason::Expanded),
            "consolidated" => Ok(MapReason::Consolidated),
            "renumbered" => Ok(MapReason::Renumbered),
            "revised" => Ok(MapReason::Revised),
            other => Err(Error::validation(format!("unknown code-map reason `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMapEntry {
    pub new_code: Option<String>,
    pub reason: MapReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMap {
    entries: BTreeMap<String, CodeMapEntry>,
}

impl CodeMap {
    pub fn insert(&mut self, old_code: impl Into<String>, entry: CodeMapEntry) {
        self.entries.insert(old_code.into(), entry);
    }

    pub fn with(mut self, old: &str, new: Option<&str>, reason: MapReason) -> Self {
        self.insert(old, CodeMapEntry { new_code: new.map(str::to_string), reason });
        self
    }

    pub fn entries(&self) -> &BTreeMap<String, CodeMapEntry> {
        &self.entries
    }

    fn step(&self, code: &str) -> Option<&str> {
        self.entries
            .get(code)
            .filter(|e| e.reason.replaces_code())
            .and_then(|e| e.new_code.as_deref())
    }

    /// Transitive closure of the replacing entries: old code to terminal code.
    pub fn terminal_codes(&self) -> Result<HashMap<String, String>> {
        let mut out = HashMap::new();
        for old in self.entries.keys() {
            let mut cur = old.as_str();
            let mut hops = 0usize;
            while let Some(next) = self.step(cur) {
                cur = next;
                hops += 1;
                if hops > self.entries.len() {
                    return Err(Error::Config(format!("code map contains a cycle through `{old}`")));
                }
            }
            if cur != old {
                out.insert(old.clone(), cur.to_string());
            }
        }
        Ok(out)
    }
}

/// Replaces every mapped code by its terminal code and merges duplicates within a meal.
pub fn apply_code_harmonization(meals: &[Meal], map: &CodeMap) -> Result<Vec<Meal>> {
    let terminal = map.terminal_codes()?;
    Ok(meals
        .iter()
        .map(|meal| {
            let mut m = meal.clone();
            for item in &mut m.items {
                if let Some(t) = terminal.get(&item.food_code) {
                    item.food_code = t.clone();
                }
            }
            m.merge_duplicates();
            m
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::MealItem;
    use crate::nutrient::MealType;
    use proptest::prelude::*;

    fn meal(items: &[(&str, f64)]) -> Meal {
        Meal::new("m", MealType::Lunch, items.iter().map(|(c, g)| MealItem::new(*c, *g)).collect())
    }

    #[test]
    fn renumbered_code_is_replaced() {
        let map = CodeMap::default().with("111", Some("222"), MapReason::Renumbered);
        let out = apply_code_harmonization(&[meal(&[("111", 50.0)])], &map).unwrap();
        assert_eq!(out[0].items, vec![MealItem::new("222", 50.0)]);
    }

    #[test]
    fn dropped_and_revised_codes_kept() {
        let map = CodeMap::default()
            .with("333", None, MapReason::Dropped)
            .with("444", Some("555"), MapReason::Revised);
        let out = apply_code_harmonization(&[meal(&[("333", 30.0), ("444", 10.0)])], &map).unwrap();
        assert_eq!(out[0].items, vec![MealItem::new("333", 30.0), MealItem::new("444", 10.0)]);
    }

    #[test]
    fn consolidation_merges_grams() {
        let map = CodeMap::default()
            .with("A", Some("C"), MapReason::Consolidated)
            .with("B", Some("C"), MapReason::Consolidated);
        let out = apply_code_harmonization(&[meal(&[("A", 40.0), ("B", 60.0)])], &map).unwrap();
        assert_eq!(out[0].items, vec![MealItem::new("C", 100.0)]);
    }

    #[test]
    fn chains_resolve_to_terminal() {
        let map = CodeMap::default()
            .with("1", Some("2"), MapReason::Renumbered)
            .with("2", Some("3"), MapReason::Expanded);
        let out = apply_code_harmonization(&[meal(&[("1", 5.0)])], &map).unwrap();
        assert_eq!(out[0].items[0].food_code, "3");
    }

    #[test]
    fn cycle_is_configuration_error() {
        let map = CodeMap::default()
            .with("1", Some("2"), MapReason::Renumbered)
            .with("2", Some("1"), MapReason::Renumbered);
        assert!(matches!(apply_code_harmonization(&[meal(&[("1", 5.0)])], &map), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn harmonization_is_idempotent(
            edges in proptest::collection::vec((0u8..12, 12u8..24), 0..10),
            items in proptest::collection::vec((0u8..24, 1.0f64..200.0), 1..8),
        ) {
            // targets are always in a disjoint range, so the map is acyclic
            let mut map = CodeMap::default();
            for (a, b) in &edges {
                map.insert(a.to_string(), CodeMapEntry { new_code: Some(b.to_string()), reason: MapReason::Consolidated });
            }
            let mut m = Meal::new("m", MealType::Dinner, items.iter().map(|(c, g)| MealItem::new(c.to_string(), *g)).collect());
            m.merge_duplicates();
            let once = apply_code_harmonization(&[m], &map).unwrap();
            let twice = apply_code_harmonization(&once, &map).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
