//! Food-combination sampling conditioned on meal type and cluster.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{FoodTable, Meal};
use crate::error::{Error, Result};
use crate::nutrient::MealType;

/// Export schema version understood by [`load_probability_export`].
pub const EXPORT_SCHEMA_VERSION: u32 = 1;

const PRIOR_CLAMP: f64 = 5.0;
const FREQ_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoodRole {
    Solid,
    Beverage,
}

/// Per-food presence probabilities for one (meal type, cluster) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceModel {
    pub meal_type: MealType,
    pub cluster_id: i64,
    pub food_codes: Vec<String>,
    pub base_prob: Vec<f64>,
    /// Log-odds offset added to the base probability.
    pub pair_prior: Vec<f64>,
    pub allowed_mask: Vec<bool>,
    pub roles: Vec<FoodRole>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl PresenceModel {
    /// Gated probability: 0 for masked foods, otherwise
    /// `sigmoid(logit(base) + pair_prior)` with 0 and 1 kept exact.
    pub fn effective_prob(&self, i: usize) -> f64 {
        if !self.allowed_mask[i] {
            return 0.0;
        }
        let b = self.base_prob[i];
        if b <= 0.0 {
            0.0
        } else if b >= 1.0 {
            1.0
        } else {
            sigmoid(logit(b) + self.pair_prior[i])
        }
    }

    pub fn effective_probs(&self) -> Vec<f64> {
        (0..self.food_codes.len()).map(|i| self.effective_prob(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.food_codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.food_codes.is_empty()
    }
}

fn role_of(foods: &FoodTable, code: &str) -> Result<FoodRole> {
    Ok(if foods.get(code)?.counts_as_beverage() { FoodRole::Beverage } else { FoodRole::Solid })
}

fn presence_freq<'a>(meals: &[&'a Meal]) -> BTreeMap<&'a str, f64> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for m in meals {
        let distinct: BTreeSet<&str> = m.items.iter().map(|i| i.food_code.as_str()).collect();
        for c in distinct {
            *counts.entry(c).or_default() += 1;
        }
    }
    counts.into_iter().map(|(c, n)| (c, n as f64 / meals.len() as f64)).collect()
}

/// Fits the empirical model of one cluster.
///
/// `type_meals` is every meal of the same meal type (including the cluster).
/// Foods are those seen anywhere in the meal type; the mask keeps the ones seen
/// in the cluster. The prior is the clamped log-odds gap between the cluster
/// and meal-type frequencies.
pub fn fit_empirical_presence(
    meal_type: MealType,
    cluster_id: i64,
    cluster_meals: &[&Meal],
    type_meals: &[&Meal],
    foods: &FoodTable,
) -> Result<PresenceModel> {
    if cluster_meals.is_empty() {
        return Err(Error::validation(format!("cluster {cluster_id} ({meal_type}) has no meals")));
    }
    let inside = presence_freq(cluster_meals);
    let overall = presence_freq(type_meals);
    let codes: BTreeSet<&str> = overall.keys().chain(inside.keys()).copied().collect();
    let mut model = PresenceModel {
        meal_type,
        cluster_id,
        food_codes: Vec::with_capacity(codes.len()),
        base_prob: Vec::with_capacity(codes.len()),
        pair_prior: Vec::with_capacity(codes.len()),
        allowed_mask: Vec::with_capacity(codes.len()),
        roles: Vec::with_capacity(codes.len()),
    };
    for code in codes {
        let fc = inside.get(code).copied().unwrap_or(0.0);
        let ft = overall.get(code).copied().unwrap_or(fc);
        let prior = if fc == ft {
            0.0
        } else {
            let clamp = |p: f64| p.clamp(FREQ_EPS, 1.0 - FREQ_EPS);
            (logit(clamp(fc)) - logit(clamp(ft))).clamp(-PRIOR_CLAMP, PRIOR_CLAMP)
        };
        model.roles.push(role_of(foods, code)?);
        model.food_codes.push(code.to_string());
        model.base_prob.push(fc);
        model.pair_prior.push(prior);
        model.allowed_mask.push(fc > 0.0);
    }
    Ok(model)
}

/// One model per (meal type, cluster) present in `meals`; unlabelled meals
/// count towards meal-type frequencies only.
pub fn fit_all_empirical(meals: &[Meal], foods: &FoodTable) -> Result<Vec<PresenceModel>> {
    let mut out = Vec::new();
    for mt in MealType::ALL {
        let type_meals: Vec<&Meal> = meals.iter().filter(|m| m.meal_type == mt).collect();
        let clusters: BTreeSet<i64> = type_meals.iter().filter_map(|m| m.cluster_label).collect();
        for c in clusters {
            let inside: Vec<&Meal> = type_meals.iter().copied().filter(|m| m.cluster_label == Some(c)).collect();
            out.push(fit_empirical_presence(mt, c, &inside, &type_meals, foods)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportMetadata {
    pub source: String,
    pub training_run_id: String,
}

/// One record of the probability export file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilityRecord {
    pub schema_version: u32,
    pub meal_type: MealType,
    pub cluster_id: i64,
    pub food_codes: Vec<String>,
    pub probabilities: Vec<f64>,
    pub allowed_mask: Vec<bool>,
    pub metadata: ExportMetadata,
}

impl ProbabilityRecord {
    pub fn from_model(model: &PresenceModel, metadata: ExportMetadata) -> Self {
        ProbabilityRecord {
            schema_version: EXPORT_SCHEMA_VERSION,
            meal_type: model.meal_type,
            cluster_id: model.cluster_id,
            food_codes: model.food_codes.clone(),
            probabilities: model.effective_probs(),
            allowed_mask: model.allowed_mask.clone(),
            metadata,
        }
    }

    fn into_model(self, row: usize, foods: &FoodTable) -> Result<PresenceModel> {
        let bad = |msg: String| Error::validation(format!("row {row}: {msg}"));
        if self.schema_version != EXPORT_SCHEMA_VERSION {
            return Err(bad(format!("unsupported schema_version {}", self.schema_version)));
        }
        let n = self.food_codes.len();
        if self.probabilities.len() != n || self.allowed_mask.len() != n {
            return Err(bad("food_codes, probabilities and allowed_mask differ in length".into()));
        }
        let mut seen = BTreeSet::new();
        let mut roles = Vec::with_capacity(n);
        for (i, code) in self.food_codes.iter().enumerate() {
            if !seen.insert(code.as_str()) {
                return Err(bad(format!("duplicate food code `{code}`")));
            }
            if !foods.contains(code) {
                return Err(bad(format!("unknown food code `{code}`")));
            }
            roles.push(role_of(foods, code)?);
            let p = self.probabilities[i];
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(format!("probability {p} for `{code}` outside [0, 1]")));
            }
            if !self.allowed_mask[i] && p != 0.0 {
                return Err(bad(format!("masked food `{code}` has nonzero probability {p}")));
            }
        }
        Ok(PresenceModel {
            meal_type: self.meal_type,
            cluster_id: self.cluster_id,
            food_codes: self.food_codes,
            base_prob: self.probabilities,
            pair_prior: vec![0.0; n],
            allowed_mask: self.allowed_mask,
            roles,
        })
    }
}

/// Parses an export (a single record or an array of records) and resolves it
/// against `foods`. Errors name the 0-based record index as the row.
pub fn parse_probability_export(text: &str, foods: &FoodTable) -> Result<Vec<PresenceModel>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let records = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    records
        .into_iter()
        .enumerate()
        .map(|(row, v)| {
            let rec: ProbabilityRecord =
                serde_json::from_value(v).map_err(|e| Error::validation(format!("row {row}: schema mismatch: {e}")))?;
            rec.into_model(row, foods)
        })
        .collect()
}

pub fn load_probability_export(path: &Path, foods: &FoodTable) -> Result<Vec<PresenceModel>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_probability_export(&text, foods)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CombinationConstraints {
    pub prob_threshold: f64,
    pub max_items: usize,
    pub min_solids_breakfast: usize,
    pub min_solids_lunch: usize,
    pub min_solids_dinner: usize,
    pub max_beverages: usize,
}

impl Default for CombinationConstraints {
    fn default() -> Self {
        CombinationConstraints {
            prob_threshold: 0.02,
            max_items: 12,
            min_solids_breakfast: 2,
            min_solids_lunch: 3,
            min_solids_dinner: 3,
            max_beverages: 1,
        }
    }
}

impl CombinationConstraints {
    pub fn min_solids(&self, meal_type: MealType) -> usize {
        match meal_type {
            MealType::Breakfast => self.min_solids_breakfast,
            MealType::Lunch => self.min_solids_lunch,
            MealType::Dinner => self.min_solids_dinner,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let worst = MealType::ALL.iter().map(|m| self.min_solids(*m)).max().unwrap_or(0);
        if self.max_items < worst + self.max_beverages {
            return Err(Error::Config("max_items must cover min_solids plus max_beverages".into()));
        }
        if !(0.0..=1.0).contains(&self.prob_threshold) {
            return Err(Error::Config("prob_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Draws one food combination.
///
/// Each food at or above the threshold is included independently with its
/// effective probability. Repairs run in a fixed order: trim to `max_items`
/// by probability, keep the most likely `max_beverages` beverages, then top
/// up solids greedily by probability. Output follows model order.
pub fn sample_combination<R: Rng>(
    model: &PresenceModel,
    constraints: &CombinationConstraints,
    rng: &mut R,
) -> Result<Vec<String>> {
    let probs = model.effective_probs();
    let candidates: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] >= constraints.prob_threshold).collect();
    let min_solids = constraints.min_solids(model.meal_type);
    let solid_candidates = candidates.iter().filter(|&&i| model.roles[i] == FoodRole::Solid).count();
    if solid_candidates < min_solids {
        return Err(Error::InfeasibleCluster {
            cluster: format!("{}/{}", model.meal_type, model.cluster_id),
            reason: format!(
                "{solid_candidates} solid foods pass the threshold, {min_solids} needed for {}",
                model.meal_type
            ),
        });
    }

    let mut picked: Vec<usize> = candidates.iter().copied().filter(|&i| rng.gen::<f64>() < probs[i]).collect();
    let by_prob = |a: &usize, b: &usize| probs[*b].partial_cmp(&probs[*a]).unwrap().then(a.cmp(b));

    if picked.len() > constraints.max_items {
        picked.sort_by(by_prob);
        picked.truncate(constraints.max_items);
    }

    let mut beverages: Vec<usize> = picked.iter().copied().filter(|&i| model.roles[i] == FoodRole::Beverage).collect();
    if beverages.len() > constraints.max_beverages {
        beverages.sort_by(by_prob);
        let drop: BTreeSet<usize> = beverages[constraints.max_beverages..].iter().copied().collect();
        picked.retain(|i| !drop.contains(i));
    }

    let solids = picked.iter().filter(|&&i| model.roles[i] == FoodRole::Solid).count();
    if solids < min_solids {
        let chosen: BTreeSet<usize> = picked.iter().copied().collect();
        let mut rest: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|i| model.roles[*i] == FoodRole::Solid && !chosen.contains(i))
            .collect();
        rest.sort_by(by_prob);
        picked.extend(rest.into_iter().take(min_solids - solids));
    }

    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| model.food_codes[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testutil::food;
    use crate::corpus::MealItem;
    use crate::nutrient::MainCategory;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(n_solid: usize, n_bev: usize) -> FoodTable {
        let mut v = Vec::new();
        for i in 0..n_solid {
            v.push(food(&format!("s{i:02}"), MainCategory::Grains, "cereals", false));
        }
        for i in 0..n_bev {
            v.push(food(&format!("b{i:02}"), MainCategory::Beverages, "juice", true));
        }
        FoodTable::new(v).unwrap()
    }

    fn model(probs: &[(&str, f64, FoodRole)], mt: MealType) -> PresenceModel {
        PresenceModel {
            meal_type: mt,
            cluster_id: 0,
            food_codes: probs.iter().map(|p| p.0.to_string()).collect(),
            base_prob: probs.iter().map(|p| p.1).collect(),
            pair_prior: vec![0.0; probs.len()],
            allowed_mask: vec![true; probs.len()],
            roles: probs.iter().map(|p| p.2).collect(),
        }
    }

    fn meal(id: &str, codes: &[&str]) -> Meal {
        Meal::new(id, MealType::Lunch, codes.iter().map(|c| MealItem::new(*c, 50.0)).collect())
    }

    #[test]
    fn empirical_frequencies_and_mask() {
        let foods = table(4, 0);
        let mut cluster = Vec::new();
        for i in 0..100 {
            cluster.push(if i < 30 { meal(&format!("c{i}"), &["s00", "s01"]) } else { meal(&format!("c{i}"), &["s01"]) });
        }
        let other: Vec<Meal> = (0..100).map(|i| meal(&format!("o{i}"), &["s02", "s01"])).collect();
        let cref: Vec<&Meal> = cluster.iter().collect();
        let all: Vec<&Meal> = cluster.iter().chain(&other).collect();
        let m = fit_empirical_presence(MealType::Lunch, 3, &cref, &all, &foods).unwrap();
        let idx = |c: &str| m.food_codes.iter().position(|x| x == c).unwrap();
        assert_eq!(m.base_prob[idx("s00")], 0.30);
        assert!(!m.allowed_mask[idx("s02")]);
        assert_eq!(m.effective_prob(idx("s02")), 0.0);
        // s01 present in every meal of both groups
        assert_eq!(m.pair_prior[idx("s01")], 0.0);
        assert!(m.pair_prior[idx("s00")] > 0.0);
        assert!(fit_empirical_presence(MealType::Lunch, 3, &[], &all, &foods).is_err());
    }

    #[test]
    fn below_threshold_never_drawn() {
        let m = model(
            &[("s00", 0.9, FoodRole::Solid), ("s01", 0.9, FoodRole::Solid), ("s02", 0.019, FoodRole::Solid)],
            MealType::Breakfast,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..2000 {
            let c = sample_combination(&m, &CombinationConstraints::default(), &mut rng).unwrap();
            assert!(!c.contains(&"s02".to_string()));
        }
    }

    #[test]
    fn trims_to_twelve_highest() {
        let codes: Vec<String> = (0..15).map(|i| format!("s{i:02}")).collect();
        let probs: Vec<(&str, f64, FoodRole)> =
            codes.iter().enumerate().map(|(i, c)| (c.as_str(), 1.0 - i as f64 * 0.001, FoodRole::Solid)).collect();
        let mut m = model(&probs, MealType::Dinner);
        m.base_prob.iter_mut().for_each(|p| *p = 1.0);
        m.base_prob[14] = 0.5;
        let c = sample_combination(&m, &CombinationConstraints::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(c.len(), 12);
        assert_eq!(c, codes[..12].to_vec());
    }

    #[test]
    fn repairs_beverages_and_solids() {
        let m = model(
            &[
                ("b00", 1.0, FoodRole::Beverage),
                ("b01", 0.999, FoodRole::Beverage),
                ("s00", 1.0, FoodRole::Solid),
                ("s01", 0.03, FoodRole::Solid),
                ("s02", 0.02, FoodRole::Solid),
            ],
            MealType::Breakfast,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let c = sample_combination(&m, &CombinationConstraints::default(), &mut rng).unwrap();
            assert!(c.contains(&"b00".to_string()));
            assert!(!c.contains(&"b01".to_string()));
            let solids = c.iter().filter(|x| x.starts_with('s')).count();
            assert!(solids >= 2);
        }
    }

    #[test]
    fn infeasible_cluster_error() {
        let m = model(&[("s00", 0.5, FoodRole::Solid), ("b00", 0.9, FoodRole::Beverage)], MealType::Lunch);
        let err = sample_combination(&m, &CombinationConstraints::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::InfeasibleCluster { .. })));
    }

    #[test]
    fn mask_dominates_prior() {
        let mut m = model(
            &[("s00", 1.0, FoodRole::Solid), ("s01", 1.0, FoodRole::Solid), ("s02", 0.5, FoodRole::Solid)],
            MealType::Breakfast,
        );
        m.allowed_mask[2] = false;
        m.pair_prior[2] = 50.0;
        assert_eq!(m.effective_prob(2), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            assert!(!sample_combination(&m, &CombinationConstraints::default(), &mut rng).unwrap().contains(&"s02".into()));
        }
    }

    #[test]
    fn inclusion_rates_match_probabilities() {
        let probs = [0.1, 0.35, 0.6, 0.85];
        let mut m = model(
            &[
                ("s00", probs[0], FoodRole::Solid),
                ("s01", probs[1], FoodRole::Solid),
                ("s02", probs[2], FoodRole::Solid),
                ("s03", probs[3], FoodRole::Solid),
            ],
            MealType::Lunch,
        );
        m.pair_prior[1] = 0.4;
        let cons = CombinationConstraints {
            min_solids_breakfast: 0,
            min_solids_lunch: 0,
            min_solids_dinner: 0,
            ..Default::default()
        };
        let draws = 20_000;
        let mut counts = [0usize; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..draws {
            for code in sample_combination(&m, &cons, &mut rng).unwrap() {
                counts[code[1..].parse::<usize>().unwrap()] += 1;
            }
        }
        for (i, &n) in counts.iter().enumerate() {
            let p = m.effective_prob(i);
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let rate = n as f64 / draws as f64;
            assert!((rate - p).abs() <= 3.0 * se, "food {i}: {rate} vs {p}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let m = model(
            &[("s00", 0.5, FoodRole::Solid), ("s01", 0.5, FoodRole::Solid), ("s02", 0.5, FoodRole::Solid)],
            MealType::Breakfast,
        );
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_combination(&m, &CombinationConstraints::default(), &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    fn export_json(records: usize) -> String {
        let recs: Vec<String> = (0..records)
            .map(|c| {
                format!(
                    r#"{{"schema_version":1,"meal_type":"lunch","cluster_id":{c},"food_codes":["s00","s01","b00"],
                    "probabilities":[0.5,0.0,0.25],"allowed_mask":[true,false,true],
                    "metadata":{{"source":"cvae","training_run_id":"run-1"}}}}"#
                )
            })
            .collect();
        format!("[{}]", recs.join(","))
    }

    #[test]
    fn export_loads_three_models() {
        let models = parse_probability_export(&export_json(3), &table(2, 1)).unwrap();
        assert_eq!(models.len(), 3);
        assert_eq!(models[2].cluster_id, 2);
        assert_eq!(models[0].roles, vec![FoodRole::Solid, FoodRole::Solid, FoodRole::Beverage]);
        let single = parse_probability_export(
            export_json(1).trim_start_matches('[').trim_end_matches(']'),
            &table(2, 1),
        )
        .unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn export_errors_name_row_and_code() {
        let text: String = (0..8)
            .map(|i| {
                let p = if i == 7 { "1.2" } else { "0.5" };
                format!(
                    r#"{{"schema_version":1,"meal_type":"dinner","cluster_id":{i},"food_codes":["s00"],"probabilities":[{p}],"allowed_mask":[true],"metadata":{{"source":"x","training_run_id":"y"}}}}"#
                )
            })
            .collect::<Vec<_>>()
            .join(",");
        let err = parse_probability_export(&format!("[{text}]"), &table(1, 0)).unwrap_err().to_string();
        assert!(err.contains("row 7"), "{err}");

        let bad_code = export_json(1).replace("\"s01\"", "\"zz9\"");
        let err = parse_probability_export(&bad_code, &table(2, 1)).unwrap_err().to_string();
        assert!(err.contains("zz9"), "{err}");

        let masked = export_json(1).replace("[0.5,0.0,0.25]", "[0.5,0.1,0.25]");
        assert!(parse_probability_export(&masked, &table(2, 1)).is_err());

        let schema = export_json(1).replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(parse_probability_export(&schema, &table(2, 1)).unwrap_err().to_string().contains("row 0"));
    }

    #[test]
    fn export_round_trip() {
        let foods = table(3, 1);
        let meals: Vec<Meal> = (0..10).map(|i| meal(&format!("m{i}"), &["s00", "s01", "b00"][..1 + i % 3]).with_cluster(1)).collect();
        let models = fit_all_empirical(&meals, &foods).unwrap();
        let meta = ExportMetadata { source: "empirical".into(), training_run_id: "none".into() };
        let recs: Vec<ProbabilityRecord> = models.iter().map(|m| ProbabilityRecord::from_model(m, meta.clone())).collect();
        let back = parse_probability_export(&serde_json::to_string(&recs).unwrap(), &foods).unwrap();
        assert_eq!(back.len(), models.len());
        for (a, b) in models.iter().zip(&back) {
            assert_eq!(a.effective_probs(), b.effective_probs());
        }
    }
}
