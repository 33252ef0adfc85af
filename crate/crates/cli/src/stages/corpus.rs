use std::collections::{BTreeMap, HashMap};

use anyhow::Result;
use platewise::cluster::{centroids, merge_small_clusters, profile_clusters, write_cluster_profile, NOISE};
use platewise::corpus::{
    aggregate_prototypes, apply_code_harmonization, bootstrap_presence_filter, lof_filter, read_codemap, read_foods,
    read_labels, read_meals, write_foods, write_meals, FoodTable, Meal, MealItem,
};
use platewise::features::{extract_batch, standardize, write_features, FeatureVector, FEATURE_NAMES};
use platewise::MealType;
use serde::Serialize;

use super::names::*;
use super::{load_table, stage_seed, LabelRow, Stage};
use crate::artifacts::StageIo;
use crate::config::PipelineConfig;

#[derive(Serialize)]
struct LofRow<'a> {
    meal_id: &'a str,
    meal_type: MealType,
    lof_score: f64,
    removed: bool,
}

#[derive(Serialize)]
struct PresenceRow<'a> {
    food_code: &'a str,
    lower_bound: f64,
    retained: bool,
}

pub(super) fn ingest(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let foods = read_foods(io.external(cfg.paths.foods.as_ref(), "foods")?)?;
    let table = FoodTable::new(foods)?;
    let mut meals = read_meals(io.external(cfg.paths.meals.as_ref(), "meals")?)?;
    if cfg.paths.codemap.is_some() {
        let map = read_codemap(io.external(cfg.paths.codemap.as_ref(), "codemap")?)?;
        meals = apply_code_harmonization(&meals, &map)?;
    }
    for m in &meals {
        for item in &m.items {
            table.get(&item.food_code)?;
        }
    }

    let mut kept = Vec::new();
    let mut lof_rows = Vec::new();
    let mut scored: Vec<(String, MealType, f64, bool)> = Vec::new();
    for mt in MealType::ALL {
        let group: Vec<Meal> = meals.iter().filter(|m| m.meal_type == mt).cloned().collect();
        if group.is_empty() {
            continue;
        }
        let outcome = lof_filter(&group, &cfg.ingest.lof)?;
        let removed: std::collections::BTreeSet<&str> = outcome.removed.iter().map(String::as_str).collect();
        for (id, score) in &outcome.scores {
            scored.push((id.clone(), mt, *score, removed.contains(id.as_str())));
        }
        kept.extend(outcome.kept);
    }
    lof_rows.extend(scored.iter().map(|(id, mt, s, r)| LofRow { meal_id: id, meal_type: *mt, lof_score: *s, removed: *r }));

    let presence = bootstrap_presence_filter(
        &kept,
        cfg.ingest.presence_resamples,
        cfg.ingest.presence_level,
        stage_seed(cfg, Stage::Ingest),
    )?;
    let presence_rows: Vec<PresenceRow> = presence
        .lower_bounds
        .iter()
        .map(|(code, lb)| PresenceRow { food_code: code, lower_bound: *lb, retained: presence.retained.contains(code) })
        .collect();
    let foods_clean: Vec<_> = table.foods().iter().filter(|f| presence.retained.contains(&f.food_code)).cloned().collect();

    io.write_with(MEALS_CLEAN, |w| write_meals(w, &presence.meals))?;
    io.write_with(FOODS_CLEAN, |w| write_foods(w, &foods_clean))?;
    io.write_rows(LOF_SCORES, &lof_rows)?;
    io.write_rows(PRESENCE, &presence_rows)?;
    Ok(())
}

#[derive(Serialize)]
struct MapRow<'a> {
    food_code: &'a str,
    prototype_code: &'a str,
    cosine: f64,
    relative_error: f64,
}

pub(super) fn prototype(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let foods = read_foods(io.artifact(FOODS_CLEAN, "ingest")?)?;
    let meals = read_meals(io.artifact(MEALS_CLEAN, "ingest")?)?;
    let mut usage: HashMap<String, f64> = foods.iter().map(|f| (f.food_code.clone(), 0.0)).collect();
    for m in &meals {
        for item in &m.items {
            *usage.entry(item.food_code.clone()).or_default() += item.grams;
        }
    }
    let outcome = aggregate_prototypes(&foods, &usage, &cfg.prototype)?;
    let mapped = map_meals(&meals, &outcome.mapping)?;

    let rows: Vec<MapRow> = outcome
        .report
        .assignments
        .iter()
        .map(|a| MapRow {
            food_code: &a.food_code,
            prototype_code: &a.prototype_code,
            cosine: a.cosine,
            relative_error: a.relative_error,
        })
        .collect();
    io.write_with(FOODS_PROTO, |w| write_foods(w, &outcome.prototypes))?;
    io.write_with(MEALS_PROTO, |w| write_meals(w, &mapped))?;
    io.write_rows(PROTOTYPE_MAP, &rows)?;
    io.write_json(PROTOTYPE_REPORT, &outcome.report)?;
    Ok(())
}

/// Rewrites meals onto prototype codes, summing grams of merged foods.
pub(super) fn map_meals(meals: &[Meal], mapping: &BTreeMap<String, String>) -> Result<Vec<Meal>> {
    meals
        .iter()
        .map(|m| {
            let items = m
                .items
                .iter()
                .map(|i| {
                    let code = mapping.get(&i.food_code).ok_or_else(|| platewise::Error::UnknownFood(i.food_code.clone()))?;
                    Ok(MealItem::new(code.clone(), i.grams))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut out = Meal { items, ..m.clone() };
            out.merge_duplicates();
            Ok(out)
        })
        .collect()
}

pub(super) fn cluster_profile(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let table = load_table(io, FOODS_PROTO, "prototype")?;
    let meals = read_meals(io.artifact(MEALS_PROTO, "prototype")?)?;
    let labels = read_labels(io.external(cfg.paths.labels.as_ref(), "labels")?)?;
    let ccfg = &cfg.cluster.cluster;

    let mut label_rows = Vec::new();
    let mut vectors: Vec<FeatureVector> = Vec::new();
    let mut profiles = Vec::new();
    for mt in MealType::ALL {
        let group: Vec<Meal> = meals.iter().filter(|m| m.meal_type == mt).cloned().collect();
        if group.is_empty() {
            continue;
        }
        let raw_labels: Vec<i64> = group
            .iter()
            .map(|m| {
                labels
                    .get(&m.meal_id)
                    .copied()
                    .ok_or_else(|| platewise::Error::Validation(format!("no cluster label for meal `{}`", m.meal_id)))
            })
            .collect::<std::result::Result<_, _>>()?;
        let feats = extract_batch(&group, &table, cfg.cluster.level_bins)?;
        let rows: Vec<Vec<f64>> = feats.iter().map(|v| v.values.to_vec()).collect();
        let types = vec![mt; rows.len()];
        let std = standardize(&rows, &types, &FEATURE_NAMES);
        let cents = centroids(&raw_labels, &std.rows);
        let merged = if raw_labels.iter().all(|l| *l == NOISE) {
            raw_labels.clone()
        } else {
            merge_small_clusters(&raw_labels, &cents, ccfg.params(mt).min_cluster_size, ccfg.merge_cosine)?
        };
        let raw_kept: Vec<Vec<f64>> = rows.iter().map(|r| std.columns.iter().map(|&j| r[j]).collect()).collect();
        profiles.extend(profile_clusters(&merged, &raw_kept, &std.rows, &std.names, ccfg)?);
        label_rows.extend(
            group.iter().zip(&merged).map(|(m, &l)| LabelRow { meal_id: m.meal_id.clone(), meal_type: mt, cluster_id: l }),
        );
        vectors.extend(feats);
    }

    io.write_rows(LABELS_MERGED, &label_rows)?;
    io.write_with(FEATURES, |w| write_features(w, &vectors))?;
    io.write_with(CLUSTER_PROFILE, |w| write_cluster_profile(w, &profiles))?;
    Ok(())
}
