use std::collections::BTreeMap;

use anyhow::{Context, Result};
use platewise::corpus::{write_meals, FoodRecord, Meal, MealItem};
use platewise::generator::{fit_all_empirical, load_probability_export, sample_combination, PresenceModel};
use platewise::portioner::{solve_portions, SolverOptions};
use platewise::seed::{derive_seed, key_hash, rng_for};
use platewise::{Error, MealType, Nutrient, PortionSolution64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::names::*;
use super::{load_labelled, load_table, stage_seed, LabelRow, Stage};
use crate::artifacts::StageIo;
use crate::config::PipelineConfig;

pub(super) fn fit_sampler(_cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let table = load_table(io, FOODS_PROTO, "prototype")?;
    let meals = load_labelled(io, (MEALS_PROTO, "prototype"), (LABELS_MERGED, "cluster-profile"))?;
    let models = fit_all_empirical(&meals, &table)?;
    io.write_json(SAMPLER, &models)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CombinationRow {
    combo_id: String,
    meal_type: MealType,
    cluster_id: i64,
    food_code: String,
}

pub(super) fn generate(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let seed = derive_seed(cfg.require_seed("generate")?, &[Stage::Generate.seed_tag()]);
    let table = load_table(io, FOODS_PROTO, "prototype")?;
    let models: Vec<PresenceModel> = match &cfg.paths.probability_export {
        Some(_) => load_probability_export(&io.external(cfg.paths.probability_export.as_ref(), "probability_export")?, &table)?,
        None => {
            let path = io.artifact(SAMPLER, "fit-sampler")?;
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
    };
    let per_cluster = cfg.generate.per_cluster;
    let drawn: Vec<Vec<CombinationRow>> = models
        .par_iter()
        .map(|model| {
            let mut rows = Vec::new();
            for d in 0..per_cluster {
                let mut rng = rng_for(seed, &[model.meal_type.index() as u64, key_hash(&model.cluster_id.to_string()), d as u64]);
                let combo = sample_combination(model, &cfg.generate.constraints, &mut rng)?;
                let id = format!("g-{}-{}-{:04}", model.meal_type, model.cluster_id, d + 1);
                rows.extend(combo.into_iter().map(|food_code| CombinationRow {
                    combo_id: id.clone(),
                    meal_type: model.meal_type,
                    cluster_id: model.cluster_id,
                    food_code,
                }));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<CombinationRow> = drawn.into_iter().flatten().collect();
    io.write_rows(COMBINATIONS, &rows)
}

struct Combination {
    id: String,
    meal_type: MealType,
    cluster_id: i64,
    foods: Vec<String>,
}

fn read_combinations(path: &std::path::Path) -> Result<Vec<Combination>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| anyhow::Error::new(Error::Csv(e)))?;
    let mut out: Vec<Combination> = Vec::new();
    for row in rdr.deserialize() {
        let row: CombinationRow = row.map_err(Error::Csv)?;
        match out.last_mut() {
            Some(c) if c.id == row.combo_id => c.foods.push(row.food_code),
            _ => out.push(Combination {
                id: row.combo_id,
                meal_type: row.meal_type,
                cluster_id: row.cluster_id,
                foods: vec![row.food_code],
            }),
        }
    }
    Ok(out)
}

/// One entry of `portioned_meals.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortionedMeal {
    pub meal_id: String,
    pub meal_type: MealType,
    pub cluster_id: i64,
    pub items: Vec<MealItem>,
    pub nutrient_totals: BTreeMap<String, f64>,
    pub objective: f64,
    pub flags: Vec<String>,
}

#[derive(Serialize)]
struct DiagnosticRow {
    meal_id: String,
    meal_type: MealType,
    cluster_id: i64,
    status: &'static str,
    objective: Option<f64>,
    energy_kcal: Option<f64>,
    total_grams: Option<f64>,
    iterations: Option<usize>,
    binding: String,
    flags: String,
}

pub(super) fn portion(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let table = load_table(io, FOODS_PROTO, "prototype")?;
    let combos = read_combinations(&io.artifact(COMBINATIONS, "generate")?)?;
    let base = stage_seed(cfg, Stage::Portion);
    let pc = &cfg.portion;

    let solved: Vec<(usize, Result<PortionSolution64, Error>)> = combos
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let foods: Vec<&FoodRecord> = match c.foods.iter().map(|f| table.get(f)).collect::<platewise::Result<_>>() {
                Ok(f) => f,
                Err(e) => return (i, Err(e)),
            };
            let opts = SolverOptions { seed: derive_seed(base, &[key_hash(&c.id)]), ..pc.solver.clone() };
            (i, solve_portions(&foods, &pc.profile, c.meal_type, &pc.plan, &pc.constraints, &opts))
        })
        .collect();

    let mut meals = Vec::new();
    let mut labels = Vec::new();
    let mut portioned = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, result) in solved {
        let c = &combos[i];
        match result {
            Ok(sol) => {
                let items: Vec<MealItem> = sol
                    .food_codes
                    .iter()
                    .zip(&sol.portions)
                    .filter(|(_, g)| **g > 0.0)
                    .map(|(code, g)| MealItem::new(code.clone(), *g))
                    .collect();
                diagnostics.push(DiagnosticRow {
                    meal_id: c.id.clone(),
                    meal_type: c.meal_type,
                    cluster_id: c.cluster_id,
                    status: "ok",
                    objective: Some(sol.objective),
                    energy_kcal: Some(sol.nutrient_totals[Nutrient::Energy.index()]),
                    total_grams: Some(sol.total_grams()),
                    iterations: Some(sol.iterations),
                    binding: sol.binding_constraints.join(";"),
                    flags: sol.flags.join(";"),
                });
                portioned.push(PortionedMeal {
                    meal_id: c.id.clone(),
                    meal_type: c.meal_type,
                    cluster_id: c.cluster_id,
                    items: items.clone(),
                    nutrient_totals: Nutrient::ALL.iter().map(|n| (n.key().to_string(), sol.nutrient_totals[n.index()])).collect(),
                    objective: sol.objective,
                    flags: sol.flags.clone(),
                });
                meals.push(Meal::new(c.id.clone(), c.meal_type, items));
                labels.push(LabelRow { meal_id: c.id.clone(), meal_type: c.meal_type, cluster_id: c.cluster_id });
            }
            Err(Error::Infeasible { blocking }) => diagnostics.push(DiagnosticRow {
                meal_id: c.id.clone(),
                meal_type: c.meal_type,
                cluster_id: c.cluster_id,
                status: "infeasible",
                objective: None,
                energy_kcal: None,
                total_grams: None,
                iterations: None,
                binding: blocking.join(";"),
                flags: String::new(),
            }),
            Err(e) => return Err(anyhow::Error::new(e).context(format!("portioning `{}`", c.id))),
        }
    }
    if meals.is_empty() && !combos.is_empty() {
        let blocking: std::collections::BTreeSet<String> =
            diagnostics.iter().flat_map(|d| d.binding.split(';').map(str::to_string)).collect();
        let blocking = blocking.into_iter().filter(|b| !b.is_empty()).collect();
        return Err(Error::Infeasible { blocking }.into());
    }

    io.write_with(GENERATED_MEALS, |w| write_meals(w, &meals))?;
    io.write_rows(GENERATED_LABELS, &labels)?;
    io.write_json(PORTIONED_MEALS, &portioned)?;
    io.write_rows(PORTION_DIAGNOSTICS, &diagnostics)?;
    Ok(())
}
