use std::collections::BTreeMap;

use anyhow::Result;
use platewise::corpus::{FoodTable, Meal};
use platewise::metrics::{compare_cohorts, meal_metrics, Cohort, CompareConfig, Metric, MealMetrics};
use platewise::pricing::{meal_cost, PriceBook};
use platewise::MealType;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::names::*;
use super::{load_labelled, load_table, stage_seed, Stage};
use crate::artifacts::{sha256_file, StageIo};
use crate::config::PipelineConfig;

#[derive(Serialize)]
struct MetricRow<'a> {
    cohort: &'a str,
    meal_id: &'a str,
    meal_type: MealType,
    cluster_id: i64,
    rdi_deviation: f64,
    mer: f64,
    mar: f64,
    amdr: f64,
    hill: f64,
    energy_density: f64,
}

#[derive(Serialize)]
struct ReportRow {
    cluster_id: i64,
    metric: &'static str,
    cohort_mean_gen: f64,
    cohort_mean_real: f64,
    diff: f64,
    ci_lo: f64,
    ci_hi: f64,
    q_value: f64,
    improved: bool,
}

/// Median RDI deviation of both cohorts and the relative reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub n_generated: usize,
    pub n_real: usize,
    pub median_generated: f64,
    pub median_real: f64,
    /// `100 * (1 - generated / real)`.
    pub reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub overall: DeviationSummary,
    pub by_meal_type: BTreeMap<MealType, DeviationSummary>,
    /// Improved comparisons per metric, out of `comparisons`.
    pub improved: BTreeMap<String, usize>,
    pub comparisons: BTreeMap<String, usize>,
}

fn median(v: Vec<f64>) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        platewise::scalar::median(&v)
    }
}

fn deviation_summary(gen: &[(&Meal, MealMetrics)], real: &[(&Meal, MealMetrics)]) -> DeviationSummary {
    let g = median(gen.iter().map(|(_, m)| m.rdi_deviation).collect());
    let r = median(real.iter().map(|(_, m)| m.rdi_deviation).collect());
    DeviationSummary {
        n_generated: gen.len(),
        n_real: real.len(),
        median_generated: g,
        median_real: r,
        reduction_pct: 100.0 * (1.0 - g / r),
    }
}

fn score<'a>(meals: &'a [Meal], table: &FoodTable, cfg: &PipelineConfig) -> Result<Vec<(&'a Meal, MealMetrics)>> {
    meals
        .par_iter()
        .map(|m| {
            let totals = table.meal_totals(m)?;
            Ok((m, meal_metrics(m, &totals, table, &cfg.portion.profile, &cfg.evaluate.metrics)?))
        })
        .collect()
}

/// Compares generated meals with the real meals of the same clusters.
pub(super) fn evaluate(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let table = load_table(io, FOODS_PROTO, "prototype")?;
    let real = load_labelled(io, (MEALS_PROTO, "prototype"), (LABELS_MERGED, "cluster-profile"))?;
    let gen = load_labelled(io, (GENERATED_MEALS, "portion"), (GENERATED_LABELS, "portion"))?;
    let gen_clusters: std::collections::BTreeSet<i64> = gen.iter().filter_map(|m| m.cluster_label).collect();
    let real: Vec<Meal> = real.into_iter().filter(|m| m.cluster_label.is_some_and(|c| gen_clusters.contains(&c))).collect();

    let gen_scored = score(&gen, &table, cfg)?;
    let real_scored = score(&real, &table, cfg)?;

    let mut rows = Vec::new();
    let mut cohorts = (Cohort::default(), Cohort::default());
    for (name, scored, cohort) in [("generated", &gen_scored, &mut cohorts.0), ("real", &real_scored, &mut cohorts.1)] {
        for (m, s) in scored.iter() {
            let cluster = m.cluster_label.expect("labelled");
            cohort.push(cluster, *s);
            rows.push(MetricRow {
                cohort: name,
                meal_id: &m.meal_id,
                meal_type: m.meal_type,
                cluster_id: cluster,
                rdi_deviation: s.rdi_deviation,
                mer: s.mer,
                mar: s.mar,
                amdr: s.amdr,
                hill: s.hill,
                energy_density: s.energy_density,
            });
        }
    }

    let compare = CompareConfig { seed: stage_seed(cfg, Stage::Evaluate), ..cfg.evaluate.compare };
    let comparisons = compare_cohorts(&cohorts.0, &cohorts.1, &compare);
    let report: Vec<ReportRow> = comparisons
        .iter()
        .filter(|c| !c.skipped)
        .map(|c| ReportRow {
            cluster_id: c.cluster_id,
            metric: c.metric.as_str(),
            cohort_mean_gen: c.mean_gen,
            cohort_mean_real: c.mean_real,
            diff: c.diff,
            ci_lo: c.ci_lo,
            ci_hi: c.ci_hi,
            q_value: c.q_value,
            improved: c.improved,
        })
        .collect();

    let mut improved = BTreeMap::new();
    let mut counted = BTreeMap::new();
    for metric in Metric::ALL {
        let these: Vec<_> = comparisons.iter().filter(|c| c.metric == metric && !c.skipped).collect();
        improved.insert(metric.as_str().to_string(), these.iter().filter(|c| c.improved).count());
        counted.insert(metric.as_str().to_string(), these.len());
    }
    let by_meal_type = MealType::ALL
        .iter()
        .filter(|mt| gen.iter().any(|m| m.meal_type == **mt))
        .map(|&mt| {
            let g: Vec<_> = gen_scored.iter().filter(|(m, _)| m.meal_type == mt).copied().collect();
            let r: Vec<_> = real_scored.iter().filter(|(m, _)| m.meal_type == mt).copied().collect();
            (mt, deviation_summary(&g, &r))
        })
        .collect();
    let summary = EvaluationSummary {
        overall: deviation_summary(&gen_scored, &real_scored),
        by_meal_type,
        improved,
        comparisons: counted,
    };

    io.write_rows(MEAL_METRICS, &rows)?;
    io.write_rows(EVALUATION_REPORT, &report)?;
    io.write_json(EVALUATION_SUMMARY, &summary)?;
    Ok(())
}

#[derive(Deserialize)]
struct MapRow {
    food_code: String,
    prototype_code: String,
}

pub(super) fn load_proto_mapping(io: &mut StageIo) -> Result<BTreeMap<String, String>> {
    let path = io.artifact(PROTOTYPE_MAP, "prototype")?;
    let mut rdr = csv::Reader::from_path(&path).map_err(platewise::Error::Csv)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: MapRow = row.map_err(platewise::Error::Csv)?;
        out.insert(row.food_code, row.prototype_code);
    }
    Ok(out)
}

#[derive(Serialize)]
struct CostRow<'a> {
    cohort: &'a str,
    meal_id: &'a str,
    meal_type: MealType,
    items: usize,
    fallback_items: usize,
    overhead: f64,
    total: f64,
}

/// Prices real and generated meals with the book extended to prototype codes.
pub(super) fn price(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let table = load_table(io, FOODS_PROTO, "prototype")?;
    let mapping = load_proto_mapping(io)?;
    let book = PriceBook::load(io.external(cfg.paths.pricebook.as_ref(), "pricebook")?)?.with_prototypes(&mapping)?;
    let real = platewise::corpus::read_meals(io.artifact(MEALS_PROTO, "prototype")?)?;
    let gen = platewise::corpus::read_meals(io.artifact(GENERATED_MEALS, "portion")?)?;

    let mut rows = Vec::new();
    for (name, meals) in [("real", &real), ("generated", &gen)] {
        for m in meals.iter() {
            let cost = meal_cost(m, &book, Some(&table))?;
            rows.push(CostRow {
                cohort: name,
                meal_id: &m.meal_id,
                meal_type: m.meal_type,
                items: cost.items.len(),
                fallback_items: cost.items.iter().filter(|i| i.fallback).count(),
                overhead: cost.overhead,
                total: cost.total,
            });
        }
    }
    io.write_rows(MEAL_COSTS, &rows)?;
    io.write(PRICEBOOK_PROTO, format!("{}\n", book.to_json()?).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KneePoint {
    pub k_sub: usize,
    pub theta: f64,
    pub median_h: Option<f64>,
    pub median_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub seed: Option<u64>,
    pub evaluation: EvaluationSummary,
    pub knees: Vec<KneePoint>,
    pub substitutions: usize,
    /// sha256 of every report-level artifact.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct FrontierIn {
    theta: f64,
    k_sub: usize,
    #[serde(rename = "median_H")]
    median_h: Option<f64>,
    #[serde(rename = "median_S")]
    median_s: Option<f64>,
    knee_flag: bool,
}

/// Collects the headline numbers of a completed run into `report.json`.
pub(super) fn report(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let eval_path = io.artifact(EVALUATION_REPORT, "evaluate")?;
    let summary_path = io.artifact(EVALUATION_SUMMARY, "evaluate")?;
    let frontier_path = io.artifact(FRONTIER, "sweep")?;
    let subs_path = io.artifact(SUBSTITUTIONS, "sweep")?;

    let evaluation: EvaluationSummary = serde_json::from_slice(
        &std::fs::read(&summary_path).map_err(|e| platewise::Error::Io { path: summary_path.clone(), source: e })?,
    )?;
    let mut knees = Vec::new();
    let mut rdr = csv::Reader::from_path(&frontier_path).map_err(platewise::Error::Csv)?;
    for row in rdr.deserialize() {
        let row: FrontierIn = row.map_err(platewise::Error::Csv)?;
        if row.knee_flag {
            knees.push(KneePoint { k_sub: row.k_sub, theta: row.theta, median_h: row.median_h, median_s: row.median_s });
        }
    }
    let substitutions = csv::Reader::from_path(&subs_path).map_err(platewise::Error::Csv)?.records().count();

    let mut artifacts = BTreeMap::new();
    for (name, path) in [
        (EVALUATION_REPORT, &eval_path),
        (EVALUATION_SUMMARY, &summary_path),
        (FRONTIER, &frontier_path),
        (SUBSTITUTIONS, &subs_path),
    ] {
        artifacts.insert(name.to_string(), sha256_file(path)?);
    }
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        evaluation,
        knees,
        substitutions,
        artifacts,
    };
    io.write_json(REPORT, &report)
}
