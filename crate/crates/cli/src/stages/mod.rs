//! Pipeline stages. Each reads its inputs from the config and the output
//! directory, writes its artifacts atomically and leaves a manifest behind.

mod analysis;
mod corpus;
mod generate;
mod substitute;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::Result;
use platewise::cluster::NOISE;
use platewise::corpus::{read_foods, read_labels, read_meals, FoodTable, Meal};
use platewise::seed::derive_seed;
use platewise::synth::{synthetic_corpus, synthetic_pricebook, SynthConfig};
use platewise::MealType;
use serde::Serialize;

use crate::artifacts::{write_atomic, Manifest, StageIo};
use crate::config::PipelineConfig;

pub use substitute::{read_candidates, CandidateFile, MealCandidates};

/// Artifact file names, relative to the output directory.
pub mod names {
    pub const MEALS_CLEAN: &str = "meals_clean.csv";
    pub const FOODS_CLEAN: &str = "foods_clean.csv";
    pub const LOF_SCORES: &str = "lof_scores.csv";
    pub const PRESENCE: &str = "presence.csv";
    pub const FOODS_PROTO: &str = "foods_proto.csv";
    pub const MEALS_PROTO: &str = "meals_proto.csv";
    pub const PROTOTYPE_MAP: &str = "prototype_map.csv";
    pub const PROTOTYPE_REPORT: &str = "prototype_report.json";
    pub const LABELS_MERGED: &str = "labels_merged.csv";
    pub const FEATURES: &str = "features.csv";
    pub const CLUSTER_PROFILE: &str = "cluster_profile.csv";
    pub const SAMPLER: &str = "sampler.json";
    pub const COMBINATIONS: &str = "combinations.csv";
    pub const GENERATED_MEALS: &str = "generated_meals.csv";
    pub const GENERATED_LABELS: &str = "generated_labels.csv";
    pub const PORTIONED_MEALS: &str = "portioned_meals.json";
    pub const PORTION_DIAGNOSTICS: &str = "portion_diagnostics.csv";
    pub const MEAL_METRICS: &str = "meal_metrics.csv";
    pub const EVALUATION_REPORT: &str = "evaluation_report.csv";
    pub const EVALUATION_SUMMARY: &str = "evaluation_summary.json";
    pub const PRICEBOOK_PROTO: &str = "pricebook_proto.json";
    pub const MEAL_COSTS: &str = "meal_costs.csv";
    pub const CANDIDATES: &str = "candidates.json";
    pub const SUBSTITUTIONS: &str = "substitutions.csv";
    pub const FRONTIER: &str = "frontier.csv";
    pub const SWEEP_SUMMARY: &str = "sweep_summary.json";
    pub const REPORT: &str = "report.json";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Prototype,
    ClusterProfile,
    FitSampler,
    Generate,
    Portion,
    Evaluate,
    Price,
    Substitute,
    Sweep,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Prototype,
        Stage::ClusterProfile,
        Stage::FitSampler,
        Stage::Generate,
        Stage::Portion,
        Stage::Evaluate,
        Stage::Price,
        Stage::Substitute,
        Stage::Sweep,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Prototype => "prototype",
            Stage::ClusterProfile => "cluster-profile",
            Stage::FitSampler => "fit-sampler",
            Stage::Generate => "generate",
            Stage::Portion => "portion",
            Stage::Evaluate => "evaluate",
            Stage::Price => "price",
            Stage::Substitute => "substitute",
            Stage::Sweep => "sweep",
            Stage::Report => "report",
        }
    }

    /// Per-stage tag mixed into the global seed.
    fn seed_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| platewise::Error::Config(format!("unknown stage `{s}`")).into())
    }
}

/// Seed for one stage; `None` in the config behaves like seed 0.
fn stage_seed(cfg: &PipelineConfig, stage: Stage) -> u64 {
    derive_seed(cfg.seed.unwrap_or(0), &[stage.seed_tag()])
}

pub fn run_stage(stage: Stage, cfg: &PipelineConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let mut io = StageIo::new(out, stage.name());
    match stage {
        Stage::Ingest => corpus::ingest(cfg, &mut io)?,
        Stage::Prototype => corpus::prototype(cfg, &mut io)?,
        Stage::ClusterProfile => corpus::cluster_profile(cfg, &mut io)?,
        Stage::FitSampler => generate::fit_sampler(cfg, &mut io)?,
        Stage::Generate => generate::generate(cfg, &mut io)?,
        Stage::Portion => generate::portion(cfg, &mut io)?,
        Stage::Evaluate => analysis::evaluate(cfg, &mut io)?,
        Stage::Price => analysis::price(cfg, &mut io)?,
        Stage::Substitute => substitute::substitute(cfg, &mut io)?,
        Stage::Sweep => substitute::sweep(cfg, &mut io)?,
        Stage::Report => analysis::report(cfg, &mut io)?,
    }
    io.finish(cfg)
}

/// Every stage in pipeline order.
pub fn run_all(cfg: &PipelineConfig, out: &Path) -> Result<Vec<Manifest>> {
    Stage::ALL.iter().map(|&s| run_stage(s, cfg, out)).collect()
}

/// Writes the bundled synthetic corpus, a matching price book and a config
/// pointing at them into `dir`. Returns the config path.
pub fn write_synthetic(dir: &Path, synth: &SynthConfig) -> Result<std::path::PathBuf> {
    let corpus = synthetic_corpus(synth);
    let book = synthetic_pricebook(&corpus.foods, synth.seed);

    let mut buf = Vec::new();
    platewise::corpus::write_foods(&mut buf, &corpus.foods)?;
    write_atomic(&dir.join("foods.csv"), &buf)?;
    let mut buf = Vec::new();
    platewise::corpus::write_meals(&mut buf, &corpus.meals)?;
    write_atomic(&dir.join("meals.csv"), &buf)?;
    let rows: Vec<LabelRow> = corpus
        .meals
        .iter()
        .map(|m| LabelRow { meal_id: m.meal_id.clone(), meal_type: m.meal_type, cluster_id: m.cluster_label.unwrap_or(-1) })
        .collect();
    write_atomic(&dir.join("labels.csv"), &csv_bytes(&rows)?)?;
    write_atomic(&dir.join("pricebook.json"), format!("{}\n", book.to_json()?).as_bytes())?;

    let mut cfg = PipelineConfig { seed: Some(synth.seed), ..PipelineConfig::default() };
    cfg.paths.foods = Some("foods.csv".into());
    cfg.paths.meals = Some("meals.csv".into());
    cfg.paths.labels = Some("labels.csv".into());
    cfg.paths.pricebook = Some("pricebook.json".into());
    cfg.paths.output = Some("out".into());
    let path = dir.join("platewise.toml");
    write_atomic(&path, cfg.to_toml()?.as_bytes())?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
struct LabelRow {
    meal_id: String,
    meal_type: MealType,
    cluster_id: i64,
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("flushing csv buffer: {e}"))
}

fn load_table(io: &mut StageIo, name: &str, producer: &str) -> Result<FoodTable> {
    Ok(FoodTable::new(read_foods(io.artifact(name, producer)?)?)?)
}

/// Meals from an artifact with their cluster labels attached; noise stays unlabelled.
/// Each argument is an `(artifact, producing stage)` pair.
fn load_labelled(io: &mut StageIo, meals: (&str, &str), labels: (&str, &str)) -> Result<Vec<Meal>> {
    let meals = read_meals(io.artifact(meals.0, meals.1)?)?;
    let labels = read_labels(io.artifact(labels.0, labels.1)?)?;
    meals
        .into_iter()
        .map(|m| {
            let label = labels
                .get(&m.meal_id)
                .copied()
                .ok_or_else(|| platewise::Error::Validation(format!("no cluster label for meal `{}`", m.meal_id)))?;
            Ok(if label == NOISE { m } else { m.with_cluster(label) })
        })
        .collect()
}
