use std::path::Path;

use anyhow::Result;
use platewise::corpus::read_meals;
use platewise::pricing::PriceBook;
use platewise::substitution::{
    pool_up_to, sweep_theta, write_frontier, write_substitutions, SubstitutionCandidate, SubstitutionIndex, SweepConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::names::*;
use super::{load_table, Stage};
use crate::artifacts::StageIo;
use crate::config::PipelineConfig;

/// Candidates of one real meal, indexed by exact `k_sub - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealCandidates {
    pub meal_id: String,
    pub by_k: Vec<Vec<SubstitutionCandidate>>,
}

/// Contents of `candidates.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFile {
    pub k_max: usize,
    pub meals: Vec<MealCandidates>,
}

impl CandidateFile {
    /// `(meal_id, candidates with k_sub <= k)` for every meal.
    pub fn pools(&self, k: usize) -> Vec<(String, Vec<SubstitutionCandidate>)> {
        self.meals.iter().map(|m| (m.meal_id.clone(), pool_up_to(&m.by_k, k))).collect()
    }
}

pub fn read_candidates(path: &Path) -> Result<CandidateFile> {
    let bytes = std::fs::read(path).map_err(|e| platewise::Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub(super) fn substitute(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let table = load_table(io, FOODS_PROTO, "prototype")?;
    let meals = read_meals(io.artifact(MEALS_PROTO, "prototype")?)?;
    let book_path = io.artifact(PRICEBOOK_PROTO, "price")?;
    let book = PriceBook::load(&book_path)?;
    let sc = &cfg.substitute;
    let index =
        SubstitutionIndex::new(&meals, &table, &book, &cfg.portion.profile, &cfg.portion.plan, sc.retrieval.clone())?;
    let per_meal: Vec<MealCandidates> = meals
        .par_iter()
        .map(|m| {
            let by_k = (1..=sc.k_max).map(|k| index.retrieve(m, k)).collect::<platewise::Result<_>>()?;
            Ok(MealCandidates { meal_id: m.meal_id.clone(), by_k })
        })
        .collect::<Result<_>>()?;
    io.write_json(CANDIDATES, &CandidateFile { k_max: sc.k_max, meals: per_meal })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepSummary {
    k_sub: usize,
    knee_theta: Option<f64>,
    meals: usize,
    winners: usize,
}

/// Sweeps theta for every k up to `k_max`, pooling smaller edits into larger budgets.
pub(super) fn sweep(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let seed = cfg.require_seed("sweep")?;
    let file = read_candidates(&io.artifact(CANDIDATES, "substitute")?)?;
    let mut scfg: SweepConfig = cfg.sweep.clone();
    scfg.seed = platewise::seed::derive_seed(seed, &[Stage::Sweep.seed_tag()]);

    let mut winners = Vec::new();
    let mut frontier = Vec::new();
    let mut summary = Vec::new();
    for k in 1..=file.k_max {
        let result = sweep_theta(&file.pools(k), k, &scfg)?;
        summary.push(SweepSummary {
            k_sub: k,
            knee_theta: result.knee.map(|i| result.frontier[i].theta),
            meals: file.meals.len(),
            winners: result.winners.len(),
        });
        winners.extend(result.winners);
        frontier.extend(result.frontier);
    }
    io.write_with(SUBSTITUTIONS, |w| write_substitutions(w, &winners))?;
    io.write_with(FRONTIER, |w| write_frontier(w, &frontier))?;
    io.write_json(SWEEP_SUMMARY, &summary)?;
    Ok(())
}
