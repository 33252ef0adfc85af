//! Minimal-change meal substitution: candidate scoring, two-stage winner
//! selection and the trade-off sweep.

mod retrieve;
mod sweep;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::Meal;
use crate::error::{Error, Result};

pub use retrieve::{meal_similarity, RetrievalConfig, SubstitutionIndex};
pub use sweep::{
    knee_index, pool_up_to, sweep_theta, write_frontier, write_substitutions, FrontierRow, SweepConfig, SweepResult,
    WinnerRow, DEFAULT_THETA_GRID,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionCandidate {
    pub source_meal_id: String,
    /// Real meal id, or `swap:<removed>-><added>` for a single-item swap.
    pub candidate_id: String,
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub k_sub: usize,
    /// Reduction in RDI deviation, percentage points.
    pub health_gain: f64,
    pub saving: f64,
    pub cost_increase: f64,
    pub effort: f64,
    pub portion_shift_pct: f64,
    pub within_category: bool,
    pub adds_mixed_dish: bool,
}

impl SubstitutionCandidate {
    pub fn recomputed_k_sub(&self) -> usize {
        self.added.len().max(self.removed.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TradeoffParams {
    pub theta: f64,
    pub effort_alpha: f64,
    pub cross_margin_alpha: f64,
    pub cross_buffer_beta: f64,
    pub cross_uplift: f64,
    /// Switches to `lambda*H + (1-lambda)*(S-CI) - effort_alpha*E`.
    pub alt_score_lambda: Option<f64>,
    /// Largest admissible cost increase, percent.
    pub budget_cap: Option<f64>,
    pub no_cost_increase: bool,
}

impl Default for TradeoffParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            effort_alpha: 0.5,
            cross_margin_alpha: 0.25,
            cross_buffer_beta: 1.5,
            cross_uplift: 0.20,
            alt_score_lambda: None,
            budget_cap: None,
            no_cost_increase: false,
        }
    }
}

impl TradeoffParams {
    pub fn with_theta(theta: f64) -> Self {
        Self { theta, ..Default::default() }
    }

    /// w = theta / (1 + theta).
    pub fn weight(&self) -> f64 {
        self.theta / (1.0 + self.theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::Config(format!("theta must be finite and >= 0, got {}", self.theta)));
        }
        for (name, v) in [
            ("effort_alpha", self.effort_alpha),
            ("cross_margin_alpha", self.cross_margin_alpha),
            ("cross_buffer_beta", self.cross_buffer_beta),
            ("cross_uplift", self.cross_uplift),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0")));
            }
        }
        if let Some(l) = self.alt_score_lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config(format!("alt_score_lambda must lie in [0, 1], got {l}")));
            }
        }
        Ok(())
    }
}

/// Portion and composition effort in [0, 1]. `baseline_p(k) = k / n_items`.
pub fn swap_effort(original: &Meal, candidate: &Meal, k_allowed: usize) -> f64 {
    let k = k_allowed.max(1) as f64;
    let total = original.total_grams();
    let n = original.items.len();
    let e_portion = if total > 0.0 && n > 0 {
        let baseline = k / n as f64;
        (l1_gram_change(original, candidate) / total / baseline).min(1.0)
    } else {
        0.0
    };
    let added = candidate.items.iter().filter(|i| !original.contains(&i.food_code)).count();
    let removed = original.items.iter().filter(|i| !candidate.contains(&i.food_code)).count();
    let e_comp = (added.max(removed) as f64 / k).min(1.0);
    0.5 * e_portion + 0.5 * e_comp
}

/// Sum of absolute gram changes over the union of foods.
pub fn l1_gram_change(a: &Meal, b: &Meal) -> f64 {
    let mut d: f64 = a.items.iter().map(|i| (i.grams - b.grams_of(&i.food_code)).abs()).sum();
    d += b.items.iter().filter(|i| !a.contains(&i.food_code)).map(|i| i.grams).sum::<f64>();
    d
}

/// `V = w*H + (1-w)*S - w*CI`, or the alternative lambda form when configured.
pub fn value_score(c: &SubstitutionCandidate, params: &TradeoffParams) -> f64 {
    match params.alt_score_lambda {
        Some(l) => l * c.health_gain + (1.0 - l) * (c.saving - c.cost_increase) - params.effort_alpha * c.effort,
        None => {
            let w = params.weight();
            w * c.health_gain + (1.0 - w) * c.saving - w * c.cost_increase
        }
    }
}

/// Drops candidates that fail the health, value or budget filters.
pub fn admissible<'a>(candidates: &'a [SubstitutionCandidate], params: &TradeoffParams) -> Vec<(&'a SubstitutionCandidate, f64)> {
    candidates
        .iter()
        .filter(|c| c.health_gain >= 0.0)
        .filter(|c| !params.no_cost_increase || c.cost_increase == 0.0)
        .filter(|c| params.budget_cap.is_none_or(|b| c.cost_increase <= b))
        .map(|c| (c, value_score(c, params)))
        .filter(|(_, v)| *v >= 0.0)
        .collect()
}

/// Higher V first, then smaller portion shift, larger H, smaller S, then id.
fn rank(a: &(&SubstitutionCandidate, f64), b: &(&SubstitutionCandidate, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then_with(|| a.0.portion_shift_pct.total_cmp(&b.0.portion_shift_pct))
        .then_with(|| b.0.health_gain.total_cmp(&a.0.health_gain))
        .then_with(|| a.0.saving.total_cmp(&b.0.saving))
        .then_with(|| a.0.candidate_id.cmp(&b.0.candidate_id))
}

fn best<'a>(pool: impl Iterator<Item = (&'a SubstitutionCandidate, f64)>) -> Option<(&'a SubstitutionCandidate, f64)> {
    pool.min_by(rank)
}

/// Two-stage selection: the best within-category candidate is provisional;
/// a cross-category candidate replaces it only by a clear margin.
pub fn select_winner<'a>(candidates: &'a [SubstitutionCandidate], params: &TradeoffParams) -> Option<(&'a SubstitutionCandidate, f64)> {
    let pool = admissible(candidates, params);
    let within = best(pool.iter().copied().filter(|(c, _)| c.within_category));
    let Some((w, v_w)) = within else {
        return best(pool.into_iter());
    };
    let Some((x, v_x)) = best(pool.iter().copied().filter(|(c, _)| !c.within_category)) else {
        return Some((w, v_w));
    };
    let clears = if x.adds_mixed_dish {
        v_x >= v_w * (1.0 + params.cross_margin_alpha) && v_x >= v_w + params.cross_buffer_beta
    } else {
        v_x >= v_w * (1.0 + params.cross_uplift)
    };
    Some(if clears { (x, v_x) } else { (w, v_w) })
}

/// Plain argmax over the pooled candidates, no category stages.
pub fn select_pooled<'a>(candidates: &'a [SubstitutionCandidate], params: &TradeoffParams) -> Option<(&'a SubstitutionCandidate, f64)> {
    best(admissible(candidates, params).into_iter())
}
