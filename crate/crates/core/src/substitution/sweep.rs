use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{select_pooled, select_winner, SubstitutionCandidate, TradeoffParams};
use crate::error::{Error, Result};
use crate::scalar::median;
use crate::seed::rng_for;
use crate::stats::{bootstrap_statistic, percentile_interval};

pub const DEFAULT_THETA_GRID: [f64; 8] = [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub theta_grid: Vec<f64>,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
    pub params: TradeoffParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { theta_grid: DEFAULT_THETA_GRID.to_vec(), resamples: 1000, level: 0.95, seed: 0, params: TradeoffParams::default() }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta_grid.is_empty() {
            return Err(Error::Config("theta grid is empty".into()));
        }
        if self.theta_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("theta grid must be strictly ascending".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config("level must lie in (0, 1)".into()));
        }
        if self.resamples == 0 {
            return Err(Error::Config("resamples must be positive".into()));
        }
        for &t in &self.theta_grid {
            TradeoffParams { theta: t, ..self.params.clone() }.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerRow {
    pub meal_id: String,
    pub theta: f64,
    pub k_sub: usize,
    pub winner_id: String,
    pub added: String,
    pub removed: String,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "CI")]
    pub ci: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub within_category: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub theta: f64,
    pub k_sub: usize,
    #[serde(rename = "median_H")]
    pub median_h: Option<f64>,
    #[serde(rename = "H_ci_lo")]
    pub h_ci_lo: Option<f64>,
    #[serde(rename = "H_ci_hi")]
    pub h_ci_hi: Option<f64>,
    #[serde(rename = "median_S")]
    pub median_s: Option<f64>,
    #[serde(rename = "S_ci_lo")]
    pub s_ci_lo: Option<f64>,
    #[serde(rename = "S_ci_hi")]
    pub s_ci_hi: Option<f64>,
    pub knee_flag: bool,
    pub n_meals: usize,
    pub n_winners: usize,
    /// Medians over every meal, meals without a winner counted as 0.
    #[serde(rename = "median_H_all")]
    pub median_h_all: f64,
    #[serde(rename = "median_S_all")]
    pub median_s_all: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub k_sub: usize,
    pub winners: Vec<WinnerRow>,
    pub frontier: Vec<FrontierRow>,
    pub knee: Option<usize>,
    /// Best pooled V per theta (outer) and meal (inner); 0 when nothing qualifies.
    pub best_pooled_v: Vec<Vec<f64>>,
}

impl SweepResult {
    /// No meal found a winner at any theta.
    pub fn is_empty(&self) -> bool {
        self.knee.is_none()
    }
}

/// Candidates with `k_sub <= k` from pools indexed by exact `k_sub - 1`.
pub fn pool_up_to(by_exact_k: &[Vec<SubstitutionCandidate>], k: usize) -> Vec<SubstitutionCandidate> {
    by_exact_k.iter().take(k).flatten().cloned().collect()
}

/// Grid point farthest from the chord joining the frontier endpoints in
/// (S, H) space. Ties and degenerate chords resolve to the earliest point.
pub fn knee_index(points: &[(f64, f64)]) -> Option<usize> {
    let (first, last) = (points.first()?, points.last()?);
    let (dx, dy) = (last.0 - first.0, last.1 - first.1);
    let len = (dx * dx + dy * dy).sqrt();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = if len > 0.0 { (dx * (first.1 - p.1) - dy * (first.0 - p.0)).abs() / len } else { 0.0 };
        if d > best.1 {
            best = (i, d);
        }
    }
    Some(best.0)
}

/// Sweeps the trade-off grid for one `k_sub` setting. `pools` holds one
/// `(meal_id, candidates)` pair per meal.
pub fn sweep_theta(pools: &[(String, Vec<SubstitutionCandidate>)], k_sub: usize, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let per_theta: Vec<(Vec<WinnerRow>, Vec<f64>)> = cfg
        .theta_grid
        .par_iter()
        .map(|&theta| {
            let params = TradeoffParams { theta, ..cfg.params.clone() };
            let mut rows = Vec::new();
            let mut best_v = Vec::with_capacity(pools.len());
            for (meal_id, cands) in pools {
                best_v.push(select_pooled(cands, &params).map_or(0.0, |(_, v)| v));
                if let Some((w, v)) = select_winner(cands, &params) {
                    rows.push(WinnerRow {
                        meal_id: meal_id.clone(),
                        theta,
                        k_sub,
                        winner_id: w.candidate_id.clone(),
                        added: w.added.join(";"),
                        removed: w.removed.join(";"),
                        h: w.health_gain,
                        s: w.saving,
                        ci: w.cost_increase,
                        e: w.effort,
                        v,
                        within_category: w.within_category,
                    });
                }
            }
            (rows, best_v)
        })
        .collect();

    let mut frontier = Vec::with_capacity(cfg.theta_grid.len());
    for (ti, (rows, _)) in per_theta.iter().enumerate() {
        let theta = cfg.theta_grid[ti];
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let ss: Vec<f64> = rows.iter().map(|r| r.s).collect();
        let mut all_h = hs.clone();
        let mut all_s = ss.clone();
        all_h.resize(pools.len(), 0.0);
        all_s.resize(pools.len(), 0.0);
        let mut row = FrontierRow {
            theta,
            k_sub,
            median_h: None,
            h_ci_lo: None,
            h_ci_hi: None,
            median_s: None,
            s_ci_lo: None,
            s_ci_hi: None,
            knee_flag: false,
            n_meals: pools.len(),
            n_winners: rows.len(),
            median_h_all: if pools.is_empty() { 0.0 } else { median(&all_h) },
            median_s_all: if pools.is_empty() { 0.0 } else { median(&all_s) },
        };
        if !rows.is_empty() {
            let path = |which: u64| [k_sub as u64, ti as u64, which];
            let h_reps = bootstrap_statistic(&hs, cfg.resamples, &mut rng_for(cfg.seed, &path(0)), median);
            let s_reps = bootstrap_statistic(&ss, cfg.resamples, &mut rng_for(cfg.seed, &path(1)), median);
            let (hi, si) = (percentile_interval(&h_reps, cfg.level), percentile_interval(&s_reps, cfg.level));
            row.median_h = Some(median(&hs));
            row.median_s = Some(median(&ss));
            row.h_ci_lo = Some(hi.lo);
            row.h_ci_hi = Some(hi.hi);
            row.s_ci_lo = Some(si.lo);
            row.s_ci_hi = Some(si.hi);
        }
        frontier.push(row);
    }

    let valid: Vec<usize> = (0..frontier.len()).filter(|&i| frontier[i].median_h.is_some()).collect();
    let points: Vec<(f64, f64)> = valid.iter().map(|&i| (frontier[i].median_s.unwrap(), frontier[i].median_h.unwrap())).collect();
    let knee = knee_index(&points).map(|j| valid[j]);
    if let Some(k) = knee {
        frontier[k].knee_flag = true;
    }
    let (winners, best_pooled_v): (Vec<Vec<WinnerRow>>, Vec<Vec<f64>>) = per_theta.into_iter().unzip();
    Ok(SweepResult { k_sub, winners: winners.into_iter().flatten().collect(), frontier, knee, best_pooled_v })
}

pub fn write_substitutions<W: Write>(writer: W, rows: &[WinnerRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<substitutions writer>", e))?;
    Ok(())
}

pub fn write_frontier<W: Write>(writer: W, rows: &[FrontierRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<frontier writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::testutil::cand;
    use super::*;

    fn cfg() -> SweepConfig {
        SweepConfig { resamples: 200, ..Default::default() }
    }

    #[test]
    fn single_candidate_constant_frontier() {
        let pools = vec![("m".to_string(), vec![cand("c", 5.0, 3.0, 0.0, true, false)])];
        let r = sweep_theta(&pools, 1, &cfg()).unwrap();
        assert!(r.frontier.iter().all(|f| f.median_h == Some(5.0) && f.median_s == Some(3.0)));
        assert_eq!(r.knee, Some(0));
        assert!(r.frontier[0].knee_flag);
    }

    #[test]
    fn winner_flips_at_theta_one() {
        let pools = vec![("m".to_string(), vec![cand("h", 10.0, 0.0, 0.0, true, false), cand("s", 0.0, 10.0, 0.0, true, false)])];
        let r = sweep_theta(&pools, 1, &SweepConfig { theta_grid: vec![0.0, 0.5, 0.9, 1.1, 2.0], ..cfg() }).unwrap();
        let ids: Vec<&str> = r.winners.iter().map(|w| w.winner_id.as_str()).collect();
        assert_eq!(ids, ["s", "s", "s", "h", "h"]);
        // theta 0 equals the pure-savings argmax
        assert_eq!(r.winners[0].s, 10.0);
    }

    #[test]
    fn empty_frontier_flagged() {
        let pools = vec![("m".to_string(), vec![])];
        let r = sweep_theta(&pools, 1, &cfg()).unwrap();
        assert!(r.is_empty());
        assert!(r.frontier.iter().all(|f| f.median_h.is_none() && f.n_winners == 0));
        let mut buf = Vec::new();
        write_frontier(&mut buf, &r.frontier).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta,k_sub,median_H,H_ci_lo,H_ci_hi,median_S,S_ci_lo,S_ci_hi,knee_flag"));
    }

    #[test]
    fn knee_geometry() {
        assert_eq!(knee_index(&[(10.0, 0.0), (8.0, 8.0), (0.0, 10.0)]), Some(1));
        assert_eq!(knee_index(&[(1.0, 1.0), (1.0, 1.0)]), Some(0));
        assert_eq!(knee_index(&[]), None);
    }

    #[test]
    fn deterministic_under_seed() {
        let pools: Vec<(String, Vec<SubstitutionCandidate>)> = (0..30)
            .map(|i| {
                let f = i as f64;
                (format!("m{i}"), vec![cand("a", f % 7.0, f % 5.0, 0.0, true, false), cand("b", f % 3.0, f % 11.0, 0.0, false, false)])
            })
            .collect();
        let a = sweep_theta(&pools, 1, &cfg()).unwrap();
        let b = sweep_theta(&pools, 1, &cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let bad = SweepConfig { theta_grid: vec![1.0, 0.5], ..cfg() };
        assert!(sweep_theta(&[], 1, &bad).is_err());
    }
}
