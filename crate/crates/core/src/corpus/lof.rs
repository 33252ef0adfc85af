//! Local Outlier Factor scoring and contamination-based meal removal.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Meal;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Floor applied to reachability distances so duplicate points score exactly 1.
const REACH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LofRepresentation {
    /// Binary food presence per meal.
    Presence,
    /// Grams per food.
    Grams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LofConfig {
    pub neighborhood_k: usize,
    pub contamination: f64,
    pub representation: LofRepresentation,
}

impl Default for LofConfig {
    fn default() -> Self {
        Self { neighborhood_k: 20, contamination: 0.003, representation: LofRepresentation::Presence }
    }
}

#[derive(Debug, Clone)]
pub struct LofOutcome {
    pub kept: Vec<Meal>,
    pub removed: Vec<String>,
    /// Score per input meal, in input order.
    pub scores: Vec<(String, f64)>,
}

struct Neighborhood<T> {
    k_distance: T,
    /// (index, distance) of every point within the k-distance, ties included.
    members: Vec<(usize, T)>,
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// LOF score of every point under Euclidean distance.
pub fn lof_scores<T: Scalar>(points: &[Vec<T>], k: usize) -> Result<Vec<T>> {
    let n = points.len();
    if k == 0 {
        return Err(Error::Config("LOF neighborhood size must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::InsufficientMeals { needed: k, got: n });
    }

    let hoods: Vec<Neighborhood<T>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let dists: Vec<(usize, T)> = (0..n)
                .filter(|&q| q != p)
                .map(|q| (q, euclidean(&points[p], &points[q])))
                .collect();
            let mut only: Vec<T> = dists.iter().map(|d| d.1).collect();
            let (_, kth, _) = only.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
            let k_distance = *kth;
            let members = dists.into_iter().filter(|d| d.1 <= k_distance).collect();
            Neighborhood { k_distance, members }
        })
        .collect();

    let eps = T::c(REACH_EPS);
    let lrd: Vec<T> = hoods
        .par_iter()
        .map(|h| {
            let total: T = h
                .members
                .iter()
                .map(|&(o, d)| d.max(hoods[o].k_distance).max(eps))
                .sum();
            T::n(h.members.len()) / total
        })
        .collect();

    Ok(hoods
        .iter()
        .enumerate()
        .map(|(p, h)| {
            let s: T = h.members.iter().map(|&(o, _)| lrd[o]).sum();
            s / (T::n(h.members.len()) * lrd[p])
        })
        .collect())
}

fn meal_vectors(meals: &[Meal], repr: LofRepresentation) -> Vec<Vec<f64>> {
    let vocab: BTreeMap<&str, usize> = {
        let mut codes: Vec<&str> =
            meals.iter().flat_map(|m| m.items.iter().map(|i| i.food_code.as_str())).collect();
        codes.sort_unstable();
        codes.dedup();
        codes.into_iter().enumerate().map(|(i, c)| (c, i)).collect()
    };
    meals
        .iter()
        .map(|m| {
            let mut v = vec![0.0; vocab.len()];
            for item in &m.items {
                v[vocab[item.food_code.as_str()]] = match repr {
                    LofRepresentation::Presence => 1.0,
                    LofRepresentation::Grams => item.grams,
                };
            }
            v
        })
        .collect()
}

/// Scores meals and removes the `ceil(contamination * n)` highest-scoring ones.
///
/// A meal is only removed when its score exceeds 1, so a corpus without any
/// locally sparse meal (for example all-identical meals) loses nothing.
pub fn lof_filter(meals: &[Meal], cfg: &LofConfig) -> Result<LofOutcome> {
    if !(0.0..1.0).contains(&cfg.contamination) {
        return Err(Error::Config(format!("contamination {} outside [0, 1)", cfg.contamination)));
    }
    let vectors = meal_vectors(meals, cfg.representation);
    let scores = lof_scores(&vectors, cfg.neighborhood_k)?;

    let n_remove = (cfg.contamination * meals.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..meals.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| meals[a].meal_id.cmp(&meals[b].meal_id))
    });
    let mut drop = vec![false; meals.len()];
    for &i in order.iter().take(n_remove) {
        if scores[i] > 1.0 + 1e-9 {
            drop[i] = true;
        }
    }

    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (i, m) in meals.iter().enumerate() {
        if drop[i] {
            removed.push(m.meal_id.clone());
        } else {
            kept.push(m.clone());
        }
    }
    removed.sort();
    Ok(LofOutcome {
        kept,
        removed,
        scores: meals.iter().zip(&scores).map(|(m, &s)| (m.meal_id.clone(), s)).collect(),
    })
}
