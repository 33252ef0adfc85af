//! Nutrient-aware aggregation of foods into per-subcategory prototypes.
//!
//! Foods are grouped by subcategory (and role), embedded by dividing each
//! nutrient by its usage-weighted corpus mean, and clustered with
//! usage-weighted Lloyd iterations. For every subcategory the smallest K in
//! `1..=k_max` meeting all acceptance criteria is kept:
//!
//! * mass coverage: share of consumed grams whose food is reproduced by its
//!   prototype within relative error `aggregation_alpha`;
//! * WMARE: usage-weighted mean of the per-food relative L1 error;
//! * cosine floor: every food-to-prototype cosine in the scaled space.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::FoodRecord;
use crate::error::{Error, Result};
use crate::nutrient::{NutrientArray, NUTRIENT_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrototypeConfig {
    pub aggregation_alpha: f64,
    pub k_max: usize,
    pub min_subcategory_size: usize,
    pub mass_coverage_min: f64,
    pub wmare_max: f64,
    pub cosine_floor: f64,
}

impl Default for PrototypeConfig {
    fn default() -> Self {
        Self {
            aggregation_alpha: 0.10,
            k_max: 8,
            min_subcategory_size: 6,
            mass_coverage_min: 0.90,
            wmare_max: 0.07,
            cosine_floor: 0.70,
        }
    }
}

impl PrototypeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("aggregation_alpha", self.aggregation_alpha),
            ("mass_coverage_min", self.mass_coverage_min),
            ("wmare_max", self.wmare_max),
            ("cosine_floor", self.cosine_floor),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} outside (0, 1]")));
            }
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeAssignment {
    pub food_code: String,
    pub prototype_code: String,
    pub cosine: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeReport {
    pub mass_coverage: f64,
    pub wmare: f64,
    pub min_cosine: f64,
    /// Chosen K per subcategory group.
    pub k_per_subcategory: BTreeMap<String, usize>,
    pub assignments: Vec<PrototypeAssignment>,
}

#[derive(Debug, Clone)]
pub struct PrototypeOutcome {
    pub mapping: BTreeMap<String, String>,
    pub prototypes: Vec<FoodRecord>,
    pub report: PrototypeReport,
}

struct Space {
    scale: NutrientArray<f64>,
}

impl Space {
    fn fit(foods: &[FoodRecord], weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut scale = [0.0; NUTRIENT_COUNT];
        for (f, &w) in foods.iter().zip(weights) {
            for (s, v) in scale.iter_mut().zip(&f.nutrients_per_100g) {
                *s += w * v;
            }
        }
        for s in &mut scale {
            *s /= total;
            if !(*s > 0.0) {
                *s = 1.0;
            }
        }
        Self { scale }
    }

    fn embed(&self, v: &NutrientArray<f64>) -> Vec<f64> {
        v.iter().zip(&self.scale).map(|(x, s)| x / s).collect()
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na > 0.0, nb > 0.0) {
        (true, true) => (dot / (na * nb)).min(1.0),
        (false, false) => 1.0,
        _ => 0.0,
    }
}

fn relative_error(food: &[f64], proto: &[f64]) -> f64 {
    let num: f64 = food.iter().zip(proto).map(|(f, p)| (p - f).abs()).sum();
    let den: f64 = food.iter().map(|f| f.abs()).sum();
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn weighted_centroid(points: &[&Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let dim = points[0].len();
    let total: f64 = weights.iter().sum();
    let mut c = vec![0.0; dim];
    if total > 0.0 {
        for (p, &w) in points.iter().zip(weights) {
            for (ci, pi) in c.iter_mut().zip(p.iter()) {
                *ci += w * pi;
            }
        }
        c.iter_mut().for_each(|v| *v /= total);
    } else {
        for p in points {
            for (ci, pi) in c.iter_mut().zip(p.iter()) {
                *ci += pi;
            }
        }
        c.iter_mut().for_each(|v| *v /= points.len() as f64);
    }
    c
}

/// Weighted Lloyd iterations from a farthest-first seeding started at `first`.
fn lloyd(points: &[Vec<f64>], weights: &[f64], k: usize, first: usize) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut centers = vec![points[first].clone()];
    while centers.len() < k {
        let next = (0..n)
            .max_by(|&a, &b| {
                let da = centers.iter().map(|c| sq_dist(&points[a], c)).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|c| sq_dist(&points[b], c)).fold(f64::INFINITY, f64::min);
                da.partial_cmp(&db).unwrap().then(b.cmp(&a))
            })
            .unwrap();
        centers.push(points[next].clone());
    }
    let mut assign = vec![usize::MAX; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).partial_cmp(&sq_dist(p, &centers[b])).unwrap())
                .unwrap();
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let (pts, ws): (Vec<&Vec<f64>>, Vec<f64>) =
                (0..n).filter(|&i| assign[i] == c).map(|i| (&points[i], weights[i])).unzip();
            if !pts.is_empty() {
                *center = weighted_centroid(&pts, &ws);
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assign)
        .zip(weights)
        .map(|((p, &a), &w)| w * sq_dist(p, &centers[a]))
        .sum();
    (assign, inertia)
}

struct Group<'a> {
    key: String,
    members: Vec<&'a FoodRecord>,
    usage: Vec<f64>,
}

struct Fit {
    assign: Vec<usize>,
    k: usize,
}

fn group_metrics(
    group: &Group<'_>,
    fit: &Fit,
    space: &Space,
    alpha: f64,
) -> (Vec<NutrientArray<f64>>, Vec<f64>, Vec<f64>, f64, f64) {
    let protos = prototype_nutrients(group, fit);
    let mut cos = Vec::with_capacity(group.members.len());
    let mut rel = Vec::with_capacity(group.members.len());
    for (f, &a) in group.members.iter().zip(&fit.assign) {
        let fz = space.embed(&f.nutrients_per_100g);
        let pz = space.embed(&protos[a]);
        cos.push(cosine(&fz, &pz));
        rel.push(relative_error(&fz, &pz));
    }
    let weights = effective_weights(&group.usage);
    let total: f64 = weights.iter().sum();
    let covered: f64 = weights.iter().zip(&rel).filter(|(_, &r)| r <= alpha).map(|(w, _)| w).sum();
    let wmare = weights.iter().zip(&rel).map(|(w, r)| w * r).sum::<f64>() / total;
    (protos, cos, rel, covered / total, wmare)
}

fn effective_weights(usage: &[f64]) -> Vec<f64> {
    if usage.iter().sum::<f64>() > 0.0 {
        usage.to_vec()
    } else {
        vec![1.0; usage.len()]
    }
}

fn prototype_nutrients(group: &Group<'_>, fit: &Fit) -> Vec<NutrientArray<f64>> {
    (0..fit.k)
        .map(|c| {
            let idx: Vec<usize> = (0..group.members.len()).filter(|&i| fit.assign[i] == c).collect();
            let rows: Vec<Vec<f64>> = idx.iter().map(|&i| group.members[i].nutrients_per_100g.to_vec()).collect();
            let refs: Vec<&Vec<f64>> = rows.iter().collect();
            let ws: Vec<f64> = idx.iter().map(|&i| group.usage[i]).collect();
            let v = weighted_centroid(&refs, &ws);
            let mut out = [0.0; NUTRIENT_COUNT];
            out.copy_from_slice(&v);
            out
        })
        .collect()
}

fn cluster_group(group: &Group<'_>, space: &Space, k: usize) -> Fit {
    let n = group.members.len();
    if k == 1 {
        return Fit { assign: vec![0; n], k: 1 };
    }
    let points: Vec<Vec<f64>> = group.members.iter().map(|f| space.embed(&f.nutrients_per_100g)).collect();
    let weights = effective_weights(&group.usage);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));
    let mut best: Option<(Vec<usize>, f64)> = None;
    for &s in starts.iter().take(4) {
        let (assign, inertia) = lloyd(&points, &weights, k, s);
        if best.as_ref().is_none_or(|b| inertia < b.1) {
            best = Some((assign, inertia));
        }
    }
    // compact labels so that cluster ids follow first appearance
    let (assign, _) = best.unwrap();
    let mut relabel = HashMap::new();
    let assign: Vec<usize> = assign
        .into_iter()
        .map(|a| {
            let next = relabel.len();
            *relabel.entry(a).or_insert(next)
        })
        .collect();
    Fit { k: relabel.len(), assign }
}

fn prototype_code(key: &str, idx: usize) -> String {
    format!("P-{key}-{idx}")
}

/// Mass coverage recomputed from a finished mapping: share of usage grams
/// whose food lies within `alpha` relative error of its prototype.
pub fn mass_coverage(
    foods: &[FoodRecord],
    usage: &HashMap<String, f64>,
    mapping: &BTreeMap<String, String>,
    prototypes: &[FoodRecord],
    alpha: f64,
) -> Result<f64> {
    let weights: Vec<f64> = foods.iter().map(|f| usage.get(&f.food_code).copied().unwrap_or(0.0)).collect();
    let weights = effective_weights(&weights);
    let space = Space::fit(foods, &weights);
    let by_code: HashMap<&str, &FoodRecord> = prototypes.iter().map(|p| (p.food_code.as_str(), p)).collect();
    let mut covered = 0.0;
    let mut total = 0.0;
    for (f, w) in foods.iter().zip(&weights) {
        let pcode = mapping.get(&f.food_code).ok_or_else(|| Error::UnknownFood(f.food_code.clone()))?;
        let proto = by_code.get(pcode.as_str()).ok_or_else(|| Error::UnknownFood(pcode.clone()))?;
        let r = relative_error(&space.embed(&f.nutrients_per_100g), &space.embed(&proto.nutrients_per_100g));
        total += w;
        if r <= alpha {
            covered += w;
        }
    }
    Ok(covered / total)
}

/// Maps every food onto a usage-weighted subcategory prototype.
pub fn aggregate_prototypes(
    foods: &[FoodRecord],
    usage: &HashMap<String, f64>,
    cfg: &PrototypeConfig,
) -> Result<PrototypeOutcome> {
    cfg.validate()?;
    if foods.is_empty() {
        return Err(Error::validation("no foods to aggregate"));
    }
    let weights: Vec<f64> = foods
        .iter()
        .map(|f| {
            usage
                .get(&f.food_code)
                .copied()
                .filter(|u| u.is_finite() && *u >= 0.0)
                .ok_or_else(|| Error::validation(format!("usage missing or invalid for food `{}`", f.food_code)))
        })
        .collect::<Result<_>>()?;
    let space = Space::fit(foods, &effective_weights(&weights));

    let mut groups: BTreeMap<String, Group<'_>> = BTreeMap::new();
    for (f, &w) in foods.iter().zip(&weights) {
        let role = if f.counts_as_beverage() { "bev" } else { "solid" };
        let key = format!("{}.{}.{}", f.main_category, sanitize(&f.sub_category), role);
        let g = groups.entry(key.clone()).or_insert_with(|| Group { key, members: Vec::new(), usage: Vec::new() });
        g.members.push(f);
        g.usage.push(w);
    }

    let mut mapping = BTreeMap::new();
    let mut prototypes = Vec::new();
    let mut k_per_subcategory = BTreeMap::new();
    let mut assignments_by_code: HashMap<String, PrototypeAssignment> = HashMap::new();

    for group in groups.values() {
        let n = group.members.len();
        let k_range: Vec<usize> =
            if n < cfg.min_subcategory_size { vec![1] } else { (1..=cfg.k_max.min(n)).collect() };
        let mut chosen = None;
        let mut last_failure = String::new();
        for k in k_range {
            let fit = cluster_group(group, &space, k);
            let (protos, cos, rel, cov, wmare) = group_metrics(group, &fit, &space, cfg.aggregation_alpha);
            let min_cos = cos.iter().copied().fold(f64::INFINITY, f64::min);
            if cov < cfg.mass_coverage_min {
                last_failure = format!("mass coverage {cov:.4} < {}", cfg.mass_coverage_min);
            } else if wmare > cfg.wmare_max {
                last_failure = format!("wmare {wmare:.4} > {}", cfg.wmare_max);
            } else if min_cos < cfg.cosine_floor {
                last_failure = format!("cosine {min_cos:.4} < floor {}", cfg.cosine_floor);
            } else {
                chosen = Some((fit, protos, cos, rel));
                break;
            }
        }
        let (fit, protos, cos, rel) = chosen.ok_or_else(|| Error::Prototype {
            subcategory: group.key.clone(),
            criterion: last_failure.clone(),
        })?;
        k_per_subcategory.insert(group.key.clone(), fit.k);

        for (c, nutrients) in protos.into_iter().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| fit.assign[i] == c).collect();
            let lead = *members
                .iter()
                .max_by(|&&a, &&b| group.usage[a].partial_cmp(&group.usage[b]).unwrap().then(b.cmp(&a)))
                .unwrap();
            let head = group.members[lead];
            let code = prototype_code(&group.key, c);
            prototypes.push(FoodRecord {
                food_code: code.clone(),
                name: format!("{} (prototype)", head.name),
                main_category: head.main_category,
                sub_category: head.sub_category.clone(),
                nutrients_per_100g: nutrients,
                is_beverage: head.is_beverage,
                is_solid: head.is_solid,
            });
            for &i in &members {
                let fc = group.members[i].food_code.clone();
                mapping.insert(fc.clone(), code.clone());
                assignments_by_code.insert(
                    fc.clone(),
                    PrototypeAssignment { food_code: fc, prototype_code: code.clone(), cosine: cos[i], relative_error: rel[i] },
                );
            }
        }
    }

    let assignments: Vec<PrototypeAssignment> =
        foods.iter().map(|f| assignments_by_code.remove(&f.food_code).unwrap()).collect();
    let eff = effective_weights(&weights);
    let total: f64 = eff.iter().sum();
    let wmare = assignments.iter().zip(&eff).map(|(a, w)| w * a.relative_error).sum::<f64>() / total;
    let min_cosine = assignments.iter().map(|a| a.cosine).fold(f64::INFINITY, f64::min);
    let mass = mass_coverage(foods, usage, &mapping, &prototypes, cfg.aggregation_alpha)?;
    Ok(PrototypeOutcome {
        mapping,
        prototypes,
        report: PrototypeReport { mass_coverage: mass, wmare, min_cosine, k_per_subcategory, assignments },
    })
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}
