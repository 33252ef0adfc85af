//! Post-processing of externally produced cluster labels and statistical
//! profiling of each cluster against its complement.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nutrient::MealType;
use crate::scalar::{mean, Scalar};
use crate::stats::{bh_fdr, cohens_d, hurdle_test};

/// Label used for points the clusterer left unassigned.
pub const NOISE: i64 = -1;

/// Density-clusterer parameters, passed through to the external tool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClustererParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub alpha: f64,
    pub cluster_selection_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub breakfast: ClustererParams,
    pub lunch: ClustererParams,
    pub dinner: ClustererParams,
    pub merge_cosine: f64,
    pub fdr_q: f64,
    /// Minimum |mean difference| (standardized units) for significance.
    pub sig_delta_min: f64,
    pub distinctive_delta: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            breakfast: ClustererParams { min_cluster_size: 50, min_samples: 25, alpha: 1.0, cluster_selection_epsilon: 0.1 },
            lunch: ClustererParams { min_cluster_size: 40, min_samples: 20, alpha: 1.0, cluster_selection_epsilon: 0.08 },
            dinner: ClustererParams { min_cluster_size: 35, min_samples: 18, alpha: 1.0, cluster_selection_epsilon: 0.06 },
            merge_cosine: 0.7,
            fdr_q: 0.01,
            sig_delta_min: 0.15,
            distinctive_delta: 0.20,
        }
    }
}

impl ClusterConfig {
    pub fn params(&self, meal_type: MealType) -> &ClustererParams {
        match meal_type {
            MealType::Breakfast => &self.breakfast,
            MealType::Lunch => &self.lunch,
            MealType::Dinner => &self.dinner,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.merge_cosine, self.fdr_q, self.sig_delta_min, self.distinctive_delta];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("cluster thresholds must be positive".into()));
        }
        Ok(())
    }

    /// `(significant, distinctive)` for one feature.
    pub fn classify(&self, delta: f64, q_value: f64) -> (bool, bool) {
        let significant = q_value <= self.fdr_q && delta.abs() >= self.sig_delta_min;
        (significant, significant && delta.abs() >= self.distinctive_delta)
    }
}

/// Mean point of every labelled cluster (noise excluded).
pub fn centroids<T: Scalar>(labels: &[i64], points: &[Vec<T>]) -> BTreeMap<i64, Vec<T>> {
    let mut sums: BTreeMap<i64, (Vec<T>, usize)> = BTreeMap::new();
    for (&l, p) in labels.iter().zip(points) {
        if l == NOISE {
            continue;
        }
        let e = sums.entry(l).or_insert_with(|| (vec![T::zero(); p.len()], 0));
        for (s, v) in e.0.iter_mut().zip(p) {
            *s = *s + *v;
        }
        e.1 += 1;
    }
    sums.into_iter().map(|(l, (s, n))| (l, s.into_iter().map(|v| v / T::n(n)).collect())).collect()
}

fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(x, y)| *x * *y).sum();
    let na: T = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if na > T::zero() && nb > T::zero() {
        dot / (na * nb)
    } else if na == T::zero() && nb == T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt()
}

/// Reassigns clusters smaller than `size_floor` to a large cluster: the most
/// cosine-similar one when similarity exceeds `merge_cosine`, otherwise the
/// Euclidean-nearest. Noise labels are left alone; ties go to the lower id.
pub fn merge_small_clusters<T: Scalar>(
    labels: &[i64],
    centroids: &BTreeMap<i64, Vec<T>>,
    size_floor: usize,
    merge_cosine: f64,
) -> Result<Vec<i64>> {
    let mut sizes: BTreeMap<i64, usize> = BTreeMap::new();
    for &l in labels.iter().filter(|l| **l != NOISE) {
        *sizes.entry(l).or_default() += 1;
    }
    let large: Vec<i64> = sizes.iter().filter(|(_, n)| **n >= size_floor).map(|(l, _)| *l).collect();
    let small: Vec<i64> = sizes.iter().filter(|(_, n)| **n < size_floor).map(|(l, _)| *l).collect();
    if small.is_empty() {
        return Ok(labels.to_vec());
    }
    if large.is_empty() {
        return Err(Error::validation(format!("no cluster reaches the size floor {size_floor}")));
    }
    let centroid = |l: i64| {
        centroids.get(&l).ok_or_else(|| Error::validation(format!("missing centroid for cluster {l}")))
    };
    let mut target = BTreeMap::new();
    for s in small {
        let cs = centroid(s)?;
        let mut best_cos: Option<(T, i64)> = None;
        let mut best_dist: Option<(T, i64)> = None;
        for &l in &large {
            let cl = centroid(l)?;
            let c = cosine(cs, cl);
            if best_cos.is_none_or(|(b, _)| c > b) {
                best_cos = Some((c, l));
            }
            let d = euclidean(cs, cl);
            if best_dist.is_none_or(|(b, _)| d < b) {
                best_dist = Some((d, l));
            }
        }
        let (c, lc) = best_cos.expect("large clusters exist");
        target.insert(s, if c > T::c(merge_cosine) { lc } else { best_dist.expect("large clusters exist").1 });
    }
    Ok(labels.iter().map(|l| *target.get(l).unwrap_or(l)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub feature: String,
    pub mean_in: f64,
    pub mean_out: f64,
    pub delta: f64,
    pub p_value: f64,
    pub q_value: f64,
    pub cohens_d: f64,
    pub significant: bool,
    pub distinctive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster_id: i64,
    pub size: usize,
    pub features: Vec<FeatureProfile>,
}

impl ClusterProfile {
    pub fn significant_count(&self) -> usize {
        self.features.iter().filter(|f| f.significant).count()
    }
}

/// Profiles every non-noise cluster against its complement.
///
/// `raw` feeds the hurdle test (zeros must be true zeros); `standardized`
/// (same rows and columns) gives the mean difference and Cohen's d.
/// Benjamini-Hochberg runs once over all cluster-feature pairs.
pub fn profile_clusters<T: Scalar>(
    labels: &[i64],
    raw: &[Vec<T>],
    standardized: &[Vec<T>],
    names: &[String],
    cfg: &ClusterConfig,
) -> Result<Vec<ClusterProfile>> {
    if raw.len() != labels.len() || standardized.len() != labels.len() {
        return Err(Error::validation("labels and feature matrices differ in length"));
    }
    if raw.iter().chain(standardized).any(|r| r.len() != names.len()) {
        return Err(Error::validation("feature rows do not match the feature names"));
    }
    let clusters: Vec<i64> = labels.iter().copied().filter(|l| *l != NOISE).collect::<BTreeSet<_>>().into_iter().collect();
    let pairs: Vec<(usize, usize)> =
        (0..clusters.len()).flat_map(|c| (0..names.len()).map(move |f| (c, f))).collect();

    let cells: Vec<FeatureProfile> = pairs
        .par_iter()
        .map(|&(c, f)| {
            let id = clusters[c];
            let (mut rin, mut rout, mut sin, mut sout) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for (i, &l) in labels.iter().enumerate() {
                if l == id {
                    rin.push(raw[i][f]);
                    sin.push(standardized[i][f]);
                } else {
                    rout.push(raw[i][f]);
                    sout.push(standardized[i][f]);
                }
            }
            let (mean_in, mean_out) = (mean(&sin).f64(), if sout.is_empty() { 0.0 } else { mean(&sout).f64() });
            let delta = if sout.is_empty() { 0.0 } else { mean_in - mean_out };
            let p_value = if rout.is_empty() { 1.0 } else { hurdle_test(&rin, &rout).p_value };
            FeatureProfile {
                feature: names[f].clone(),
                mean_in,
                mean_out,
                delta,
                p_value,
                q_value: 1.0,
                cohens_d: cohens_d(&sin, &sout).f64(),
                significant: false,
                distinctive: false,
            }
        })
        .collect();

    let p: Vec<f64> = cells.iter().map(|c| c.p_value).collect();
    let bh = bh_fdr(&p, cfg.fdr_q);
    let mut profiles: Vec<ClusterProfile> = clusters
        .iter()
        .map(|&id| ClusterProfile { cluster_id: id, size: labels.iter().filter(|l| **l == id).count(), features: Vec::new() })
        .collect();
    for (k, (mut cell, &(c, _))) in cells.into_iter().zip(&pairs).enumerate() {
        cell.q_value = bh.q_values[k];
        let (s, d) = cfg.classify(cell.delta, cell.q_value);
        cell.significant = s;
        cell.distinctive = d;
        profiles[c].features.push(cell);
    }
    Ok(profiles)
}

/// Writes `cluster_profile.csv`.
pub fn write_cluster_profile<W: Write>(writer: W, profiles: &[ClusterProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["cluster_id", "feature", "delta", "p", "q", "cohens_d", "significant", "distinctive"])?;
    for p in profiles {
        for f in &p.features {
            w.write_record([
                p.cluster_id.to_string(),
                f.feature.clone(),
                f.delta.to_string(),
                f.p_value.to_string(),
                f.q_value.to_string(),
                f.cohens_d.to_string(),
                f.significant.to_string(),
                f.distinctive.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("cluster_profile.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cents(list: &[(i64, Vec<f64>)]) -> BTreeMap<i64, Vec<f64>> {
        list.iter().cloned().collect()
    }

    #[test]
    fn merges_by_cosine_then_distance() {
        // cluster 2 is small; cos to 0 is 0.8, to 1 is 0.5
        let c = cents(&[(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0]), (2, vec![0.8, 0.6])]);
        let labels = vec![0, 0, 0, 1, 1, 1, 2, NOISE];
        assert_eq!(merge_small_clusters(&labels, &c, 3, 0.7).unwrap(), vec![0, 0, 0, 1, 1, 1, 0, NOISE]);

        // max cosine 0.6 -> Euclidean nearest
        let c = cents(&[(0, vec![10.0, 0.0]), (1, vec![0.0, 1.0]), (2, vec![0.6, 0.8])]);
        let cos0 = 0.6;
        assert!(cos0 < 0.7);
        assert_eq!(merge_small_clusters(&labels, &c, 3, 0.7).unwrap()[6], 1);

        // identical centroid
        let c = cents(&[(0, vec![1.0, 2.0]), (1, vec![-3.0, 1.0]), (2, vec![-3.0, 1.0])]);
        assert_eq!(merge_small_clusters(&labels, &c, 3, 0.7).unwrap()[6], 1);
    }

    #[test]
    fn no_large_cluster_errors() {
        let c = cents(&[(0, vec![1.0]), (1, vec![2.0])]);
        assert!(merge_small_clusters(&[0, 1], &c, 5, 0.7).is_err());
    }

    #[test]
    fn classify_thresholds() {
        let cfg = ClusterConfig::default();
        assert_eq!(cfg.classify(0.18, 0.001), (true, false));
        assert_eq!(cfg.classify(2.0, 0.02), (false, false));
        assert_eq!(cfg.classify(-0.25, 0.001), (true, true));
    }

    #[test]
    fn identical_cluster_has_no_significant_features() {
        let names = vec!["a".to_string(), "b".to_string()];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            rows.push(vec![((i / 2) % 4) as f64, ((i / 2) % 3) as f64]);
            labels.push((i % 2) as i64);
        }
        let out = profile_clusters(&labels, &rows, &rows, &names, &ClusterConfig::default()).unwrap();
        assert!(out.iter().all(|p| p.significant_count() == 0));
    }

    #[test]
    fn separated_cluster_is_distinctive() {
        let names = vec!["x".to_string()];
        let mut raw = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let inside = i < 30;
            raw.push(vec![if inside { 5.0 + (i % 5) as f64 } else { (i % 3) as f64 * 0.0 }]);
            labels.push(if inside { 7 } else { 9 });
        }
        let out = profile_clusters(&labels, &raw, &raw, &names, &ClusterConfig::default()).unwrap();
        let f = &out[0].features[0];
        assert_eq!(out[0].cluster_id, 7);
        assert!(f.significant && f.distinctive);
        assert!(f.delta > 0.0);
    }

    #[test]
    fn relabeling_is_equivariant() {
        let names = vec!["x".to_string(), "y".to_string()];
        let mut raw = Vec::new();
        let mut labels = Vec::new();
        for i in 0..45 {
            let l = (i % 3) as i64;
            raw.push(vec![(l * 2 + (i % 2) as i64) as f64, ((i * 7) % 5) as f64]);
            labels.push(l);
        }
        let a = profile_clusters(&labels, &raw, &raw, &names, &ClusterConfig::default()).unwrap();
        let relabeled: Vec<i64> = labels.iter().map(|l| 10 - l).collect();
        let b = profile_clusters(&relabeled, &raw, &raw, &names, &ClusterConfig::default()).unwrap();
        for pa in &a {
            let pb = b.iter().find(|p| p.cluster_id == 10 - pa.cluster_id).unwrap();
            assert_eq!(pa.features, pb.features);
        }
    }
}
