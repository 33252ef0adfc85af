//! Meal quality metrics and cohort comparison.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FoodTable, Meal};
use crate::error::{Error, Result};
use crate::nutrient::{MealType, Nutrient, NutrientArray};
use crate::portioner::{MealEnergyPlan, RdiProfile};
use crate::scalar::{mean, median, Scalar};
use crate::seed::rng_for;
use crate::stats::{bh_fdr, bootstrap_diff_of_means, cohens_d, percentile_interval};

/// Mean excess ratio: `(1/K) * sum(I_k / L_k)`.
pub fn mer<T: Scalar>(intakes: &[T], limits: &[T]) -> T {
    if intakes.is_empty() {
        return T::zero();
    }
    intakes.iter().zip(limits).map(|(&i, &l)| i / l).sum::<T>() / T::n(intakes.len())
}

/// Mean adequacy ratio over capped `min(1, I_n / RDI_n)`.
pub fn mar<T: Scalar>(intakes: &[T], rdis: &[T]) -> T {
    if intakes.is_empty() {
        return T::zero();
    }
    intakes.iter().zip(rdis).map(|(&i, &r)| (i / r).min(T::one())).sum::<T>() / T::n(intakes.len())
}

/// Inclusive percent-of-energy bounds in the order protein, fat, carbohydrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmdrBounds {
    pub protein: (f64, f64),
    pub fat: (f64, f64),
    pub carbohydrate: (f64, f64),
}

impl Default for AmdrBounds {
    fn default() -> Self {
        AmdrBounds { protein: (10.0, 35.0), fat: (20.0, 35.0), carbohydrate: (45.0, 65.0) }
    }
}

/// Fraction of the three macronutrient energy shares (protein, fat, carbohydrate,
/// in percent) that fall inside their bounds.
pub fn amdr_composite<T: Scalar>(pcts: [T; 3], bounds: &AmdrBounds) -> T {
    let ranges = [bounds.protein, bounds.fat, bounds.carbohydrate];
    let hits = pcts
        .iter()
        .zip(ranges)
        .filter(|(p, (lo, hi))| **p >= T::c(*lo) && **p <= T::c(*hi))
        .count();
    T::n(hits) / T::c(3.0)
}

/// Hill number of order `q` over group proportions.
pub fn hill_diversity<T: Scalar>(props: &[T], q: T) -> Result<T> {
    let total: T = props.iter().copied().sum();
    if props.iter().any(|p| *p < T::zero() || !p.is_finite()) {
        return Err(Error::validation("proportions must be finite and non-negative"));
    }
    if !(total > T::zero()) {
        return Err(Error::validation("hill diversity of all-zero proportions"));
    }
    let p: Vec<T> = props.iter().filter(|v| **v > T::zero()).map(|&v| v / total).collect();
    if (q - T::one()).abs() < T::c(1e-12) {
        let h: T = p.iter().map(|&v| -v * v.ln()).sum();
        Ok(h.exp())
    } else {
        let s: T = p.iter().map(|&v| v.powf(q)).sum();
        Ok(s.powf(T::one() / (T::one() - q)))
    }
}

pub fn energy_density<T: Scalar>(kcal: T, grams: T) -> Result<T> {
    if !(grams > T::zero()) {
        return Err(Error::validation("energy density of a meal with no mass"));
    }
    Ok(kcal / grams)
}

/// Mean absolute relative deviation from targets over `panel`, in percent.
pub fn rdi_deviation<T: Scalar>(totals: &NutrientArray<T>, targets: &NutrientArray<T>, panel: &[Nutrient]) -> T {
    if panel.is_empty() {
        return T::zero();
    }
    let sum: T = panel
        .iter()
        .map(|n| (totals[n.index()] / targets[n.index()] - T::one()).abs())
        .sum();
    sum / T::n(panel.len()) * T::c(100.0)
}

/// Percent-of-energy shares `[protein, fat, carbohydrate]` from gram totals.
pub fn macro_energy_pcts<T: Scalar>(totals: &NutrientArray<T>) -> [T; 3] {
    let energy = totals[Nutrient::Energy.index()];
    if !(energy > T::zero()) {
        return [T::zero(); 3];
    }
    let hundred = T::c(100.0);
    [
        T::c(4.0) * totals[Nutrient::Protein.index()] / energy * hundred,
        T::c(9.0) * totals[Nutrient::TotalFat.index()] / energy * hundred,
        T::c(4.0) * totals[Nutrient::Carbohydrate.index()] / energy * hundred,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Daily upper limits, scaled by the meal energy fraction.
    pub upper_limits: Vec<(Nutrient, f64)>,
    /// Daily recommended intakes of the adequacy micronutrients.
    pub micronutrients: Vec<(Nutrient, f64)>,
    pub amdr: AmdrBounds,
    pub hill_q: f64,
    pub plan: MealEnergyPlan,
}

impl Default for MetricConfig {
    fn default() -> Self {
        use Nutrient::*;
        MetricConfig {
            upper_limits: vec![(Sodium, 2300.0), (SaturatedFat, 20.0), (AddedSugars, 50.0)],
            micronutrients: vec![
                (Calcium, 1300.0),
                (Iron, 18.0),
                (Zinc, 11.0),
                (VitaminA, 900.0),
                (VitaminC, 90.0),
                (VitaminB6, 1.7),
                (VitaminB12, 2.4),
                (Thiamin, 1.2),
                (Riboflavin, 1.3),
                (Niacin, 16.0),
                (Folate, 400.0),
            ],
            amdr: AmdrBounds::default(),
            hill_q: 1.0,
            plan: MealEnergyPlan::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RdiDeviation,
    Mer,
    Mar,
    Amdr,
    Hill,
    EnergyDensity,
}

impl Metric {
    pub const ALL: [Metric; 6] =
        [Metric::RdiDeviation, Metric::Mer, Metric::Mar, Metric::Amdr, Metric::Hill, Metric::EnergyDensity];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::RdiDeviation => "rdi_deviation",
            Metric::Mer => "mer",
            Metric::Mar => "mar",
            Metric::Amdr => "amdr",
            Metric::Hill => "hill",
            Metric::EnergyDensity => "energy_density",
        }
    }

    /// True when smaller values are better.
    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::RdiDeviation | Metric::Mer | Metric::EnergyDensity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealMetrics {
    pub rdi_deviation: f64,
    pub mer: f64,
    pub mar: f64,
    pub amdr: f64,
    pub hill: f64,
    pub energy_density: f64,
}

impl MealMetrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::RdiDeviation => self.rdi_deviation,
            Metric::Mer => self.mer,
            Metric::Mar => self.mar,
            Metric::Amdr => self.amdr,
            Metric::Hill => self.hill,
            Metric::EnergyDensity => self.energy_density,
        }
    }
}

/// Gram share of each main category in a meal, in category order.
pub fn category_shares(meal: &Meal, foods: &FoodTable) -> Result<[f64; 15]> {
    let mut grams = [0.0; 15];
    for item in &meal.items {
        grams[foods.get(&item.food_code)?.main_category.index()] += item.grams;
    }
    let total: f64 = grams.iter().sum();
    if total > 0.0 {
        for g in grams.iter_mut() {
            *g /= total;
        }
    }
    Ok(grams)
}

/// All six metrics for one meal; `totals` are its nutrient totals.
pub fn meal_metrics(
    meal: &Meal,
    totals: &NutrientArray<f64>,
    foods: &FoodTable,
    profile: &RdiProfile<f64>,
    cfg: &MetricConfig,
) -> Result<MealMetrics> {
    let f = cfg.plan.fraction(meal.meal_type);
    let targets = profile.meal_targets(meal.meal_type, &cfg.plan);
    let pick = |set: &[(Nutrient, f64)]| -> (Vec<f64>, Vec<f64>) {
        set.iter().map(|(n, daily)| (totals[n.index()], daily * f)).unzip()
    };
    let (ul_intake, ul_limit) = pick(&cfg.upper_limits);
    let (mi_intake, mi_rdi) = pick(&cfg.micronutrients);
    let shares = category_shares(meal, foods)?;
    Ok(MealMetrics {
        rdi_deviation: rdi_deviation(totals, &targets, &profile.deviation_panel()),
        mer: mer(&ul_intake, &ul_limit),
        mar: mar(&mi_intake, &mi_rdi),
        amdr: amdr_composite(macro_energy_pcts(totals), &cfg.amdr),
        hill: hill_diversity(&shares, cfg.hill_q)?,
        energy_density: energy_density(totals[Nutrient::Energy.index()], meal.total_grams())?,
    })
}

/// Per-meal metrics keyed by cluster.
#[derive(Debug, Clone, Default)]
pub struct Cohort {
    pub by_cluster: BTreeMap<i64, Vec<MealMetrics>>,
}

impl Cohort {
    pub fn push(&mut self, cluster: i64, m: MealMetrics) {
        self.by_cluster.entry(cluster).or_default().push(m);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortComparison {
    pub cluster_id: i64,
    pub meal_type: Option<MealType>,
    pub metric: Metric,
    pub n_gen: usize,
    pub n_real: usize,
    pub mean_gen: f64,
    pub mean_real: f64,
    pub median_gen: f64,
    pub median_real: f64,
    /// Mean of generated minus mean of real.
    pub diff: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
    pub q_value: f64,
    pub cohens_d: f64,
    pub improved: bool,
    /// Set when either cohort had fewer than two meals; statistics are NaN.
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig { resamples: 1000, level: 0.95, seed: 0 }
    }
}

/// Bootstraps generated-minus-real differences per cluster and metric.
///
/// A comparison counts as an improvement when the whole percentile interval
/// lies on the favourable side of zero. Bootstrap p-values are adjusted with
/// Benjamini-Hochberg across every non-skipped comparison.
pub fn compare_cohorts(generated: &Cohort, real: &Cohort, cfg: &CompareConfig) -> Vec<CohortComparison> {
    let clusters: Vec<i64> = generated
        .by_cluster
        .keys()
        .chain(real.by_cluster.keys())
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let empty = Vec::new();
    let mut rows: Vec<CohortComparison> = clusters
        .par_iter()
        .flat_map_iter(|&cluster| {
            let gen = generated.by_cluster.get(&cluster).unwrap_or(&empty);
            let rl = real.by_cluster.get(&cluster).unwrap_or(&empty);
            Metric::ALL.iter().enumerate().map(move |(mi, &metric)| {
                let a: Vec<f64> = gen.iter().map(|m| m.get(metric)).collect();
                let b: Vec<f64> = rl.iter().map(|m| m.get(metric)).collect();
                compare_one(cluster, metric, &a, &b, cfg, mi as u64)
            })
        })
        .collect();

    let active: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].skipped).collect();
    let ps: Vec<f64> = active.iter().map(|&i| rows[i].p_value).collect();
    let bh = bh_fdr(&ps, 0.05);
    for (j, &i) in active.iter().enumerate() {
        rows[i].q_value = bh.q_values[j];
    }
    rows
}

fn compare_one(cluster: i64, metric: Metric, a: &[f64], b: &[f64], cfg: &CompareConfig, mi: u64) -> CohortComparison {
    let mut row = CohortComparison {
        cluster_id: cluster,
        meal_type: None,
        metric,
        n_gen: a.len(),
        n_real: b.len(),
        mean_gen: f64::NAN,
        mean_real: f64::NAN,
        median_gen: f64::NAN,
        median_real: f64::NAN,
        diff: f64::NAN,
        ci_lo: f64::NAN,
        ci_hi: f64::NAN,
        p_value: f64::NAN,
        q_value: f64::NAN,
        cohens_d: f64::NAN,
        improved: false,
        skipped: true,
    };
    if a.len() < 2 || b.len() < 2 {
        return row;
    }
    let mut rng = rng_for(cfg.seed, &[cluster as u64, mi]);
    let reps = bootstrap_diff_of_means(a, b, cfg.resamples, &mut rng);
    let ci = percentile_interval(&reps, cfg.level);
    let n = reps.len() as f64;
    let below = reps.iter().filter(|d| **d <= 0.0).count() as f64 / n;
    let above = reps.iter().filter(|d| **d >= 0.0).count() as f64 / n;
    row.mean_gen = mean(a);
    row.mean_real = mean(b);
    row.median_gen = median(a);
    row.median_real = median(b);
    row.diff = row.mean_gen - row.mean_real;
    row.ci_lo = ci.lo;
    row.ci_hi = ci.hi;
    row.p_value = (2.0 * below.min(above)).min(1.0);
    row.cohens_d = cohens_d(a, b);
    row.improved = if metric.lower_is_better() { ci.hi < 0.0 } else { ci.lo > 0.0 };
    row.skipped = false;
    row
}
