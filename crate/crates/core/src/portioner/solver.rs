use rand::Rng;
use serde::{Deserialize, Serialize};

use super::constraints::{Polytope, PortionConstraints};
use super::lp;
use super::profile::{ConstraintKind, MealEnergyPlan, RdiProfile};
use crate::corpus::FoodRecord;
use crate::error::{Error, Result};
use crate::nutrient::{MealType, NutrientArray, NUTRIENT_COUNT};
use crate::scalar::Scalar;
use crate::seed::rng_for;

/// Which weight penalizes which side of the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `weight_under` penalizes shortfall, `weight_over` penalizes excess.
    #[default]
    Labels,
    /// The swapped reading: `weight_under` multiplies the excess term.
    FormulaLiteral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub orientation: Orientation,
    pub include_neutral: bool,
    pub max_sweeps: usize,
    pub tolerance: f64,
    /// Random feasible starts tried in addition to the deterministic one.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            orientation: Orientation::Labels,
            include_neutral: true,
            max_sweeps: 500,
            tolerance: 1e-9,
            restarts: 3,
            seed: 0,
        }
    }
}

/// Asymmetric squared log2 deviation from meal targets.
#[derive(Debug, Clone)]
pub struct PortionObjective<T> {
    nutrients: Vec<usize>,
    targets: Vec<T>,
    shortfall: Vec<T>,
    excess: Vec<T>,
}

const LOG_FLOOR: f64 = 1e-3;

impl<T: Scalar> PortionObjective<T> {
    pub fn new(profile: &RdiProfile<T>, targets: &NutrientArray<T>, orientation: Orientation, include_neutral: bool) -> Self {
        let mut o = PortionObjective { nutrients: Vec::new(), targets: Vec::new(), shortfall: Vec::new(), excess: Vec::new() };
        for t in &profile.targets {
            let k = t.nutrient.index();
            if (t.kind == ConstraintKind::Neutral && !include_neutral) || !(targets[k] > T::zero()) {
                continue;
            }
            let (mut short, excess) = match orientation {
                Orientation::Labels => (t.weight_under, t.weight_over),
                Orientation::FormulaLiteral => (t.weight_over, t.weight_under),
            };
            if t.kind == ConstraintKind::UpperBound {
                short = T::zero();
            }
            o.nutrients.push(k);
            o.targets.push(targets[k]);
            o.shortfall.push(short);
            o.excess.push(excess);
        }
        o
    }

    /// Objective at full nutrient totals.
    pub fn value(&self, totals: &NutrientArray<T>) -> T {
        let y: Vec<T> = self.nutrients.iter().map(|&k| totals[k]).collect();
        self.value_active(&y)
    }

    fn term(&self, j: usize, y: T) -> T {
        let r = self.targets[j];
        let yf = y.max(r * T::c(LOG_FLOOR));
        let l = (yf / r).log2();
        if l < T::zero() {
            self.shortfall[j] * l * l
        } else {
            self.excess[j] * l * l
        }
    }

    fn value_active(&self, y: &[T]) -> T {
        (0..y.len()).map(|j| self.term(j, y[j])).sum()
    }

    fn grad_active(&self, y: &[T]) -> Vec<T> {
        let ln2 = T::c(std::f64::consts::LN_2);
        (0..y.len())
            .map(|j| {
                let r = self.targets[j];
                if y[j] <= r * T::c(LOG_FLOOR) {
                    return T::zero();
                }
                let l = (y[j] / r).log2();
                let w = if l < T::zero() { self.shortfall[j] } else { self.excess[j] };
                T::c(2.0) * w * l / (y[j] * ln2)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortionSolution<T> {
    pub food_codes: Vec<String>,
    pub portions: Vec<T>,
    pub nutrient_totals: Vec<T>,
    pub objective: T,
    pub binding_constraints: Vec<String>,
    pub iterations: usize,
    pub flags: Vec<String>,
}

impl<T: Scalar> PortionSolution<T> {
    pub fn total_grams(&self) -> T {
        self.portions.iter().copied().sum()
    }
}

/// `(x / 100)^T A_100g`.
pub fn nutrient_totals<T: Scalar>(x: &[T], foods: &[&FoodRecord]) -> NutrientArray<T> {
    let mut out = [T::zero(); NUTRIENT_COUNT];
    for (g, f) in x.iter().zip(foods) {
        let scale = *g / T::c(100.0);
        for (o, v) in out.iter_mut().zip(&f.nutrients_per_100g) {
            *o = *o + scale * T::c(*v);
        }
    }
    out
}

/// Result of the greedy cap repair.
#[derive(Debug, Clone, PartialEq)]
pub struct Reprojection<T> {
    pub portions: Vec<T>,
    /// Constraints that were clamped.
    pub clamped: Vec<String>,
    /// True when the repair could not reach a feasible point.
    pub best_effort: bool,
}

/// Clamps capped groups to their caps and rescales the remaining portions to
/// restore the meal energy target. Returns the input unchanged when no cap is
/// violated and energy is already within tolerance.
pub fn reproject<T: Scalar>(
    portions: &[T],
    foods: &[&FoodRecord],
    meal_type: MealType,
    energy_target: T,
    c: &PortionConstraints,
) -> Reprojection<T> {
    let poly = Polytope::build(foods, meal_type, energy_target, c);
    reproject_with(portions, foods, meal_type, energy_target, c, &poly)
}

fn reproject_with<T: Scalar>(
    portions: &[T],
    foods: &[&FoodRecord],
    meal_type: MealType,
    energy_target: T,
    c: &PortionConstraints,
    poly: &Polytope<T>,
) -> Reprojection<T> {
    let n = foods.len();
    let e: Vec<T> = foods.iter().map(|f| T::c(f.energy_per_gram())).collect();
    let bev: Vec<bool> = foods.iter().map(|f| f.counts_as_beverage()).collect();
    let mut x = portions.to_vec();
    let mut clamped: Vec<String> = Vec::new();
    let feas_tol = T::c(1e-9);
    if poly.is_feasible(&x, feas_tol) {
        return Reprojection { portions: x, clamped, best_effort: false };
    }
    let note = |name: String, clamped: &mut Vec<String>| {
        if !clamped.contains(&name) {
            clamped.push(name);
        }
    };
    let kcal = |x: &[T]| -> T { x.iter().zip(&e).map(|(a, b)| *a * *b).sum() };

    for _ in 0..50 {
        let mut fixed = vec![false; n];
        for i in 0..n {
            if !bev[i] && x[i] >= T::c(c.per_solid_item_max) {
                if x[i] > T::c(c.per_solid_item_max) {
                    note(format!("per_item:{}", foods[i].food_code), &mut clamped);
                }
                x[i] = T::c(c.per_solid_item_max);
                fixed[i] = true;
            }
        }
        for &(cat, cap) in &c.category_caps {
            let members: Vec<usize> = (0..n).filter(|&i| foods[i].main_category == cat).collect();
            let sum: T = members.iter().map(|&i| x[i]).sum();
            if sum >= T::c(cap) && !members.is_empty() {
                if sum > T::c(cap) {
                    note(format!("category:{}", cat.as_str()), &mut clamped);
                }
                let s = T::c(cap) / sum;
                for &i in &members {
                    x[i] = x[i] * s;
                    fixed[i] = true;
                }
            }
        }
        let bev_idx: Vec<usize> = (0..n).filter(|&i| bev[i]).collect();
        if !bev_idx.is_empty() {
            let cap = T::c(c.beverage_grams_max(meal_type));
            let grams: T = bev_idx.iter().map(|&i| x[i]).sum();
            if grams > cap {
                note("beverage_grams".into(), &mut clamped);
                for &i in &bev_idx {
                    x[i] = x[i] * cap / grams;
                }
            }
            let bev_kcal: T = bev_idx.iter().map(|&i| x[i] * e[i]).sum();
            let limit = T::c(c.beverage_kcal_frac_max) * energy_target * T::c(1.0 - 1e-9);
            if bev_kcal > limit {
                note("beverage_kcal".into(), &mut clamped);
                for &i in &bev_idx {
                    x[i] = x[i] * limit / bev_kcal;
                }
            }
            if grams >= cap || bev_kcal >= limit {
                for &i in &bev_idx {
                    fixed[i] = true;
                }
            }
        }
        let current = kcal(&x);
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i] && e[i] > T::zero()).collect();
        let free_kcal: T = free.iter().map(|&i| x[i] * e[i]).sum();
        if free_kcal > T::zero() {
            let s = ((energy_target - (current - free_kcal)) / free_kcal).max(T::zero());
            for &i in &free {
                x[i] = x[i] * s;
            }
        }
        let total: T = x.iter().copied().sum();
        if total > T::c(c.total_grams_max) {
            note("total_grams".into(), &mut clamped);
            let s = T::c(c.total_grams_max) / total;
            for v in x.iter_mut() {
                *v = *v * s;
            }
        }
        if poly.is_feasible(&x, feas_tol) {
            return Reprojection { portions: x, clamped, best_effort: false };
        }
    }
    Reprojection { portions: x, clamped, best_effort: true }
}

struct Workspace<'a, T> {
    poly: &'a Polytope<T>,
    obj: &'a PortionObjective<T>,
    /// Per-gram densities of the objective nutrients, one row per food.
    dens: Vec<Vec<T>>,
}

impl<T: Scalar> Workspace<'_, T> {
    fn totals(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.obj.nutrients.len()];
        for (xi, row) in x.iter().zip(&self.dens) {
            for (yk, a) in y.iter_mut().zip(row) {
                *yk = *yk + *xi * *a;
            }
        }
        y
    }

    /// Minimizes along `d` within the feasible interval; returns the step.
    fn line_search(&self, x: &[T], y: &[T], d: &[T], f0: T) -> Option<(T, T)> {
        let (lo, hi) = self.poly.step_interval(x, d);
        if hi - lo <= T::c(1e-12) {
            return None;
        }
        let ad = self.totals(d);
        let mut buf = vec![T::zero(); y.len()];
        let mut phi = |t: T| {
            for ((b, yk), a) in buf.iter_mut().zip(y).zip(&ad) {
                *b = *yk + t * *a;
            }
            self.obj.value_active(&buf)
        };
        const FRACS: [f64; 10] = [1e-4, 1e-3, 1e-2, 0.05, 0.15, 0.3, 0.5, 0.7, 0.9, 1.0];
        let mut pts: Vec<(T, T)> = vec![(T::zero(), f0)];
        for side in [lo, hi] {
            if side != T::zero() && side.is_finite() {
                for f in FRACS {
                    let t = side * T::c(f);
                    pts.push((t, phi(t)));
                }
            }
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let b = (0..pts.len()).min_by(|&i, &j| pts[i].1.partial_cmp(&pts[j].1).unwrap().then(i.cmp(&j))).unwrap();
        let (mut a, mut c) = (pts[b.saturating_sub(1)].0, pts[(b + 1).min(pts.len() - 1)].0);
        let mut best = pts[b];
        let g = T::c(0.618_033_988_749_894_9);
        let mut x1 = c - g * (c - a);
        let mut x2 = a + g * (c - a);
        let (mut f1, mut f2) = (phi(x1), phi(x2));
        for _ in 0..30 {
            if f1 <= f2 {
                c = x2;
                x2 = x1;
                f2 = f1;
                x1 = c - g * (c - a);
                f1 = phi(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (c - a);
                f2 = phi(x2);
            }
        }
        for cand in [(x1, f1), (x2, f2)] {
            if cand.1 < best.1 {
                best = cand;
            }
        }
        if best.1 < f0 && best.0 != T::zero() {
            Some(best)
        } else {
            None
        }
    }

    fn step(&self, x: &mut [T], y: &mut Vec<T>, f: &mut T, d: &[T]) -> bool {
        if let Some((t, _)) = self.line_search(x, y, d, *f) {
            for (xi, di) in x.iter_mut().zip(d) {
                *xi = (*xi + t * *di).max(T::zero());
            }
            *y = self.totals(x);
            *f = self.obj.value_active(y);
            true
        } else {
            false
        }
    }

    /// Coordinate and energy-neutral pair moves interleaved with conditional
    /// gradient steps, until a sweep gains less than `tol`.
    fn descend(&self, mut x: Vec<T>, e: &[T], opts: &SolverOptions) -> (Vec<T>, T, usize) {
        let n = x.len();
        let mut dirs: Vec<Vec<T>> = Vec::new();
        for i in 0..n {
            let mut d = vec![T::zero(); n];
            d[i] = T::one();
            dirs.push(d);
        }
        for i in 0..n {
            for j in i + 1..n {
                if e[i] > T::zero() && e[j] > T::zero() {
                    let mut d = vec![T::zero(); n];
                    d[i] = e[j];
                    d[j] = -e[i];
                    dirs.push(d);
                }
            }
        }
        let mut y = self.totals(&x);
        let mut f = self.obj.value_active(&y);
        let mut sweeps = 0;
        while sweeps < opts.max_sweeps {
            sweeps += 1;
            let start = f;
            for d in &dirs {
                self.step(&mut x, &mut y, &mut f, d);
            }
            let gy = self.obj.grad_active(&y);
            let gx: Vec<T> = self.dens.iter().map(|row| row.iter().zip(&gy).map(|(a, g)| *a * *g).sum()).collect();
            if let Some(s) = lp::minimize_linear(self.poly, &gx) {
                let d: Vec<T> = s.iter().zip(&x).map(|(a, b)| *a - *b).collect();
                let slope: T = gx.iter().zip(&d).map(|(g, v)| *g * *v).sum();
                if slope < T::zero() {
                    self.step(&mut x, &mut y, &mut f, &d);
                }
            }
            if start - f <= T::c(opts.tolerance) * f.abs().max(T::one()) {
                break;
            }
        }
        (x, f, sweeps)
    }
}

fn initial_point<T: Scalar>(foods: &[&FoodRecord], meal_type: MealType, energy_target: T, c: &PortionConstraints) -> Vec<T> {
    let n = foods.len();
    let e: Vec<T> = foods.iter().map(|f| T::c(f.energy_per_gram())).collect();
    let bev: Vec<bool> = foods.iter().map(|f| f.counts_as_beverage()).collect();
    let n_bev = bev.iter().filter(|b| **b).count();
    let mut x = vec![T::zero(); n];
    let mut bev_kcal = T::zero();
    if n_bev > 0 {
        let each = T::c(0.5 * c.beverage_grams_max(meal_type) / n_bev as f64);
        for i in (0..n).filter(|&i| bev[i]) {
            x[i] = each;
            bev_kcal = bev_kcal + each * e[i];
        }
    }
    let solids: Vec<usize> = (0..n).filter(|&i| !bev[i] && e[i] > T::zero()).collect();
    if !solids.is_empty() {
        let share = (energy_target - bev_kcal).max(T::zero()) / T::n(solids.len());
        for &i in &solids {
            x[i] = share / e[i];
        }
    }
    for i in (0..n).filter(|&i| !bev[i] && e[i] == T::zero()) {
        x[i] = T::c(c.min_portion.max(1.0));
    }
    x
}

fn random_point<T: Scalar, R: Rng>(
    foods: &[&FoodRecord],
    meal_type: MealType,
    energy_target: T,
    c: &PortionConstraints,
    rng: &mut R,
) -> Vec<T> {
    let e: Vec<f64> = foods.iter().map(|f| f.energy_per_gram()).collect();
    let draws: Vec<f64> = e.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().zip(&e).filter(|(_, e)| **e > 0.0).map(|(d, _)| d).sum();
    draws
        .iter()
        .zip(&e)
        .zip(foods)
        .map(|((d, ei), f)| {
            if *ei > 0.0 && total > 0.0 {
                energy_target * T::c(d / total / ei)
            } else {
                let cap = if f.counts_as_beverage() { c.beverage_grams_max(meal_type) } else { c.per_solid_item_max };
                T::c(c.min_portion + rng.gen::<f64>() * 0.5 * cap)
            }
        })
        .collect()
}

/// Portions the selected foods for one meal.
///
/// Starts from the reprojected equal-energy split (plus seeded random
/// starts), falls back to the nearest feasible point from a linear program,
/// and keeps the best local minimum found. Infeasible instances report the
/// constraints that block the energy target or each other.
pub fn solve_portions<T: Scalar>(
    foods: &[&FoodRecord],
    profile: &RdiProfile<T>,
    meal_type: MealType,
    plan: &MealEnergyPlan,
    constraints: &PortionConstraints,
    opts: &SolverOptions,
) -> Result<PortionSolution<T>> {
    if foods.is_empty() {
        return Err(Error::validation("cannot portion an empty combination"));
    }
    let solids = foods.iter().filter(|f| f.counts_as_solid()).count();
    let needed = constraints.min_solids(meal_type);
    if solids < needed {
        return Err(Error::validation(format!("{meal_type} needs {needed} solid foods, got {solids}")));
    }
    if let Some(f) = foods.iter().find(|f| f.energy_per_gram() <= 0.0 && !f.counts_as_beverage()) {
        return Err(Error::validation(format!("solid food `{}` has no energy", f.food_code)));
    }

    let energy_target = T::c(plan.fraction(meal_type)) * profile.reference_energy;
    let targets = profile.meal_targets(meal_type, plan);
    let obj = PortionObjective::new(profile, &targets, opts.orientation, opts.include_neutral);
    // keep a hair of margin inside the energy band
    let mut inner = constraints.clone();
    inner.energy_tolerance *= 0.999;
    let poly = Polytope::build(foods, meal_type, energy_target, &inner);
    let ws = Workspace {
        poly: &poly,
        obj: &obj,
        dens: foods
            .iter()
            .map(|f| obj.nutrients.iter().map(|&k| T::c(f.nutrients_per_100g[k] / 100.0)).collect())
            .collect(),
    };
    let e: Vec<T> = foods.iter().map(|f| T::c(f.energy_per_gram())).collect();
    let mut flags = Vec::new();
    let make_feasible = |x0: Vec<T>, flags: &mut Vec<String>| -> Option<Vec<T>> {
        let rep = reproject_with(&x0, foods, meal_type, energy_target, &inner, &poly);
        if !rep.best_effort {
            return Some(rep.portions);
        }
        let x = lp::nearest_feasible(&poly, &rep.portions)?;
        flags.push("lp_start".to_string());
        poly.is_feasible(&x, T::c(1e-7)).then_some(x)
    };

    let first = make_feasible(initial_point(foods, meal_type, energy_target, constraints), &mut flags).ok_or_else(|| {
        Error::Infeasible { blocking: lp::blocking_constraints(&poly, foods.len()) }
    })?;
    let mut starts = vec![first];
    let mut rng = rng_for(opts.seed, &[foods.len() as u64]);
    for _ in 0..opts.restarts {
        let x0 = random_point(foods, meal_type, energy_target, constraints, &mut rng);
        let mut scratch = Vec::new();
        if let Some(x) = make_feasible(x0, &mut scratch) {
            starts.push(x);
        }
    }

    let mut best: Option<(Vec<T>, T, usize)> = None;
    for x0 in starts {
        let (x, f, it) = ws.descend(x0, &e, opts);
        if best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((x, f, it));
        }
    }
    let (x, objective, iterations) = best.expect("at least one start");
    if !poly.is_feasible(&x, T::c(1e-7)) {
        flags.push("tolerance_violation".to_string());
    }
    let mut binding = Polytope::build(foods, meal_type, energy_target, constraints).binding(&x, T::c(1e-6));
    binding.retain(|b| !b.starts_with("energy_"));
    Ok(PortionSolution {
        food_codes: foods.iter().map(|f| f.food_code.clone()).collect(),
        nutrient_totals: nutrient_totals(&x, foods).to_vec(),
        portions: x,
        objective,
        binding_constraints: binding,
        iterations,
        flags,
    })
}
