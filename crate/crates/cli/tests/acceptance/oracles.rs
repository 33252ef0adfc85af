//! Slow, obviously-correct reference implementations.

use platewise::corpus::FoodRecord;
use platewise::portioner::PortionConstraints;
use platewise::{MainCategory, MealType};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// LOF straight from the definition: sort all distances per point.
pub fn lof(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let dist = |a: usize, b: usize| -> f64 {
        points[a].iter().zip(&points[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut kdist = vec![0.0; n];
    let mut hood: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        let mut d: Vec<(f64, usize)> = (0..n).filter(|&q| q != p).map(|q| (dist(p, q), q)).collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        kdist[p] = d[k - 1].0;
        hood[p] = d.iter().filter(|(x, _)| *x <= kdist[p]).map(|(_, q)| *q).collect();
    }
    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let reach: f64 = hood[p].iter().map(|&o| dist(p, o).max(kdist[o])).sum();
            hood[p].len() as f64 / reach
        })
        .collect();
    (0..n).map(|p| hood[p].iter().map(|&o| lrd[o] / lrd[p]).sum::<f64>() / hood[p].len() as f64).collect()
}

/// BH by exhaustive search: the largest self-consistent rejection set
/// `R = {i : p_i <= q |R| / m}`.
pub fn bh_reject(p: &[f64], q: f64) -> Vec<bool> {
    let m = p.len();
    let mut best: Vec<bool> = vec![false; m];
    let mut best_size = 0;
    for mask in 0u32..(1 << m) {
        let size = mask.count_ones() as usize;
        if size <= best_size {
            continue;
        }
        let level = q * size as f64 / m as f64;
        if (0..m).all(|i| (mask >> i & 1 == 1) == (p[i] <= level)) {
            best_size = size;
            best = (0..m).map(|i| mask >> i & 1 == 1).collect();
        }
    }
    best
}

/// Adjusted p-values: min over `p_j >= p_i` of `m p_j / #{l : p_l <= p_j}`.
pub fn bh_adjusted(p: &[f64]) -> Vec<f64> {
    let m = p.len() as f64;
    p.iter()
        .map(|&pi| {
            p.iter()
                .filter(|&&pj| pj >= pi)
                .map(|&pj| m * pj / p.iter().filter(|&&pl| pl <= pj).count() as f64)
                .fold(f64::INFINITY, f64::min)
                .min(1.0)
        })
        .collect()
}

fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Two-sided Fisher test with exact integer table counts.
pub fn fisher(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let count = |x: u64| if x > r1 || c1 < x || c1 - x > r2 { 0 } else { choose(r1, x) * choose(r2, c1 - x) };
    let observed = count(a);
    let total: u128 = (0..=c1).map(count).sum();
    let extreme: u128 = (0..=c1).map(count).filter(|&w| w > 0 && w <= observed).sum();
    extreme as f64 / total as f64
}

/// Two-sided Mann-Whitney p by enumerating every size-`n1` subset of the
/// pooled sample, with doubled midranks.
pub fn mann_whitney(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let n1 = x.len();
    let rank2: Vec<i64> = pooled
        .iter()
        .map(|&v| {
            let less = pooled.iter().filter(|&&w| w < v).count() as i64;
            let equal = pooled.iter().filter(|&&w| w == v).count() as i64;
            2 * less + equal + 1
        })
        .collect();
    let expected = (n1 * (n + 1)) as i64;
    let observed = (rank2[..n1].iter().sum::<i64>() - expected).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    // Gosper's hack over masks with exactly n1 bits set.
    let mut mask: u32 = (1 << n1) - 1;
    while mask < 1 << n {
        let s: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| rank2[i]).sum();
        total += 1;
        if (s - expected).abs() >= observed {
            hits += 1;
        }
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    hits as f64 / total as f64
}

/// Hurdle p from the two reference tests above.
pub fn hurdle(inside: &[f64], outside: &[f64]) -> f64 {
    let nz_in: Vec<f64> = inside.iter().copied().filter(|v| *v != 0.0).collect();
    let nz_out: Vec<f64> = outside.iter().copied().filter(|v| *v != 0.0).collect();
    if nz_in.is_empty() && nz_out.is_empty() {
        return 1.0;
    }
    let pf = fisher(
        nz_in.len() as u64,
        (inside.len() - nz_in.len()) as u64,
        nz_out.len() as u64,
        (outside.len() - nz_out.len()) as u64,
    );
    let pm = if nz_in.is_empty() || nz_out.is_empty() { 1.0 } else { mann_whitney(&nz_in, &nz_out) };
    (2.0 * pf.min(pm)).min(1.0)
}

/// Portion feasibility written out from the constraint table.
pub fn feasible(x: &[f64], foods: &[&FoodRecord], mt: MealType, energy: f64, c: &PortionConstraints, tol: f64) -> bool {
    let kcal: f64 = x.iter().zip(foods).map(|(g, f)| g * f.energy_per_gram()).sum();
    if (kcal - energy).abs() > c.energy_tolerance * energy + tol {
        return false;
    }
    if x.iter().sum::<f64>() > c.total_grams_max + tol {
        return false;
    }
    let bev: Vec<usize> = (0..foods.len()).filter(|&i| foods[i].counts_as_beverage()).collect();
    let bev_g: f64 = bev.iter().map(|&i| x[i]).sum();
    let bev_kcal: f64 = bev.iter().map(|&i| x[i] * foods[i].energy_per_gram()).sum();
    if bev_g > c.beverage_grams_max(mt) + tol || bev_kcal > c.beverage_kcal_frac_max * kcal + tol {
        return false;
    }
    for m in MainCategory::ALL {
        if let Some(cap) = c.category_cap(m) {
            let members: Vec<usize> = (0..foods.len()).filter(|&i| foods[i].main_category == m).collect();
            if members.iter().map(|&i| x[i]).sum::<f64>() > cap + tol {
                return false;
            }
            let floor = c.min_portion.min(0.5 * cap / members.len().max(1) as f64);
            if members.iter().any(|&i| x[i] < floor - tol) {
                return false;
            }
        }
    }
    for (i, f) in foods.iter().enumerate() {
        if !f.counts_as_beverage() && x[i] > c.per_solid_item_max + tol {
            return false;
        }
        if c.category_cap(f.main_category).is_none() && x[i] < c.min_portion - tol {
            return false;
        }
    }
    true
}

/// Random portioning: Dirichlet energy shares scaled to the target energy,
/// near-zero-energy drinks drawn uniformly in grams.
pub fn random_portions(rng: &mut ChaCha8Rng, foods: &[&FoodRecord], energy: f64, bev_max: f64) -> Vec<f64> {
    let mut x = vec![0.0; foods.len()];
    let mut shares = vec![0.0; foods.len()];
    let mut fixed_kcal = 0.0;
    for (i, f) in foods.iter().enumerate() {
        if f.energy_per_gram() < 0.05 {
            x[i] = rng.gen_range(5.0..bev_max);
            fixed_kcal += x[i] * f.energy_per_gram();
        } else {
            shares[i] = -rng.gen::<f64>().max(1e-300).ln();
        }
    }
    let total: f64 = shares.iter().sum();
    for (i, f) in foods.iter().enumerate() {
        if shares[i] > 0.0 {
            x[i] = shares[i] / total * (energy - fixed_kcal) / f.energy_per_gram();
        }
    }
    x
}
