use statrs::function::erf::erfc;

/// Both groups at or below this size use the exact permutation distribution.
pub const EXACT_MAX_GROUP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled sample, doubled so ties stay integral.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, f64) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).unwrap());
    let mut ranks = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // positions i..=j share the rank ((i+1)+(j+1))/2
        let doubled = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Two-sided Mann-Whitney U test.
///
/// Exact (conditional on ties) when both samples have at most
/// [`EXACT_MAX_GROUP`] values; otherwise the normal approximation with tie
/// and continuity corrections.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> MannWhitney {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return MannWhitney { u: f64::NAN, p_value: 1.0, exact: false };
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, tie_term) = doubled_midranks(&pooled);
    let r1_doubled: u64 = ranks[..n1].iter().sum();
    let u = r1_doubled as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    let n = (n1 + n2) as f64;

    if n1 <= EXACT_MAX_GROUP && n2 <= EXACT_MAX_GROUP {
        let max_sum: usize = ranks.iter().map(|&r| r as usize).sum();
        // ways[j][s]: subsets of size j with doubled rank sum s
        let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
        ways[0][0] = 1.0;
        for &r in &ranks {
            let r = r as usize;
            for j in (1..=n1).rev() {
                let (lower, upper) = ways.split_at_mut(j);
                let prev = &lower[j - 1];
                let cur = &mut upper[0];
                for s in (r..=max_sum).rev() {
                    cur[s] += prev[s - r];
                }
            }
        }
        let expected = n1 as f64 * (n + 1.0);
        let observed_dev = (r1_doubled as f64 - expected).abs();
        let total: f64 = ways[n1].iter().sum();
        let extreme: f64 = ways[n1]
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as f64 - expected).abs() >= observed_dev - 1e-9)
            .map(|(_, w)| w)
            .sum();
        return MannWhitney { u, p_value: (extreme / total).min(1.0), exact: true };
    }

    let (f1, f2) = (n1 as f64, n2 as f64);
    let mu = f1 * f2 / 2.0;
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return MannWhitney { u, p_value: 1.0, exact: false };
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    MannWhitney { u, p_value: erfc(z / std::f64::consts::SQRT_2).min(1.0), exact: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((mann_whitney_u(&a, &a).p_value - 1.0).abs() < 1e-12);
        let big: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let r = mann_whitney_u(&big, &big);
        assert!(!r.exact);
        assert!((r.p_value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fully_separated_small_samples() {
        // 3 vs 3, complete separation: p = 2 / C(6,3) = 0.1
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert!(r.exact);
        assert_eq!(r.u, 0.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn large_separated_samples_significant() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = (100..130).map(|i| i as f64).collect();
        assert!(mann_whitney_u(&x, &y).p_value < 1e-8);
    }
}
