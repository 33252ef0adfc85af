#[derive(Debug, Clone, PartialEq)]
pub struct BhOutcome {
    pub reject: Vec<bool>,
    /// Step-up adjusted p-values, monotone in the sorted order and capped at 1.
    pub q_values: Vec<f64>,
}

/// Benjamini-Hochberg step-up procedure at level `q`.
///
/// Ties in p are ordered by input position. Inputs outside `[0, 1]` are clamped.
pub fn bh_fdr(p_values: &[f64], q: f64) -> BhOutcome {
    let m = p_values.len();
    if m == 0 {
        return BhOutcome { reject: Vec::new(), q_values: Vec::new() };
    }
    let p: Vec<f64> = p_values.iter().map(|v| if v.is_nan() { 1.0 } else { v.clamp(0.0, 1.0) }).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));

    let cutoff_rank = (1..=m).rev().find(|&i| p[order[i - 1]] <= i as f64 * q / m as f64);
    let mut reject = vec![false; m];
    if let Some(k) = cutoff_rank {
        for &idx in &order[..k] {
            reject[idx] = true;
        }
    }

    let mut q_values = vec![0.0; m];
    let mut running = 1.0f64;
    for i in (1..=m).rev() {
        let idx = order[i - 1];
        running = running.min(p[idx] * m as f64 / i as f64);
        q_values[idx] = running.min(1.0);
    }
    BhOutcome { reject, q_values }
}
