//! Statistical tests and resampling used by cluster profiling, cohort
//! comparison and frontier aggregation.

mod bootstrap;
mod fdr;
mod tests_2x2;
mod rank;

use crate::scalar::{mean, variance, Scalar};

pub use bootstrap::{bootstrap_diff_of_means, bootstrap_statistic, percentile_interval, Interval};
pub use fdr::{bh_fdr, BhOutcome};
pub use rank::{mann_whitney_u, MannWhitney, EXACT_MAX_GROUP};
pub use tests_2x2::fisher_exact_two_sided;

/// Cohen's d with a pooled standard deviation (n - 1 denominators).
///
/// Returns 0 when both groups are constant with equal means and a signed
/// infinity when they are constant with different means. Groups with fewer
/// than two values give NaN.
pub fn cohens_d<T: Scalar>(a: &[T], b: &[T]) -> T {
    if a.len() < 2 || b.len() < 2 {
        return T::nan();
    }
    let (ma, mb) = (mean(a), mean(b));
    let (na, nb) = (T::n(a.len()), T::n(b.len()));
    let pooled = ((na - T::one()) * variance(a, 1) + (nb - T::one()) * variance(b, 1)) / (na + nb - T::c(2.0));
    let sd = pooled.sqrt();
    let diff = ma - mb;
    if sd > T::zero() {
        diff / sd
    } else if diff == T::zero() {
        T::zero()
    } else if diff > T::zero() {
        T::infinity()
    } else {
        T::neg_infinity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurdleOutcome {
    pub p_prevalence: f64,
    pub p_intensity: f64,
    /// Bonferroni combination of the two parts, capped at 1.
    pub p_value: f64,
}

/// Two-part comparison of a feature between a cluster and its complement:
/// Fisher's exact test on zero/non-zero counts plus a two-sided Mann-Whitney
/// test on the non-zero values.
pub fn hurdle_test<T: Scalar>(inside: &[T], outside: &[T]) -> HurdleOutcome {
    let nz_in: Vec<T> = inside.iter().copied().filter(|v| *v != T::zero()).collect();
    let nz_out: Vec<T> = outside.iter().copied().filter(|v| *v != T::zero()).collect();
    if nz_in.is_empty() && nz_out.is_empty() {
        return HurdleOutcome { p_prevalence: 1.0, p_intensity: 1.0, p_value: 1.0 };
    }
    let p_prevalence = fisher_exact_two_sided(
        nz_in.len() as u64,
        (inside.len() - nz_in.len()) as u64,
        nz_out.len() as u64,
        (outside.len() - nz_out.len()) as u64,
    );
    let p_intensity = if nz_in.is_empty() || nz_out.is_empty() {
        1.0
    } else {
        let x: Vec<f64> = nz_in.iter().map(|v| v.f64()).collect();
        let y: Vec<f64> = nz_out.iter().map(|v| v.f64()).collect();
        mann_whitney_u(&x, &y).p_value
    };
    HurdleOutcome { p_prevalence, p_intensity, p_value: (2.0 * p_prevalence.min(p_intensity)).min(1.0) }
}
