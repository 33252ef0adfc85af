use rand::Rng;

use crate::scalar::{mean, quantile_sorted, sort_floats, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// Percentile interval `[(1-level)/2, (1+level)/2]` of bootstrap replicates.
pub fn percentile_interval<T: Scalar>(replicates: &[T], level: f64) -> Interval<T> {
    let mut v = replicates.to_vec();
    sort_floats(&mut v);
    let a = (1.0 - level) / 2.0;
    Interval { lo: quantile_sorted(&v, a), hi: quantile_sorted(&v, 1.0 - a) }
}

/// Replicates of `stat` over resamples of `data` drawn with replacement.
pub fn bootstrap_statistic<T, R, F>(data: &[T], resamples: usize, rng: &mut R, stat: F) -> Vec<T>
where
    T: Scalar,
    R: Rng,
    F: Fn(&[T]) -> T,
{
    if data.is_empty() {
        return Vec::new();
    }
    let mut buf = vec![T::zero(); data.len()];
    (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = data[rng.gen_range(0..data.len())];
            }
            stat(&buf)
        })
        .collect()
}

/// Replicates of `mean(a*) - mean(b*)`, each cohort resampled independently.
pub fn bootstrap_diff_of_means<T: Scalar, R: Rng>(a: &[T], b: &[T], resamples: usize, rng: &mut R) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let (mut ba, mut bb) = (vec![T::zero(); a.len()], vec![T::zero(); b.len()]);
    (0..resamples)
        .map(|_| {
            for slot in ba.iter_mut() {
                *slot = a[rng.gen_range(0..a.len())];
            }
            for slot in bb.iter_mut() {
                *slot = b[rng.gen_range(0..b.len())];
            }
            mean(&ba) - mean(&bb)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_data_degenerate_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let reps = bootstrap_diff_of_means(&[10.0; 8], &[20.0; 5], 500, &mut rng);
        let ci = percentile_interval(&reps, 0.95);
        assert_eq!((ci.lo, ci.hi), (-10.0, -10.0));
    }

    #[test]
    fn seeded_replicates_repeat() {
        let data: Vec<f64> = (0..50).map(|i| (i * 7 % 13) as f64).collect();
        let a = bootstrap_statistic(&data, 100, &mut ChaCha8Rng::seed_from_u64(1), mean);
        let b = bootstrap_statistic(&data, 100, &mut ChaCha8Rng::seed_from_u64(1), mean);
        assert_eq!(a, b);
    }
}
