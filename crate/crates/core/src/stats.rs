//! Partition-independent reductions and Monte Carlo summaries.

use serde::Serialize;

use crate::scalar::{count, Real};

/// Pairwise (cascade) summation in index order. The split points depend only
/// on the slice length, so the result is independent of how the values were
/// produced.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const BASE: usize = 16;
    if values.len() <= BASE {
        let mut acc = T::zero();
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub mean: T,
    pub stderr: T,
    pub n: usize,
}

impl<T: Real> Estimate<T> {
    /// Two-pass mean and standard error. A sample of identical values
    /// reports that value with standard error exactly zero.
    pub fn from_samples(values: &[T]) -> Self {
        let n = values.len();
        assert!(n >= 1, "cannot summarise an empty sample");
        let first = values[0];
        if values.iter().all(|v| v.as_f64().to_bits() == first.as_f64().to_bits()) {
            return Self {
                mean: first,
                stderr: T::zero(),
                n,
            };
        }
        let mean = pairwise_sum(values) / count(n);
        if n < 2 {
            return Self {
                mean,
                stderr: T::zero(),
                n,
            };
        }
        let centred: Vec<T> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&centred) / count(n - 1);
        Self {
            mean,
            stderr: (var / count(n)).sqrt(),
            n,
        }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: T) -> T {
        if self.stderr == T::zero() {
            if self.mean == target {
                T::zero()
            } else {
                T::infinity()
            }
        } else {
            (self.mean - target).abs() / self.stderr
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_has_zero_stderr() {
        let e = Estimate::from_samples(&[0.1f64; 1001]);
        assert_eq!(e.mean, 0.1);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn mean_and_stderr() {
        let e = Estimate::from_samples(&[1.0f64, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        let var = (2.25 + 0.25 + 0.25 + 2.25) / 3.0;
        assert!((e.stderr - (var / 4.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0f64);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn pairwise_matches_exact_integers() {
        let v: Vec<f64> = (1..=10_000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 50_005_000.0);
    }
}
