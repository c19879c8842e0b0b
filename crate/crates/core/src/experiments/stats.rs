//! Empirical distribution functions and sampling-error helpers.

use serde::Serialize;

/// Sorted sample with CDF evaluation and sup-distance to a reference law.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCDF {
    sorted: Vec<f64>,
}

impl EmpiricalCDF {
    /// NaNs are not allowed in the sample.
    pub fn new(mut sample: Vec<f64>) -> Self {
        assert!(sample.iter().all(|v| !v.is_nan()), "NaN in sample");
        sample.sort_by(f64::total_cmp);
        EmpiricalCDF { sorted: sample }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sample(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of the sample `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        let k = self.sorted.partition_point(|&v| v <= x);
        k as f64 / self.sorted.len() as f64
    }

    /// Smallest sample value with CDF at least `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        if n == 0 {
            return f64::NAN;
        }
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }

    /// `sup_x |F_n(x) - F(x)|` for a continuous reference `F`. The supremum is
    /// attained at a sample point, approached from the left or the right.
    pub fn sup_distance(&self, reference: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len();
        if n == 0 {
            return f64::NAN;
        }
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < n {
            let v = self.sorted[i];
            let mut j = i;
            while j < n && self.sorted[j] == v {
                j += 1;
            }
            let f = reference(v);
            let before = i as f64 / n as f64;
            let after = j as f64 / n as f64;
            worst = worst.max((after - f).abs()).max((before - f).abs());
            i = j;
        }
        worst
    }

    /// `F_n(u) - F(u)` on a grid.
    pub fn deviation_profile(&self, grid: &[f64], reference: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        grid.iter().map(|&u| (u, self.eval(u) - reference(u))).collect()
    }
}

/// Point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub stderr: f64,
    pub n: usize,
    /// Replicas whose light-cone certificate failed.
    pub violations: usize,
}

impl Estimate {
    pub fn from_values(values: &[f64], violations: usize) -> Self {
        let (point, stderr) = mean_stderr(values);
        Estimate {
            point,
            stderr,
            n: values.len(),
            violations,
        }
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Replicas needed so that the sup-distance exceeds `epsilon` with probability
/// at most `delta`: `ceil(ln(2/delta) / (2 epsilon^2))`, at least 1.
pub fn dkw_sample_size(epsilon: f64, delta: f64) -> usize {
    let n = ((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// Sup-distance radius guaranteed with probability `1 - delta` for `n` samples.
pub fn dkw_radius(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dkw_sizes() {
        assert_eq!(dkw_sample_size(0.02, 0.001), 9502);
        assert_eq!(dkw_sample_size(0.5, 1.0), 2);
        assert_eq!(dkw_sample_size(0.9, 0.99), 1);
        let a = dkw_sample_size(0.04, 0.01) as f64;
        let b = dkw_sample_size(0.02, 0.01) as f64;
        assert!((b / a - 4.0).abs() < 0.01);
        assert!(dkw_radius(9502, 0.001) <= 0.02);
    }

    #[test]
    fn ecdf_evaluation_and_ties() {
        let e = EmpiricalCDF::new(vec![0.5, 0.0, 0.5, 1.0]);
        assert_eq!(e.eval(-1.0), 0.0);
        assert_eq!(e.eval(0.0), 0.25);
        assert_eq!(e.eval(0.5), 0.75);
        assert_eq!(e.eval(2.0), 1.0);
        assert_eq!(e.quantile(0.5), 0.5);
        // uniform reference: left limit at 0.5 is 0.25 vs 0.5, right is 0.75 vs 0.5
        let d = e.sup_distance(|u| u.clamp(0.0, 1.0));
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sup_distance_of_perfect_grid() {
        let n = 1000;
        let e = EmpiricalCDF::new((1..=n).map(|k| k as f64 / n as f64).collect());
        assert!((e.sup_distance(|u| u) - 1.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ecdf_is_monotone_cdf(sample in proptest::collection::vec(-10.0f64..10.0, 1..60),
                                probes in proptest::collection::vec(-12.0f64..12.0, 2..20)) {
            let e = EmpiricalCDF::new(sample);
            let mut probes = probes;
            probes.sort_by(f64::total_cmp);
            let values: Vec<f64> = probes.iter().map(|&x| e.eval(x)).collect();
            for w in values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            prop_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
            let d = e.sup_distance(|u| ((u + 10.0) / 20.0).clamp(0.0, 1.0));
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
