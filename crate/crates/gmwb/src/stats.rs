//! Deterministic reductions and Monte Carlo summary statistics.

/// Pairwise (cascade) summation with a fixed association order.
///
/// Estimator reductions go through this so the result is independent of the
/// number of worker threads: per-path values are collected in path order and
/// reduced here sequentially.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean with its one-sigma standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// Plain iid summary of `values`.
    pub fn from_samples(values: &[f64]) -> MeanStderr {
        summarize(values)
    }

    /// Summary that respects antithetic pairing: consecutive values form a
    /// negatively correlated pair, so the independent unit is the pair mean.
    /// Treating paired draws as iid would misstate the standard error.
    pub fn from_paths(values: &[f64], antithetic: bool) -> MeanStderr {
        if !antithetic {
            return summarize(values);
        }
        debug_assert!(values.len().is_multiple_of(2));
        let pair_means: Vec<f64> = values
            .chunks_exact(2)
            .map(|pair| 0.5 * (pair[0] + pair[1]))
            .collect();
        summarize(&pair_means)
    }
}

fn summarize(values: &[f64]) -> MeanStderr {
    let n = values.len();
    if n == 0 {
        return MeanStderr {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return MeanStderr { mean, stderr: 0.0 };
    }
    let centered_sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = pairwise_sum(&centered_sq) / (n - 1) as f64;
    MeanStderr {
        mean,
        stderr: (variance / n as f64).sqrt(),
    }
}
