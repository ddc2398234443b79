//! Empirical CDF and generalized-inverse quantile estimation, with percentile
//! bootstrap intervals.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

pub const DEFAULT_REPLICATES: usize = 500;
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub replicates: usize,
}

impl ConfidenceInterval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub alpha: f64,
    pub value: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci: Option<ConfidenceInterval>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

/// 1-based rank of the order statistic that is the α-quantile: ⌈αn⌉.
///
/// Products like 0.1·300000 carry representation error that would push the
/// ceiling one rank too far, so values within 1e-9 (relative) of an integer
/// are snapped to it first.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    let x = alpha * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// The ⌈αn⌉-th order statistic of `sample`: `inf{y : F̂(y) ≥ α}`.
pub fn empirical_quantile(sample: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if sample.is_empty() {
        return Err(Error::domain("empirical quantile of an empty sample"));
    }
    if sample.iter().any(|y| y.is_nan()) {
        return Err(Error::domain("sample contains NaN"));
    }
    let k = quantile_rank(sample.len(), alpha);
    let mut buf = sample.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Same as [`empirical_quantile`] for an already sorted sample.
pub fn sorted_quantile(sorted: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if sorted.is_empty() {
        return Err(Error::domain("empirical quantile of an empty sample"));
    }
    Ok(sorted[quantile_rank(sorted.len(), alpha) - 1])
}

/// Right-continuous empirical CDF: (1/n)·#{Yᵢ ≤ y}.
pub fn empirical_cdf(sample: &[f64], y: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::domain("empirical CDF of an empty sample"));
    }
    let count = sample.iter().filter(|&&s| s <= y).count();
    Ok(count as f64 / sample.len() as f64)
}

/// Percentile bootstrap interval of the α-quantile estimator, computed from a
/// sorted sample.
///
/// A resample's k-th order statistic equals `sorted[⌈n·B⌉ − 1]` with
/// B ~ Beta(k, n − k + 1), so each replicate costs one Beta draw instead of a
/// resample and a selection. The distribution of replicates is identical to
/// naive resampling.
pub fn bootstrap_ci_sorted<R: Rng + ?Sized>(
    sorted: &[f64],
    alpha: f64,
    level: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level must lie in (0,1), got {level}")));
    }
    if replicates < MIN_REPLICATES {
        return Err(Error::domain(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    if sorted.is_empty() {
        return Err(Error::domain("bootstrap of an empty sample"));
    }
    let n = sorted.len();
    let k = quantile_rank(n, alpha);
    let point = sorted[k - 1];
    let mut reps: Vec<f64> = if n == 1 {
        vec![point; replicates]
    } else {
        let beta = Beta::new(k as f64, (n - k + 1) as f64)
            .map_err(|e| Error::domain(format!("bootstrap beta law: {e}")))?;
        (0..replicates)
            .map(|_| {
                let b: f64 = beta.sample(rng);
                let idx = ((n as f64 * b).ceil() as usize).clamp(1, n);
                sorted[idx - 1]
            })
            .collect()
    };
    reps.sort_by(f64::total_cmp);
    Ok(percentile_interval(&reps, point, level, replicates))
}

/// Reference implementation by explicit resampling with replacement. Slow;
/// kept as the oracle for [`bootstrap_ci_sorted`].
pub fn bootstrap_ci_resampling<R: Rng + ?Sized>(
    sample: &[f64],
    alpha: f64,
    level: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if replicates < MIN_REPLICATES {
        return Err(Error::domain(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    let point = empirical_quantile(sample, alpha)?;
    let n = sample.len();
    let mut buf = vec![0.0; n];
    let mut reps = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        for slot in buf.iter_mut() {
            *slot = sample[rng.random_range(0..n)];
        }
        reps.push(empirical_quantile(&buf, alpha)?);
    }
    reps.sort_by(f64::total_cmp);
    Ok(percentile_interval(&reps, point, level, replicates))
}

/// Unsorted convenience wrapper around [`bootstrap_ci_sorted`].
pub fn bootstrap_ci<R: Rng + ?Sized>(
    sample: &[f64],
    alpha: f64,
    level: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<ConfidenceInterval> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    bootstrap_ci_sorted(&sorted, alpha, level, replicates, rng)
}

fn percentile_interval(sorted_reps: &[f64], point: f64, level: f64, replicates: usize) -> ConfidenceInterval {
    let tail = 0.5 * (1.0 - level);
    let lower = sorted_reps[quantile_rank(sorted_reps.len(), tail) - 1];
    let upper = sorted_reps[quantile_rank(sorted_reps.len(), 1.0 - tail) - 1];
    // The percentile interval can miss the point estimate when the replicate
    // distribution is lumpy; the reported interval always brackets it.
    ConfidenceInterval {
        lower: lower.min(point),
        upper: upper.max(point),
        level,
        replicates,
    }
}

/// Kendall's tau-b by Knight's O(n log n) merge-sort algorithm.
pub fn empirical_kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "kendall tau needs paired samples");
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let tie_pairs = |run: u64| run * (run - 1) / 2;
    let (mut x_ties, mut joint_ties) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for i in 1..n {
        if pairs[i].0 == pairs[i - 1].0 {
            run_x += 1;
            if pairs[i].1 == pairs[i - 1].1 {
                run_xy += 1;
            } else {
                joint_ties += tie_pairs(run_xy);
                run_xy = 1;
            }
        } else {
            x_ties += tie_pairs(run_x);
            joint_ties += tie_pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    x_ties += tie_pairs(run_x);
    joint_ties += tie_pairs(run_xy);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut scratch);

    let mut y_ties = 0u64;
    let mut run_y = 1u64;
    for i in 1..n {
        if ys[i] == ys[i - 1] {
            run_y += 1;
        } else {
            y_ties += tie_pairs(run_y);
            run_y = 1;
        }
    }
    y_ties += tie_pairs(run_y);

    let total = (n as u64) * (n as u64 - 1) / 2;
    let numer = total as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    let denom = ((total - x_ties) as f64 * (total - y_ties) as f64).sqrt();
    numer / denom
}

/// Sorts `v` ascending and returns the number of inversions.
fn merge_count(v: &mut [f64], scratch: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        merge_count(left, sl) + merge_count(right, sr)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            scratch[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            scratch[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&scratch[..n]);
    swaps
}
