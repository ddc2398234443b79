//! Kendall-space grid designs.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest grid any strategy will materialize.
pub const MAX_GRID_POINTS: usize = 10_000_000;
/// Random Latin hypercubes drawn when picking the maximin design.
pub const LHS_CANDIDATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridStrategy {
    /// Cartesian product of equispaced levels including both bounds.
    #[default]
    Regular,
    /// Maximin Latin hypercube with exactly the requested number of points.
    Lhs,
    /// The corners of the box, i.e. only Fréchet–Hoeffding bound copulas
    /// when the bounds are ±1.
    Vertices,
}

/// Smallest `m` with `m^p ≥ n`, refusing grids beyond [`MAX_GRID_POINTS`].
pub fn levels_per_axis(n: usize, p: usize) -> Result<usize> {
    if n == 0 || p == 0 {
        return Err(Error::Size(format!("grid needs at least one point and one axis, got N={n}, p={p}")));
    }
    let mut m = (n as f64).powf(1.0 / p as f64).round().max(1.0) as usize;
    while m > 1 && pow_at_least(m - 1, p, n) {
        m -= 1;
    }
    while !pow_at_least(m, p, n) {
        m += 1;
    }
    match checked_pow(m, p) {
        Some(total) if total <= MAX_GRID_POINTS => Ok(m),
        _ => Err(Error::Size(format!(
            "a regular grid with {m} levels on each of {p} axes exceeds {MAX_GRID_POINTS} points"
        ))),
    }
}

fn checked_pow(m: usize, p: usize) -> Option<usize> {
    (0..p).try_fold(1usize, |acc, _| acc.checked_mul(m))
}

fn pow_at_least(m: usize, p: usize, n: usize) -> bool {
    checked_pow(m, p).is_none_or(|v| v >= n)
}

/// `m` equispaced levels over `[lo, hi]` hitting both ends exactly; the
/// midpoint when `m = 1`. Each level is a weighted mean of the ends with a
/// single rounding at the division, so `[-1, 1]` gives -0.45 rather than
/// -0.44999999999999996.
pub fn regular_levels(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..m)
            .map(|i| match i {
                0 => lo,
                _ if i + 1 == m => hi,
                _ => (lo * (m - 1 - i) as f64 + hi * i as f64) / (m - 1) as f64,
            })
            .collect(),
    }
}

/// Cartesian product, first axis varying slowest.
pub fn cartesian(axes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let total = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .filter(|&t| t <= MAX_GRID_POINTS)
        .ok_or_else(|| Error::Size(format!("grid exceeds {MAX_GRID_POINTS} points")))?;
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    if total == 0 {
        return Ok(out);
    }
    loop {
        out.push(idx.iter().zip(axes).map(|(&i, a)| a[i]).collect());
        let mut k = axes.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// A maximin Latin hypercube in the unit cube: the best of
/// [`LHS_CANDIDATES`] random designs by smallest pairwise distance.
pub fn maximin_lhs<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let designs: Vec<Vec<Vec<f64>>> = (0..LHS_CANDIDATES).map(|_| random_lhs(n, p, rng)).collect();
    let scores: Vec<f64> = designs.par_iter().map(|d| min_sq_distance(d)).collect();
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    designs.into_iter().nth(best).unwrap_or_default()
}

fn random_lhs<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; p]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for axis in 0..p {
        strata.shuffle(rng);
        for (point, &s) in points.iter_mut().zip(&strata) {
            let jitter: f64 = rng.random();
            point[axis] = (s as f64 + jitter) / n as f64;
        }
    }
    points
}

fn min_sq_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d);
        }
    }
    best
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::Size("grid needs at least one axis".into()));
    }
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        if !(-1.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "axis {} has Kendall bounds [{lo}, {hi}]; need -1 <= lower < upper <= 1",
                k + 1
            )));
        }
    }
    Ok(())
}

fn scale(unit: Vec<Vec<f64>>, bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    unit.into_iter()
        .map(|p| p.iter().zip(bounds).map(|(&u, &(lo, hi))| lo + (hi - lo) * u).collect())
        .collect()
}

/// A grid of Kendall vectors over the box `bounds`.
///
/// `regular` may return more than `n` points (the per-axis count is rounded
/// up); `lhs` returns exactly `n`; `vertices` ignores `n` and returns all
/// `2^p` corners.
pub fn make_grid<R: Rng + ?Sized>(bounds: &[(f64, f64)], strategy: GridStrategy, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    check_bounds(bounds)?;
    if n == 0 {
        return Err(Error::Size("grid size must be at least 1".into()));
    }
    let p = bounds.len();
    match strategy {
        GridStrategy::Regular => {
            let m = levels_per_axis(n, p)?;
            cartesian(&bounds.iter().map(|&(lo, hi)| regular_levels(lo, hi, m)).collect::<Vec<_>>())
        }
        GridStrategy::Vertices => cartesian(&bounds.iter().map(|&(lo, hi)| vec![lo, hi]).collect::<Vec<_>>()),
        GridStrategy::Lhs => {
            if n > MAX_GRID_POINTS {
                return Err(Error::Size(format!("LHS of {n} points exceeds {MAX_GRID_POINTS}")));
            }
            Ok(scale(maximin_lhs(n, p, rng), bounds))
        }
    }
}

/// An axis already fixed by an earlier greedy iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncumbentAxis {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `m` levels spaced `(upper − lower) / (2(m − 1))` apart, always containing
/// the incumbent value and kept inside the bounds.
pub fn local_levels(axis: IncumbentAxis, m: usize) -> Vec<f64> {
    if m <= 1 {
        return vec![axis.value];
    }
    let step = (axis.upper - axis.lower) / (2 * (m - 1)) as f64;
    let room_below = ((axis.value - axis.lower) / step + 1e-9).floor() as usize;
    let room_above = ((axis.upper - axis.value) / step + 1e-9).floor() as usize;
    let mut below = (m - 1) / 2;
    let mut above = m - 1 - below;
    if below > room_below {
        above += below - room_below;
        below = room_below;
    }
    if above > room_above {
        below += above - room_above;
        above = room_above;
    }
    (0..=below + above)
        .map(|j| {
            let offset = j as f64 - below as f64;
            (axis.value + offset * step).clamp(axis.lower, axis.upper)
        })
        .collect()
}

/// The grid searched at greedy iteration `k = incumbent.len()`: earlier axes
/// are refined locally around their incumbent values while the new pair's
/// axis spans its whole range.
///
/// * `regular`: `m = ⌈N^{1/(k+1)}⌉` local levels on each earlier axis and
///   `⌈N / m^k⌉` equispaced levels on the new axis.
/// * `lhs`: `N` maximin LHS points in the box formed by the local windows
///   (half of each earlier axis' range around the incumbent) and the new range.
/// * `vertices`: all `2^{k+1}` corners of the full box.
pub fn greedy_grid<R: Rng + ?Sized>(
    incumbent: &[IncumbentAxis],
    new_axis: (f64, f64),
    strategy: GridStrategy,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let mut full: Vec<(f64, f64)> = incumbent.iter().map(|a| (a.lower, a.upper)).collect();
    full.push(new_axis);
    if incumbent.is_empty() || strategy == GridStrategy::Vertices {
        return make_grid(&full, strategy, n, rng);
    }
    check_bounds(&full)?;
    if n == 0 {
        return Err(Error::Size("grid size must be at least 1".into()));
    }
    let k = incumbent.len();
    match strategy {
        GridStrategy::Regular => {
            let m = levels_per_axis(n, k + 1)?;
            let old_cells = checked_pow(m, k).unwrap_or(usize::MAX);
            let new_levels = n.div_ceil(old_cells).max(1);
            let mut axes: Vec<Vec<f64>> = incumbent.iter().map(|&a| local_levels(a, m)).collect();
            axes.push(regular_levels(new_axis.0, new_axis.1, new_levels));
            cartesian(&axes)
        }
        GridStrategy::Lhs => {
            let mut boxes: Vec<(f64, f64)> = incumbent
                .iter()
                .map(|a| {
                    let half = 0.25 * (a.upper - a.lower);
                    let lo = (a.value - half).max(a.lower);
                    let hi = (lo + 2.0 * half).min(a.upper);
                    (hi - 2.0 * half, hi)
                })
                .collect();
            boxes.push(new_axis);
            Ok(scale(maximin_lhs(n, k + 1, rng), &boxes))
        }
        GridStrategy::Vertices => unreachable!("handled above"),
    }
}
