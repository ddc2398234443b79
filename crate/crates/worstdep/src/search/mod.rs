//! Quantile minimization over vine-copula dependence parameters: exhaustive
//! grid search, greedy pair selection, relabeled restarts, quantile curves
//! and the cost model of the greedy search.
//!
//! All evaluations of a run share one block of independent uniforms (common
//! random numbers), so differences between grid points reflect the
//! dependence change rather than sampling noise. Bootstrap replicates use a
//! substream keyed by the record index, which makes every output independent
//! of thread scheduling.

mod greedy;
pub mod grid;

pub use greedy::{greedy_search, GreedySettings, GreedyTrace, IterationSummary, SelectedPair, StopReason};
pub use grid::{greedy_grid, make_grid, GridStrategy, IncumbentAxis};

use crate::copula::{CopulaFamily, PairCopula};
use crate::error::{Error, Result};
use crate::estimation::{bootstrap_ci_sorted, sorted_quantile, ConfidenceInterval, QuantileEstimate, DEFAULT_REPLICATES};
use crate::margins::Margin;
use crate::models::Model;
use crate::rng::{self, substream};
use crate::vine::{all_pairs, apply_margins, build_vine_from_pairs, normalize_pair, DependenceModel, Pair, VineStructure};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeSet;

/// Percentile-bootstrap settings for every quantile estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bootstrap {
    /// 0 disables the confidence intervals.
    pub replicates: usize,
    pub level: f64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self { replicates: DEFAULT_REPLICATES, level: 0.95 }
    }
}

/// Model, margins and estimator settings shared by every search.
#[derive(Debug)]
pub struct Problem {
    model: Model,
    margins: Vec<Margin>,
    alpha: f64,
    n: usize,
    seed: u64,
    bootstrap: Bootstrap,
    common: Vec<f64>,
}

impl Problem {
    pub fn new(model: Model, margins: Vec<Margin>, alpha: f64, n: usize, seed: u64, bootstrap: Bootstrap) -> Result<Self> {
        let d = margins.len();
        if d < 2 {
            return Err(Error::Size(format!("dependence search needs at least 2 inputs, got {d}")));
        }
        if model.dimension() != d {
            return Err(Error::Size(format!("model takes {} inputs but {d} margins were given", model.dimension())));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if n < 100 {
            return Err(Error::Size(format!("sample size must be at least 100, got {n}")));
        }
        if bootstrap.replicates > 0 && !(bootstrap.level > 0.0 && bootstrap.level < 1.0) {
            return Err(Error::domain(format!("bootstrap level must lie in (0,1), got {}", bootstrap.level)));
        }
        let common = rng::open_uniforms(seed, rng::COMMON_UNIFORMS, 0, n * d);
        Ok(Self { model, margins, alpha, n, seed, bootstrap, common })
    }

    pub fn dimension(&self) -> usize {
        self.margins.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn margins(&self) -> &[Margin] {
        &self.margins
    }

    /// Output sample of `dm` on the common uniforms, sorted ascending.
    pub fn sorted_outputs(&self, dm: &DependenceModel) -> Result<Vec<f64>> {
        let mut x = dm.uniforms_from(&self.common)?;
        apply_margins(&mut x, &self.margins)?;
        let mut y = self.model.evaluate_batch(&x)?;
        y.par_sort_unstable_by(f64::total_cmp);
        Ok(y)
    }

    /// Quantile estimate of `dm`; `record` keys the bootstrap substream.
    pub fn estimate(&self, dm: &DependenceModel, record: usize) -> Result<QuantileEstimate> {
        let sorted = self.sorted_outputs(dm)?;
        let value = sorted_quantile(&sorted, self.alpha)?;
        let ci = if self.bootstrap.replicates == 0 {
            None
        } else {
            let mut rng = substream(self.seed, rng::BOOTSTRAP, record as u64);
            Some(bootstrap_ci_sorted(&sorted, self.alpha, self.bootstrap.level, self.bootstrap.replicates, &mut rng)?)
        };
        Ok(QuantileEstimate { alpha: self.alpha, value, n: self.n, ci })
    }
}

/// Kendall bounds of a searched pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBounds {
    pub pair: Pair,
    pub lower: f64,
    pub upper: f64,
}

impl PairBounds {
    pub fn full(pair: Pair) -> Self {
        Self { pair: normalize_pair(pair.0, pair.1), lower: -1.0, upper: 1.0 }
    }
}

/// A pair whose copula is known and held constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPair {
    pub pair: Pair,
    pub copula: PairCopula,
}

/// What is searched: free pairs with Kendall bounds, the grid layout, the
/// candidate families and any fixed pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub d: usize,
    pub free: Vec<PairBounds>,
    /// Whether the free pairs lead the ranking used to build the grid-search
    /// structure. When false the structure is the D-vine completion of the
    /// fixed pairs.
    pub lead_with_free: bool,
    pub strategy: GridStrategy,
    pub families: Vec<CopulaFamily>,
    pub fixed: Vec<FixedPair>,
}

impl SearchSpace {
    /// Every pair free over `[−1, 1]`, regular grid, gaussian family.
    pub fn all_pairs(d: usize) -> Self {
        Self {
            d,
            free: all_pairs(d).into_iter().map(PairBounds::full).collect(),
            lead_with_free: false,
            strategy: GridStrategy::Regular,
            families: vec![CopulaFamily::Gaussian],
            fixed: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Size(format!("search space needs d >= 2, got {}", self.d)));
        }
        if self.families.is_empty() {
            return Err(Error::param("the candidate family set is empty"));
        }
        if let Some(f) = self.families.iter().find(|f| !f.is_searchable()) {
            return Err(Error::param(format!("{f} has no Kendall parameterization to search")));
        }
        let mut seen = BTreeSet::new();
        let name = |p: Pair| format!("({}, {})", p.0 + 1, p.1 + 1);
        let pairs = self.free.iter().map(|b| b.pair).chain(self.fixed.iter().map(|f| f.pair));
        for p in pairs {
            if p.0 == p.1 || p.0 >= self.d || p.1 >= self.d {
                return Err(Error::param(format!("pair {} is not a pair of distinct variables in 1..={}", name(p), self.d)));
            }
            if !seen.insert(normalize_pair(p.0, p.1)) {
                return Err(Error::param(format!("pair {} is listed more than once", name(p))));
            }
        }
        for b in &self.free {
            if !(-1.0 <= b.lower && b.lower < b.upper && b.upper <= 1.0) {
                return Err(Error::param(format!(
                    "pair {} has Kendall bounds [{}, {}]; need -1 <= lower < upper <= 1",
                    name(b.pair),
                    b.lower,
                    b.upper
                )));
            }
        }
        Ok(())
    }

    pub fn free_pairs(&self) -> Vec<Pair> {
        self.free.iter().map(|b| normalize_pair(b.pair.0, b.pair.1)).collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.free.iter().map(|b| (b.lower, b.upper)).collect()
    }

    fn ranking(&self) -> Vec<Pair> {
        let mut r: Vec<Pair> = self.fixed.iter().map(|f| normalize_pair(f.pair.0, f.pair.1)).collect();
        if self.lead_with_free {
            r.extend(self.free_pairs());
        }
        r
    }

    /// The structure searched by the grid search. Under a relabeling `perm`
    /// (variable `v` of the natural D-vine becomes `perm[v]`) the ranked pairs
    /// are kept and only the completion changes.
    pub fn structure(&self, perm: Option<&[usize]>) -> Result<VineStructure> {
        let ranking = self.ranking();
        match perm {
            None => build_vine_from_pairs(&ranking, self.d),
            Some(perm) => {
                let mut inverse = vec![0; self.d];
                for (v, &p) in perm.iter().enumerate() {
                    inverse[p] = v;
                }
                let mapped: Vec<Pair> = ranking.iter().map(|&(a, b)| normalize_pair(inverse[a], inverse[b])).collect();
                build_vine_from_pairs(&mapped, self.d)?.relabel(perm)
            }
        }
    }

    /// A dependence model on `structure` with the fixed copulas set and every
    /// other edge independent.
    pub fn base_model(&self, structure: VineStructure, ranked: Vec<Pair>) -> Result<DependenceModel> {
        let mut dm = DependenceModel::with_ranked(structure, ranked)?;
        for f in &self.fixed {
            dm.set_copula(f.pair, f.copula)?;
        }
        Ok(dm)
    }
}

/// One evaluated dependence configuration. Pairs are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<[usize; 2]>,
    /// Index into [`SearchResult::structures`].
    pub structure: usize,
    pub pairs: Vec<[usize; 2]>,
    pub families: Vec<CopulaFamily>,
    pub taus: Vec<f64>,
    pub thetas: Vec<Option<f64>>,
    pub quantile: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
    pub evaluations: u64,
}

impl EvalRecord {
    pub fn half_width(&self) -> f64 {
        self.ci.map_or(0.0, |c| c.half_width())
    }

    /// Order used for every argmin: quantile, then the Kendall vector
    /// lexicographically, then the candidate pair, then the record index.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.quantile
            .total_cmp(&other.quantile)
            .then_with(|| lex_cmp(&self.taus, &other.taus))
            .then_with(|| self.candidate.cmp(&other.candidate))
            .then_with(|| self.index.cmp(&other.index))
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Output of any search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub records: Vec<EvalRecord>,
    /// R-vine matrices (1-based) of every structure used, deduplicated.
    pub structures: Vec<Vec<Vec<usize>>>,
    /// Index of the minimizing record.
    pub best: usize,
    pub best_model: DependenceModel,
    /// Total model evaluations.
    pub evaluations: u64,
    pub greedy: Option<GreedyTrace>,
    /// Winning relabeling of a restarted search.
    pub permutation: Option<Vec<usize>>,
}

impl SearchResult {
    pub fn best_record(&self) -> &EvalRecord {
        &self.records[self.best]
    }
}

/// Progress notifications, emitted in record order.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProgressEvent<'a> {
    Point(&'a EvalRecord),
    Iteration(&'a IterationSummary),
    Restart { restart: usize, permutation: Vec<usize>, best: &'a EvalRecord },
    Finished { best: &'a EvalRecord, evaluations: u64 },
}

pub type Progress<'a> = &'a (dyn Fn(&ProgressEvent<'_>) + Sync);

fn notify(progress: Option<Progress<'_>>, event: ProgressEvent<'_>) {
    if let Some(f) = progress {
        f(&event);
    }
}

/// Deduplicating store of structure matrices.
#[derive(Debug, Default)]
pub(crate) struct StructureTable {
    matrices: Vec<Vec<Vec<usize>>>,
}

impl StructureTable {
    pub(crate) fn intern(&mut self, s: &VineStructure) -> Result<usize> {
        let m = s.matrix()?;
        if let Some(k) = self.matrices.iter().position(|x| *x == m) {
            return Ok(k);
        }
        self.matrices.push(m);
        Ok(self.matrices.len() - 1)
    }
}

/// One family assignment over a fixed set of pairs on one structure.
pub(crate) struct GridTask<'a> {
    pub base: &'a DependenceModel,
    pub structure: usize,
    pub pairs: Vec<Pair>,
    pub families: Vec<CopulaFamily>,
    pub grid: Vec<Vec<f64>>,
    pub first_index: usize,
    pub restart: Option<usize>,
    pub iteration: Option<usize>,
    pub candidate: Option<Pair>,
}

/// Sets the copula of `pairs[k]` to `families[k]` at `taus[k]`.
pub fn configure(base: &DependenceModel, pairs: &[Pair], families: &[CopulaFamily], taus: &[f64]) -> Result<DependenceModel> {
    let mut dm = base.clone();
    for ((&p, &f), &t) in pairs.iter().zip(families).zip(taus) {
        dm.set_copula(p, PairCopula::from_tau_auto(f, t)?)?;
    }
    Ok(dm)
}

fn one_based(p: Pair) -> [usize; 2] {
    [p.0 + 1, p.1 + 1]
}

fn describe_point(pairs: &[Pair], families: &[CopulaFamily], taus: &[f64], thetas: &[Option<f64>]) -> String {
    let parts: Vec<String> = pairs
        .iter()
        .zip(families)
        .zip(taus.iter().zip(thetas))
        .map(|((p, f), (t, th))| match th {
            Some(th) => format!("({}, {}) {f} tau={t} theta={th}", p.0 + 1, p.1 + 1),
            None => format!("({}, {}) {f} tau={t}", p.0 + 1, p.1 + 1),
        })
        .collect();
    parts.join("; ")
}

pub(crate) fn evaluate_point(problem: &Problem, task: &GridTask<'_>, k: usize) -> Result<EvalRecord> {
    let taus = &task.grid[k];
    let index = task.first_index + k;
    let dm = configure(task.base, &task.pairs, &task.families, taus)?;
    let thetas: Vec<Option<f64>> = task
        .pairs
        .iter()
        .map(|&p| dm.copula(p).map(|c| c.theta()))
        .collect::<Result<_>>()?;
    let est = problem.estimate(&dm, index).map_err(|e| {
        Error::Model(format!(
            "evaluation at {} failed: {e}",
            describe_point(&task.pairs, &task.families, taus, &thetas)
        ))
    })?;
    Ok(EvalRecord {
        index,
        restart: task.restart,
        iteration: task.iteration,
        candidate: task.candidate.map(one_based),
        structure: task.structure,
        pairs: task.pairs.iter().map(|&p| one_based(p)).collect(),
        families: task.families.clone(),
        taus: taus.clone(),
        thetas,
        quantile: est.value,
        ci: est.ci,
        evaluations: problem.n as u64,
    })
}

/// Evaluates every point of every task in parallel; records come back in
/// index order.
pub(crate) fn run_tasks(problem: &Problem, tasks: &[GridTask<'_>]) -> Result<Vec<EvalRecord>> {
    let jobs: Vec<(usize, usize)> = tasks
        .iter()
        .enumerate()
        .flat_map(|(t, task)| (0..task.grid.len()).map(move |k| (t, k)))
        .collect();
    jobs.par_iter().map(|&(t, k)| evaluate_point(problem, &tasks[t], k)).collect()
}

pub(crate) fn argmin(records: &[EvalRecord]) -> Option<&EvalRecord> {
    records.iter().min_by(|a, b| a.rank_cmp(b))
}

/// Builds the grid over the free pairs of `space` for its strategy.
pub fn search_grid(space: &SearchSpace, points: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = substream(seed, rng::GRID_DESIGN, 0);
    make_grid(&space.bounds(), space.strategy, points, &mut rng)
}

fn check_grid(space: &SearchSpace, grid: &[Vec<f64>]) -> Result<()> {
    space.validate()?;
    if space.free.is_empty() {
        return Err(Error::param("grid search needs at least one free pair"));
    }
    if grid.is_empty() {
        return Err(Error::Size("grid is empty".into()));
    }
    let p = space.free.len();
    for (k, point) in grid.iter().enumerate() {
        if point.len() != p {
            return Err(Error::Size(format!("grid point {} has {} coordinates for {p} free pairs", k + 1, point.len())));
        }
        for (t, b) in point.iter().zip(&space.free) {
            if !(*t >= b.lower && *t <= b.upper) {
                return Err(Error::param(format!(
                    "grid point {} puts tau={t} on pair ({}, {}) outside [{}, {}]",
                    k + 1,
                    b.pair.0 + 1,
                    b.pair.1 + 1,
                    b.lower,
                    b.upper
                )));
            }
        }
    }
    Ok(())
}

fn grid_pass<'a>(
    space: &SearchSpace,
    grid: &[Vec<f64>],
    base: &'a DependenceModel,
    structure: usize,
    first_index: usize,
    restart: Option<usize>,
) -> Vec<GridTask<'a>> {
    let pairs = space.free_pairs();
    let mut next = first_index;
    space
        .families
        .iter()
        .map(|&f| {
            let task = GridTask {
                base,
                structure,
                pairs: pairs.clone(),
                families: vec![f; pairs.len()],
                grid: grid.to_vec(),
                first_index: next,
                restart,
                iteration: None,
                candidate: None,
            };
            next += grid.len();
            task
        })
        .collect()
}

/// Exhaustive grid search: every point of `grid` (a Kendall vector over the
/// free pairs) under every candidate family, on the structure of `space`.
pub fn grid_search_min(problem: &Problem, space: &SearchSpace, grid: &[Vec<f64>], progress: Option<Progress<'_>>) -> Result<SearchResult> {
    check_space_dimension(problem, space)?;
    check_grid(space, grid)?;
    let structure = space.structure(None)?;
    let mut table = StructureTable::default();
    let sid = table.intern(&structure)?;
    let base = space.base_model(structure, space.ranking())?;
    let tasks = grid_pass(space, grid, &base, sid, 0, None);
    let records = run_tasks(problem, &tasks)?;
    for r in &records {
        notify(progress, ProgressEvent::Point(r));
    }
    let best = argmin(&records).expect("grid is nonempty").index;
    let best_rec = &records[best];
    let best_model = configure(&base, &space.free_pairs(), &best_rec.families, &best_rec.taus)?;
    let evaluations = records.iter().map(|r| r.evaluations).sum();
    notify(progress, ProgressEvent::Finished { best: best_rec, evaluations });
    Ok(SearchResult {
        records,
        structures: table.matrices,
        best,
        best_model,
        evaluations,
        greedy: None,
        permutation: None,
    })
}

fn check_space_dimension(problem: &Problem, space: &SearchSpace) -> Result<()> {
    if space.d != problem.dimension() {
        return Err(Error::Size(format!(
            "search space is over {} variables but the problem has {}",
            space.d,
            problem.dimension()
        )));
    }
    Ok(())
}

/// The relabeling used by restart `r`: the identity for `r = 0`, a seeded
/// random permutation otherwise.
pub fn restart_permutation(d: usize, seed: u64, r: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..d).collect();
    if r > 0 {
        perm.shuffle(&mut substream(seed, rng::RELABELING, r as u64));
    }
    perm
}

/// Grid search repeated under `restarts` variable relabelings, each changing
/// the D-vine completion of the structure. Records of all restarts are kept;
/// the overall minimum and its relabeling are reported.
pub fn permuted_restarts(
    problem: &Problem,
    space: &SearchSpace,
    grid: &[Vec<f64>],
    restarts: usize,
    progress: Option<Progress<'_>>,
) -> Result<SearchResult> {
    if restarts == 0 {
        return Err(Error::param("permuted restarts need at least one restart"));
    }
    check_space_dimension(problem, space)?;
    check_grid(space, grid)?;
    let mut table = StructureTable::default();
    let mut records: Vec<EvalRecord> = Vec::new();
    let mut winner: Option<(usize, Vec<usize>, DependenceModel)> = None;
    for r in 0..restarts {
        let perm = restart_permutation(space.d, problem.seed, r);
        let structure = space.structure(Some(&perm))?;
        let sid = table.intern(&structure)?;
        let base = space.base_model(structure, space.ranking())?;
        let tasks = grid_pass(space, grid, &base, sid, records.len(), Some(r));
        let batch = run_tasks(problem, &tasks)?;
        for rec in &batch {
            notify(progress, ProgressEvent::Point(rec));
        }
        let best = argmin(&batch).expect("grid is nonempty").clone();
        notify(progress, ProgressEvent::Restart { restart: r, permutation: perm.clone(), best: &best });
        let improves = winner.as_ref().is_none_or(|(w, _, _)| best.rank_cmp(&records[*w]) == Ordering::Less);
        if improves {
            let model = configure(&base, &space.free_pairs(), &best.families, &best.taus)?;
            winner = Some((best.index, perm, model));
        }
        records.extend(batch);
    }
    let (best, perm, best_model) = winner.expect("at least one restart");
    let evaluations = records.iter().map(|r| r.evaluations).sum();
    notify(progress, ProgressEvent::Finished { best: &records[best], evaluations });
    Ok(SearchResult {
        records,
        structures: table.matrices,
        best,
        best_model,
        evaluations,
        greedy: None,
        permutation: Some(perm),
    })
}

/// One point of a quantile-versus-tau curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub family: CopulaFamily,
    pub tau: f64,
    pub quantile: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

/// Quantile of the output for each family and Kendall tau of the single free
/// pair of `space`.
pub fn quantile_curve(problem: &Problem, space: &SearchSpace, taus: &[f64]) -> Result<Vec<CurveRow>> {
    if space.free.len() != 1 {
        return Err(Error::param(format!(
            "a quantile curve needs exactly one free pair, got {}",
            space.free.len()
        )));
    }
    let grid: Vec<Vec<f64>> = taus.iter().map(|&t| vec![t]).collect();
    let result = grid_search_min(problem, space, &grid, None)?;
    Ok(result
        .records
        .iter()
        .map(|r| CurveRow {
            family: r.families[0],
            tau: r.taus[0],
            quantile: r.quantile,
            ci_lower: r.ci.map(|c| c.lower),
            ci_upper: r.ci.map(|c| c.upper),
        })
        .collect())
}

/// Default greedy grid size `25·(k+1)²`.
pub fn default_grid_size(k: usize) -> usize {
    25 * (k + 1) * (k + 1)
}

/// Grid size at iteration `k`: `schedule[k]`, the last entry beyond its end,
/// or the default when the schedule is empty.
pub fn scheduled_grid_size(schedule: &[usize], k: usize) -> usize {
    match schedule {
        [] => default_grid_size(k),
        s => s[k.min(s.len() - 1)],
    }
}

/// Model runs of a greedy search through iteration `K = grid_sizes.len() − 1`:
/// `|families| · (n/2) · Σ_k N_k · (d(d−1) − 2k)`, computed exactly.
pub fn estimate_cost(families: u64, n: u64, grid_sizes: &[u64], d: u64) -> Result<u128> {
    let p = d * d.saturating_sub(1) / 2;
    if grid_sizes.is_empty() {
        return Err(Error::param("cost estimate needs at least one iteration"));
    }
    let k_max = (grid_sizes.len() - 1) as u64;
    if k_max > p {
        return Err(Error::param(format!("K = {k_max} exceeds the {p} pairs of d = {d}")));
    }
    // (n/2)·(d(d−1) − 2k) = n·(p − k), which keeps the arithmetic integral.
    let overflow = || Error::Size("cost estimate overflows 128 bits".into());
    let mut total: u128 = 0;
    for (k, &nk) in grid_sizes.iter().enumerate() {
        let term = (nk as u128).checked_mul((p - k as u64) as u128).ok_or_else(overflow)?;
        total = total.checked_add(term).ok_or_else(overflow)?;
    }
    (families as u128)
        .checked_mul(n as u128)
        .and_then(|x| x.checked_mul(total))
        .ok_or_else(overflow)
}
