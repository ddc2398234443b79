//! Greedy pair selection: grow the set of dependent pairs one at a time,
//! keeping the pair and family whose grid search lowers the quantile most.

use super::grid::{greedy_grid, IncumbentAxis};
use super::{
    argmin, configure, notify, one_based, run_tasks, scheduled_grid_size, GridTask, Problem, Progress,
    ProgressEvent, SearchResult, SearchSpace, StructureTable,
};
use crate::copula::CopulaFamily;
use crate::error::{Error, Result};
use crate::estimation::ConfidenceInterval;
use crate::rng::{self, substream};
use crate::vine::{build_vine_from_pairs, DependenceModel, Pair};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedySettings {
    /// Largest number of selected pairs; all candidates when absent.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// Model-evaluation budget; unlimited when absent.
    #[serde(default)]
    pub budget: Option<u64>,
    /// Grid size per iteration; `25·(k+1)²` when empty, the last entry
    /// repeated beyond its end.
    #[serde(default)]
    pub schedule: Vec<usize>,
    /// Drop candidates whose best quantile exceeds the incumbent by more than
    /// its CI half-width in two consecutive iterations.
    #[serde(default)]
    pub prune: bool,
}

impl Default for GreedySettings {
    fn default() -> Self {
        Self { max_iterations: None, budget: None, schedule: Vec::new(), prune: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The best candidate did not lower the quantile.
    NoImprovement,
    MaxIterations,
    Budget,
    /// Every candidate pair was selected or pruned.
    Exhausted,
}

/// The best candidate of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub k: usize,
    pub pair: [usize; 2],
    pub family: CopulaFamily,
    pub taus: Vec<f64>,
    pub quantile: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
    pub record: usize,
    pub accepted: bool,
    pub candidates: usize,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPair {
    pub pair: [usize; 2],
    pub family: CopulaFamily,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub independence_quantile: f64,
    pub independence_record: usize,
    pub iterations: Vec<IterationSummary>,
    pub selected: Vec<SelectedPair>,
    pub stop_reason: StopReason,
    pub pruned: Vec<[usize; 2]>,
}

impl GreedyTrace {
    /// Quantiles of the accepted iterations.
    pub fn accepted_quantiles(&self) -> Vec<f64> {
        self.iterations.iter().filter(|s| s.accepted).map(|s| s.quantile).collect()
    }

    pub fn selected_pairs(&self) -> Vec<[usize; 2]> {
        self.selected.iter().map(|s| s.pair).collect()
    }
}

struct Candidate {
    pair: Pair,
    bounds: (f64, f64),
    strikes: usize,
}

/// Greedy search over the free pairs of `space` (the candidates, in their
/// listed order). Each iteration builds, for every remaining candidate, the
/// structure ranked by the fixed pairs, the selected pairs and the candidate,
/// grid-searches the selected axes together with the candidate's axis under
/// each family, and keeps the overall argmin if it beats the incumbent.
pub fn greedy_search(
    problem: &Problem,
    space: &SearchSpace,
    settings: &GreedySettings,
    progress: Option<Progress<'_>>,
) -> Result<SearchResult> {
    space.validate()?;
    super::check_space_dimension(problem, space)?;
    let p = space.free.len();
    let k_max = settings.max_iterations.unwrap_or(p);
    if k_max > p {
        return Err(Error::param(format!("at most {p} iterations are possible, got {k_max}")));
    }
    if settings.schedule.contains(&0) {
        return Err(Error::param("greedy grid sizes must be positive"));
    }

    let mut table = StructureTable::default();
    let fixed: Vec<Pair> = space.fixed.iter().map(|f| f.pair).collect();

    // Independence reference: only the fixed pairs are dependent.
    let structure = build_vine_from_pairs(&fixed, space.d)?;
    let sid = table.intern(&structure)?;
    let mut best_model = space.base_model(structure, fixed.clone())?;
    let baseline = run_tasks(
        problem,
        &[GridTask {
            base: &best_model,
            structure: sid,
            pairs: Vec::new(),
            families: Vec::new(),
            grid: vec![Vec::new()],
            first_index: 0,
            restart: None,
            iteration: None,
            candidate: None,
        }],
    )?;
    notify(progress, ProgressEvent::Point(&baseline[0]));
    let mut records = baseline;
    let mut evaluations = problem.n as u64;
    let mut best = 0usize;

    let mut candidates: Vec<Candidate> = space
        .free
        .iter()
        .map(|b| Candidate { pair: b.pair, bounds: (b.lower, b.upper), strikes: 0 })
        .collect();
    let mut selected: Vec<(Pair, CopulaFamily, (f64, f64))> = Vec::new();
    let mut incumbent_taus: Vec<f64> = Vec::new();
    let mut iterations: Vec<IterationSummary> = Vec::new();
    let mut pruned: Vec<[usize; 2]> = Vec::new();

    let stop_reason = loop {
        let k = selected.len();
        if k >= k_max {
            break StopReason::MaxIterations;
        }
        if candidates.is_empty() {
            break StopReason::Exhausted;
        }
        let n_k = scheduled_grid_size(&settings.schedule, k);
        let incumbent: Vec<IncumbentAxis> = selected
            .iter()
            .zip(&incumbent_taus)
            .map(|(&(_, _, (lower, upper)), &value)| IncumbentAxis { value, lower, upper })
            .collect();
        let sel_pairs: Vec<Pair> = selected.iter().map(|s| s.0).collect();
        let sel_families: Vec<CopulaFamily> = selected.iter().map(|s| s.1).collect();

        let mut bases: Vec<(usize, DependenceModel)> = Vec::with_capacity(candidates.len());
        let mut grids = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let mut ranking = fixed.clone();
            ranking.extend(&sel_pairs);
            ranking.push(c.pair);
            let structure = build_vine_from_pairs(&ranking, space.d)?;
            let sid = table.intern(&structure)?;
            bases.push((sid, space.base_model(structure, ranking)?));
            // Same design for every candidate: a fresh substream per iteration.
            let mut rng = substream(problem.seed, rng::GRID_DESIGN, k as u64 + 1);
            grids.push(greedy_grid(&incumbent, c.bounds, space.strategy, n_k, &mut rng)?);
        }

        let mut tasks = Vec::new();
        let mut next = records.len();
        let mut spent = evaluations;
        let mut over_budget = false;
        'plan: for (ci, c) in candidates.iter().enumerate() {
            for &family in &space.families {
                let cost = (grids[ci].len() * problem.n) as u64;
                if settings.budget.is_some_and(|b| spent + cost > b) {
                    over_budget = true;
                    break 'plan;
                }
                spent += cost;
                let mut pairs = sel_pairs.clone();
                pairs.push(c.pair);
                let mut families = sel_families.clone();
                families.push(family);
                tasks.push(GridTask {
                    base: &bases[ci].1,
                    structure: bases[ci].0,
                    pairs,
                    families,
                    grid: grids[ci].clone(),
                    first_index: next,
                    restart: None,
                    iteration: Some(k),
                    candidate: Some(c.pair),
                });
                next += grids[ci].len();
            }
        }
        let round_start = records.len();
        let batch = run_tasks(problem, &tasks)?;
        for r in &batch {
            notify(progress, ProgressEvent::Point(r));
        }
        evaluations += batch.iter().map(|r| r.evaluations).sum::<u64>();
        records.extend(batch);
        if over_budget {
            break StopReason::Budget;
        }

        let this_round = &records[round_start..];
        let winner = argmin(this_round).expect("every candidate has grid points").clone();
        let incumbent_q = records[best].quantile;
        let accepted = winner.quantile < incumbent_q;
        let grid_size = grids[0].len();
        let summary = IterationSummary {
            k,
            pair: winner.candidate.expect("greedy records carry their candidate"),
            family: *winner.families.last().expect("candidate family"),
            taus: winner.taus.clone(),
            quantile: winner.quantile,
            ci: winner.ci,
            record: winner.index,
            accepted,
            candidates: candidates.len(),
            grid_size,
        };
        notify(progress, ProgressEvent::Iteration(&summary));
        iterations.push(summary);
        if !accepted {
            break StopReason::NoImprovement;
        }

        if settings.prune {
            let mut per_candidate: BTreeMap<[usize; 2], &super::EvalRecord> = BTreeMap::new();
            for r in this_round {
                let key = r.candidate.expect("greedy records carry their candidate");
                let slot = per_candidate.entry(key).or_insert(r);
                if r.rank_cmp(slot).is_lt() {
                    *slot = r;
                }
            }
            for c in candidates.iter_mut() {
                let r = per_candidate[&one_based(c.pair)];
                if r.quantile > incumbent_q + r.half_width() {
                    c.strikes += 1;
                } else {
                    c.strikes = 0;
                }
            }
        }

        let win_pair = winner.candidate.map(|[a, b]| (a - 1, b - 1)).expect("candidate");
        let pos = candidates.iter().position(|c| c.pair == win_pair).expect("winner is a candidate");
        let chosen = candidates.remove(pos);
        selected.push((chosen.pair, *winner.families.last().expect("family"), chosen.bounds));
        let chosen_pairs: Vec<Pair> = selected.iter().map(|s| s.0).collect();
        best_model = configure(&bases[pos].1, &chosen_pairs, &winner.families, &winner.taus)?;
        incumbent_taus = winner.taus.clone();
        best = winner.index;
        if settings.prune {
            candidates.retain(|c| {
                let drop = c.strikes >= 2;
                if drop {
                    pruned.push(one_based(c.pair));
                }
                !drop
            });
        }
    };

    let trace = GreedyTrace {
        independence_quantile: records[0].quantile,
        independence_record: 0,
        iterations,
        selected: selected
            .iter()
            .zip(&incumbent_taus)
            .map(|(&(pair, family, _), &tau)| SelectedPair { pair: one_based(pair), family, tau })
            .collect(),
        stop_reason,
        pruned,
    };
    notify(progress, ProgressEvent::Finished { best: &records[best], evaluations });
    Ok(SearchResult {
        records,
        structures: table.matrices,
        best,
        best_model,
        evaluations,
        greedy: Some(trace),
        permutation: None,
    })
}
