//! Building structures from a ranked list of pairs.

use super::{all_pairs, conditioning_matches, fill_vine, merge_union, normalize_pair, Edge, Forest, Pair, VineStructure};
use crate::error::{Error, Result};
use std::collections::BTreeSet;

/// Search state budget once more than this many pairs are unranked.
const FULL_ENUMERATION_LIMIT: usize = 6;
const STATE_CAP: usize = 10_000;

/// All pairs ordered by lag `j − i`, then by `i`. Filling a structure in this
/// order yields the D-vine on the natural variable order.
pub fn dvine_pair_order(d: usize) -> Vec<Pair> {
    let mut pairs = all_pairs(d);
    pairs.sort_by_key(|&(i, j)| (j - i, i));
    pairs
}

fn check_ranked(ranked: &[Pair], d: usize) -> Result<Vec<Pair>> {
    if d < 2 {
        return Err(Error::Structure(format!("a vine needs at least 2 variables, got {d}")));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(ranked.len());
    for &(a, b) in ranked {
        if a == b || a >= d || b >= d {
            return Err(Error::Structure(format!("({}, {}) is not a pair of distinct variables in 1..={d}", a + 1, b + 1)));
        }
        let p = normalize_pair(a, b);
        if !seen.insert(p) {
            return Err(Error::Structure(format!("pair ({}, {}) is listed twice", p.0 + 1, p.1 + 1)));
        }
        out.push(p);
    }
    Ok(out)
}

struct Search {
    ranked: Vec<Pair>,
    unranked: Vec<Pair>,
    ranked_done: Vec<bool>,
    unranked_done: Vec<bool>,
    v: VineStructure,
    states: usize,
    cap: usize,
}

impl Search {
    /// An edge for `pair` in open tree `l` that keeps the tree acyclic.
    fn admissible_edge(&self, l: usize, pair: Pair) -> Option<Edge> {
        let nodes = self.v.d - l;
        let mut forest = Forest::new(nodes);
        if let Some(tree) = self.v.trees.get(l) {
            for e in tree {
                forest.join(e.children.0, e.children.1);
            }
        }
        if l == 0 {
            return (!forest.connected(pair.0, pair.1)).then(|| self.v.edge_for(0, pair)).flatten();
        }
        let prev = &self.v.trees[l - 1];
        conditioning_matches(pair, prev)
            .find(|m| !forest.connected(m.children.0, m.children.1))
            .map(|m| Edge {
                union: merge_union(&prev[m.children.0].union, &prev[m.children.1].union),
                children: m.children,
                constraint: Some((pair, m.conditioning)),
            })
    }

    fn run(&mut self) -> Option<bool> {
        if self.v.is_complete() {
            return Some(true);
        }
        self.states += 1;
        if self.states > self.cap {
            return None;
        }
        let l = self.v.open_tree();
        let ranked = (0..self.ranked.len()).filter(|&r| !self.ranked_done[r]).map(|r| (true, r));
        let unranked = (0..self.unranked.len()).filter(|&r| !self.unranked_done[r]).map(|r| (false, r));
        let order: Vec<(bool, usize)> = ranked.chain(unranked).collect();
        for (is_ranked, r) in order {
            let pair = if is_ranked { self.ranked[r] } else { self.unranked[r] };
            let Some(edge) = self.admissible_edge(l, pair) else { continue };
            self.v.push_edge(l, edge);
            self.mark(is_ranked, r, true);
            debug_assert!(self.v.trees[l].len() < self.v.d - l - 1 || self.v.validate_tree(l).is_ok());
            match self.run() {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
            self.mark(is_ranked, r, false);
            self.v.pop_edge();
        }
        Some(false)
    }

    fn mark(&mut self, is_ranked: bool, r: usize, value: bool) {
        if is_ranked {
            self.ranked_done[r] = value;
        } else {
            self.unranked_done[r] = value;
        }
    }
}

/// Builds a complete R-vine whose conditioned pairs lead with `ranked`.
///
/// Edges are added one at a time into the lowest open tree. At each step the
/// highest-ranked pair that fits the open tree is placed; a ranked pair that
/// does not fit (it would close a cycle, or no pair of nodes can host it) is
/// deferred to a later tree. Remaining slots are filled from the unranked
/// pairs in D-vine order, so an empty ranking gives the D-vine on
/// `1, 2, …, d`. Dead ends are backtracked, exhaustively while at most six
/// pairs are unranked and within 10⁴ search states beyond that.
pub fn build_vine_from_pairs(ranked: &[Pair], d: usize) -> Result<VineStructure> {
    let ranked = check_ranked(ranked, d)?;
    let chosen: BTreeSet<Pair> = ranked.iter().copied().collect();
    let unranked: Vec<Pair> = dvine_pair_order(d).into_iter().filter(|p| !chosen.contains(p)).collect();
    let cap = if unranked.len() <= FULL_ENUMERATION_LIMIT { usize::MAX } else { STATE_CAP };
    let mut search = Search {
        ranked_done: vec![false; ranked.len()],
        unranked_done: vec![false; unranked.len()],
        ranked,
        unranked,
        v: VineStructure::empty(d)?,
        states: 0,
        cap,
    };
    match search.run() {
        Some(true) => Ok(search.v),
        Some(false) => Err(Error::Structure("no R-vine contains the ranked pairs (search exhausted)".into())),
        None => Err(Error::Structure(format!("vine construction exceeded {STATE_CAP} search states"))),
    }
}

/// Result of [`build_vine_by_list_permutation`].
#[derive(Debug, Clone)]
pub struct ListPermutationOutcome {
    pub structure: VineStructure,
    /// The ordering of the ranked list that filled successfully.
    pub ranked_order: Vec<Pair>,
    /// Unranked pairs in the order they were filled.
    pub unranked_order: Vec<Pair>,
    /// Number of ranked-list orderings tried, including the successful one.
    pub orderings_tried: usize,
}

/// Permutation-based construction: strictly fill the ranked list as a
/// prefix, then search permutations of the unranked pairs; when nothing
/// completes, move on to the next ordering of the ranked list.
///
/// Orderings are visited by increasing number of inversions relative to the
/// input (the identity first, then single adjacent exchanges, …), ties in
/// lexicographic order of the position vector. At most `max_orderings` are
/// tried. Unlike [`build_vine_from_pairs`] this keeps every ranked pair
/// ahead of every unranked pair, so it can fail where deferral succeeds.
pub fn build_vine_by_list_permutation(ranked: &[Pair], d: usize, max_orderings: usize) -> Result<ListPermutationOutcome> {
    let ranked = check_ranked(ranked, d)?;
    let chosen: BTreeSet<Pair> = ranked.iter().copied().collect();
    let unranked: Vec<Pair> = all_pairs(d).into_iter().filter(|p| !chosen.contains(p)).collect();
    let cap = if unranked.len() <= FULL_ENUMERATION_LIMIT { usize::MAX } else { STATE_CAP };
    let empty = VineStructure::empty(d)?;
    let mut tried = 0;
    for perm in InversionOrder::new(ranked.len()) {
        if tried == max_orderings {
            break;
        }
        tried += 1;
        let order: Vec<Pair> = perm.iter().map(|&k| ranked[k]).collect();
        let Ok(base) = fill_vine(&empty, &order) else { continue };
        let mut used = vec![false; unranked.len()];
        let mut seq = Vec::new();
        let mut states = 0;
        if let Some(v) = permute_fill(&base, &unranked, &mut used, &mut seq, &mut states, cap) {
            return Ok(ListPermutationOutcome {
                structure: v,
                ranked_order: order,
                unranked_order: seq,
                orderings_tried: tried,
            });
        }
    }
    Err(Error::Structure(format!(
        "no ordering of the ranked list among {tried} tried admits a completion"
    )))
}

/// Depth-first search over permutations of `pool` in lexicographic order,
/// pruning any prefix whose strict fill already fails.
fn permute_fill(
    v: &VineStructure,
    pool: &[Pair],
    used: &mut [bool],
    seq: &mut Vec<Pair>,
    states: &mut usize,
    cap: usize,
) -> Option<VineStructure> {
    if v.is_complete() {
        return Some(v.clone());
    }
    for k in 0..pool.len() {
        if used[k] {
            continue;
        }
        *states += 1;
        if *states > cap {
            return None;
        }
        let Ok(next) = fill_vine(v, &pool[k..=k]) else { continue };
        used[k] = true;
        seq.push(pool[k]);
        if let Some(done) = permute_fill(&next, pool, used, seq, states, cap) {
            return Some(done);
        }
        seq.pop();
        used[k] = false;
    }
    None
}

/// Permutations of `0..n` by increasing inversion count. A permutation with
/// Lehmer code `c` has `Σ c` inversions, so codes are enumerated by digit sum
/// and, within a sum, lexicographically.
struct InversionOrder {
    n: usize,
    target: usize,
    max_target: usize,
    code: Option<Vec<usize>>,
}

impl InversionOrder {
    fn new(n: usize) -> Self {
        Self {
            n,
            target: 0,
            max_target: n * n.saturating_sub(1) / 2,
            code: Some(vec![0; n]),
        }
    }

    /// Smallest code (lexicographically) with positions `from..` summing to `rest`.
    fn fill_min(code: &mut [usize], from: usize, mut rest: usize) -> bool {
        let n = code.len();
        for k in (from..n).rev() {
            let cap = n - 1 - k;
            let take = rest.min(cap);
            code[k] = take;
            rest -= take;
        }
        rest == 0
    }

    fn advance(&mut self) {
        let Some(code) = self.code.as_mut() else { return };
        let n = self.n;
        // Next code with the same digit sum: bump the rightmost position that
        // can grow while the suffix can still absorb the reduced remainder.
        for k in (0..n).rev() {
            let suffix: usize = code[k + 1..].iter().sum();
            if code[k] < n - 1 - k && suffix > 0 {
                code[k] += 1;
                if Self::fill_min(code, k + 1, suffix - 1) {
                    return;
                }
                code[k] -= 1;
            }
        }
        loop {
            self.target += 1;
            if self.target > self.max_target {
                self.code = None;
                return;
            }
            let mut fresh = vec![0; n];
            if Self::fill_min(&mut fresh, 0, self.target) {
                self.code = Some(fresh);
                return;
            }
        }
    }
}

impl Iterator for InversionOrder {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let code = self.code.clone()?;
        let mut pool: Vec<usize> = (0..self.n).collect();
        let perm = code.iter().map(|&c| pool.remove(c)).collect();
        self.advance();
        Some(perm)
    }
}
