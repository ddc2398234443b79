//! Regular-vine structures: trees of edges whose nodes are the previous
//! tree's edges, each edge carrying a conditioned pair and a conditioning set.
//!
//! Variables are 0-based throughout this module. Tree `l` (0-based) of a
//! complete structure on `d` variables has `d − l − 1` edges; the nodes of tree
//! 0 are the variables and the nodes of tree `l ≥ 1` are the edges of tree
//! `l − 1`, referenced by index.

mod build;
mod model;

pub use build::{build_vine_by_list_permutation, build_vine_from_pairs, dvine_pair_order, ListPermutationOutcome};
pub use model::{DependenceModel, EdgeJson, VineJson};
pub(crate) use model::apply_margins;

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;

/// An unordered variable pair stored with `0 ≤ i < j`.
pub type Pair = (usize, usize);

pub fn normalize_pair(a: usize, b: usize) -> Pair {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// All `d(d−1)/2` pairs in lexicographic order.
pub fn all_pairs(d: usize) -> Vec<Pair> {
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId {
    pub tree: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    children: (usize, usize),
    union: Vec<usize>,
    constraint: Option<(Pair, Vec<usize>)>,
}

impl Edge {
    /// Node indices in the previous tree (variables for tree 0).
    pub fn children(&self) -> (usize, usize) {
        self.children
    }

    pub fn complete_union(&self) -> &[usize] {
        &self.union
    }

    /// `None` when the children's unions do not differ in exactly one
    /// variable each.
    pub fn conditioned(&self) -> Option<Pair> {
        self.constraint.as_ref().map(|c| c.0)
    }

    pub fn conditioning(&self) -> Option<&[usize]> {
        self.constraint.as_ref().map(|c| c.1.as_slice())
    }
}

/// The first violated R-vine condition found by [`VineStructure::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Incomplete { trees: usize, edges: usize },
    EdgeCount { tree: usize, expected: usize, found: usize },
    NodeOutOfRange { tree: usize, edge: usize },
    Cycle { tree: usize, edge: usize },
    Disconnected { tree: usize },
    Proximity { tree: usize, edge: usize },
    ConditionedSet { tree: usize, edge: usize },
    DuplicatePair { pair: Pair },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Trees and variables are reported 1-based, as users write them.
        match *self {
            Violation::Incomplete { trees, edges } => {
                write!(f, "structure is incomplete: {trees} tree(s) holding {edges} edge(s)")
            }
            Violation::EdgeCount { tree, expected, found } => {
                write!(f, "tree T{} has {found} edges, expected {expected}", tree + 1)
            }
            Violation::NodeOutOfRange { tree, edge } => {
                write!(f, "edge {} of T{} references a node outside the tree", edge + 1, tree + 1)
            }
            Violation::Cycle { tree, edge } => {
                write!(f, "edge {} of T{} closes a cycle", edge + 1, tree + 1)
            }
            Violation::Disconnected { tree } => write!(f, "tree T{} is not connected", tree + 1),
            Violation::Proximity { tree, edge } => write!(
                f,
                "edge {} of T{} joins nodes that share no common node (proximity)",
                edge + 1,
                tree + 1
            ),
            Violation::ConditionedSet { tree, edge } => write!(
                f,
                "edge {} of T{} does not have a two-variable conditioned set",
                edge + 1,
                tree + 1
            ),
            Violation::DuplicatePair { pair } => {
                write!(f, "pair ({}, {}) is conditioned on more than once", pair.0 + 1, pair.1 + 1)
            }
        }
    }
}

/// The child nodes and conditioning set matched for a pair in some tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditioningMatch {
    pub children: (usize, usize),
    pub conditioning: Vec<usize>,
}

/// Yields every node pair `(a, b)` of `prev_nodes`, in insertion order, with
/// `i ∈ A_a`, `j ∈ A_b`, `j ∉ A_a`, `i ∉ A_b` and `a`, `b` sharing a child.
fn conditioning_matches<'a>(pair: Pair, prev_nodes: &'a [Edge]) -> impl Iterator<Item = ConditioningMatch> + 'a {
    let (i, j) = pair;
    prev_nodes.iter().enumerate().flat_map(move |(ai, a)| {
        prev_nodes.iter().enumerate().filter_map(move |(bi, b)| {
            if ai == bi {
                return None;
            }
            let ok = a.union.binary_search(&i).is_ok()
                && b.union.binary_search(&j).is_ok()
                && a.union.binary_search(&j).is_err()
                && b.union.binary_search(&i).is_err()
                && shares_child(a, b);
            ok.then(|| ConditioningMatch {
                children: (ai, bi),
                conditioning: intersect(&a.union, &b.union),
            })
        })
    })
}

/// First node pair of the previous tree able to host `pair`; its conditioning
/// set is the intersection of the two complete unions.
pub fn find_conditioning_set(pair: Pair, prev_nodes: &[Edge]) -> Option<ConditioningMatch> {
    conditioning_matches(normalize_pair(pair.0, pair.1), prev_nodes).next()
}

fn shares_child(a: &Edge, b: &Edge) -> bool {
    let (a0, a1) = a.children;
    let (b0, b1) = b.children;
    a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

fn merge_union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> = a.iter().chain(b).copied().collect();
    set.into_iter().collect()
}

fn constraint_of(a: &[usize], b: &[usize]) -> Option<(Pair, Vec<usize>)> {
    let only_a: Vec<usize> = a.iter().copied().filter(|x| b.binary_search(x).is_err()).collect();
    let only_b: Vec<usize> = b.iter().copied().filter(|x| a.binary_search(x).is_err()).collect();
    match (only_a.as_slice(), only_b.as_slice()) {
        ([x], [y]) => Some((normalize_pair(*x, *y), intersect(a, b))),
        _ => None,
    }
}

/// Minimal union–find over node indices.
pub(crate) struct Forest {
    parent: Vec<usize>,
}

impl Forest {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn root(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn connected(&mut self, a: usize, b: usize) -> bool {
        self.root(a) == self.root(b)
    }

    /// Joins the two components; false when they were already joined.
    pub(crate) fn join(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.root(a), self.root(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Reason a strict fill stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct FillFailure {
    /// Position in the supplied list of the pair being added.
    pub position: usize,
    pub pair: Pair,
    pub reason: FillFailureReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FillFailureReason {
    NoConditioningSet,
    InvalidTree(Violation),
    StructureFull,
    BadPair,
}

impl fmt::Display for FillFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = (self.pair.0 + 1, self.pair.1 + 1);
        match &self.reason {
            FillFailureReason::NoConditioningSet => {
                write!(f, "no conditioning set for pair ({i}, {j}) at list position {}", self.position + 1)
            }
            FillFailureReason::InvalidTree(v) => {
                write!(f, "tree completed by pair ({i}, {j}) is invalid: {v}")
            }
            FillFailureReason::StructureFull => write!(f, "structure already complete before pair ({i}, {j})"),
            FillFailureReason::BadPair => write!(f, "pair ({i}, {j}) is not a pair of distinct variables"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VineStructure {
    d: usize,
    trees: Vec<Vec<Edge>>,
}

impl VineStructure {
    /// A structure with no edges yet.
    pub fn empty(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Structure(format!("a vine needs at least 2 variables, got {d}")));
        }
        Ok(Self { d, trees: Vec::new() })
    }

    /// Builds a structure from raw child indices per tree, without checking
    /// any R-vine condition. Children of tree-0 edges are variables; children
    /// of tree-`l` edges index tree `l − 1`. Use [`validate`](Self::validate)
    /// to check the result.
    pub fn from_edges(d: usize, trees: &[Vec<(usize, usize)>]) -> Result<Self> {
        let mut out = Self::empty(d)?;
        for (l, edges) in trees.iter().enumerate() {
            let mut built = Vec::with_capacity(edges.len());
            for (e, &(a, b)) in edges.iter().enumerate() {
                let (ua, ub) = if l == 0 {
                    if a >= d || b >= d {
                        return Err(Error::Structure(format!("edge {} of T1 references a variable beyond d={d}", e + 1)));
                    }
                    (vec![a], vec![b])
                } else {
                    let prev = &out.trees[l - 1];
                    if a >= prev.len() || b >= prev.len() {
                        return Err(Error::Structure(format!(
                            "edge {} of T{} references a node beyond tree T{}",
                            e + 1,
                            l + 1,
                            l
                        )));
                    }
                    (prev[a].union.clone(), prev[b].union.clone())
                };
                built.push(Edge {
                    children: (a, b),
                    constraint: constraint_of(&ua, &ub),
                    union: merge_union(&ua, &ub),
                });
            }
            out.trees.push(built);
        }
        Ok(out)
    }

    /// Builds a structure from the conditioned pairs of each tree. Each pair
    /// above tree 0 is attached through [`find_conditioning_set`]. No R-vine
    /// condition is checked beyond that lookup.
    pub fn from_tree_pairs(d: usize, trees: &[Vec<Pair>]) -> Result<Self> {
        let mut out = Self::empty(d)?;
        for (l, pairs) in trees.iter().enumerate() {
            out.trees.push(Vec::with_capacity(pairs.len()));
            for &p in pairs {
                if p.0 == p.1 || p.0 >= d || p.1 >= d {
                    return Err(Error::Structure(format!("({}, {}) is not a pair of variables in 1..={d}", p.0 + 1, p.1 + 1)));
                }
                let edge = out.edge_for(l, normalize_pair(p.0, p.1)).ok_or_else(|| {
                    Error::Structure(format!("no conditioning set for pair ({}, {}) in T{}", p.0 + 1, p.1 + 1, l + 1))
                })?;
                out.trees[l].push(edge);
            }
        }
        Ok(out)
    }

    /// D-vine along `order`: the first tree is the path through `order`.
    pub fn d_vine(order: &[usize]) -> Result<Self> {
        let d = order.len();
        check_order(order)?;
        let trees: Vec<Vec<Pair>> = (1..d)
            .map(|lag| (0..d - lag).map(|s| normalize_pair(order[s], order[s + lag])).collect())
            .collect();
        Self::from_tree_pairs(d, &trees)
    }

    /// C-vine with roots `order[0]`, `order[1]`, … for successive trees.
    pub fn c_vine(order: &[usize]) -> Result<Self> {
        let d = order.len();
        check_order(order)?;
        let trees: Vec<Vec<Pair>> = (0..d - 1)
            .map(|l| (l + 1..d).map(|m| normalize_pair(order[l], order[m])).collect())
            .collect();
        Self::from_tree_pairs(d, &trees)
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn trees(&self) -> &[Vec<Edge>] {
        &self.trees
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge> {
        self.trees
            .get(id.tree)
            .and_then(|t| t.get(id.index))
            .ok_or_else(|| Error::Lookup(format!("no edge {} in tree T{}", id.index + 1, id.tree + 1)))
    }

    /// Edge ids tree by tree, in insertion order.
    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.trees
            .iter()
            .enumerate()
            .flat_map(|(tree, t)| (0..t.len()).map(move |index| EdgeId { tree, index }))
    }

    pub fn edge_count(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.edge_count() == self.d * (self.d - 1) / 2
    }

    pub fn complete_union(&self, id: EdgeId) -> Result<&[usize]> {
        Ok(&self.edge(id)?.union)
    }

    /// Conditioned pair `(A_a ∖ D) ∪ (A_b ∖ D)` and conditioning set
    /// `D = A_a ∩ A_b` of the edge joining nodes `a` and `b`.
    pub fn conditioned_and_conditioning(&self, id: EdgeId) -> Result<(Pair, Vec<usize>)> {
        self.edge(id)?.constraint.clone().ok_or_else(|| {
            Error::Structure(format!(
                "edge {} of T{} has a conditioned set that is not a pair",
                id.index + 1,
                id.tree + 1
            ))
        })
    }

    /// Every (conditioned pair, conditioning set), tree by tree.
    pub fn constraint_set(&self) -> Result<Vec<(Pair, Vec<usize>)>> {
        self.edge_ids().map(|id| self.conditioned_and_conditioning(id)).collect()
    }

    /// Location of the edge whose conditioned pair is `pair`.
    pub fn locate(&self, pair: Pair) -> Option<EdgeId> {
        let pair = normalize_pair(pair.0, pair.1);
        self.edge_ids().find(|&id| self.trees[id.tree][id.index].conditioned() == Some(pair))
    }

    pub fn validate(&self) -> std::result::Result<(), Violation> {
        for l in 0..self.trees.len() {
            self.validate_tree(l)?;
        }
        let mut seen = BTreeSet::new();
        for id in self.edge_ids() {
            let pair = self.trees[id.tree][id.index]
                .conditioned()
                .ok_or(Violation::ConditionedSet { tree: id.tree, edge: id.index })?;
            if !seen.insert(pair) {
                return Err(Violation::DuplicatePair { pair });
            }
        }
        if self.trees.len() != self.d - 1 {
            return Err(Violation::Incomplete {
                trees: self.trees.len(),
                edges: self.edge_count(),
            });
        }
        Ok(())
    }

    pub fn is_valid_rvine(&self) -> bool {
        self.validate().is_ok()
    }

    /// Checks one complete tree: edge count, acyclicity, connectivity,
    /// proximity and two-variable conditioned sets.
    pub fn validate_tree(&self, l: usize) -> std::result::Result<(), Violation> {
        let edges = &self.trees[l];
        let nodes = self.d - l;
        if edges.len() != nodes - 1 {
            return Err(Violation::EdgeCount {
                tree: l,
                expected: nodes - 1,
                found: edges.len(),
            });
        }
        let mut forest = Forest::new(nodes);
        for (e, edge) in edges.iter().enumerate() {
            let (a, b) = edge.children;
            if a >= nodes || b >= nodes || a == b {
                return Err(Violation::NodeOutOfRange { tree: l, edge: e });
            }
            if !forest.join(a, b) {
                // With exactly nodes − 1 edges a cycle also disconnects the
                // tree; the cycle is the more specific diagnosis.
                return Err(Violation::Cycle { tree: l, edge: e });
            }
            if l > 0 && !shares_child(&self.trees[l - 1][a], &self.trees[l - 1][b]) {
                return Err(Violation::Proximity { tree: l, edge: e });
            }
            if edge.constraint.is_none() {
                return Err(Violation::ConditionedSet { tree: l, edge: e });
            }
        }
        if (1..nodes).any(|x| !forest.connected(0, x)) {
            return Err(Violation::Disconnected { tree: l });
        }
        Ok(())
    }

    /// Index of the tree the next appended edge belongs to.
    fn open_tree(&self) -> usize {
        match self.trees.last() {
            None => 0,
            Some(last) if last.len() == self.d - self.trees.len() => self.trees.len(),
            Some(_) => self.trees.len() - 1,
        }
    }

    /// Candidate edge for `pair` in tree `l`, given the trees below it.
    fn edge_for(&self, l: usize, pair: Pair) -> Option<Edge> {
        if l == 0 {
            return Some(Edge {
                children: pair,
                union: vec![pair.0, pair.1],
                constraint: Some((pair, Vec::new())),
            });
        }
        let prev = &self.trees[l - 1];
        let m = find_conditioning_set(pair, prev)?;
        let union = merge_union(&prev[m.children.0].union, &prev[m.children.1].union);
        Some(Edge {
            children: m.children,
            union,
            constraint: Some((pair, m.conditioning)),
        })
    }

    /// Appends `edge` to tree `l`, opening the tree if needed.
    fn push_edge(&mut self, l: usize, edge: Edge) {
        if l == self.trees.len() {
            self.trees.push(Vec::new());
        }
        self.trees[l].push(edge);
    }

    fn pop_edge(&mut self) {
        if let Some(last) = self.trees.last_mut() {
            last.pop();
            if last.is_empty() {
                self.trees.pop();
            }
        }
    }

    /// R-vine array: column `c` holds, on the diagonal, the `c`-th variable
    /// peeled off the top of the structure and below it that variable's
    /// partners from the highest tree down to the first. Values are 1-based;
    /// entries above the diagonal are 0.
    pub fn matrix(&self) -> Result<Vec<Vec<usize>>> {
        let plan = model::peel_plan(self)?;
        let d = self.d;
        let mut m = vec![vec![0usize; d]; d];
        for (c, step) in plan.iter().enumerate() {
            m[c][c] = step.var + 1;
            for (t, &partner) in step.partners_top_down.iter().enumerate() {
                m[c + 1 + t][c] = partner + 1;
            }
        }
        Ok(m)
    }

    /// The same structure with variable `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_order(perm)?;
        if perm.len() != self.d {
            return Err(Error::Structure(format!("relabeling of length {} for d={}", perm.len(), self.d)));
        }
        let map_set = |s: &[usize]| {
            let mut out: Vec<usize> = s.iter().map(|&v| perm[v]).collect();
            out.sort_unstable();
            out
        };
        let trees = self
            .trees
            .iter()
            .enumerate()
            .map(|(l, tree)| {
                tree.iter()
                    .map(|e| Edge {
                        children: if l == 0 { normalize_pair(perm[e.children.0], perm[e.children.1]) } else { e.children },
                        union: map_set(&e.union),
                        constraint: e
                            .constraint
                            .as_ref()
                            .map(|((a, b), cond)| (normalize_pair(perm[*a], perm[*b]), map_set(cond))),
                    })
                    .collect()
            })
            .collect();
        Ok(Self { d: self.d, trees })
    }
}

fn check_order(order: &[usize]) -> Result<()> {
    let d = order.len();
    let set: BTreeSet<usize> = order.iter().copied().collect();
    if d < 2 || set.len() != d || set.iter().any(|&v| v >= d) {
        return Err(Error::Structure(format!("{order:?} is not a permutation of 0..{d}")));
    }
    Ok(())
}

/// Strict fill: appends `pairs` in order, each in the currently open tree.
/// A tree that becomes full is validated before the next one opens.
pub fn fill_vine(partial: &VineStructure, pairs: &[Pair]) -> std::result::Result<VineStructure, FillFailure> {
    let mut v = partial.clone();
    let d = v.d;
    for (position, &raw) in pairs.iter().enumerate() {
        let fail = |reason| FillFailure { position, pair: raw, reason };
        if raw.0 == raw.1 || raw.0 >= d || raw.1 >= d {
            return Err(fail(FillFailureReason::BadPair));
        }
        if v.is_complete() {
            return Err(fail(FillFailureReason::StructureFull));
        }
        let pair = normalize_pair(raw.0, raw.1);
        let l = v.open_tree();
        let edge = v.edge_for(l, pair).ok_or_else(|| fail(FillFailureReason::NoConditioningSet))?;
        v.push_edge(l, edge);
        if v.trees[l].len() == d - l - 1 {
            v.validate_tree(l).map_err(|viol| fail(FillFailureReason::InvalidTree(viol)))?;
        }
    }
    Ok(v)
}
