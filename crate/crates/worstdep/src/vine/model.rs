use super::{normalize_pair, EdgeId, Pair, VineStructure};
use crate::copula::{CopulaFamily, PairCopula};
use crate::error::{Error, Result};
use crate::margins::Margin;
use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Conditioning arguments are kept this far inside (0, 1) so h-functions and
/// their inverses never see an exact boundary.
const ARG_CLAMP: f64 = 1e-10;

fn clamp_arg(x: f64) -> f64 {
    x.clamp(ARG_CLAMP, 1.0 - ARG_CLAMP)
}

/// Uniforms handed to margin quantiles stay strictly inside (0, 1).
fn clamp_unit(x: f64) -> f64 {
    x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Where the argument of an edge copula comes from: a variable's uniform for
/// first-tree edges, otherwise one of the two conditional outputs of a child.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    Uniform(usize),
    Output { edge: usize, slot: usize },
}

#[derive(Debug, Clone)]
pub(super) struct PeelStep {
    pub(super) var: usize,
    /// Chain edges from the highest tree down to the first.
    pub(super) chain: Vec<EdgeId>,
    pub(super) partners_top_down: Vec<usize>,
}

/// Peels variables off the top of a valid structure: each step removes the
/// larger-index variable of the current top edge's conditioned pair, whose
/// edges form one chain through every remaining tree. The last entry is the
/// single variable left at the end, with an empty chain.
pub(super) fn peel_plan(s: &VineStructure) -> Result<Vec<PeelStep>> {
    s.validate().map_err(|v| Error::Structure(v.to_string()))?;
    let d = s.d;
    let mut steps = Vec::with_capacity(d);
    let mut top = EdgeId { tree: d - 2, index: 0 };
    loop {
        let (pair, _) = s.conditioned_and_conditioning(top)?;
        let var = pair.1;
        let mut chain = Vec::with_capacity(top.tree + 1);
        let mut partners = Vec::with_capacity(top.tree + 1);
        let mut id = top;
        let mut rest = None;
        loop {
            let edge = s.edge(id)?;
            let (p, _) = s.conditioned_and_conditioning(id)?;
            partners.push(if p.0 == var { p.1 } else { p.0 });
            chain.push(id);
            if id.tree == 0 {
                break;
            }
            let (a, b) = edge.children;
            let prev = &s.trees[id.tree - 1];
            let (with_var, without) = if prev[a].union.binary_search(&var).is_ok() { (a, b) } else { (b, a) };
            if id == top {
                rest = Some(EdgeId { tree: id.tree - 1, index: without });
            }
            id = EdgeId { tree: id.tree - 1, index: with_var };
        }
        steps.push(PeelStep { var, chain, partners_top_down: partners });
        match rest {
            Some(next) => top = next,
            None => {
                // Top edge was in the first tree: both of its variables remain.
                steps.push(PeelStep { var: pair.0, chain: Vec::new(), partners_top_down: Vec::new() });
                break;
            }
        }
    }
    Ok(steps)
}

#[derive(Debug, Clone)]
struct Link {
    edge: usize,
    var_slot: usize,
    var_src: Source,
    partner_src: Source,
}

#[derive(Debug, Clone)]
struct SampleStep {
    var: usize,
    links: Vec<Link>,
}

/// A vine structure with one pair copula per edge.
#[derive(Debug, Clone)]
pub struct DependenceModel {
    structure: VineStructure,
    ranked: Vec<Pair>,
    ids: Vec<EdgeId>,
    conditioned: Vec<Pair>,
    /// Per edge, the copula of (conditioned.0, conditioned.1) and its transpose.
    copulas: Vec<(PairCopula, PairCopula)>,
    sources: Vec<[Source; 2]>,
    steps: Vec<SampleStep>,
}

impl DependenceModel {
    /// All edges start as independence copulas.
    pub fn new(structure: VineStructure) -> Result<Self> {
        Self::with_ranked(structure, Vec::new())
    }

    /// Same as [`new`](Self::new), recording the ranked pair list the
    /// structure was built from.
    pub fn with_ranked(structure: VineStructure, ranked: Vec<Pair>) -> Result<Self> {
        let plan = peel_plan(&structure)?;
        let ids: Vec<EdgeId> = structure.edge_ids().collect();
        let mut offsets = vec![0usize; structure.trees.len()];
        for l in 1..offsets.len() {
            offsets[l] = offsets[l - 1] + structure.trees[l - 1].len();
        }
        let flat = |id: EdgeId| offsets[id.tree] + id.index;
        let mut conditioned = Vec::with_capacity(ids.len());
        let mut sources = Vec::with_capacity(ids.len());
        for &id in &ids {
            let (pair, _) = structure.conditioned_and_conditioning(id)?;
            conditioned.push(pair);
            let edge = structure.edge(id)?;
            let src = |var: usize| -> Result<Source> {
                if id.tree == 0 {
                    return Ok(Source::Uniform(var));
                }
                let (a, b) = edge.children;
                let prev = &structure.trees[id.tree - 1];
                let child = if prev[a].union.binary_search(&var).is_ok() { a } else { b };
                let (cp, _) = structure.conditioned_and_conditioning(EdgeId { tree: id.tree - 1, index: child })?;
                let slot = if cp.0 == var { 0 } else { 1 };
                Ok(Source::Output { edge: flat(EdgeId { tree: id.tree - 1, index: child }), slot })
            };
            sources.push([src(pair.0)?, src(pair.1)?]);
        }
        let steps = plan
            .iter()
            .rev()
            .map(|step| SampleStep {
                var: step.var,
                links: step
                    .chain
                    .iter()
                    .map(|&id| {
                        let e = flat(id);
                        let var_slot = if conditioned[e].0 == step.var { 0 } else { 1 };
                        Link {
                            edge: e,
                            var_slot,
                            var_src: sources[e][var_slot],
                            partner_src: sources[e][1 - var_slot],
                        }
                    })
                    .collect(),
            })
            .collect();
        let independent = PairCopula::independence();
        let ranked = ranked.into_iter().map(|(a, b)| normalize_pair(a, b)).collect();
        Ok(Self {
            copulas: vec![(independent, independent); ids.len()],
            structure,
            ranked,
            ids,
            conditioned,
            sources,
            steps,
        })
    }

    pub fn structure(&self) -> &VineStructure {
        &self.structure
    }

    pub fn dimension(&self) -> usize {
        self.structure.d
    }

    pub fn ranked_pairs(&self) -> &[Pair] {
        &self.ranked
    }

    fn index_of(&self, pair: Pair) -> Result<usize> {
        let pair = normalize_pair(pair.0, pair.1);
        self.conditioned
            .iter()
            .position(|&p| p == pair)
            .ok_or_else(|| Error::Lookup(format!("pair ({}, {}) is not in the structure", pair.0 + 1, pair.1 + 1)))
    }

    /// Sets the copula of the edge conditioning `pair`. The copula's first
    /// argument is the smaller variable index.
    pub fn set_copula(&mut self, pair: Pair, copula: PairCopula) -> Result<()> {
        let e = self.index_of(pair)?;
        self.copulas[e] = (copula, copula.transpose());
        Ok(())
    }

    pub fn copula(&self, pair: Pair) -> Result<&PairCopula> {
        Ok(&self.copulas[self.index_of(pair)?].0)
    }

    /// (edge id, conditioned pair, conditioning set, copula) for every edge.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, Pair, &[usize], &PairCopula)> + '_ {
        self.ids.iter().enumerate().map(move |(e, &id)| {
            let edge = &self.structure.trees[id.tree][id.index];
            (id, self.conditioned[e], edge.conditioning().unwrap_or(&[]), &self.copulas[e].0)
        })
    }

    /// Number of edges whose copula is not the independence copula.
    pub fn parameter_count(&self) -> usize {
        self.copulas
            .iter()
            .filter(|(c, _)| c.family() != CopulaFamily::Independence)
            .count()
    }

    fn value(src: Source, u: &[f64], out: &[[f64; 2]]) -> f64 {
        match src {
            Source::Uniform(v) => u[v],
            Source::Output { edge, slot } => out[edge][slot],
        }
    }

    /// Orients edge `e` so that `.0` gives F(var | partner) and `.1` gives
    /// F(partner | var) through `h(first, second)`.
    fn oriented(&self, e: usize, var_slot: usize) -> (&PairCopula, &PairCopula) {
        let (c, t) = &self.copulas[e];
        if var_slot == 0 {
            (c, t)
        } else {
            (t, c)
        }
    }

    /// Inverse-Rosenblatt transform of one row of independent uniforms.
    fn transform_row(&self, w: &[f64], u: &mut [f64], out: &mut [[f64; 2]]) -> Result<()> {
        for step in &self.steps {
            let v = step.var;
            let mut x = w[v];
            for link in &step.links {
                out[link.edge][link.var_slot] = x;
                let (given_partner, _) = self.oriented(link.edge, link.var_slot);
                if given_partner.family() != CopulaFamily::Independence {
                    let p = clamp_arg(Self::value(link.partner_src, u, out));
                    x = given_partner.h_inv(x, p)?;
                }
                if let Source::Output { edge, slot } = link.var_src {
                    out[edge][slot] = x;
                }
            }
            u[v] = x;
            for link in &step.links {
                let (_, given_var) = self.oriented(link.edge, link.var_slot);
                let partner = Self::value(link.partner_src, u, out);
                out[link.edge][1 - link.var_slot] = if given_var.family() == CopulaFamily::Independence {
                    partner
                } else {
                    let xv = clamp_arg(Self::value(link.var_src, u, out));
                    given_var.h(clamp_arg(partner), xv)
                };
            }
        }
        Ok(())
    }

    /// Maps an `n × d` row-major block of independent uniforms to a sample of
    /// the vine copula. Each variable consumes its own column.
    pub fn uniforms_from(&self, w: &[f64]) -> Result<Vec<f64>> {
        let d = self.dimension();
        if w.len() % d != 0 {
            return Err(Error::Size(format!("uniform block of length {} is not a multiple of d={d}", w.len())));
        }
        let mut u = vec![0.0; w.len()];
        let edges = self.ids.len();
        u.par_chunks_mut(d * 1024)
            .zip(w.par_chunks(d * 1024))
            .try_for_each(|(u_chunk, w_chunk)| {
                let mut out = vec![[0.0; 2]; edges];
                for (ur, wr) in u_chunk.chunks_exact_mut(d).zip(w_chunk.chunks_exact(d)) {
                    self.transform_row(wr, ur, &mut out)?;
                }
                Ok::<(), Error>(())
            })?;
        Ok(u)
    }

    /// Draws `n` rows of copula uniforms (row-major `n × d`).
    pub fn sample_uniforms<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let w: Vec<f64> = (0..n * self.dimension()).map(|_| rng.sample(Open01)).collect();
        self.uniforms_from(&w)
    }

    /// Draws `n` input vectors (row-major `n × d`) with the given margins.
    pub fn sample<R: Rng + ?Sized>(&self, margins: &[Margin], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut u = self.sample_uniforms(n, rng)?;
        apply_margins(&mut u, margins)?;
        Ok(u)
    }

    /// Joint density at `x`: margin densities times every edge's copula
    /// density at its conditional arguments.
    pub fn density(&self, margins: &[Margin], x: &[f64]) -> Result<f64> {
        let d = self.dimension();
        if margins.len() != d || x.len() != d {
            return Err(Error::Size(format!(
                "density needs {d} margins and a point of length {d}, got {} and {}",
                margins.len(),
                x.len()
            )));
        }
        let u: Vec<f64> = margins.iter().zip(x).map(|(m, &xi)| m.cdf(xi)).collect();
        let mut dens: f64 = margins.iter().zip(x).map(|(m, &xi)| m.density(xi)).product();
        if dens == 0.0 {
            return Ok(0.0);
        }
        let mut out = vec![[0.0; 2]; self.ids.len()];
        for e in 0..self.ids.len() {
            let (c, t) = &self.copulas[e];
            let a = clamp_arg(Self::value(self.sources[e][0], &u, &out));
            let b = clamp_arg(Self::value(self.sources[e][1], &u, &out));
            dens *= c.density(a, b)?;
            out[e] = [c.h(a, b), t.h(b, a)];
        }
        Ok(dens)
    }

    pub fn to_json(&self) -> Result<VineJson> {
        let edges = self
            .edges()
            .map(|(id, pair, cond, cop)| EdgeJson {
                tree: id.tree + 1,
                conditioned: [pair.0 + 1, pair.1 + 1],
                conditioning: cond.iter().map(|v| v + 1).collect(),
                family: cop.family(),
                rotation: cop.rotation().degrees(),
                theta: cop.theta(),
                tau: cop.kendall_tau(),
            })
            .collect();
        Ok(VineJson {
            d: self.dimension(),
            edges,
            matrix: self.structure.matrix()?,
            ranked_pairs: self.ranked.iter().map(|p| [p.0 + 1, p.1 + 1]).collect(),
        })
    }
}

/// Replaces each uniform in the row-major block by its margin quantile.
pub(crate) fn apply_margins(u: &mut [f64], margins: &[Margin]) -> Result<()> {
    let d = margins.len();
    if d == 0 || u.len() % d != 0 {
        return Err(Error::Size(format!("{} margins do not tile a block of length {}", d, u.len())));
    }
    u.par_chunks_mut(d * 1024).for_each(|chunk| {
        for row in chunk.chunks_exact_mut(d) {
            for (x, m) in row.iter_mut().zip(margins) {
                *x = m.quantile_unchecked(clamp_unit(*x));
            }
        }
    });
    Ok(())
}

/// Interchange form of a model; variables and trees are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineJson {
    pub d: usize,
    pub edges: Vec<EdgeJson>,
    pub matrix: Vec<Vec<usize>>,
    pub ranked_pairs: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub tree: usize,
    pub conditioned: [usize; 2],
    pub conditioning: Vec<usize>,
    pub family: CopulaFamily,
    pub rotation: u16,
    pub theta: Option<f64>,
    pub tau: f64,
}
