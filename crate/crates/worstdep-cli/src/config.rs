//! Run configuration: strict JSON parsing, validation and default
//! materialization.

use crate::CliError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use worstdep::copula::{CopulaFamily, PairCopula, Rotation};
use worstdep::margins::{Margin, MarginSpec};
use worstdep::models::{flood_default_margins, BuiltinName, Model, ModelSpec};
use worstdep::search::grid::regular_levels;
use worstdep::search::{
    scheduled_grid_size, Bootstrap, FixedPair, GreedySettings, GridStrategy, PairBounds, Problem, SearchSpace,
};
use worstdep::vine::all_pairs;

pub const DEFAULT_GRID_SIZE: usize = 21;
pub const DEFAULT_CURVE_POINTS: usize = 41;
pub const DEFAULT_OUTPUT: &str = "worstdep-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Grid,
    Greedy,
    PermutedGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub pair: [usize; 2],
    #[serde(default = "full_bounds")]
    pub bounds: [f64; 2],
}

fn full_bounds() -> [f64; 2] {
    [-1.0, 1.0]
}

/// A pair with a known copula, given by `theta` (with `rotation`) or by
/// Kendall's `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    pub pair: [usize; 2],
    pub family: CopulaFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl FixedConfig {
    fn copula(&self) -> Result<PairCopula, CliError> {
        let rotation = Rotation::from_degrees(self.rotation.unwrap_or(0))?;
        let c = match (self.theta, self.tau) {
            (Some(theta), None) => PairCopula::new(self.family, rotation, theta)?,
            (None, Some(tau)) if self.rotation.is_some() => PairCopula::from_tau(self.family, rotation, tau)?,
            (None, Some(tau)) => PairCopula::from_tau_auto(self.family, tau)?,
            (None, None) if !self.family.is_searchable() => PairCopula::new(self.family, rotation, 0.0)?,
            _ => {
                return Err(CliError::Config(format!(
                    "fixed pair ({}, {}) needs exactly one of 'theta' or 'tau'",
                    self.pair[0], self.pair[1]
                )))
            }
        };
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Free pairs (1-based) with Kendall bounds; every pair not fixed when
    /// absent.
    #[serde(default)]
    pub pairs: Option<Vec<PairConfig>>,
    /// Put the free pairs first in the ranking that builds the grid-search
    /// structure; otherwise the structure is the D-vine completion.
    #[serde(default)]
    pub rank_pairs: bool,
    #[serde(default)]
    pub strategy: GridStrategy,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_families")]
    pub families: Vec<CopulaFamily>,
    #[serde(default)]
    pub fixed: Vec<FixedConfig>,
}

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_families() -> Vec<CopulaFamily> {
    vec![CopulaFamily::Gaussian]
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            pairs: None,
            rank_pairs: false,
            strategy: GridStrategy::default(),
            grid_size: DEFAULT_GRID_SIZE,
            families: default_families(),
            fixed: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    /// Kendall taus of the curve; `points` equispaced levels over the free
    /// pair's bounds when absent.
    #[serde(default)]
    pub taus: Option<Vec<f64>>,
    #[serde(default = "default_curve_points")]
    pub points: usize,
    /// Families of the curve; the search families when absent.
    #[serde(default)]
    pub families: Option<Vec<CopulaFamily>>,
}

fn default_curve_points() -> usize {
    DEFAULT_CURVE_POINTS
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { taus: None, points: DEFAULT_CURVE_POINTS, families: None }
    }
}

fn default_restarts() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Input margins in model order. May be omitted for the builtin flood
    /// model, which then uses its illustrative defaults.
    #[serde(default)]
    pub margins: Option<Vec<MarginSpec>>,
    pub model: ModelSpec,
    pub alpha: f64,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub greedy: GreedySettings,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub bootstrap: Bootstrap,
    #[serde(default)]
    pub curve: Option<CurveConfig>,
    #[serde(default)]
    pub output: Option<String>,
}

/// Parses a configuration, reporting the JSON path of any schema violation.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at {path}: {}", e.inner()))
    })
}

/// A validated configuration with every default written out, plus the
/// objects built from it.
pub struct Resolved {
    pub config: RunConfig,
    pub model: Model,
    pub margins: Vec<Margin>,
    pub space: SearchSpace,
}

fn zero_based(p: [usize; 2], d: usize, what: &str) -> Result<(usize, usize), CliError> {
    let [a, b] = p;
    if a == 0 || b == 0 || a > d || b > d || a == b {
        return Err(CliError::Config(format!(
            "{what} pair ({a}, {b}) is not a pair of distinct variables in 1..={d}"
        )));
    }
    Ok(if a < b { (a - 1, b - 1) } else { (b - 1, a - 1) })
}

impl RunConfig {
    /// Validates the configuration and materializes every default.
    pub fn resolve(mut self) -> Result<Resolved, CliError> {
        if self.margins.is_none() {
            match &self.model {
                ModelSpec::Builtin { name: BuiltinName::Flood, constants, .. } => {
                    self.margins = Some(flood_default_margins(constants));
                }
                _ => return Err(CliError::Config("at margins: required for this model".into())),
            }
        }
        let specs = self.margins.as_ref().expect("materialized above");
        let margins = specs
            .iter()
            .enumerate()
            .map(|(k, s)| Margin::from_spec(s).map_err(|e| CliError::Config(format!("at margins[{k}]: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let d = margins.len();
        if d < 2 {
            return Err(CliError::Config(format!("at margins: need at least 2 inputs, got {d}")));
        }
        let model = Model::from_spec(&self.model, d).map_err(|e| CliError::Config(format!("at model: {e}")))?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!("at alpha: must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n < 100 {
            return Err(CliError::Config(format!("at n: must be at least 100, got {}", self.n)));
        }
        if self.restarts == 0 {
            return Err(CliError::Config("at restarts: must be at least 1".into()));
        }
        if self.search.grid_size == 0 {
            return Err(CliError::Config("at search.grid_size: must be at least 1".into()));
        }

        let mut fixed = Vec::new();
        let mut taken = BTreeSet::new();
        for (k, f) in self.search.fixed.iter().enumerate() {
            let pair = zero_based(f.pair, d, "fixed")?;
            let copula = f.copula().map_err(|e| CliError::Config(format!("at search.fixed[{k}]: {e}")))?;
            taken.insert(pair);
            fixed.push(FixedPair { pair, copula });
        }
        if self.search.pairs.is_none() {
            let free = all_pairs(d)
                .into_iter()
                .filter(|p| !taken.contains(p))
                .map(|(a, b)| PairConfig { pair: [a + 1, b + 1], bounds: full_bounds() })
                .collect();
            self.search.pairs = Some(free);
        }
        let free = self
            .search
            .pairs
            .as_ref()
            .expect("materialized above")
            .iter()
            .map(|p| {
                Ok(PairBounds { pair: zero_based(p.pair, d, "search")?, lower: p.bounds[0], upper: p.bounds[1] })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let space = SearchSpace {
            d,
            free,
            lead_with_free: self.search.rank_pairs,
            strategy: self.search.strategy,
            families: self.search.families.clone(),
            fixed,
        };
        space.validate().map_err(|e| CliError::Config(format!("at search: {e}")))?;

        let p = space.free.len();
        let k_max = self.greedy.max_iterations.unwrap_or(p);
        if self.algorithm == Algorithm::Greedy && k_max > p {
            return Err(CliError::Config(format!(
                "at greedy.max_iterations: at most {p} iterations are possible, got {k_max}"
            )));
        }
        self.greedy.max_iterations = Some(k_max.min(p));
        if self.greedy.schedule.is_empty() {
            self.greedy.schedule = (0..k_max.max(1)).map(|k| scheduled_grid_size(&[], k)).collect();
        }
        if self.greedy.schedule.contains(&0) {
            return Err(CliError::Config("at greedy.schedule: grid sizes must be positive".into()));
        }

        if let Some(curve) = self.curve.as_mut() {
            if curve.families.is_none() {
                curve.families = Some(self.search.families.clone());
            }
            if curve.taus.is_none() && p == 1 {
                if curve.points == 0 {
                    return Err(CliError::Config("at curve.points: must be at least 1".into()));
                }
                let b = &space.free[0];
                curve.taus = Some(regular_levels(b.lower, b.upper, curve.points));
            }
        }
        if self.output.is_none() {
            self.output = Some(DEFAULT_OUTPUT.into());
        }
        Ok(Resolved { config: self, model, margins, space })
    }
}

impl Resolved {
    pub fn problem(&self) -> Result<Problem, CliError> {
        Ok(Problem::new(
            self.model.clone(),
            self.margins.clone(),
            self.config.alpha,
            self.config.n,
            self.config.seed,
            self.config.bootstrap,
        )?)
    }

    /// Grid sizes of greedy iterations `0..K`.
    pub fn schedule(&self) -> Vec<usize> {
        let k_max = self.config.greedy.max_iterations.unwrap_or(self.space.free.len()).max(1);
        (0..k_max).map(|k| scheduled_grid_size(&self.config.greedy.schedule, k)).collect()
    }
}
