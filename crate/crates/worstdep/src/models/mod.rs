//! Model functions mapping an input vector to a scalar output.

mod expression;
mod external;

pub use expression::Expression;
pub use external::{decode_outputs, encode_rows, ExternalModel, DEFAULT_BATCH_SIZE, DEFAULT_TIMEOUT_SECS};

use crate::error::{Error, Result};
use crate::margins::{MarginFamily, MarginSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Duration;

/// Flood model inputs in positional order.
pub const FLOOD_INPUTS: [&str; 8] = ["Q", "Ks", "Zv", "Zm", "Hd", "Cb", "B", "L"];

/// Illustrative margins for the flood inputs, for runs that do not supply
/// their own. These are plausible engineering values for a river dike
/// study, not calibrated data:
///
/// | input | law |
/// |-------|-----|
/// | Q  | Gumbel(max) location 1013, scale 558, truncated to [500, 3000] |
/// | Ks | normal mean 30, sd 7.5, truncated to [15, 60] |
/// | Zv | triangular (49, 50, 51) |
/// | Zm | triangular (54, 55, 56) |
/// | Hd | uniform [7, 9] |
/// | Cb | triangular (55, 55.5, 56) |
/// | B  | triangular (295, 300, 305) |
/// | L  | triangular (4990, 5000, 5010) |
pub fn flood_default_margin(input: &str) -> Option<MarginSpec> {
    let spec = |family, params: &[(&str, f64)], truncate| MarginSpec {
        family,
        params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        truncate,
    };
    let tri = |lower, mode, upper| spec(MarginFamily::Triangular, &[("lower", lower), ("mode", mode), ("upper", upper)], None);
    Some(match input {
        "Q" => spec(MarginFamily::GumbelMax, &[("location", 1013.0), ("scale", 558.0)], Some([500.0, 3000.0])),
        "Ks" => spec(MarginFamily::Normal, &[("mean", 30.0), ("std", 7.5)], Some([15.0, 60.0])),
        "Zv" => tri(49.0, 50.0, 51.0),
        "Zm" => tri(54.0, 55.0, 56.0),
        "Hd" => spec(MarginFamily::Uniform, &[("lower", 7.0), ("upper", 9.0)], None),
        "Cb" => tri(55.0, 55.5, 56.0),
        "B" => tri(295.0, 300.0, 305.0),
        "L" => tri(4990.0, 5000.0, 5010.0),
        _ => return None,
    })
}

/// Default margins of the flood inputs not fixed by `constants`, in
/// positional order.
pub fn flood_default_margins(constants: &BTreeMap<String, f64>) -> Vec<MarginSpec> {
    FLOOD_INPUTS
        .iter()
        .filter(|name| !constants.contains_key(**name))
        .filter_map(|name| flood_default_margin(name))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinName {
    Flood,
    Polynomial,
    WeightedSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Negative,
    Positive,
}

/// Declarative model description as it appears in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Builtin {
        name: BuiltinName,
        /// Flood inputs held fixed, by name.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        constants: BTreeMap<String, f64>,
        /// Weighted-sum coefficients; defaults to 10^(j/d), j = 1..d.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sign: Option<Sign>,
    },
    Expression {
        expr: String,
    },
    External {
        command: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        batch_size: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_secs: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Flood { slots: [Slot; 8] },
    Polynomial,
    WeightedSum { weights: Vec<f64>, sign: f64 },
    Expression(Expression),
    External(ExternalModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Input(usize),
    Fixed(f64),
}

/// An evaluable model with a fixed input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    d: usize,
    kind: Kind,
}

/// Overflow margin S = Hd + Cb − Zv − H with water height
/// H = (Q / (B·Ks·√((Zm − Zv)/L)))^0.6.
pub fn eval_flood(q: f64, ks: f64, zv: f64, zm: f64, hd: f64, cb: f64, b: f64, l: f64) -> Result<f64> {
    let bad = |name: &str, v: f64| Err(Error::Domain(format!("flood model: {name} = {v} is out of range")));
    if !(ks > 0.0) {
        return bad("Ks", ks);
    }
    if !(b > 0.0) {
        return bad("B", b);
    }
    if !(l > 0.0) {
        return bad("L", l);
    }
    if !(q >= 0.0) {
        return bad("Q", q);
    }
    if !(zm > zv) {
        return Err(Error::Domain(format!("flood model: Zm = {zm} must exceed Zv = {zv}")));
    }
    let h = (q / (b * ks * ((zm - zv) / l).sqrt())).powf(0.6);
    Ok(hd + cb - zv - h)
}

/// 0.58·x1²·x2² − x1·x2 − x1 − x2, evaluated in the same operation order as
/// the equivalent expression string so both agree bit for bit.
pub fn eval_polynomial(x1: f64, x2: f64) -> f64 {
    0.58 * (x1 * x1) * (x2 * x2) - x1 * x2 - x1 - x2
}

/// `sign · Σ βⱼ xⱼ`.
pub fn eval_weighted_sum(x: &[f64], weights: &[f64], sign: Sign) -> Result<f64> {
    if x.len() != weights.len() {
        return Err(Error::Domain(format!(
            "weighted sum has {} weights for {} inputs",
            weights.len(),
            x.len()
        )));
    }
    let s: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
    Ok(match sign {
        Sign::Negative => -s,
        Sign::Positive => s,
    })
}

/// βⱼ = 10^(j/d) for j = 1..d.
pub fn default_weights(d: usize) -> Vec<f64> {
    (1..=d).map(|j| 10f64.powf(j as f64 / d as f64)).collect()
}

impl Model {
    /// Checks `spec` against the input dimension `d`.
    pub fn from_spec(spec: &ModelSpec, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Model("model needs at least one input".into()));
        }
        let kind = match spec {
            ModelSpec::Builtin { name, constants, weights, sign } => {
                let unused = |what: &str| Err(Error::Model(format!("'{what}' does not apply to builtin {name:?}")));
                match name {
                    BuiltinName::Flood => {
                        if weights.is_some() {
                            return unused("weights");
                        }
                        if sign.is_some() {
                            return unused("sign");
                        }
                        Kind::Flood { slots: flood_slots(constants, d)? }
                    }
                    BuiltinName::Polynomial => {
                        if !constants.is_empty() {
                            return unused("constants");
                        }
                        if weights.is_some() {
                            return unused("weights");
                        }
                        if sign.is_some() {
                            return unused("sign");
                        }
                        if d != 2 {
                            return Err(Error::Model(format!("polynomial model takes 2 inputs, got {d}")));
                        }
                        Kind::Polynomial
                    }
                    BuiltinName::WeightedSum => {
                        if !constants.is_empty() {
                            return unused("constants");
                        }
                        let weights = weights.clone().unwrap_or_else(|| default_weights(d));
                        if weights.len() != d {
                            return Err(Error::Model(format!("weighted sum has {} weights for {d} inputs", weights.len())));
                        }
                        let sign = match sign.unwrap_or_default() {
                            Sign::Negative => -1.0,
                            Sign::Positive => 1.0,
                        };
                        Kind::WeightedSum { weights, sign }
                    }
                }
            }
            ModelSpec::Expression { expr } => {
                let e = Expression::parse(expr)?;
                if e.max_variable() > d {
                    return Err(Error::Model(format!(
                        "expression '{expr}' references x{} but there are only {d} inputs",
                        e.max_variable()
                    )));
                }
                Kind::Expression(e)
            }
            ModelSpec::External { command, batch_size, timeout_secs } => {
                let timeout = timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS);
                if !(timeout > 0.0 && timeout.is_finite()) {
                    return Err(Error::Model(format!("external model timeout must be positive, got {timeout}")));
                }
                Kind::External(ExternalModel::new(
                    command.clone(),
                    batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
                    Duration::from_secs_f64(timeout),
                )?)
            }
        };
        Ok(Self { d, kind })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn is_external(&self) -> bool {
        matches!(self.kind, Kind::External(_))
    }

    /// Evaluates a single input vector.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Size(format!("model expects {} inputs, got {}", self.d, x.len())));
        }
        match &self.kind {
            Kind::Flood { slots } => {
                let v = |k: usize| match slots[k] {
                    Slot::Input(i) => x[i],
                    Slot::Fixed(c) => c,
                };
                eval_flood(v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7))
            }
            Kind::Polynomial => Ok(eval_polynomial(x[0], x[1])),
            Kind::WeightedSum { weights, sign } => {
                let s: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
                Ok(sign * s)
            }
            Kind::Expression(e) => e.evaluate(x),
            Kind::External(ext) => Ok(ext.run_batch(x, self.d)?[0]),
        }
    }

    /// Evaluates every row of a row-major `n × d` block. Errors name the
    /// failing row and echo its input.
    pub fn evaluate_batch(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let d = self.d;
        if rows.len() % d != 0 {
            return Err(Error::Size(format!("input block of length {} is not a multiple of d={d}", rows.len())));
        }
        match &self.kind {
            Kind::External(ext) => {
                let chunks: Vec<&[f64]> = rows.chunks(ext.batch_size * d).collect();
                let parts: Vec<Vec<f64>> = chunks
                    .par_iter()
                    .enumerate()
                    .map(|(c, chunk)| {
                        ext.run_batch(chunk, d).map_err(|e| {
                            Error::Model(format!("batch starting at row {}: {e}", c * ext.batch_size + 1))
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(parts.concat())
            }
            _ => rows
                .par_chunks(d)
                .enumerate()
                .map(|(r, x)| {
                    self.evaluate(x)
                        .map_err(|e| Error::Model(format!("row {} with input {x:?}: {e}", r + 1)))
                })
                .collect(),
        }
    }
}

fn flood_slots(constants: &BTreeMap<String, f64>, d: usize) -> Result<[Slot; 8]> {
    for name in constants.keys() {
        if !FLOOD_INPUTS.contains(&name.as_str()) {
            return Err(Error::Model(format!(
                "unknown flood input '{name}'; expected one of {}",
                FLOOD_INPUTS.join(", ")
            )));
        }
    }
    let free = 8 - constants.len();
    if free != d {
        return Err(Error::Model(format!(
            "flood model with {} constant(s) has {free} random inputs, but {d} margins were given",
            constants.len()
        )));
    }
    let mut next = 0;
    let mut slots = [Slot::Fixed(0.0); 8];
    for (k, name) in FLOOD_INPUTS.iter().enumerate() {
        slots[k] = match constants.get(*name) {
            Some(&c) => Slot::Fixed(c),
            None => {
                next += 1;
                Slot::Input(next - 1)
            }
        };
    }
    Ok(slots)
}
