//! Univariate input distributions: CDF, quantile and density, with optional
//! truncation to a finite window.

use crate::error::{Error, Result};
use crate::numeric::{norm_cdf, norm_pdf, norm_ppf};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginFamily {
    Uniform,
    Normal,
    GeneralizedPareto,
    GumbelMax,
    Triangular,
}

impl MarginFamily {
    fn param_names(self) -> &'static [&'static str] {
        match self {
            MarginFamily::Uniform => &["lower", "upper"],
            MarginFamily::Normal => &["mean", "std"],
            MarginFamily::GeneralizedPareto => &["scale", "shape"],
            MarginFamily::GumbelMax => &["location", "scale"],
            MarginFamily::Triangular => &["lower", "mode", "upper"],
        }
    }
}

/// The serialized form of a margin: `{"family": ..., "params": {...}, "truncate": [lo, hi]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSpec {
    pub family: MarginFamily,
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, std: f64 },
    Gpd { scale: f64, shape: f64 },
    GumbelMax { location: f64, scale: f64 },
    Triangular { lower: f64, mode: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Window {
    lo: f64,
    hi: f64,
    cdf_lo: f64,
    mass: f64,
}

/// A validated marginal distribution. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Margin {
    kind: Kind,
    window: Option<Window>,
}

const GPD_EXP_LIMIT: f64 = 1e-12;

impl Margin {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::param(format!(
                "uniform needs finite lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self::plain(Kind::Uniform { lower, upper }))
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        if !(mean.is_finite() && std.is_finite() && std > 0.0) {
            return Err(Error::param(format!(
                "normal needs finite mean and std > 0, got mean={mean}, std={std}"
            )));
        }
        Ok(Self::plain(Kind::Normal { mean, std }))
    }

    pub fn generalized_pareto(scale: f64, shape: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && shape.is_finite()) {
            return Err(Error::param(format!(
                "generalized-pareto needs scale > 0 and finite shape, got scale={scale}, shape={shape}"
            )));
        }
        Ok(Self::plain(Kind::Gpd { scale, shape }))
    }

    pub fn gumbel_max(location: f64, scale: f64) -> Result<Self> {
        if !(location.is_finite() && scale.is_finite() && scale > 0.0) {
            return Err(Error::param(format!(
                "gumbel-max needs finite location and scale > 0, got location={location}, scale={scale}"
            )));
        }
        Ok(Self::plain(Kind::GumbelMax { location, scale }))
    }

    pub fn triangular(lower: f64, mode: f64, upper: f64) -> Result<Self> {
        let ok = lower.is_finite() && upper.is_finite() && lower < upper && (lower..=upper).contains(&mode);
        if !ok {
            return Err(Error::param(format!(
                "triangular needs lower ≤ mode ≤ upper with lower < upper, got ({lower}, {mode}, {upper})"
            )));
        }
        Ok(Self::plain(Kind::Triangular { lower, mode, upper }))
    }

    fn plain(kind: Kind) -> Self {
        Margin { kind, window: None }
    }

    /// Restrict the distribution to `[lo, hi]` by renormalizing its CDF.
    pub fn truncated(self, lo: f64, hi: f64) -> Result<Self> {
        if self.window.is_some() {
            return Err(Error::param("margin is already truncated"));
        }
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::param(format!("truncation window needs lo < hi, got [{lo}, {hi}]")));
        }
        let cdf_lo = self.base_cdf(lo);
        let mass = self.base_cdf(hi) - cdf_lo;
        if mass <= 0.0 {
            return Err(Error::param(format!(
                "truncation window [{lo}, {hi}] carries no probability mass"
            )));
        }
        Ok(Margin {
            window: Some(Window { lo, hi, cdf_lo, mass }),
            ..self
        })
    }

    pub fn from_spec(spec: &MarginSpec) -> Result<Self> {
        let names = spec.family.param_names();
        for key in spec.params.keys() {
            if !names.contains(&key.as_str()) {
                return Err(Error::param(format!(
                    "unknown parameter '{key}' for {:?} margin (expected {names:?})",
                    spec.family
                )));
            }
        }
        let get = |name: &str| {
            spec.params.get(name).copied().ok_or_else(|| {
                Error::param(format!("missing parameter '{name}' for {:?} margin", spec.family))
            })
        };
        let base = match spec.family {
            MarginFamily::Uniform => Margin::uniform(get("lower")?, get("upper")?)?,
            MarginFamily::Normal => Margin::normal(get("mean")?, get("std")?)?,
            MarginFamily::GeneralizedPareto => Margin::generalized_pareto(get("scale")?, get("shape")?)?,
            MarginFamily::GumbelMax => Margin::gumbel_max(get("location")?, get("scale")?)?,
            MarginFamily::Triangular => Margin::triangular(get("lower")?, get("mode")?, get("upper")?)?,
        };
        match spec.truncate {
            Some([lo, hi]) => base.truncated(lo, hi),
            None => Ok(base),
        }
    }

    pub fn to_spec(&self) -> MarginSpec {
        let (family, pairs): (MarginFamily, Vec<(&str, f64)>) = match self.kind {
            Kind::Uniform { lower, upper } => (MarginFamily::Uniform, vec![("lower", lower), ("upper", upper)]),
            Kind::Normal { mean, std } => (MarginFamily::Normal, vec![("mean", mean), ("std", std)]),
            Kind::Gpd { scale, shape } => {
                (MarginFamily::GeneralizedPareto, vec![("scale", scale), ("shape", shape)])
            }
            Kind::GumbelMax { location, scale } => {
                (MarginFamily::GumbelMax, vec![("location", location), ("scale", scale)])
            }
            Kind::Triangular { lower, mode, upper } => (
                MarginFamily::Triangular,
                vec![("lower", lower), ("mode", mode), ("upper", upper)],
            ),
        };
        MarginSpec {
            family,
            params: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            truncate: self.window.map(|w| [w.lo, w.hi]),
        }
    }

    pub fn family(&self) -> MarginFamily {
        self.to_spec().family
    }

    pub fn is_truncated(&self) -> bool {
        self.window.is_some()
    }

    /// Lower and upper end of the support (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        let (a, b) = match self.kind {
            Kind::Uniform { lower, upper } => (lower, upper),
            Kind::Normal { .. } | Kind::GumbelMax { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Kind::Gpd { scale, shape } => {
                if shape < 0.0 {
                    (0.0, -scale / shape)
                } else {
                    (0.0, f64::INFINITY)
                }
            }
            Kind::Triangular { lower, upper, .. } => (lower, upper),
        };
        match self.window {
            Some(w) => (a.max(w.lo), b.min(w.hi)),
            None => (a, b),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.window {
            None => self.base_cdf(x),
            Some(w) => {
                if x <= w.lo {
                    0.0
                } else if x >= w.hi {
                    1.0
                } else {
                    ((self.base_cdf(x) - w.cdf_lo) / w.mass).clamp(0.0, 1.0)
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.window {
            None => self.base_density(x),
            Some(w) => {
                if x < w.lo || x > w.hi {
                    0.0
                } else {
                    self.base_density(x) / w.mass
                }
            }
        }
    }

    /// Generalized inverse `inf{x : F(x) ≥ u}` for `u` in the open unit interval.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("margin quantile needs u in (0,1), got {u}")));
        }
        Ok(self.quantile_unchecked(u))
    }

    /// Quantile without the domain check; `u` in {0, 1} maps to the support ends.
    pub(crate) fn quantile_unchecked(&self, u: f64) -> f64 {
        match self.window {
            None => self.base_quantile(u),
            Some(w) => {
                let x = self.base_quantile(w.cdf_lo + u * w.mass);
                x.clamp(w.lo, w.hi)
            }
        }
    }

    fn base_cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self.kind {
            Kind::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Kind::Normal { mean, std } => norm_cdf((x - mean) / std),
            Kind::Gpd { scale, shape } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let z = x / scale;
                if shape.abs() < GPD_EXP_LIMIT {
                    -(-z).exp_m1()
                } else {
                    let t = shape * z;
                    if t <= -1.0 {
                        return 1.0;
                    }
                    -(-(t.ln_1p()) / shape).exp_m1()
                }
            }
            Kind::GumbelMax { location, scale } => (-(-(x - location) / scale).exp()).exp(),
            Kind::Triangular { lower, mode, upper } => {
                if x <= lower {
                    0.0
                } else if x >= upper {
                    1.0
                } else if x <= mode {
                    (x - lower).powi(2) / ((upper - lower) * (mode - lower))
                } else {
                    1.0 - (upper - x).powi(2) / ((upper - lower) * (upper - mode))
                }
            }
        }
    }

    fn base_density(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            Kind::Normal { mean, std } => norm_pdf((x - mean) / std) / std,
            Kind::Gpd { scale, shape } => {
                if x < 0.0 {
                    return 0.0;
                }
                let z = x / scale;
                if shape.abs() < GPD_EXP_LIMIT {
                    (-z).exp() / scale
                } else {
                    let t = shape * z;
                    if t <= -1.0 {
                        return 0.0;
                    }
                    ((-1.0 / shape - 1.0) * t.ln_1p()).exp() / scale
                }
            }
            Kind::GumbelMax { location, scale } => {
                let z = (x - location) / scale;
                (-z - (-z).exp()).exp() / scale
            }
            Kind::Triangular { lower, mode, upper } => {
                if x < lower || x > upper {
                    0.0
                } else if x < mode {
                    2.0 * (x - lower) / ((upper - lower) * (mode - lower))
                } else if x > mode {
                    2.0 * (upper - x) / ((upper - lower) * (upper - mode))
                } else {
                    2.0 / (upper - lower)
                }
            }
        }
    }

    fn base_quantile(&self, u: f64) -> f64 {
        match self.kind {
            Kind::Uniform { lower, upper } => lower + u * (upper - lower),
            Kind::Normal { mean, std } => mean + std * norm_ppf(u),
            Kind::Gpd { scale, shape } => {
                if u <= 0.0 {
                    return 0.0;
                }
                if shape.abs() < GPD_EXP_LIMIT {
                    -scale * (-u).ln_1p()
                } else {
                    // σ((1−u)^{−ξ} − 1)/ξ written with expm1 for small ξ·log terms
                    scale * (-shape * (-u).ln_1p()).exp_m1() / shape
                }
            }
            Kind::GumbelMax { location, scale } => location - scale * (-u.ln()).ln(),
            Kind::Triangular { lower, mode, upper } => {
                let split = (mode - lower) / (upper - lower);
                if u <= split {
                    lower + (u * (upper - lower) * (mode - lower)).sqrt()
                } else {
                    upper - ((1.0 - u) * (upper - lower) * (upper - mode)).sqrt()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families() -> Vec<Margin> {
        vec![
            Margin::uniform(0.0, 1.0).unwrap(),
            Margin::uniform(-3.0, 1.0).unwrap(),
            Margin::normal(0.0, 1.0).unwrap(),
            Margin::normal(30.0, 7.5).unwrap(),
            Margin::generalized_pareto(1.0, 1.0).unwrap(),
            Margin::generalized_pareto(10.0, 0.75).unwrap(),
            Margin::generalized_pareto(2.0, -0.3).unwrap(),
            Margin::generalized_pareto(2.0, 0.0).unwrap(),
            Margin::gumbel_max(1013.0, 558.0).unwrap(),
            Margin::triangular(49.0, 50.0, 51.0).unwrap(),
            Margin::triangular(0.0, 0.0, 2.0).unwrap(),
        ]
    }

    fn truncated_families() -> Vec<Margin> {
        vec![
            Margin::gumbel_max(1013.0, 558.0).unwrap().truncated(500.0, 3000.0).unwrap(),
            Margin::normal(30.0, 7.5).unwrap().truncated(15.0, 60.0).unwrap(),
            Margin::generalized_pareto(1.0, 1.0).unwrap().truncated(0.5, 20.0).unwrap(),
        ]
    }

    // Composite Simpson on a finite interval.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut acc = f(a) + f(b);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn unit_uniform_is_identity() {
        let m = Margin::uniform(0.0, 1.0).unwrap();
        assert_eq!(m.cdf(0.3), 0.3);
        assert_eq!(m.quantile(0.42).unwrap(), 0.42);
        assert_eq!(m.density(0.5), 1.0);
        assert_eq!(m.density(1.5), 0.0);
    }

    #[test]
    fn unit_gpd_is_x_over_one_plus_x() {
        let m = Margin::generalized_pareto(1.0, 1.0).unwrap();
        assert_eq!(m.cdf(1.0), 0.5);
        assert_eq!(m.quantile(0.5).unwrap(), 1.0);
        assert!((m.density(1.0) - 0.25).abs() < 1e-15);
        for x in [0.5, 1.0, 2.0, 10.0] {
            assert!((m.cdf(x) - x / (1.0 + x)).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn gpd_cdf_matches_density_quadrature() {
        let m = Margin::generalized_pareto(10.0, 0.75).unwrap();
        let integral = simpson(|x| m.density(x), 0.0, 10.0, 20_000);
        assert!((m.cdf(10.0) - integral).abs() < 1e-10);
    }

    #[test]
    fn normal_quantile_reference() {
        let m = Margin::normal(0.0, 1.0).unwrap();
        // Oracle: bisection on the erf-based CDF.
        let (mut lo, mut hi) = (0.0f64, 5.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if m.cdf(mid) < 0.975 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = m.quantile(0.975).unwrap();
        assert!((q - lo).abs() < 1e-12);
        assert!((q - 1.959_964).abs() < 1e-6);
    }

    #[test]
    fn round_trip_on_probability_grid() {
        for m in all_families() {
            for i in 1..100 {
                let u = i as f64 / 100.0;
                let x = m.quantile(u).unwrap();
                assert!((m.cdf(x) - u).abs() < 1e-10, "{m:?} u={u}");
                assert!((m.quantile(m.cdf(x)).unwrap() - x).abs() < 1e-10 * x.abs().max(1.0), "{m:?}");
            }
        }
        for m in truncated_families() {
            for i in 1..100 {
                let u = i as f64 / 100.0;
                let x = m.quantile(u).unwrap();
                assert!((m.cdf(x) - u).abs() < 1e-8, "{m:?} u={u}");
            }
        }
    }

    #[test]
    fn quantile_strictly_increasing() {
        for m in all_families().into_iter().chain(truncated_families()) {
            let qs: Vec<f64> = (1..100).map(|i| m.quantile(i as f64 / 100.0).unwrap()).collect();
            assert!(qs.windows(2).all(|w| w[0] < w[1]), "{m:?}");
        }
    }

    // Integrates piecewise with geometrically growing segments so heavy
    // right tails stay well resolved.
    fn integrate_density(m: &Margin, a: f64, b: f64) -> f64 {
        let mid = m.quantile(0.5).unwrap();
        let mut total = simpson(|x| m.density(x), a, mid, 20_000);
        let mut lo = mid;
        let mut width = (b - mid).min(mid.abs().max(1.0));
        while lo < b {
            let hi = (lo + width).min(b);
            total += simpson(|x| m.density(x), lo, hi, 2_000);
            lo = hi;
            width *= 2.0;
        }
        total
    }

    #[test]
    fn densities_integrate_to_one() {
        for m in all_families().into_iter().chain(truncated_families()) {
            let (s_lo, s_hi) = m.support();
            let a = if s_lo.is_finite() { s_lo } else { m.quantile(1e-10).unwrap() };
            let b = if s_hi.is_finite() { s_hi } else { m.quantile(1.0 - 1e-10).unwrap() };
            let total = integrate_density(&m, a, b);
            assert!((total - 1.0).abs() < 1e-6, "{m:?}: {total}");
        }
    }

    #[test]
    fn cdf_saturates_outside_support() {
        let m = Margin::triangular(49.0, 50.0, 51.0).unwrap();
        assert_eq!(m.cdf(10.0), 0.0);
        assert_eq!(m.cdf(60.0), 1.0);
        let t = Margin::gumbel_max(1013.0, 558.0).unwrap().truncated(500.0, 3000.0).unwrap();
        assert_eq!(t.cdf(400.0), 0.0);
        assert_eq!(t.cdf(3500.0), 1.0);
        assert_eq!(t.density(3500.0), 0.0);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(Margin::uniform(1.0, 1.0).is_err());
        assert!(Margin::normal(0.0, 0.0).is_err());
        assert!(Margin::generalized_pareto(-1.0, 0.5).is_err());
        assert!(Margin::gumbel_max(0.0, -2.0).is_err());
        assert!(Margin::triangular(0.0, 2.0, 1.0).is_err());
        assert!(Margin::uniform(0.0, 1.0).unwrap().truncated(2.0, 3.0).is_err());
    }

    #[test]
    fn quantile_domain_is_open_interval() {
        let m = Margin::normal(0.0, 1.0).unwrap();
        assert!(m.quantile(0.0).is_err());
        assert!(m.quantile(1.0).is_err());
        assert!(m.quantile(f64::NAN).is_err());
    }

    #[test]
    fn spec_round_trip_and_strictness() {
        let json = r#"{"family":"gumbel-max","params":{"location":1013,"scale":558},"truncate":[500,3000]}"#;
        let spec: MarginSpec = serde_json::from_str(json).unwrap();
        let m = Margin::from_spec(&spec).unwrap();
        assert_eq!(m.to_spec(), spec);
        let bad: MarginSpec =
            serde_json::from_str(r#"{"family":"normal","params":{"mean":0,"sd":1}}"#).unwrap();
        assert!(Margin::from_spec(&bad).is_err());
        assert!(serde_json::from_str::<MarginSpec>(r#"{"family":"normal","params":{},"extra":1}"#).is_err());
    }
}
