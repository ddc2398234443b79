//! Bivariate pair copulas: the building blocks of the pair-copula construction.
//!
//! Conventions: `h(u, v)` is the conditional distribution `P(U ≤ u | V = v)`,
//! i.e. the partial derivative of `C(u, v)` in its second argument.
//! [`PairCopula::transpose`] swaps the roles of the two arguments, so the
//! conditional distribution of `V` given `U = u` is `c.transpose().h(v, u)`.

mod families;

use crate::error::{Error, Result};
use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use families::{clayton, gaussian, gumbel, joe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Independence,
    Gaussian,
    Clayton,
    Gumbel,
    Joe,
    Comonotone,
    Countermonotone,
}

impl CopulaFamily {
    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Independence => "independence",
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Joe => "joe",
            CopulaFamily::Comonotone => "comonotone",
            CopulaFamily::Countermonotone => "countermonotone",
        }
    }

    pub fn is_archimedean(self) -> bool {
        matches!(self, CopulaFamily::Clayton | CopulaFamily::Gumbel | CopulaFamily::Joe)
    }

    /// Families that can be searched over by Kendall's tau.
    pub fn is_searchable(self) -> bool {
        matches!(
            self,
            CopulaFamily::Gaussian | CopulaFamily::Clayton | CopulaFamily::Gumbel | CopulaFamily::Joe
        )
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    pub fn from_degrees(deg: u16) -> Result<Self> {
        match deg {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            other => Err(Error::param(format!("rotation must be 0, 90, 180 or 270, got {other}"))),
        }
    }

    fn negates_tau(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u16(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let deg = u16::deserialize(d)?;
        Rotation::from_degrees(deg).map_err(serde::de::Error::custom)
    }
}

/// A bivariate copula: family, rotation and (for one-parameter families) θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCopula {
    family: CopulaFamily,
    rotation: Rotation,
    theta: f64,
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 200;

impl PairCopula {
    pub fn independence() -> Self {
        PairCopula { family: CopulaFamily::Independence, rotation: Rotation::R0, theta: 0.0 }
    }

    pub fn comonotone() -> Self {
        PairCopula { family: CopulaFamily::Comonotone, rotation: Rotation::R0, theta: 0.0 }
    }

    pub fn countermonotone() -> Self {
        PairCopula { family: CopulaFamily::Countermonotone, rotation: Rotation::R0, theta: 0.0 }
    }

    /// Builds a copula from its native parameter, checking admissibility.
    pub fn new(family: CopulaFamily, rotation: Rotation, theta: f64) -> Result<Self> {
        let admissible = match family {
            CopulaFamily::Independence | CopulaFamily::Comonotone | CopulaFamily::Countermonotone => {
                true
            }
            CopulaFamily::Gaussian => theta > -1.0 && theta < 1.0,
            CopulaFamily::Clayton => theta > 0.0 && theta.is_finite(),
            CopulaFamily::Gumbel => theta >= 1.0 && theta.is_finite(),
            CopulaFamily::Joe => theta > 1.0 && theta.is_finite(),
        };
        if !admissible {
            return Err(Error::param(format!("θ={theta} is outside the admissible set of {family}")));
        }
        if rotation != Rotation::R0 && !family.is_archimedean() {
            return Err(Error::param(format!("{family} copulas take no rotation")));
        }
        let theta = if family.is_searchable() { theta } else { 0.0 };
        Ok(PairCopula { family, rotation, theta })
    }

    /// Converts a Kendall tau into a copula of the given family and rotation.
    ///
    /// τ = 0 yields independence and τ = ±1 the Fréchet–Hoeffding bounds,
    /// whatever the family.
    pub fn from_tau(family: CopulaFamily, rotation: Rotation, tau: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&tau) {
            return Err(Error::UnreachableTau {
                family: family.name().into(),
                tau,
                range: "[-1, 1]".into(),
            });
        }
        if tau == 0.0 {
            return Ok(Self::independence());
        }
        if tau == 1.0 {
            return Ok(Self::comonotone());
        }
        if tau == -1.0 {
            return Ok(Self::countermonotone());
        }
        let unreachable = |range: &str| Error::UnreachableTau {
            family: format!("{family} rotated {}°", rotation.degrees()),
            tau,
            range: range.into(),
        };
        match family {
            CopulaFamily::Independence | CopulaFamily::Comonotone | CopulaFamily::Countermonotone => {
                Err(unreachable(match family {
                    CopulaFamily::Independence => "{0}",
                    CopulaFamily::Comonotone => "{1}",
                    _ => "{-1}",
                }))
            }
            CopulaFamily::Gaussian => {
                if rotation != Rotation::R0 {
                    return Err(Error::param("gaussian copulas take no rotation"));
                }
                let rho = gaussian::theta(tau);
                if rho >= 1.0 {
                    Ok(Self::comonotone())
                } else if rho <= -1.0 {
                    Ok(Self::countermonotone())
                } else {
                    Ok(PairCopula { family, rotation, theta: rho })
                }
            }
            CopulaFamily::Clayton | CopulaFamily::Gumbel | CopulaFamily::Joe => {
                let negative = rotation.negates_tau();
                if negative != (tau < 0.0) {
                    return Err(unreachable(if negative { "(-1, 0)" } else { "(0, 1)" }));
                }
                let t = tau.abs();
                let theta = match family {
                    CopulaFamily::Clayton => clayton::theta(t),
                    CopulaFamily::Gumbel => gumbel::theta(t),
                    _ => joe::theta(t).ok_or_else(|| unreachable("(0, 1) below the representable limit"))?,
                };
                if !theta.is_finite() {
                    return Err(unreachable("(0, 1)"));
                }
                Ok(PairCopula { family, rotation, theta })
            }
        }
    }

    /// Like [`PairCopula::from_tau`], choosing the rotation from the sign of τ:
    /// Archimedean families use 90° for negative dependence.
    pub fn from_tau_auto(family: CopulaFamily, tau: f64) -> Result<Self> {
        let rotation = if family.is_archimedean() && tau < 0.0 { Rotation::R90 } else { Rotation::R0 };
        Self::from_tau(family, rotation, tau)
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    /// Native parameter; `None` for independence and the bound copulas.
    pub fn theta(&self) -> Option<f64> {
        self.family.is_searchable().then_some(self.theta)
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.family, CopulaFamily::Comonotone | CopulaFamily::Countermonotone)
    }

    pub fn kendall_tau(&self) -> f64 {
        let base = match self.family {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Comonotone => 1.0,
            CopulaFamily::Countermonotone => -1.0,
            CopulaFamily::Gaussian => gaussian::tau(self.theta),
            CopulaFamily::Clayton => clayton::tau(self.theta),
            CopulaFamily::Gumbel => gumbel::tau(self.theta),
            CopulaFamily::Joe => joe::tau(self.theta),
        };
        if self.rotation.negates_tau() {
            -base
        } else {
            base
        }
    }

    /// The copula of (V, U) when (U, V) has this copula.
    pub fn transpose(&self) -> Self {
        let rotation = match self.rotation {
            Rotation::R90 => Rotation::R270,
            Rotation::R270 => Rotation::R90,
            r => r,
        };
        PairCopula { rotation, ..*self }
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        let c = |a: f64, b: f64| self.base_cdf(a, b);
        let value = match self.rotation {
            Rotation::R0 => c(u, v),
            Rotation::R90 => v - c(1.0 - u, v),
            Rotation::R180 => u + v - 1.0 + c(1.0 - u, 1.0 - v),
            Rotation::R270 => u - c(u, 1.0 - v),
        };
        value.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        if self.is_degenerate() {
            return Err(Error::NoDensity(self.family.name().into()));
        }
        let (a, b) = match self.rotation {
            Rotation::R0 => (u, v),
            Rotation::R90 => (1.0 - u, v),
            Rotation::R180 => (1.0 - u, 1.0 - v),
            Rotation::R270 => (u, 1.0 - v),
        };
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
            return Err(Error::domain(format!("copula density needs (u, v) in (0,1)², got ({u}, {v})")));
        }
        Ok(self.base_density(a, b))
    }

    /// Conditional distribution `P(U ≤ u | V = v)`.
    pub fn h(&self, u: f64, v: f64) -> f64 {
        match self.family {
            CopulaFamily::Comonotone => return if u >= v { 1.0 } else { 0.0 },
            CopulaFamily::Countermonotone => return if u >= 1.0 - v { 1.0 } else { 0.0 },
            _ => {}
        }
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let value = match self.rotation {
            Rotation::R0 => self.base_h(u, v),
            Rotation::R90 => 1.0 - self.base_h(1.0 - u, v),
            Rotation::R180 => 1.0 - self.base_h(1.0 - u, 1.0 - v),
            Rotation::R270 => self.base_h(u, 1.0 - v),
        };
        value.clamp(0.0, 1.0)
    }

    /// Inverse of [`PairCopula::h`] in its first argument.
    pub fn h_inv(&self, p: f64, v: f64) -> Result<f64> {
        match self.family {
            CopulaFamily::Comonotone => return Ok(v),
            CopulaFamily::Countermonotone => return Ok(1.0 - v),
            CopulaFamily::Independence => return Ok(p),
            _ => {}
        }
        if !(p > 0.0 && p < 1.0 && v > 0.0 && v < 1.0) {
            return Err(Error::domain(format!("h-inverse needs p, v in (0,1), got p={p}, v={v}")));
        }
        Ok(match self.rotation {
            Rotation::R0 => self.base_h_inv(p, v)?,
            Rotation::R90 => 1.0 - self.base_h_inv(1.0 - p, v)?,
            Rotation::R180 => 1.0 - self.base_h_inv(1.0 - p, 1.0 - v)?,
            Rotation::R270 => self.base_h_inv(p, 1.0 - v)?,
        })
    }

    /// Draws `n` points by conditional inversion: u₁ uniform, u₂ = F⁻¹(w | u₁).
    pub fn sample_pair<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<[f64; 2]>> {
        let t = self.transpose();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u1: f64 = rng.sample(Open01);
            let w: f64 = rng.sample(Open01);
            out.push([u1, t.h_inv(w, u1)?]);
        }
        Ok(out)
    }

    fn base_cdf(&self, u: f64, v: f64) -> f64 {
        match self.family {
            CopulaFamily::Independence => u * v,
            CopulaFamily::Comonotone => u.min(v),
            CopulaFamily::Countermonotone => (u + v - 1.0).max(0.0),
            CopulaFamily::Gaussian => gaussian::cdf(self.theta, u, v),
            CopulaFamily::Clayton => clayton::cdf(self.theta, u, v),
            CopulaFamily::Gumbel => gumbel::cdf(self.theta, u, v),
            CopulaFamily::Joe => joe::cdf(self.theta, u, v),
        }
    }

    fn base_h(&self, u: f64, v: f64) -> f64 {
        match self.family {
            CopulaFamily::Independence => u,
            CopulaFamily::Gaussian => gaussian::h(self.theta, u, v),
            CopulaFamily::Clayton => clayton::h(self.theta, u, v),
            CopulaFamily::Gumbel => gumbel::h(self.theta, u, v),
            CopulaFamily::Joe => joe::h(self.theta, u, v),
            CopulaFamily::Comonotone | CopulaFamily::Countermonotone => unreachable!(),
        }
    }

    fn base_density(&self, u: f64, v: f64) -> f64 {
        match self.family {
            CopulaFamily::Independence => 1.0,
            CopulaFamily::Gaussian => gaussian::density(self.theta, u, v),
            CopulaFamily::Clayton => clayton::density(self.theta, u, v),
            CopulaFamily::Gumbel => gumbel::density(self.theta, u, v),
            CopulaFamily::Joe => joe::density(self.theta, u, v),
            CopulaFamily::Comonotone | CopulaFamily::Countermonotone => unreachable!(),
        }
    }

    fn base_h_inv(&self, p: f64, v: f64) -> Result<f64> {
        match self.family {
            CopulaFamily::Gaussian => Ok(gaussian::h_inv(self.theta, p, v)),
            CopulaFamily::Clayton => Ok(clayton::h_inv(self.theta, p, v)),
            CopulaFamily::Gumbel | CopulaFamily::Joe => self.newton_h_inv(p, v),
            CopulaFamily::Independence => Ok(p),
            CopulaFamily::Comonotone | CopulaFamily::Countermonotone => unreachable!(),
        }
    }

    /// Safeguarded Newton iteration on `h(·, v) = p`, with the density as
    /// derivative and bisection whenever a step leaves the bracket.
    fn newton_h_inv(&self, p: f64, v: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut u = p;
        let mut last_residual = f64::NAN;
        for _ in 0..NEWTON_MAX_ITER {
            let residual = self.base_h(u, v) - p;
            last_residual = residual;
            if residual.abs() <= NEWTON_TOL * 1e-2 {
                return Ok(u);
            }
            if residual < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= 4.0 * f64::EPSILON * u.max(f64::MIN_POSITIVE) {
                if residual.abs() <= NEWTON_TOL {
                    return Ok(u);
                }
                // h jumps faster than the grid of representable u: the bracket
                // midpoint is the best available answer.
                return Ok(0.5 * (lo + hi));
            }
            let slope = self.base_density(u, v);
            let mut next = u - residual / slope;
            if !(next > lo && next < hi) {
                // A zero lower end means the root may sit deep in the tail, so
                // shrink geometrically rather than halving.
                next = if lo > 0.0 { 0.5 * (lo + hi) } else { 0.01 * hi };
            }
            u = next;
        }
        if last_residual.abs() <= NEWTON_TOL {
            return Ok(u);
        }
        Err(Error::Convergence(format!(
            "h-inverse of {} θ={} did not converge for p={p}, v={v}: bracket [{lo:e}, {hi:e}], residual {last_residual:e} after {NEWTON_MAX_ITER} iterations",
            self.family, self.theta
        )))
    }
}

impl fmt::Display for PairCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.theta() {
            Some(theta) if self.rotation != Rotation::R0 => {
                write!(f, "{}{}(θ={theta})", self.family, self.rotation.degrees())
            }
            Some(theta) => write!(f, "{}(θ={theta})", self.family),
            None => write!(f, "{}", self.family),
        }
    }
}
