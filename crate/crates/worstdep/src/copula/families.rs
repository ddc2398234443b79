//! Unrotated one-parameter family formulas. Every function here assumes its
//! arguments are strictly inside the unit square; the dispatching layer in
//! `mod.rs` handles edges, rotations and the degenerate families.

use crate::numeric::{bvn_cdf, norm_cdf, norm_ppf};

pub(super) mod gaussian {
    use super::*;

    pub fn cdf(rho: f64, u: f64, v: f64) -> f64 {
        bvn_cdf(norm_ppf(u), norm_ppf(v), rho)
    }

    pub fn h(rho: f64, u: f64, v: f64) -> f64 {
        let x = norm_ppf(u);
        let y = norm_ppf(v);
        norm_cdf((x - rho * y) / (1.0 - rho * rho).sqrt())
    }

    pub fn h_inv(rho: f64, p: f64, v: f64) -> f64 {
        let z = norm_ppf(p);
        let y = norm_ppf(v);
        norm_cdf(z * (1.0 - rho * rho).sqrt() + rho * y)
    }

    pub fn density(rho: f64, u: f64, v: f64) -> f64 {
        let x = norm_ppf(u);
        let y = norm_ppf(v);
        let det = 1.0 - rho * rho;
        (-(rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * det)).exp() / det.sqrt()
    }

    pub fn tau(rho: f64) -> f64 {
        std::f64::consts::FRAC_2_PI * rho.asin()
    }

    pub fn theta(tau: f64) -> f64 {
        (std::f64::consts::FRAC_PI_2 * tau).sin()
    }
}

pub(super) mod clayton {
    /// ln(u^−θ + v^−θ − 1), evaluated without overflow for tiny arguments.
    fn log_s(theta: f64, lu: f64, lv: f64) -> f64 {
        let a = -theta * lu;
        let b = -theta * lv;
        let m = a.max(b);
        m + ((-(a - b).abs()).exp() - (-m).exp()).ln_1p()
    }

    pub fn cdf(theta: f64, u: f64, v: f64) -> f64 {
        (-log_s(theta, u.ln(), v.ln()) / theta).exp()
    }

    pub fn h(theta: f64, u: f64, v: f64) -> f64 {
        let lv = v.ln();
        let ls = log_s(theta, u.ln(), lv);
        (-(theta + 1.0) * lv - (1.0 / theta + 1.0) * ls).exp().min(1.0)
    }

    pub fn h_inv(theta: f64, p: f64, v: f64) -> f64 {
        // u = (1 + v^−θ (p^{−θ/(θ+1)} − 1))^{−1/θ}
        let lb = -theta * v.ln();
        let e = (-theta / (theta + 1.0) * p.ln()).exp_m1();
        let prod = lb.exp() * e;
        let log_inner = if prod.is_finite() {
            prod.ln_1p()
        } else {
            lb + e.ln()
        };
        (-log_inner / theta).exp()
    }

    pub fn density(theta: f64, u: f64, v: f64) -> f64 {
        let (lu, lv) = (u.ln(), v.ln());
        let ls = log_s(theta, lu, lv);
        ((1.0 + theta).ln() - (theta + 1.0) * (lu + lv) - (1.0 / theta + 2.0) * ls).exp()
    }

    pub fn tau(theta: f64) -> f64 {
        theta / (theta + 2.0)
    }

    pub fn theta(tau: f64) -> f64 {
        2.0 * tau / (1.0 - tau)
    }
}

pub(super) mod gumbel {
    /// Returns (ln A, A^{1/θ}) for A = x^θ + y^θ.
    fn a_terms(theta: f64, x: f64, y: f64) -> (f64, f64) {
        let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
        let ratio = (lo / hi).powf(theta);
        let ln_a = theta * hi.ln() + ratio.ln_1p();
        (ln_a, hi * (1.0 + ratio).powf(1.0 / theta))
    }

    pub fn cdf(theta: f64, u: f64, v: f64) -> f64 {
        let (_, root) = a_terms(theta, -u.ln(), -v.ln());
        (-root).exp()
    }

    pub fn h(theta: f64, u: f64, v: f64) -> f64 {
        let x = -u.ln();
        let y = -v.ln();
        let (ln_a, root) = a_terms(theta, x, y);
        (-root + y + (theta - 1.0) * y.ln() + (1.0 / theta - 1.0) * ln_a).exp().min(1.0)
    }

    pub fn density(theta: f64, u: f64, v: f64) -> f64 {
        let x = -u.ln();
        let y = -v.ln();
        let (ln_a, root) = a_terms(theta, x, y);
        (-root + x + y + (theta - 1.0) * (x.ln() + y.ln()) + (1.0 / theta - 2.0) * ln_a
            + (root + theta - 1.0).ln())
        .exp()
    }

    pub fn tau(theta: f64) -> f64 {
        1.0 - 1.0 / theta
    }

    pub fn theta(tau: f64) -> f64 {
        1.0 / (1.0 - tau)
    }
}

pub(super) mod joe {
    /// Returns (ū^θ, 1 − ū^θ) with the complement computed directly.
    fn pow_bar(theta: f64, u: f64) -> (f64, f64) {
        let l = theta * (-u).ln_1p();
        (l.exp(), -l.exp_m1())
    }

    pub fn cdf(theta: f64, u: f64, v: f64) -> f64 {
        let (a, _) = pow_bar(theta, u);
        let (b, _) = pow_bar(theta, v);
        let s = a + b - a * b;
        1.0 - s.powf(1.0 / theta)
    }

    pub fn h(theta: f64, u: f64, v: f64) -> f64 {
        let (a, one_minus_a) = pow_bar(theta, u);
        let (b, _) = pow_bar(theta, v);
        let s = a + b - a * b;
        let vbar = 1.0 - v;
        ((1.0 / theta - 1.0) * s.ln() + (theta - 1.0) * vbar.ln()).exp() * one_minus_a
    }

    pub fn density(theta: f64, u: f64, v: f64) -> f64 {
        let (a, _) = pow_bar(theta, u);
        let (b, _) = pow_bar(theta, v);
        let s = a + b - a * b;
        let ln = (1.0 / theta - 2.0) * s.ln() + (theta - 1.0) * ((1.0 - u).ln() + (1.0 - v).ln());
        ln.exp() * (theta - 1.0 + s)
    }

    /// Kendall's tau of the Joe copula.
    ///
    /// Uses τ = 1 − (2/θ)·Σ_{k≥0} 1/((k+x)(k+2)) with x = 1 + 2/θ, which is the
    /// digamma closed form rewritten without the removable singularity at θ = 2.
    /// The tail beyond `HEAD` terms is summed with an Euler–Maclaurin expansion.
    pub fn tau(theta: f64) -> f64 {
        const HEAD: usize = 100;
        let x = 1.0 + 2.0 / theta;
        let mut head = 0.0;
        for k in (0..HEAD).rev() {
            let k = k as f64;
            head += 1.0 / ((k + x) * (k + 2.0));
        }
        let zx = HEAD as f64 + x;
        let z2 = HEAD as f64 + 2.0;
        let dx = x - 2.0;
        let log_term = if dx.abs() < 1e-12 {
            1.0 / z2
        } else {
            (dx / z2).ln_1p() / dx
        };
        let (zx2, z22) = (zx * zx, z2 * z2);
        let tail = log_term + 1.0 / (2.0 * zx * z2) + (zx + z2) / (12.0 * zx2 * z22)
            - (zx + z2) * (zx2 + z22) / (120.0 * zx2 * zx2 * z22 * z22);
        1.0 - 2.0 / theta * (head + tail)
    }

    /// Inverse of [`tau`] by bisection on log θ; `None` past the representable range.
    pub fn theta(tau_target: f64) -> Option<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while self::tau(hi.exp()) < tau_target {
            lo = hi;
            hi *= 2.0;
            if hi > 40.0 {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self::tau(mid.exp()) < tau_target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        Some((0.5 * (lo + hi)).exp())
    }
}
