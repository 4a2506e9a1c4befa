//! Closed-form constants of the model and the admissible parameter region.
//!
//! Two independent routes lead to the sign of the regularization constant:
//! the self-similar quadratic `f(d, s, α)` and the Mellin-derived `η = C·[…]`.
//! Both are exposed so that callers can check one against the other.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_half_line, QuadOptions};
use crate::specfun::{gamma_real, ln_gamma_real, sphere_area};

/// Distance from a region boundary below which a point counts as on it.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

/// Dimension, Sobolev index and roughness exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub s: f64,
    pub alpha: f64,
}

impl ModelParams {
    /// Checks `d >= 2`, `0 < α < 1` and `s > 0`.
    pub fn new(d: usize, s: f64, alpha: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::domain(format!("dimension must satisfy d >= 2, got {d}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!(
                "roughness must satisfy 0 < alpha < 1, got {alpha}"
            )));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!("Sobolev index must satisfy s > 0, got {s}")));
        }
        Ok(ModelParams { d, s, alpha })
    }

    pub fn df(&self) -> f64 {
        self.d as f64
    }

    /// Additionally requires `s < d/2` and `s + α > 1`.
    pub fn require_symbol_range(&self) -> Result<()> {
        let d = self.df();
        if self.s >= 0.5 * d {
            return Err(Error::domain(format!(
                "Sobolev index must satisfy s < d/2 = {}, got {}",
                0.5 * d,
                self.s
            )));
        }
        if self.s + self.alpha <= 1.0 {
            return Err(Error::domain(format!(
                "need s + alpha > 1, got s + alpha = {}",
                self.s + self.alpha
            )));
        }
        Ok(())
    }

    pub fn admissibility(&self) -> Admissibility {
        admissibility(self)
    }
}

/// Position of a parameter point relative to the open admissible region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Admissibility {
    Inside,
    Boundary,
    Outside,
}

/// Roots describing the admissible `(s, α)` ellipse for one `(d, α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBounds {
    pub d: usize,
    pub alpha: f64,
    /// `α̂⁺_d`; undefined for `d = 2`.
    pub alpha_hat_plus: Option<f64>,
    pub alpha_hat_minus: Option<f64>,
    /// Discriminant `Δ^s_{d,α}`.
    pub delta_s: f64,
    /// `ŝ⁻_{d,α}`, absent when `Δ^s < 0`.
    pub s_hat_minus: Option<f64>,
    pub s_hat_plus: Option<f64>,
    pub s_cap: f64,
    /// Admissible interval `(ŝ⁻, ŝ⁺ ∧ d/2)`, absent when empty.
    pub s_interval: Option<(f64, f64)>,
    pub empty: bool,
    /// `α̂^±_{d,s}` at the Sobolev index supplied to [`region_bounds_at`].
    pub alpha_roots_of_s: Option<(f64, f64)>,
    /// `Δ^α_{d,s}` at that index.
    pub delta_alpha: Option<f64>,
}

/// `Δ^s_{d,α} = −16α²(d−2) + d(d−1)² − 8α(d²−3d+2)`.
pub fn delta_s(d: usize, alpha: f64) -> f64 {
    let d = d as f64;
    -16.0 * alpha * alpha * (d - 2.0) + d * (d - 1.0).powi(2) - 8.0 * alpha * (d * d - 3.0 * d + 2.0)
}

/// `ŝ^±_{d,α}`: the roots of `f(d, ·, α)`.
pub fn s_hat(d: usize, alpha: f64) -> Option<(f64, f64)> {
    let ds = delta_s(d, alpha);
    if ds < 0.0 {
        return None;
    }
    let df = d as f64;
    let centre = df / 4.0 + 1.0 - alpha * (df - 2.0) / (df - 1.0);
    let half = df.sqrt() / (4.0 * (df - 1.0)) * ds.sqrt();
    Some((centre - half, centre + half))
}

/// `α̂^±_d`, the roots of `Δ^s_{d,·}`; `None` for `d = 2`.
pub fn alpha_hat(d: usize) -> Option<(f64, f64)> {
    if d <= 2 {
        return None;
    }
    let df = d as f64;
    let root = 0.25 * (2.0 * (df - 1.0).powi(3) / (df - 2.0)).sqrt();
    Some((-(df - 1.0) / 4.0 - root, -(df - 1.0) / 4.0 + root))
}

/// `α̂^±_{d,s}` and `Δ^α_{d,s}`: the roots of `f(d, s, ·)`; `None` for `d = 2`
/// or a negative discriminant.
pub fn alpha_roots(d: usize, s: f64) -> Option<((f64, f64), f64)> {
    if d <= 2 {
        return None;
    }
    let df = d as f64;
    let da = df * (df - s) * (s - 1.0) / (df - 2.0);
    if da < 0.0 {
        return None;
    }
    let c = -(s - 1.0) / 2.0;
    Some(((c - 0.5 * da.sqrt(), c + 0.5 * da.sqrt()), da))
}

pub fn region_bounds(d: usize, alpha: f64) -> Result<RegionBounds> {
    region_bounds_at(d, alpha, None)
}

/// Region roots for `(d, α)`, plus the `α`-roots at `s` when supplied.
pub fn region_bounds_at(d: usize, alpha: f64, s: Option<f64>) -> Result<RegionBounds> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must satisfy d >= 2, got {d}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "roughness must satisfy 0 < alpha < 1, got {alpha}"
        )));
    }
    let ah = alpha_hat(d);
    let sh = s_hat(d, alpha);
    let s_cap = 0.5 * d as f64;
    let alpha_ok = ah.map_or(d == 2, |(_, p)| alpha < p);
    let s_interval = match sh {
        Some((lo, hi)) if alpha_ok && hi.min(s_cap) - lo > BOUNDARY_TOLERANCE => Some((lo, hi.min(s_cap))),
        _ => None,
    };
    let ar = s.and_then(|s| alpha_roots(d, s));
    Ok(RegionBounds {
        d,
        alpha,
        alpha_hat_plus: ah.map(|r| r.1),
        alpha_hat_minus: ah.map(|r| r.0),
        delta_s: delta_s(d, alpha),
        s_hat_minus: sh.map(|r| r.0),
        s_hat_plus: sh.map(|r| r.1),
        s_cap,
        empty: s_interval.is_none(),
        s_interval,
        alpha_roots_of_s: ar.map(|r| r.0),
        delta_alpha: ar.map(|r| r.1),
    })
}

/// Classifies `p` against the open region `α < α̂⁺_d ∧ 1`, `ŝ⁻ < s < ŝ⁺ ∧ d/2`.
pub fn admissibility(p: &ModelParams) -> Admissibility {
    let Ok(rb) = region_bounds(p.d, p.alpha) else {
        return Admissibility::Outside;
    };
    let Some((lo, hi)) = rb.s_interval else {
        return Admissibility::Outside;
    };
    let a_hi = rb.alpha_hat_plus.unwrap_or(1.0).min(1.0);
    let margin = (p.s - lo).min(hi - p.s).min(a_hi - p.alpha);
    if margin.abs() < BOUNDARY_TOLERANCE {
        Admissibility::Boundary
    } else if margin > 0.0 {
        Admissibility::Inside
    } else {
        Admissibility::Outside
    }
}

/// `f(d,s,α) = [−8(d−2)α² − 8(d−2)α(s−1) + 2(d−1)(s−1)(d−2s+2)]/(d−1)`.
pub fn f_heuristic(p: &ModelParams) -> f64 {
    let d = p.df();
    let (s, a) = (p.s, p.alpha);
    (-8.0 * (d - 2.0) * a * a - 8.0 * (d - 2.0) * a * (s - 1.0)
        + 2.0 * (d - 1.0) * (s - 1.0) * (d - 2.0 * s + 2.0))
        / (d - 1.0)
}

fn require_c_domain(p: &ModelParams) -> Result<()> {
    if p.s + p.alpha <= 1.0 {
        return Err(Error::domain(format!(
            "C is defined only for s + alpha > 1, got s + alpha = {}",
            p.s + p.alpha
        )));
    }
    Ok(())
}

/// The positive prefactor
/// `C = −π^{d/2}Γ(s+α−1)Γ((d−2s+2)/2)Γ(−α) / (4Γ(s)Γ((d+2+2α)/2)Γ((d+4−2s−2α)/2))`.
pub fn big_c(p: &ModelParams) -> Result<f64> {
    require_c_domain(p)?;
    let d = p.df();
    let (s, a) = (p.s, p.alpha);
    let num = [s + a - 1.0, 0.5 * (d - 2.0 * s + 2.0), -a];
    let den = [s, 0.5 * (d + 2.0 + 2.0 * a), 0.5 * (d + 4.0 - 2.0 * s - 2.0 * a)];
    let mut ln = 0.5 * d * PI.ln() - 4f64.ln();
    let mut sign = -1.0;
    for x in num {
        let (l, sg) = ln_gamma_real(x)?;
        ln += l;
        sign *= sg;
    }
    for x in den {
        let (l, sg) = ln_gamma_real(x)?;
        ln -= l;
        sign *= sg;
    }
    Ok(sign * ln.exp())
}

/// Bracket multiplying `C` in `η`.
pub fn eta_bracket(p: &ModelParams) -> f64 {
    let d = p.df();
    let (s, a) = (p.s, p.alpha);
    (d - 1.0) * (s + a - 1.0) * (d + 2.0 - 2.0 * s - 2.0 * a) - a * (d - 1.0) * (d + 2.0 * a)
        + 4.0 * a * (s + a - 1.0)
}

/// `(η, C)` with `η = C·[(d−1)(s+α−1)(d+2−2s−2α) − α(d−1)(d+2α) + 4α(s+α−1)]`.
pub fn eta_and_c(p: &ModelParams) -> Result<(f64, f64)> {
    let c = big_c(p)?;
    Ok((c * eta_bracket(p), c))
}

/// `(c_tra, c_str, c_mix)`, the leading coefficients of the three parts of the symbol.
pub fn asymptotic_constants(p: &ModelParams) -> Result<(f64, f64, f64)> {
    let c = big_c(p)?;
    let d = p.df();
    let (s, a) = (p.s, p.alpha);
    let c_tra = -(d - 1.0) * (s + a - 1.0) * (d + 2.0 - 2.0 * s - 2.0 * a) * c;
    let c_str = a * (d + 2.0 * a) * c;
    let c_mix = 2.0 * a * (s + a - 1.0) * c;
    Ok((c_tra, c_str, c_mix))
}

/// Recombines the three leading coefficients into `η`.
pub fn recombine_eta(p: &ModelParams, c_tra: f64, c_str: f64, c_mix: f64) -> f64 {
    -c_tra - (p.df() - 1.0) * c_str + 2.0 * c_mix
}

/// Radial integral `∫₀^∞ ρ^{d−1}(1+ρ²)^{−(d+2α)/2} dρ = Γ(d/2)Γ(α)/(2Γ(d/2+α))`.
pub fn c0_radial_integral(d: usize, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::Divergence(format!(
            "radial integral needs alpha > 0, got {alpha}"
        )));
    }
    let h = 0.5 * d as f64;
    Ok(gamma_real(h)? * gamma_real(alpha)? / (2.0 * gamma_real(h + alpha)?))
}

/// Itô–Stratonovich constant `c₀` with `Q(0) = c₀ I`:
/// `c₀ = (2π)^{−d/2} ∫ ⟨k⟩^{−d−2α}|P⊥_k v|² dk = (2π)^{−d/2} ω_{d−1} (d−1)/d ∫₀^∞ ρ^{d−1}⟨ρ⟩^{−d−2α} dρ`.
pub fn ito_stratonovich_c0(d: usize, alpha: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must satisfy d >= 2, got {d}")));
    }
    let df = d as f64;
    let radial = c0_radial_integral(d, alpha)?;
    Ok((2.0 * PI).powf(-0.5 * df) * sphere_area(d - 1) * (df - 1.0) / df * radial)
}

/// `c₀` with the radial integral done by adaptive quadrature instead of the Beta form.
pub fn ito_stratonovich_c0_quadrature(d: usize, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::Divergence(format!(
            "radial integral needs alpha > 0, got {alpha}"
        )));
    }
    let df = d as f64;
    let e = 0.5 * (df + 2.0 * alpha);
    let opts = QuadOptions::new(0.0, 1e-12);
    // Split at 1; the tail decays like ρ^{−1−2α}, so integrate it in log ρ.
    let head = crate::quad::integrate(|r: f64| r.powf(df - 1.0) * (1.0 + r * r).powf(-e), 0.0, 1.0, &opts);
    let tail = integrate_half_line(
        |t: f64| {
            // r^d (1+r²)^{-e} with r = e^t, in logs to avoid ∞·0.
            ((df - 2.0 * e) * t - e * (-2.0 * t).exp().ln_1p()).exp()
        },
        0.0,
        &opts,
    );
    let radial = (head + tail).require("c0 radial integral")?.value;
    Ok((2.0 * PI).powf(-0.5 * df) * sphere_area(d - 1) * (df - 1.0) / df * radial)
}

/// `π̃₁ = d − 2s + (1 + 2α/(d−1))(4 − 2d)`.
pub fn pi1_tilde(p: &ModelParams) -> f64 {
    let d = p.df();
    d - 2.0 * p.s + beta_ratio(p) * (4.0 - 2.0 * d)
}

/// `π̃₂ = −d + 2s + (1 + 2α/(d−1))(d² + d − 2sd + 2s − 4)`.
pub fn pi2_tilde(p: &ModelParams) -> f64 {
    let d = p.df();
    let s = p.s;
    -d + 2.0 * s + beta_ratio(p) * (d * d + d - 2.0 * s * d + 2.0 * s - 4.0)
}

/// `β_N/β_L = 1 + 2α/(d−1)`.
pub fn beta_ratio(p: &ModelParams) -> f64 {
    1.0 + 2.0 * p.alpha / (p.df() - 1.0)
}

/// Every scalar attached to one parameter point.
///
/// The Mellin-derived entries are absent when `s + α <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    #[serde(flatten)]
    pub params: ModelParams,
    pub admissibility: Admissibility,
    pub eta: Option<f64>,
    pub big_c: Option<f64>,
    pub c_tra: Option<f64>,
    pub c_str: Option<f64>,
    pub c_mix: Option<f64>,
    pub f_heuristic: f64,
    pub pi1_tilde: f64,
    pub pi2_tilde: f64,
    pub c0: f64,
    pub beta_ratio: f64,
    /// `γ_{s,L}/c_{d,s} = (−d+2s)(−d−1+2s)`.
    pub gamma_ratio_long: f64,
    /// `γ_{s,N}/c_{d,s} = −d+2s`.
    pub gamma_ratio_norm: f64,
}

/// Fills the table; the self-similar identity `(−d−2+2s+2α)π̃₁ − π̃₂ = f` is
/// checked and a violation reported as a domain error.
pub fn self_similar_table(p: &ModelParams) -> Result<ConstantsTable> {
    let d = p.df();
    let s = p.s;
    let f = f_heuristic(p);
    let pi1 = pi1_tilde(p);
    let pi2 = pi2_tilde(p);
    let combo = (-d - 2.0 + 2.0 * s + 2.0 * p.alpha) * pi1 - pi2;
    if (combo - f).abs() > 1e-12 * (1.0 + f.abs()) {
        return Err(Error::domain(format!(
            "self-similar identity fails at {p:?}: {combo} vs f = {f}"
        )));
    }
    let mellin = if p.s + p.alpha > 1.0 {
        let (c_tra, c_str, c_mix) = asymptotic_constants(p)?;
        Some((recombine_eta(p, c_tra, c_str, c_mix), big_c(p)?, c_tra, c_str, c_mix))
    } else {
        None
    };
    Ok(ConstantsTable {
        params: *p,
        admissibility: admissibility(p),
        eta: mellin.map(|m| m.0),
        big_c: mellin.map(|m| m.1),
        c_tra: mellin.map(|m| m.2),
        c_str: mellin.map(|m| m.3),
        c_mix: mellin.map(|m| m.4),
        f_heuristic: f,
        pi1_tilde: pi1,
        pi2_tilde: pi2,
        c0: ito_stratonovich_c0(p.d, p.alpha)?,
        beta_ratio: beta_ratio(p),
        gamma_ratio_long: (-d + 2.0 * s) * (-d - 1.0 + 2.0 * s),
        gamma_ratio_norm: -d + 2.0 * s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(d: usize, s: f64, a: f64) -> ModelParams {
        ModelParams::new(d, s, a).unwrap()
    }

    #[test]
    fn f_examples() {
        for &s in &[0.1, 0.5, 0.9, 1.3] {
            for &a in &[0.1, 0.7] {
                let v = f_heuristic(&mp(2, s, a));
                assert!((v - 4.0 * (s - 1.0) * (2.0 - s)).abs() < 1e-14);
            }
        }
        assert_eq!(f_heuristic(&ModelParams { d: 3, s: 1.0, alpha: 0.0 }), 0.0);
        assert!((f_heuristic(&mp(3, 1.25, 0.25)) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn region_examples() {
        let rb = region_bounds(3, 0.25).unwrap();
        assert!((rb.alpha_hat_plus.unwrap() - 0.5).abs() < 1e-15);
        assert!(rb.alpha_hat_minus.unwrap() < 0.0);
        let lo = rb.s_hat_minus.unwrap();
        // Oracle: bisection on the quadratic.
        let root = crate::quad::bisect(|s| f_heuristic(&mp(3, s, 0.25)), 1.0, 1.5, 1e-15).unwrap();
        assert!((lo - root).abs() < 1e-12);
        assert!((lo - 1.05218).abs() < 1e-5);
        assert_eq!(rb.s_interval.unwrap().1, 1.5);
        let ap4 = alpha_hat(4).unwrap().1;
        assert!((ap4 - (-0.75 + 0.25 * 27f64.sqrt())).abs() < 1e-15);
        assert!(ap4 > 0.5);
    }

    #[test]
    fn d2_region_empty() {
        for i in 1..100 {
            let rb = region_bounds(2, i as f64 / 100.0).unwrap();
            assert!(rb.empty);
            assert!(rb.s_interval.is_none());
        }
    }

    #[test]
    fn eta_examples() {
        let p = mp(3, 1.5, 0.25);
        let (eta, c) = eta_and_c(&p).unwrap();
        assert!((eta / c - 1.25).abs() < 1e-14);
        assert!(((p.df() - 1.0) * f_heuristic(&p) / 2.0 - 1.25).abs() < 1e-14);

        let p = mp(3, 1.25, 0.25);
        let (eta, c) = eta_and_c(&p).unwrap();
        assert!(c > 0.0);
        assert!((eta - 0.75 * c).abs() < 1e-14 * c);
        let (ct, cs, cm) = asymptotic_constants(&p).unwrap();
        assert!((cs - 0.875 * c).abs() < 1e-14 * c);
        assert!((cm - 0.25 * c).abs() < 1e-14 * c);
        assert!(ct < 0.0);
        assert!((recombine_eta(&p, ct, cs, cm) - eta).abs() < 1e-13 * c);

        let lo = s_hat(3, 0.25).unwrap().0;
        let (eta, c) = eta_and_c(&mp(3, lo, 0.25)).unwrap();
        assert!(eta.abs() < 1e-10 * c);
    }

    #[test]
    fn big_c_direct_formula() {
        // Independent evaluation with plain Γ values.
        let (d, s, a) = (3.0, 1.25, 0.25);
        let g = |x| gamma_real(x).unwrap();
        let c = -PI.powf(d / 2.0) * g(s + a - 1.0) * g((d - 2.0 * s + 2.0) / 2.0) * g(-a)
            / (4.0 * g(s) * g((d + 2.0 + 2.0 * a) / 2.0) * g((d + 4.0 - 2.0 * s - 2.0 * a) / 2.0));
        let got = big_c(&mp(3, s, a)).unwrap();
        assert!(((got - c) / c).abs() < 1e-13);
        assert!((got - 7.52).abs() < 0.01, "{got}");
    }

    #[test]
    fn c_domain_errors() {
        assert!(eta_and_c(&mp(3, 0.5, 0.25)).is_err());
        assert!(ModelParams::new(3, 1.0, 1.5).is_err());
        assert!(ModelParams::new(1, 1.0, 0.5).is_err());
    }

    #[test]
    fn c0_closed_form_vs_quadrature() {
        for d in 2..=6 {
            for &a in &[0.05, 0.25, 0.5, 0.9] {
                let x = ito_stratonovich_c0(d, a).unwrap();
                let y = ito_stratonovich_c0_quadrature(d, a).unwrap();
                assert!(((x - y) / x).abs() < 1e-9, "d={d} a={a}: {x} {y}");
            }
        }
        assert!((c0_radial_integral(3, 0.25).unwrap() - 1.7479).abs() < 2e-4);
        // d = 2, α = 1/2: radial integral is 1, sphere area 2π, (d−1)/d = 1/2.
        assert!((ito_stratonovich_c0(2, 0.5).unwrap() - 0.5).abs() < 1e-14);
        assert!(ito_stratonovich_c0(3, 0.0).is_err());
        let mut prev = f64::INFINITY;
        for i in 1..20 {
            let v = ito_stratonovich_c0(3, i as f64 / 20.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn self_similar_examples() {
        let t = self_similar_table(&mp(3, 1.25, 0.25)).unwrap();
        assert!((t.beta_ratio - 1.25).abs() < 1e-15);
        assert!((t.pi1_tilde + 2.0).abs() < 1e-15);
        assert_eq!(t.admissibility, Admissibility::Inside);
        let t = self_similar_table(&mp(3, 0.5, 0.25)).unwrap();
        assert!(t.eta.is_none());
        assert_eq!(t.admissibility, Admissibility::Outside);
    }

    #[test]
    fn boundary_flag() {
        let lo = s_hat(3, 0.25).unwrap().0;
        assert_eq!(mp(3, lo + 1e-10, 0.25).admissibility(), Admissibility::Boundary);
        assert_eq!(mp(3, lo - 1e-3, 0.25).admissibility(), Admissibility::Outside);
        assert_eq!(mp(3, 1.25, 0.75).admissibility(), Admissibility::Outside);
    }

    #[test]
    fn s_hat_plus_exceeds_cap_below_half() {
        for &a in &[0.45, 0.49, 0.499] {
            assert!(s_hat(3, a).unwrap().1 > 1.5);
        }
    }
}
