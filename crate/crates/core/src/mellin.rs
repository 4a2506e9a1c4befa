//! Mellin transforms `M[f, z] = ∫₀^∞ t^{z−1} f(t) dt` of the two kernel
//! families, their residues, and the Parseval expansion
//! `∫₀^∞ h(λt) f(t) dt = Σ res{−λ^{−z} M[h,z] M[f,1−z]} + (contour on r′ + iℝ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_real_line, QuadOptions, QuadResult};
use crate::specfun::{gamma_real, log_gamma, recip_gamma, ComplexValue};
use crate::symbol::kernel::angular_kernel;

/// Poles closer than this to an integration contour count as on it.
const CONTOUR_CLEARANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MellinFamily {
    /// `h(t) = (1 + t²)^{−b}`.
    Lorentzian { b: f64 },
    /// `f_{a,b,s}(t) = t^a ∫₀^π sin^b θ (1 − 2t cos θ + t²)^{−s} dθ`.
    Angular { a: f64, b: f64, s: f64 },
}

/// A kernel together with its closed-form Mellin transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MellinClosedForm {
    pub family: MellinFamily,
    /// Open strip of absolute convergence `(lo, hi)` in `Re z`.
    pub fundamental_strip: (f64, f64),
}

/// A simple pole of `z ↦ M[·, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub location: f64,
    pub residue: f64,
}

/// One term `coefficient · λ^{power_of_lambda}` of a Parseval expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidueTerm {
    pub location: f64,
    pub coefficient: f64,
    pub power_of_lambda: f64,
}

impl ResidueTerm {
    pub fn value(&self, lambda: f64) -> f64 {
        self.coefficient * lambda.powf(self.power_of_lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsevalExpansion {
    pub leading: Vec<ResidueTerm>,
    /// The contour remainder is `O(λ^{remainder_bound_exponent})`.
    pub remainder_bound_exponent: f64,
}

impl ParsevalExpansion {
    pub fn leading_sum(&self, lambda: f64) -> f64 {
        self.leading.iter().map(|t| t.value(lambda)).sum()
    }
}

impl MellinClosedForm {
    pub fn lorentzian(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::domain(format!("lorentzian kernel needs b > 0, got {b}")));
        }
        Ok(MellinClosedForm {
            family: MellinFamily::Lorentzian { b },
            fundamental_strip: (0.0, 2.0 * b),
        })
    }

    pub fn angular(a: f64, b: f64, s: f64) -> Result<Self> {
        if !(b > 0.0 && s > 0.0) {
            return Err(Error::domain(format!(
                "angular kernel needs b, s > 0, got b = {b}, s = {s}"
            )));
        }
        if b <= 2.0 * s - 1.0 {
            return Err(Error::Divergence(format!(
                "angular kernel needs b > 2s - 1, got b = {b}, s = {s}"
            )));
        }
        Ok(MellinClosedForm {
            family: MellinFamily::Angular { a, b, s },
            fundamental_strip: (-a, 2.0 * s - a),
        })
    }

    /// Closed-form (meromorphically continued) transform at `z`.
    pub fn eval(&self, z: ComplexValue) -> Result<ComplexValue> {
        match self.family {
            MellinFamily::Lorentzian { b } => mellin_lorentzian(b, z),
            MellinFamily::Angular { a, b, s } => mellin_angular(a, b, s, z),
        }
    }

    /// The kernel itself at `t >= 0`.
    pub fn function(&self, t: f64) -> Result<f64> {
        match self.family {
            MellinFamily::Lorentzian { b } => Ok((-b * (t * t).ln_1p()).exp()),
            MellinFamily::Angular { a, b, s } => angular_kernel(a, b, s, t),
        }
    }

    /// Simple poles with `lo < location < hi`, sorted by location.
    pub fn poles_in(&self, lo: f64, hi: f64) -> Vec<Pole> {
        let mut out = Vec::new();
        match self.family {
            MellinFamily::Lorentzian { b } => {
                // Right family 2b + 2k, residue −(−1)^k Γ(b+k)/(k! Γ(b)).
                let mut coef = 1.0;
                for k in 0.. {
                    let z0 = 2.0 * b + 2.0 * k as f64;
                    if z0 >= hi {
                        break;
                    }
                    if k > 0 {
                        coef *= -(b + k as f64 - 1.0) / k as f64;
                    }
                    if z0 > lo {
                        out.push(Pole { location: z0, residue: -coef });
                    }
                }
                // Left family −2k, residue (−1)^k Γ(b+k)/(k! Γ(b)).
                let mut coef = 1.0;
                for k in 0.. {
                    let z0 = -2.0 * k as f64;
                    if z0 <= lo {
                        break;
                    }
                    if k > 0 {
                        coef *= -(b + k as f64 - 1.0) / k as f64;
                    }
                    if z0 < hi {
                        out.push(Pole { location: z0, residue: coef });
                    }
                }
            }
            MellinFamily::Angular { a, b, s } => {
                let pref = angular_prefactor(b, s);
                let rest = |z0: f64| -> f64 {
                    let d1 = recip_gamma(Complex64::new(0.5 * (b - a - z0 + 2.0), 0.0)).re;
                    let d2 = recip_gamma(Complex64::new(0.5 * (b + a - 2.0 * s + 2.0 + z0), 0.0)).re;
                    pref * d1 * d2
                };
                for k in 0.. {
                    let z0 = 2.0 * s - a + 2.0 * k as f64;
                    if z0 >= hi {
                        break;
                    }
                    if z0 > lo {
                        let g = gamma_real(0.5 * (z0 + a)).unwrap_or(f64::NAN);
                        let res = -2.0 * sign_k(k) / factorial(k) * g * rest(z0);
                        if res != 0.0 {
                            out.push(Pole { location: z0, residue: res });
                        }
                    }
                }
                for k in 0.. {
                    let z0 = -a - 2.0 * k as f64;
                    if z0 <= lo {
                        break;
                    }
                    if z0 < hi {
                        let g = gamma_real(0.5 * (2.0 * s - z0 - a)).unwrap_or(f64::NAN);
                        let res = 2.0 * sign_k(k) / factorial(k) * g * rest(z0);
                        if res != 0.0 {
                            out.push(Pole { location: z0, residue: res });
                        }
                    }
                }
            }
        }
        out.sort_by(|p, q| p.location.total_cmp(&q.location));
        out
    }
}

fn sign_k(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn angular_prefactor(b: f64, s: f64) -> f64 {
    PI.sqrt() * gamma_real(0.5 * (b - 2.0 * s + 2.0)).unwrap_or(f64::NAN)
        * gamma_real(0.5 * (b + 1.0)).unwrap_or(f64::NAN)
        / (2.0 * gamma_real(s).unwrap_or(f64::NAN))
}

/// `M[(1+t²)^{−b}, z] = Γ(z/2)Γ(b − z/2) / (2Γ(b))`.
pub fn mellin_lorentzian(b: f64, z: ComplexValue) -> Result<ComplexValue> {
    if !(b > 0.0) {
        return Err(Error::domain(format!("lorentzian kernel needs b > 0, got {b}")));
    }
    let l = log_gamma(z * 0.5)? + log_gamma(b - z * 0.5)? - gamma_real(b)?.ln();
    Ok(l.exp() * 0.5)
}

/// Mellin transform of `f_{a,b,s}`:
/// `√π Γ((b−2s+2)/2) Γ((b+1)/2) / (2Γ(s)) · Γ((2s−z−a)/2) Γ((z+a)/2) / (Γ((b−a−z+2)/2) Γ((b+a−2s+2+z)/2))`.
pub fn mellin_angular(a: f64, b: f64, s: f64, z: ComplexValue) -> Result<ComplexValue> {
    if !(b > 0.0 && s > 0.0) {
        return Err(Error::domain(format!(
            "angular kernel needs b, s > 0, got b = {b}, s = {s}"
        )));
    }
    let mut l = log_gamma((2.0 * s - a - z) * 0.5)? + log_gamma((z + a) * 0.5)?;
    for w in [(b - a + 2.0 - z) * 0.5, (b + a - 2.0 * s + 2.0 + z) * 0.5] {
        match log_gamma(w) {
            Ok(lg) => l -= lg,
            // 1/Γ vanishes at its poles.
            Err(Error::Pole { .. }) => return Ok(Complex64::new(0.0, 0.0)),
            Err(e) => return Err(e),
        }
    }
    Ok(l.exp() * angular_prefactor(b, s))
}

/// Result of a numeric integral in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexIntegral {
    pub value: ComplexValue,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl ComplexIntegral {
    fn from_parts(re: QuadResult, im: QuadResult) -> Self {
        ComplexIntegral {
            value: Complex64::new(re.value, im.value),
            error: re.error + im.error,
            evals: re.evals + im.evals,
            converged: re.converged && im.converged,
        }
    }
}

/// `∫₀^∞ t^{z−1} f(t) dt` by quadrature in `x = ln t`, where the integrand
/// `e^{zx} f(e^x)` decays exponentially on both sides inside the strip; the
/// real line is compactified and split at `t = 1`.
pub fn numeric_mellin<F: Fn(f64) -> f64>(
    f: F,
    z: ComplexValue,
    strip_hint: (f64, f64),
    rel_tol: f64,
) -> Result<ComplexIntegral> {
    if !(z.re > strip_hint.0 && z.re < strip_hint.1) {
        return Err(Error::domain(format!(
            "Re z = {} outside the strip ({}, {})",
            z.re, strip_hint.0, strip_hint.1
        )));
    }
    let integrand = |x: f64, part: usize| -> f64 {
        let t = x.exp();
        if t <= 0.0 || !t.is_finite() {
            return 0.0;
        }
        let ft = f(t);
        if ft == 0.0 {
            return 0.0;
        }
        let mag = (z.re * x).exp() * ft;
        let ph = z.im * x;
        if part == 0 {
            mag * ph.cos()
        } else {
            mag * ph.sin()
        }
    };
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol,
        max_intervals: 4000,
    };
    let re = integrate_real_line(|x| integrand(x, 0), &opts);
    let im = if z.im == 0.0 {
        QuadResult::zero()
    } else {
        // The imaginary part can be tiny relative to the real part.
        let o = QuadOptions {
            abs_tol: rel_tol * re.value.abs(),
            ..opts
        };
        integrate_real_line(|x| integrand(x, 1), &o)
    };
    let total = ComplexIntegral::from_parts(re, im);
    if !total.converged {
        return Err(Error::NonConvergence {
            what: "numeric Mellin transform".into(),
            error: total.error,
        });
    }
    Ok(total)
}

/// Poles of `z ↦ M[f, 1 − z]` with `lo < Re z < hi`, as poles in `z`.
fn reflected_poles(f: &MellinClosedForm, lo: f64, hi: f64) -> Vec<Pole> {
    f.poles_in(1.0 - hi, 1.0 - lo)
        .into_iter()
        .map(|p| Pole {
            location: 1.0 - p.location,
            residue: -p.residue,
        })
        .collect()
}

fn strip_intersection(h: &MellinClosedForm, f: &MellinClosedForm) -> (f64, f64) {
    let lo = h.fundamental_strip.0.max(1.0 - f.fundamental_strip.1);
    let hi = h.fundamental_strip.1.min(1.0 - f.fundamental_strip.0);
    (lo, hi)
}

/// All pole locations of `M[h,z]M[f,1−z]` in `(lo, hi)`, sorted and merged.
pub fn product_poles(h: &MellinClosedForm, f: &MellinClosedForm, lo: f64, hi: f64) -> Vec<f64> {
    let mut locs: Vec<f64> = h
        .poles_in(lo, hi)
        .iter()
        .chain(reflected_poles(f, lo, hi).iter())
        .map(|p| p.location)
        .collect();
    locs.sort_by(f64::total_cmp);
    locs.dedup_by(|a, b| (*a - *b).abs() < CONTOUR_CLEARANCE);
    locs
}

/// Contour abscissa midway between the `n`-th and `(n+1)`-th poles to the
/// right of `r`.
pub fn choose_r_prime(h: &MellinClosedForm, f: &MellinClosedForm, r: f64, n: usize) -> f64 {
    let poles = product_poles(h, f, r, r + 4.0 * (n as f64 + 2.0) + 10.0);
    match (poles.get(n.saturating_sub(1)), poles.get(n)) {
        (Some(a), Some(b)) if n > 0 => 0.5 * (a + b),
        (_, Some(b)) => 0.5 * (r + b),
        _ => r + 1.0,
    }
}

/// Residue terms of `−λ^{−z} M[h,z] M[f,1−z]` for the poles in `r < Re z < r′`.
///
/// `r` must lie in both fundamental strips; `lambda` is only used for
/// validation since every term is returned as `coefficient · λ^{power}`.
pub fn parseval_expand(
    h: &MellinClosedForm,
    f: &MellinClosedForm,
    lambda: f64,
    strip: (f64, f64),
) -> Result<ParsevalExpansion> {
    let (r, rp) = strip;
    if !(lambda > 1.0) {
        return Err(Error::domain(format!("Parseval expansion needs lambda > 1, got {lambda}")));
    }
    let (lo, hi) = strip_intersection(h, f);
    if !(r > lo && r < hi) {
        return Err(Error::domain(format!(
            "r = {r} is outside the common strip ({lo}, {hi})"
        )));
    }
    if rp <= r {
        return Err(Error::domain(format!("need r' > r, got r = {r}, r' = {rp}")));
    }
    let ph = h.poles_in(r - 1.0, rp + 1.0);
    let pf = reflected_poles(f, r - 1.0, rp + 1.0);
    for p in ph.iter().chain(pf.iter()) {
        if (p.location - rp).abs() < CONTOUR_CLEARANCE {
            return Err(Error::PoleOnContour(rp));
        }
    }
    let mut leading = Vec::new();
    for p in ph.iter().filter(|p| p.location > r && p.location < rp) {
        if pf.iter().any(|q| (q.location - p.location).abs() < CONTOUR_CLEARANCE) {
            return Err(Error::domain(format!(
                "double pole at z = {}; only simple poles are supported",
                p.location
            )));
        }
        let mf = f.eval(Complex64::new(1.0 - p.location, 0.0))?.re;
        leading.push(ResidueTerm {
            location: p.location,
            coefficient: -p.residue * mf,
            power_of_lambda: -p.location,
        });
    }
    for q in pf.iter().filter(|q| q.location > r && q.location < rp) {
        if ph.iter().any(|p| (q.location - p.location).abs() < CONTOUR_CLEARANCE) {
            continue;
        }
        let mh = h.eval(Complex64::new(q.location, 0.0))?.re;
        leading.push(ResidueTerm {
            location: q.location,
            coefficient: -q.residue * mh,
            power_of_lambda: -q.location,
        });
    }
    leading.sort_by(|a, b| a.location.total_cmp(&b.location));
    Ok(ParsevalExpansion {
        leading,
        remainder_bound_exponent: -rp,
    })
}

/// `(1/2πi) ∫_{r′−i∞}^{r′+i∞} λ^{−z} M[h,z] M[f,1−z] dz` by quadrature along the line.
pub fn contour_remainder(
    h: &MellinClosedForm,
    f: &MellinClosedForm,
    lambda: f64,
    r_prime: f64,
) -> Result<QuadResult> {
    let ll = lambda.ln();
    let g = |y: f64| -> f64 {
        let z = Complex64::new(r_prime, y);
        match (h.eval(z), f.eval(1.0 - z)) {
            (Ok(a), Ok(b)) => {
                let v = a * b * (-z * ll).exp();
                v.re / (2.0 * PI)
            }
            _ => f64::NAN,
        }
    };
    integrate_real_line(g, &QuadOptions::new(1e-300, 1e-10)).require("Parseval contour integral")
}

/// `∫₀^∞ h(λt) f(t) dt` by direct quadrature in `log t`.
pub fn direct_parseval_integral(
    h: &MellinClosedForm,
    f: &MellinClosedForm,
    lambda: f64,
) -> Result<QuadResult> {
    let g = |x: f64| -> f64 {
        let t = x.exp();
        match (h.function(lambda * t), f.function(t)) {
            (Ok(a), Ok(b)) => a * b * t,
            _ => f64::NAN,
        }
    };
    // In x = ln t the integrand decays exponentially on both sides, at rates
    // set by the strip margins; the window below covers kernels used here.
    let ll = lambda.ln();
    let pts = [-ll - 60.0, -ll - 5.0, -ll, 0.0, 5.0, 80.0];
    let opts = QuadOptions::new(1e-300, 1e-11);
    crate::quad::integrate_with_breaks(g, &pts, &opts).require("direct Parseval integral")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn numeric_residue(m: &MellinClosedForm, z0: f64) -> f64 {
        let rho = 1e-2;
        let n = 64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let th = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            let dz = Complex64::from_polar(rho, th);
            acc += m.eval(z0 + dz).unwrap() * dz;
        }
        (acc / n as f64).re
    }

    #[test]
    fn lorentzian_examples() {
        let v = mellin_lorentzian(1.0, c(1.0, 0.0)).unwrap();
        assert!((v.re - PI / 2.0).abs() < 1e-14);
        let v = mellin_lorentzian(1.75, c(3.0, 0.0)).unwrap();
        let g = |x| gamma_real(x).unwrap();
        assert!((v.re - g(1.5) * g(0.25) / (2.0 * g(1.75))).abs() < 1e-13);
        assert!(mellin_lorentzian(1.0, c(2.0, 0.0)).is_err());
        assert!(mellin_lorentzian(1.0, c(-4.0, 0.0)).is_err());
    }

    #[test]
    fn poisson_case() {
        for &z in &[0.5, 1.0, 1.3, 1.9] {
            let v = mellin_angular(0.0, 2.0, 1.0, c(z, 0.0)).unwrap().re;
            assert!((v - PI / (z * (2.0 - z))).abs() < 1e-13, "z = {z}");
        }
        let z = c(0.7, 2.5);
        let v = mellin_angular(0.0, 2.0, 1.0, z).unwrap();
        assert!((v - PI / (z * (2.0 - z))).norm() < 1e-12);
    }

    #[test]
    fn lorentzian_residues_match_contour() {
        for &b in &[0.3, 1.0, 1.75, 2.6] {
            let m = MellinClosedForm::lorentzian(b).unwrap();
            let poles = m.poles_in(-5.0, 2.0 * b + 5.0);
            assert!((poles.iter().find(|p| p.location == 2.0 * b).unwrap().residue + 1.0).abs() < 1e-15);
            for p in poles {
                let num = numeric_residue(&m, p.location);
                assert!((num - p.residue).abs() < 1e-10 * (1.0 + p.residue.abs()), "b={b} {p:?} {num}");
            }
        }
    }

    #[test]
    fn angular_residues_match_contour() {
        for &(a, b, s) in &[(4.0, 3.0, 1.25), (4.0, 5.0, 2.25), (0.0, 2.0, 1.0), (3.0, 2.0, 0.8)] {
            let m = MellinClosedForm::angular(a, b, s).unwrap();
            for p in m.poles_in(-a - 7.0, 2.0 * s - a + 7.0) {
                let num = numeric_residue(&m, p.location);
                assert!(
                    (num - p.residue).abs() < 1e-9 * (1.0 + p.residue.abs()),
                    "{a} {b} {s}: {p:?} vs {num}"
                );
            }
        }
    }

    #[test]
    fn poisson_poles_are_zero_and_two_only() {
        let m = MellinClosedForm::angular(0.0, 2.0, 1.0).unwrap();
        let locs: Vec<f64> = m.poles_in(-10.0, 10.0).iter().map(|p| p.location).collect();
        assert_eq!(locs, vec![0.0, 2.0]);
    }

    #[test]
    fn numeric_mellin_examples() {
        let h = MellinClosedForm::lorentzian(1.0).unwrap();
        let r = numeric_mellin(|t| h.function(t).unwrap(), c(1.0, 0.0), (0.0, 2.0), 1e-11).unwrap();
        assert!((r.value.re - PI / 2.0).abs() < 1e-10);
        let f = MellinClosedForm::angular(0.0, 2.0, 1.0).unwrap();
        let r = numeric_mellin(|t| f.function(t).unwrap(), c(1.0, 0.0), (0.0, 2.0), 1e-10).unwrap();
        assert!((r.value.re - PI).abs() < 1e-8, "{r:?}");
        assert!(numeric_mellin(|t| t, c(3.0, 0.0), (0.0, 2.0), 1e-8).is_err());
    }

    #[test]
    fn parseval_leading_term() {
        let (d, s, al) = (3.0, 1.25, 0.25);
        let h = MellinClosedForm::lorentzian(d / 2.0 + al).unwrap();
        let f = MellinClosedForm::angular(d + 1.0, d, s).unwrap();
        let r = d + 2.0 - 2.0 * s + 0.1;
        let rp = choose_r_prime(&h, &f, r, 2);
        assert!(rp > d + 2.0 && rp < d + 2.0 * al + 2.0);
        let e = parseval_expand(&h, &f, 32.0, (r, rp)).unwrap();
        assert_eq!(e.leading.len(), 2);
        let t0 = e.leading[0];
        assert!((t0.location - (d + 2.0 * al)).abs() < 1e-15);
        let mf = mellin_angular(d + 1.0, d, s, c(1.0 - d - 2.0 * al, 0.0)).unwrap().re;
        assert!((t0.coefficient - mf).abs() < 1e-14 * mf.abs());
        assert!(parseval_expand(&h, &f, 32.0, (r, d + 2.0)).is_err());
    }
}
