//! Two-dimensional reductions of the three parts of the symbol, with
//! `n = λe₁`, `v = e₂` and `h(t) = (1 + t²)^{−(d/2+α)}`:
//!
//! ```text
//! I_str = K λ^{d+2−2s} ∫ h(λr) f_{d+1,d,s}(r) dr
//! I_mix = K λ^{d+2−2s} (2s/(d+1)) ∫ h(λr) f_{d+1,d+2,s+1}(r) dr
//! I_tra = ω_{d−2} λ^{d+2−2s} ∫ r^{d−1} h(λr) ∫₀^π sin^d θ [(1 − 2r cos θ + r²)^{−s} − 1] dθ dr
//! ```
//!
//! with `K = 2π^{d/2−1}Γ(3/2)/Γ((d+1)/2) = ω_{d−2}/(d−1)`.

use crate::constants::ModelParams;
use crate::error::{Error, Result};
use crate::quad::{integrate_with_breaks, QuadOptions, QuadResult};
use crate::specfun::{beta_angular, gamma_real, sphere_area};
use crate::symbol::kernel::{angular_kernel, distance_sq, theta_breaks};
use crate::symbol::{IntegralResult, Method};

/// Below this radius the transport bracket uses its Taylor expansion.
const TAYLOR_RADIUS: f64 = 1e-3;

const OUTER_REL_TOL: f64 = 1e-10;

/// `2π^{d/2−1}Γ(3/2)/Γ((d+1)/2)`.
pub fn reduction_constant(d: usize) -> f64 {
    let df = d as f64;
    2.0 * std::f64::consts::PI.powf(0.5 * df - 1.0) * gamma_real(1.5).expect("finite")
        / gamma_real(0.5 * (df + 1.0)).expect("finite")
}

fn check(p: &ModelParams, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("need lambda > 0, got {lambda}")));
    }
    if p.s >= 0.5 * p.df() {
        return Err(Error::domain(format!(
            "Sobolev index must satisfy s < d/2 = {}, got {}",
            0.5 * p.df(),
            p.s
        )));
    }
    if p.s + p.alpha <= 1.0 {
        return Err(Error::Divergence(format!(
            "the symbol integrals diverge for s + alpha <= 1 (got {})",
            p.s + p.alpha
        )));
    }
    Ok(())
}

/// `h(λr)` with `h(t) = (1+t²)^{−β}`.
#[inline]
fn lorentz(beta: f64, t: f64) -> f64 {
    (-beta * (t * t).ln_1p()).exp()
}

/// Radius beyond which the integrand is replaced by its asymptotic tail.
fn far_radius_ln(lambda: f64) -> f64 {
    25.0f64.max(25.0 - lambda.ln())
}

/// `∫₀^R g(r) dr` computed as `∫ e^x g(e^x) dx` with breakpoints at the
/// natural scales `r = 1/λ` and `r = 1`.
fn outer_integral<G: Fn(f64) -> f64>(g: G, d: usize, lambda: f64, x_hi: f64) -> QuadResult {
    let ll = lambda.ln();
    let x_lo = (-ll).min(0.0) - 50.0 / (d as f64 + 2.0);
    let mut pts = vec![x_lo, -ll - 3.0, -ll, -ll + 3.0, -1.0, -0.05, 0.0, 0.05, 1.0, 4.0, x_hi];
    pts.retain(|x| *x >= x_lo && *x <= x_hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let opts = QuadOptions {
        abs_tol: 1e-300,
        rel_tol: OUTER_REL_TOL,
        max_intervals: 4000,
    };
    integrate_with_breaks(
        |x: f64| {
            let r = x.exp();
            r * g(r)
        },
        &pts,
        &opts,
    )
}

fn finish(q: QuadResult, scale: f64, tail: f64, what: &str) -> Result<IntegralResult> {
    let q = q.require(what)?;
    Ok(IntegralResult {
        value: scale * (q.value + tail),
        error_estimate: scale.abs() * q.error,
        method: Method::AdaptiveQuadrature,
        samples_or_evals: q.evals as u64,
    })
}

/// Shared form of `I_str` and `I_mix`: `coef·K λ^{d+2−2s} ∫ h(λr) f_{a,b,σ}(r) dr`.
fn kernel_part(p: &ModelParams, lambda: f64, a: f64, b: f64, sigma: f64, coef: f64, what: &str) -> Result<IntegralResult> {
    check(p, lambda)?;
    let d = p.df();
    let beta = 0.5 * d + p.alpha;
    let x_hi = far_radius_ln(lambda);
    let err = std::cell::Cell::new(None);
    let g = |r: f64| match angular_kernel(a, b, sigma, r) {
        Ok(v) => lorentz(beta, lambda * r) * v,
        Err(e) => {
            err.set(Some(e));
            f64::NAN
        }
    };
    let q = outer_integral(g, p.d, lambda, x_hi);
    if let Some(e) = err.take() {
        return Err(e);
    }
    // Beyond R: h(λr) ≈ (λr)^{−2β}, f(r) ≈ r^{a−2σ} ∫ sin^b, up to O(R^{−2}).
    let big_r = x_hi.exp();
    let expo = a - 2.0 * sigma - 2.0 * beta + 1.0;
    let tail = beta_angular(b, 0.0)? * lambda.powf(-2.0 * beta) * big_r.powf(expo) / (-expo);
    let scale = coef * reduction_constant(p.d) * lambda.powf(d + 2.0 - 2.0 * p.s);
    finish(q, scale, tail, what)
}

/// Stretching part `I_str(λ) = ∫ ⟨n−k⟩^{−d−2α} |k|^{−2s} (v·k)² dk`.
pub fn i_str(p: &ModelParams, lambda: f64) -> Result<IntegralResult> {
    let d = p.df();
    kernel_part(p, lambda, d + 1.0, d, p.s, 1.0, "I_str outer integral")
}

/// Mixed part `I_mix(λ) = ∫ ⟨n−k⟩^{−d−2α} |k|^{−2s} (v·P⊥_{n−k}k)(v·k) dk`,
/// through the integrated-by-parts kernel `(2s/(d+1)) f_{d+1,d+2,s+1}`.
pub fn i_mix(p: &ModelParams, lambda: f64) -> Result<IntegralResult> {
    let d = p.df();
    kernel_part(p, lambda, d + 1.0, d + 2.0, p.s + 1.0, 2.0 * p.s / (d + 1.0), "I_mix outer integral")
}

/// `I_mix` from the un-integrated angular form `r^d ∫ cos θ sin^d θ (…)^{−s} dθ`.
pub fn i_mix_cosine_form(p: &ModelParams, lambda: f64) -> Result<IntegralResult> {
    check(p, lambda)?;
    let d = p.df();
    let beta = 0.5 * d + p.alpha;
    let s = p.s;
    let x_hi = far_radius_ln(lambda);
    let inner = |r: f64| {
        let g = |th: f64| {
            let sn = th.sin();
            if sn <= 0.0 {
                return 0.0;
            }
            th.cos() * (d * sn.ln() - s * distance_sq(r, th).ln()).exp()
        };
        let scale = (-2.0 * s * r.max(1.0).ln()).exp();
        integrate_with_breaks(g, &theta_breaks(r), &QuadOptions::new(1e-13 * scale, 1e-11)).value
    };
    let q = outer_integral(|r| lorentz(beta, lambda * r) * r.powf(d) * inner(r), p.d, lambda, x_hi);
    // Far field: r^d ∫cos sin^d (…)^{−s} ≈ 2s r^{d−1−2s} ∫cos² sin^d.
    let big_r = x_hi.exp();
    let expo = d - 2.0 * s - 2.0 * beta;
    let tail = 2.0 * s * beta_angular(d, 2.0)? * lambda.powf(-2.0 * beta) * big_r.powf(expo) / (-expo);
    let scale = reduction_constant(p.d) * lambda.powf(d + 2.0 - 2.0 * s);
    finish(q, scale, tail, "I_mix cosine-form outer integral")
}

/// Transport bracket `T(r) = ∫₀^π sin^d θ [(1 − 2r cos θ + r²)^{−s} − 1] dθ`.
pub fn transport_bracket(d: usize, s: f64, r: f64) -> Result<f64> {
    let df = d as f64;
    if r < TAYLOR_RADIUS {
        // Even moments E_k = ∫ sin^d cos^k; odd orders integrate to zero.
        let e0 = beta_angular(df, 0.0)?;
        let e2 = beta_angular(df, 2.0)?;
        let e4 = beta_angular(df, 4.0)?;
        let s1 = s * (s + 1.0);
        let s2 = s1 * (s + 2.0);
        let s3 = s2 * (s + 3.0);
        let r2 = r * r;
        let c2 = -s * e0 + 2.0 * s1 * e2;
        let c4 = 0.5 * s1 * e0 - 2.0 * s2 * e2 + (2.0 / 3.0) * s3 * e4;
        return Ok(r2 * (c2 + r2 * c4));
    }
    let g = |th: f64| {
        let sn = th.sin();
        if sn <= 0.0 {
            return 0.0;
        }
        let w = (df * sn.ln()).exp();
        let v = if r < 0.5 {
            let x = r * r - 2.0 * r * th.cos();
            (-s * x.ln_1p()).exp_m1()
        } else {
            distance_sq(r, th).powf(-s) - 1.0
        };
        w * v
    };
    // Odd-order terms cancel, so the absolute floor scales with r, not r².
    let opts = QuadOptions::new(1e-13 * r.min(1.0), 1e-11);
    let q = integrate_with_breaks(g, &theta_breaks(r), &opts);
    if !q.value.is_finite() {
        return Err(Error::NonConvergence {
            what: "transport bracket".into(),
            error: q.error,
        });
    }
    Ok(q.value)
}

/// Transport part `I_tra(λ) = ∫ ⟨n−k⟩^{−d−2α} (|k|^{−2s} − |n|^{−2s}) |P⊥_{n−k}k|² dk`.
pub fn i_tra(p: &ModelParams, lambda: f64) -> Result<IntegralResult> {
    check(p, lambda)?;
    let d = p.df();
    let s = p.s;
    let beta = 0.5 * d + p.alpha;
    let x_hi = far_radius_ln(lambda);
    let err = std::cell::Cell::new(None);
    let g = |r: f64| match transport_bracket(p.d, s, r) {
        Ok(t) => r.powf(d - 1.0) * lorentz(beta, lambda * r) * t,
        Err(e) => {
            err.set(Some(e));
            f64::NAN
        }
    };
    let q = outer_integral(g, p.d, lambda, x_hi);
    if let Some(e) = err.take() {
        return Err(e);
    }
    // Beyond R: T(r) ≈ E₀(r^{−2s} − 1), h(λr) ≈ (λr)^{−2β}.
    let big_r = x_hi.exp();
    let e0 = beta_angular(d, 0.0)?;
    let tail = e0
        * lambda.powf(-2.0 * beta)
        * (-big_r.powf(d - 2.0 * beta) / (2.0 * beta - d)
            + big_r.powf(d - 2.0 * beta - 2.0 * s) / (2.0 * beta + 2.0 * s - d));
    let scale = sphere_area(p.d - 2) * lambda.powf(d + 2.0 - 2.0 * s);
    finish(q, scale, tail, "I_tra outer integral")
}

/// The three parts and their combination `v·ℍv = I_tra + (d−1)I_str − 2I_mix`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolParts {
    pub i_tra: IntegralResult,
    pub i_str: IntegralResult,
    pub i_mix: IntegralResult,
    pub h_form: IntegralResult,
}

pub fn symbol_parts(p: &ModelParams, lambda: f64) -> Result<SymbolParts> {
    let tra = i_tra(p, lambda)?;
    let st = i_str(p, lambda)?;
    let mx = i_mix(p, lambda)?;
    let dm1 = p.df() - 1.0;
    let h = IntegralResult {
        value: tra.value + dm1 * st.value - 2.0 * mx.value,
        error_estimate: tra.error_estimate + dm1 * st.error_estimate + 2.0 * mx.error_estimate,
        method: Method::AdaptiveQuadrature,
        samples_or_evals: tra.samples_or_evals + st.samples_or_evals + mx.samples_or_evals,
    };
    Ok(SymbolParts {
        i_tra: tra,
        i_str: st,
        i_mix: mx,
        h_form: h,
    })
}

/// `v·ℍ(n)v` for `|n| = λ`, `v ⊥ n`.
pub fn h_quadratic_form(p: &ModelParams, lambda: f64) -> Result<IntegralResult> {
    Ok(symbol_parts(p, lambda)?.h_form)
}

/// `v·𝔽(n)v = v·ℍ(n)v + (2π)^{d/2} c₀ |n|^{2−2s}`.
pub fn f_quadratic_form(p: &ModelParams, lambda: f64) -> Result<IntegralResult> {
    let h = h_quadratic_form(p, lambda)?;
    let c0 = crate::constants::ito_stratonovich_c0(p.d, p.alpha)?;
    let shift = (2.0 * std::f64::consts::PI).powf(0.5 * p.df()) * c0 * lambda.powf(2.0 - 2.0 * p.s);
    Ok(IntegralResult {
        value: h.value + shift,
        ..h
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::asymptotic_constants;

    fn mp(d: usize, s: f64, a: f64) -> ModelParams {
        ModelParams::new(d, s, a).unwrap()
    }

    #[test]
    fn reduction_constant_is_sphere_ratio() {
        for d in 2..7 {
            let k = reduction_constant(d);
            let o = sphere_area(d - 2) / (d as f64 - 1.0);
            assert!(((k - o) / o).abs() < 1e-14);
        }
    }

    #[test]
    fn bracket_taylor_matches_quadrature_at_switch() {
        for &(d, s) in &[(3usize, 1.25), (2, 0.75), (5, 2.2)] {
            let r = TAYLOR_RADIUS;
            let taylor = transport_bracket(d, s, r * (1.0 - 1e-9)).unwrap();
            let quad = transport_bracket(d, s, r * (1.0 + 1e-9)).unwrap();
            assert!(((taylor - quad) / taylor).abs() < 1e-7, "d={d}: {taylor} {quad}");
        }
    }

    #[test]
    fn bracket_vanishes_at_origin() {
        let a = transport_bracket(3, 1.25, 1e-4).unwrap();
        let b = transport_bracket(3, 1.25, 2e-4).unwrap();
        assert!(a.abs() < 1e-6);
        assert!((b / a - 4.0).abs() < 1e-6);
    }

    #[test]
    fn mixed_part_two_forms_agree() {
        let p = mp(3, 1.25, 0.25);
        for &l in &[1.0, 8.0] {
            let a = i_mix(&p, l).unwrap().value;
            let b = i_mix_cosine_form(&p, l).unwrap().value;
            assert!(((a - b) / a).abs() < 1e-7, "lambda={l}: {a} {b}");
        }
    }

    #[test]
    fn leading_asymptotics_at_large_lambda() {
        let p = mp(3, 1.25, 0.25);
        let (ct, cs, cm) = asymptotic_constants(&p).unwrap();
        let l = 64.0;
        let parts = symbol_parts(&p, l).unwrap();
        assert!((parts.i_str.value * l / cs - 1.0).abs() < 0.03);
        assert!((parts.i_mix.value * l / cm - 1.0).abs() < 0.03);
        assert!((parts.i_tra.value * l / ct - 1.0).abs() < 0.03);
    }

    #[test]
    fn divergent_parameters_are_flagged() {
        assert!(matches!(i_str(&mp(2, 0.5, 0.3), 4.0), Err(Error::Divergence(_))));
        assert!(i_str(&mp(3, 1.6, 0.3), 4.0).is_err());
    }
}
