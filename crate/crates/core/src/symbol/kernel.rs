//! The angular kernel `f_{a,b,s}(r) = r^a ∫₀^π sin^b θ (1 − 2r cos θ + r²)^{−s} dθ`.

use crate::error::{Error, Result};
use crate::quad::{integrate_with_breaks, QuadOptions, QuadResult};
use crate::specfun::beta_angular;

/// `1 − 2r cos θ + r²` written as `(1−r)² + 4r sin²(θ/2)`, exact near `r = 1, θ = 0`.
#[inline]
pub fn distance_sq(r: f64, theta: f64) -> f64 {
    let h = (0.5 * theta).sin();
    (1.0 - r) * (1.0 - r) + 4.0 * r * h * h
}

/// Breakpoints in `θ` resolving the peak of width `|1 − r|` at `θ = 0`.
pub(crate) fn theta_breaks(r: f64) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    let delta = (1.0 - r).abs();
    let mut pts = vec![0.0];
    if delta < 0.5 {
        let mut x = delta.max(1e-12);
        while x < 0.5 {
            pts.push(x);
            x *= 4.0;
        }
        pts.push(0.5);
    }
    pts.push(0.5 * pi);
    pts.push(pi);
    pts
}

/// `∫₀^π sin^b θ (1 − 2r cos θ + r²)^{−s} dθ`.
pub fn angular_integral(b: f64, s: f64, r: f64, opts: &QuadOptions) -> QuadResult {
    scaled_angular_integral(0.0, b, s, r, opts)
}

/// `r^a ∫₀^π sin^b θ (1 − 2r cos θ + r²)^{−s} dθ` with the power folded into
/// the exponent, so extreme `r` neither overflows nor produces `∞·0`.
fn scaled_angular_integral(a: f64, b: f64, s: f64, r: f64, opts: &QuadOptions) -> QuadResult {
    let la = a * r.ln();
    let g = |theta: f64| {
        let sn = theta.sin();
        if sn <= 0.0 {
            return 0.0;
        }
        (la + b * sn.ln() - s * distance_sq(r, theta).ln()).exp()
    };
    integrate_with_breaks(g, &theta_breaks(r), opts)
}

fn check(b: f64, s: f64, r: f64) -> Result<()> {
    if !(b > 0.0 && s > 0.0) {
        return Err(Error::domain(format!("angular kernel needs b, s > 0, got b = {b}, s = {s}")));
    }
    if b <= 2.0 * s - 1.0 {
        return Err(Error::Divergence(format!(
            "angular kernel needs b > 2s - 1 for integrability at r = 1, got b = {b}, s = {s}"
        )));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("angular kernel needs r >= 0, got {r}")));
    }
    Ok(())
}

/// `f_{a,b,s}(r)` with absolute error at most `1e-10·(1 + value)`.
pub fn angular_kernel(a: f64, b: f64, s: f64, r: f64) -> Result<f64> {
    check(b, s, r)?;
    if r == 0.0 {
        return if a > 0.0 {
            Ok(0.0)
        } else if a == 0.0 {
            beta_angular(b, 0.0)
        } else {
            Err(Error::domain("angular kernel with a < 0 is singular at r = 0"))
        };
    }
    let opts = QuadOptions::new(1e-300, 1e-11);
    Ok(scaled_angular_integral(a, b, s, r, &opts).require("angular kernel")?.value)
}
