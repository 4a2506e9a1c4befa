//! Gamma-family special functions, real and complex.
//!
//! Everything is built on a single Lanczos approximation (g = 7, nine terms)
//! valid for `Re z >= 1/2`; the left half-plane is reached through the
//! reflection formula `Γ(z)Γ(1-z) = π / sin(πz)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used by the Mellin machinery.
pub type ComplexValue = Complex64;

/// Distance to a non-positive integer below which an argument is a pole.
pub const POLE_TOLERANCE: f64 = 1e-14;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Nearest non-positive integer to `z` if `z` sits on a pole.
fn pole_index(re: f64, im: f64) -> Option<f64> {
    let n = re.round();
    if n <= 0.0 && im.abs() < POLE_TOLERANCE && (re - n).abs() < POLE_TOLERANCE {
        Some(n)
    } else {
        None
    }
}

/// `sin(πx)` with argument reduction so that zeros land exactly on integers.
pub fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

fn sin_pi_complex(z: Complex64) -> Complex64 {
    let n = z.re.round();
    let r = Complex64::new(z.re - n, z.im);
    let s = (r * PI).sin();
    if (n as i64).rem_euclid(2) == 0 {
        s
    } else {
        -s
    }
}

/// `ln sin(πz)` up to a multiple of `2πi`, without overflow for large `|Im z|`.
fn ln_sin_pi_complex(z: Complex64) -> Complex64 {
    if z.im.abs() < 20.0 {
        return sin_pi_complex(z).ln();
    }
    let w = z * PI;
    let i = Complex64::new(0.0, 1.0);
    let ln_2i = Complex64::new(2f64.ln(), 0.5 * PI);
    if z.im > 0.0 {
        // sin w = e^{-iw} (e^{2iw} - 1) / (2i), with |e^{2iw}| tiny.
        -i * w + ((2.0 * i * w).exp() - 1.0).ln() - ln_2i
    } else {
        // sin w = e^{iw} (1 - e^{-2iw}) / (2i).
        i * w + (1.0 - (-2.0 * i * w).exp()).ln() - ln_2i
    }
}

fn lanczos_ln_gamma(z: Complex64) -> Complex64 {
    let zm1 = z - 1.0;
    let mut acc = Complex64::new(LANCZOS_COEF[0], 0.0);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (zm1 + i as f64);
    }
    let t = zm1 + LANCZOS_G + 0.5;
    (zm1 + 0.5) * t.ln() - t + LN_SQRT_2PI + acc.ln()
}

/// Logarithm of the Gamma function on the complex plane.
///
/// The returned value satisfies `exp(log_gamma(z)) = Γ(z)`; on the positive
/// real axis it is real, and for negative real `z` the imaginary part
/// carries the sign of `Γ(z)` as `iπ`.
pub fn log_gamma(z: ComplexValue) -> Result<ComplexValue> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain(format!("log_gamma of non-finite {z}")));
    }
    if pole_index(z.re, z.im).is_some() {
        return Err(Error::Pole { re: z.re, im: z.im });
    }
    if z.re >= 0.5 {
        Ok(lanczos_ln_gamma(z))
    } else {
        Ok(Complex64::new(PI.ln(), 0.0) - ln_sin_pi_complex(z) - lanczos_ln_gamma(1.0 - z))
    }
}

/// `Γ(z)` for complex `z`.
pub fn gamma_complex(z: ComplexValue) -> Result<ComplexValue> {
    log_gamma(z).map(|l| l.exp())
}

/// `1/Γ(z)`, an entire function: zero at the poles of `Γ`.
pub fn recip_gamma(z: ComplexValue) -> ComplexValue {
    match log_gamma(z) {
        Ok(l) => (-l).exp(),
        Err(_) => Complex64::new(0.0, 0.0),
    }
}

/// `Γ(x)` for real `x`, with the correct sign on the negative axis.
pub fn gamma_real(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("gamma of non-finite {x}")));
    }
    if pole_index(x, 0.0).is_some() {
        return Err(Error::Pole { re: x, im: 0.0 });
    }
    if x >= 0.5 {
        Ok(lanczos_ln_gamma(Complex64::new(x, 0.0)).re.exp())
    } else {
        Ok(PI / (sin_pi(x) * gamma_real(1.0 - x)?))
    }
}

/// `ln|Γ(x)|` together with the sign of `Γ(x)`.
pub fn ln_gamma_real(x: f64) -> Result<(f64, f64)> {
    if pole_index(x, 0.0).is_some() {
        return Err(Error::Pole { re: x, im: 0.0 });
    }
    if x >= 0.5 {
        Ok((lanczos_ln_gamma(Complex64::new(x, 0.0)).re, 1.0))
    } else {
        let s = sin_pi(x);
        let (lg, sg) = ln_gamma_real(1.0 - x)?;
        Ok((PI.ln() - s.abs().ln() - lg, sg * s.signum()))
    }
}

/// Angular Beta integral `∫₀^π |sin θ|^γ |cos θ|^η dθ`.
pub fn beta_angular(gamma_exp: f64, eta_exp: f64) -> Result<f64> {
    if !(gamma_exp > -1.0 && eta_exp > -1.0) {
        return Err(Error::domain(format!(
            "beta_angular needs exponents > -1, got ({gamma_exp}, {eta_exp})"
        )));
    }
    let (a, _) = ln_gamma_real(0.5 * (gamma_exp + 1.0))?;
    let (b, _) = ln_gamma_real(0.5 * (eta_exp + 1.0))?;
    let (c, _) = ln_gamma_real(0.5 * (gamma_exp + eta_exp + 2.0))?;
    Ok((a + b - c).exp())
}

/// Surface area of the unit sphere `S^{k}` in `R^{k+1}`, i.e. `2π^{(k+1)/2}/Γ((k+1)/2)`.
///
/// `S^0` is two points.
pub fn sphere_area(k: usize) -> f64 {
    let h = 0.5 * (k as f64 + 1.0);
    2.0 * PI.powf(h) / gamma_real(h).expect("positive argument")
}
