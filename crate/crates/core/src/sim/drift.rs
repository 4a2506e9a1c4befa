//! Exact drift of `‖M‖²_{Ḣ⁻ˢ}` on the lattice.
//!
//! Itô's formula for the truncated equation gives
//! `d E‖M‖²_{Ḣ⁻ˢ}/dt = −(2ν + c₀)‖M‖²_{Ḣ^{1−s}} + Σ_σ ‖B[M]σ‖²_{Ḣ⁻ˢ}`.
//! The last sum is evaluated either mode by mode over the noise basis or through the
//! lattice symbol
//! `G(m) = (2π)² Σ_k amp(k)² |2π(m+k)|^{−2s} S(m,k)` with
//! `S = |P⊥_k m|² I + (d−1)kkᵀ − (P⊥_k m)kᵀ − k(P⊥_k m)ᵀ`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::lattice::{Lattice, SpectralField};
use crate::sim::noise::{apply_b_sparse, orthonormal_complement, BScratch, NoiseBasis};

const FOUR_PI_SQ: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

/// Relative tolerance of the basis-sum versus symbol comparison.
pub const ISOMETRY_TOLERANCE: f64 = 1e-10;

/// `|2πn|^{−2s}` for every lattice mode.
pub fn hs_weights(lat: &Lattice, s: f64) -> Vec<f64> {
    (0..lat.len()).map(|i| lat.weight(i, -s)).collect()
}

/// The `d×d` lattice symbol `G(m)` (row-major).
pub fn hs_symbol(lat: &Lattice, nb: &NoiseBasis, w: &[f64], m: usize) -> Vec<f64> {
    let d = lat.d;
    let mv: Vec<f64> = lat.mode(m).iter().map(|&x| x as f64).collect();
    let mut g = vec![0.0; d * d];
    let mut pm = vec![0.0; d];
    for k in 0..lat.len() {
        let Some(n) = lat.add(m, k) else { continue };
        let kv = lat.mode(k);
        let k2: f64 = kv.iter().map(|&x| (x * x) as f64).sum();
        let mk: f64 = mv.iter().zip(kv).map(|(a, &b)| a * b as f64).sum();
        for i in 0..d {
            pm[i] = mv[i] - mk / k2 * kv[i] as f64;
        }
        let pm2: f64 = pm.iter().map(|x| x * x).sum();
        let c = nb.amplitude_sq(k) * w[n];
        let dm1 = d as f64 - 1.0;
        for i in 0..d {
            let ki = kv[i] as f64;
            for j in 0..d {
                let kj = kv[j] as f64;
                let mut sij = dm1 * ki * kj - pm[i] * kj - ki * pm[j];
                if i == j {
                    sij += pm2;
                }
                g[i * d + j] += c * sij;
            }
        }
    }
    g.iter_mut().for_each(|x| *x *= FOUR_PI_SQ);
    g
}

fn quad_form(g: &[f64], v: &[Complex64]) -> f64 {
    let d = v.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += g[i * d + j] * (v[i].conj() * v[j]).re;
        }
    }
    acc
}

/// `‖B[M]‖²_{HS}` from the lattice symbol.
pub fn hs_norm_symbol(lat: &Lattice, m: &SpectralField, nb: &NoiseBasis, s: f64) -> f64 {
    let w = hs_weights(lat, s);
    let support = m.support();
    let parts: Vec<f64> = support
        .par_iter()
        .map(|&i| quad_form(&hs_symbol(lat, nb, &w, i), m.at(i)))
        .collect();
    parts.iter().sum()
}

/// `‖B[M]‖²_{HS}` by summing `‖B[M]σ‖²_{Ḣ⁻ˢ}` over every noise mode.
pub fn hs_norm_direct(lat: &Lattice, m: &SpectralField, nb: &NoiseBasis, s: f64) -> f64 {
    let w = hs_weights(lat, s);
    let support = m.support();
    let chunk = 64;
    let parts: Vec<f64> = nb
        .modes
        .par_chunks(chunk)
        .map(|modes| {
            let mut scratch = BScratch::new(lat);
            let mut acc = 0.0;
            for mode in modes {
                apply_b_sparse(lat, m, &support, nb, mode, &mut scratch);
                acc += scratch.norm_sq(&w);
                scratch.clear();
            }
            acc
        })
        .collect();
    parts.iter().sum()
}

/// `−(2ν + c₀)‖M‖²_{Ḣ^{1−s}}`.
pub fn dissipation(lat: &Lattice, m: &SpectralField, nb: &NoiseBasis, nu: f64, s: f64) -> f64 {
    -(2.0 * nu + nb.c0_truncated) * m.norm_sq(lat, 1.0 - s)
}

/// Drift of `‖M‖²_{Ḣ⁻ˢ}` under the truncated Itô equation.
pub fn exact_drift(lat: &Lattice, m: &SpectralField, nb: &NoiseBasis, nu: f64, s: f64) -> f64 {
    dissipation(lat, m, nb, nu, s) + hs_norm_symbol(lat, m, nb, s)
}

/// [`exact_drift`] after confirming that the basis sum and the lattice symbol agree.
pub fn exact_drift_checked(lat: &Lattice, m: &SpectralField, nb: &NoiseBasis, nu: f64, s: f64) -> Result<f64> {
    let sym = hs_norm_symbol(lat, m, nb, s);
    let direct = hs_norm_direct(lat, m, nb, s);
    let rel = (sym - direct).abs() / sym.abs().max(f64::MIN_POSITIVE);
    if rel > ISOMETRY_TOLERANCE {
        return Err(Error::NonConvergence {
            what: "truncated Itô isometry".into(),
            error: rel,
        });
    }
    Ok(dissipation(lat, m, nb, nu, s) + sym)
}

/// Bound `v*H(m)v ≤ (−η̂|2πm|^{2−2α} + ρ̂)|2πm|^{−2s}|v|²` on every mode and `v ⊥ m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeDriftFit {
    pub eta_hat: f64,
    pub rho_hat: f64,
    /// `ρ̂/η̂`: the bound certifies dissipation for `|2πm|^{2−2α}` above this value.
    pub crossover: f64,
    /// Least-squares slope (negated) over modes with `|m|_∞ ≤ n_max/2`, for comparison.
    pub eta_inner_lsq: f64,
}

/// Largest eigenvalue over `m⊥` of the per-step drift symbol, divided by `|2πm|^{−2s}`.
///
/// With `dt = Some(τ)` the symbol is that of one explicit Euler step,
/// `G(m) − (2a q − τ a² q²)|2πm|^{−2s}`, `a = ν + c₀/2`, `q = |2πm|²`.
pub fn scaled_top_eigenvalues(lat: &Lattice, nb: &NoiseBasis, nu: f64, s: f64, dt: Option<f64>) -> Vec<f64> {
    let d = lat.d;
    let w = hs_weights(lat, s);
    let a = nu + 0.5 * nb.c0_truncated;
    let half = lat.len() / 2;
    // G(−m) = G(m), so half the lattice suffices.
    let top: Vec<f64> = (0..half)
        .into_par_iter()
        .map(|i| {
            let g = hs_symbol(lat, nb, &w, i);
            let mv: Vec<f64> = lat.mode(i).iter().map(|&x| x as f64).collect();
            let basis = orthonormal_complement(&mv);
            let r = d - 1;
            let mut red = DMatrix::<f64>::zeros(r, r);
            for p in 0..r {
                for q in 0..r {
                    let (bp, bq) = (&basis[p * d..(p + 1) * d], &basis[q * d..(q + 1) * d]);
                    let mut acc = 0.0;
                    for x in 0..d {
                        for y in 0..d {
                            acc += bp[x] * g[x * d + y] * bq[y];
                        }
                    }
                    red[(p, q)] = acc;
                }
            }
            let red = 0.5 * (&red + red.transpose());
            let lmax = SymmetricEigen::new(red).eigenvalues.max();
            let q = lat.wave_sq(i);
            let diss = 2.0 * a * q - dt.map_or(0.0, |t| t * a * a * q * q);
            lmax / w[i] - diss
        })
        .collect();
    (0..lat.len()).map(|i| top[i.min(lat.neg(i))]).collect()
}

/// `max_m (y_m + η x_m)`.
fn envelope(xs: &[f64], ys: &[f64], eta: f64) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| y + eta * x).fold(f64::NEG_INFINITY, f64::max)
}

/// Linear upper bound `y ≤ −η̂x + ρ̂` on the points `(x_m, y_m)`, `x_m > 0`.
///
/// Every `η ≥ 0` paired with `ρ(η) = max_m(y_m + ηx_m)` is a valid bound. When some `y_m > 0`
/// the pair minimizing the crossover `ρ/η` is returned; otherwise `ρ̂ = 0` and `η̂` is the
/// largest slope keeping the bound nonpositive.
pub fn envelope_bound(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    if ys.iter().all(|&y| y <= 0.0) {
        let eta = xs.iter().zip(ys).map(|(x, y)| -y / x).fold(f64::INFINITY, f64::min);
        return (eta, 0.0);
    }
    // ρ(η)/η = max_m(x_m + t y_m) with t = 1/η is convex in t; golden-section on ln t.
    let g = |lt: f64| {
        let t = lt.exp();
        xs.iter().zip(ys).map(|(x, y)| x + t * y).fold(f64::NEG_INFINITY, f64::max)
    };
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut ga, mut gb) = (g(a), g(b));
    for _ in 0..200 {
        if ga <= gb {
            hi = b;
            b = a;
            gb = ga;
            a = hi - phi * (hi - lo);
            ga = g(a);
        } else {
            lo = a;
            a = b;
            ga = gb;
            b = lo + phi * (hi - lo);
            gb = g(b);
        }
    }
    let eta = (-0.5 * (lo + hi)).exp();
    (eta, envelope(xs, ys, eta).max(0.0))
}

/// Fits the lattice drift bound from the top eigenvalues of the drift symbol.
pub fn fit_lattice_drift(lat: &Lattice, nb: &NoiseBasis, nu: f64, s: f64, dt: Option<f64>) -> Result<LatticeDriftFit> {
    let alpha = nb.alpha;
    let top = scaled_top_eigenvalues(lat, nb, nu, s, dt);
    let xs: Vec<f64> = (0..lat.len()).map(|i| lat.wave_sq(i).powf(1.0 - alpha)).collect();
    let inner = (lat.n_max / 2).max(1) as i32;
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (i, (&x, &y)) in xs.iter().zip(&top).enumerate() {
        if lat.mode(i).iter().any(|c| c.abs() > inner) {
            continue;
        }
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1;
    }
    let nf = n as f64;
    let den = nf * sxx - sx * sx;
    if n < 2 || den <= 0.0 {
        return Err(Error::domain("lattice too small to fit the drift symbol"));
    }
    let (eta_hat, rho_hat) = envelope_bound(&xs, &top);
    Ok(LatticeDriftFit {
        eta_hat,
        rho_hat,
        crossover: if eta_hat > 0.0 { rho_hat / eta_hat } else { f64::INFINITY },
        eta_inner_lsq: -(nf * sxy - sx * sy) / den,
    })
}
