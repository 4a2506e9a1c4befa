//! Power-law fits of the symbol against `λ`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares line through `(ln x, ln y)`: `y ≈ prefactor · x^slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub prefactor: f64,
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::domain("power-law fit needs at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain("power-law fit needs positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("power-law fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(PowerLawFit {
        slope,
        intercept,
        prefactor: intercept.exp(),
    })
}

/// Smallest `ρ` with `|h(λ) + η λ^{−e}| ≤ ρ λ^{−2s}` on the grid, `e = 2s − 2 + 2α`.
pub fn fit_rho(lambdas: &[f64], h: &[f64], eta: f64, s: f64, alpha: f64) -> f64 {
    let e = 2.0 * s - 2.0 + 2.0 * alpha;
    lambdas
        .iter()
        .zip(h)
        .map(|(l, hv)| (hv + eta * l.powf(-e)).abs() * l.powf(2.0 * s))
        .fold(0.0, f64::max)
}

/// Local log-slopes `d ln|y| / d ln x`, centred where both neighbours exist.
pub fn local_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let sl = |i: usize, j: usize| (ys[j].abs().ln() - ys[i].abs().ln()) / (xs[j].ln() - xs[i].ln());
    (0..n)
        .map(|i| match n {
            0 | 1 => f64::NAN,
            _ if i == 0 => sl(0, 1),
            _ if i == n - 1 => sl(n - 2, n - 1),
            _ => sl(i - 1, i + 1),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-12);
        for s in local_slopes(&xs, &ys) {
            assert!((s + 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_is_the_worst_scaled_residual() {
        let ls = [1.0, 2.0];
        let h = [-1.0 + 0.5, -0.5 + 0.25 * 0.25];
        // s = 1, α = 0.5: e = 1, 2s = 2.
        let r = fit_rho(&ls, &h, 1.0, 1.0, 0.5);
        assert!((r - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_data() {
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, -1.0]).is_err());
        assert!(fit_power_law(&[1.0], &[1.0]).is_err());
    }
}
