//! Divergence-free Kraichnan noise on the lattice and the operator `B[M]σ = (σ·∇)M − (M·∇)σ`.
//!
//! Every lattice wavevector `k` carries `d−1` orthonormal polarizations `a ⊥ k`, each in a
//! cosine and a sine phase: `σ = ⟨k⟩^{−(d+2α)/2} a cos(2πk·x)` and the same with `sin`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::lattice::{Lattice, SpectralField};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMode {
    /// Lattice index of the wavevector.
    pub k: usize,
    /// Index of the polarization among the `d−1` stored for `k`.
    pub polarization: usize,
    pub amplitude: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBasis {
    pub d: usize,
    pub alpha: f64,
    pub modes: Vec<NoiseMode>,
    /// `Q(0) = c0_truncated · I`.
    pub c0_truncated: f64,
    amp_sq: Vec<f64>,
    pols: Vec<f64>,
}

/// Orthonormal basis of `k⊥` by Gram–Schmidt over the coordinate axes.
pub(crate) fn orthonormal_complement(k: &[f64]) -> Vec<f64> {
    let d = k.len();
    let k2: f64 = k.iter().map(|x| x * x).sum();
    let mut out: Vec<f64> = Vec::with_capacity((d - 1) * d);
    for axis in 0..d {
        if out.len() == (d - 1) * d {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        let kv = k[axis] / k2;
        for (x, ki) in v.iter_mut().zip(k) {
            *x -= kv * ki;
        }
        for b in out.chunks(d) {
            let p: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
            for (x, bi) in v.iter_mut().zip(b) {
                *x -= p * bi;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            out.extend(v.iter().map(|x| x / n));
        }
    }
    out
}

impl NoiseBasis {
    pub fn amplitude_sq(&self, k: usize) -> f64 {
        self.amp_sq[k]
    }

    /// Polarization `j` of wavevector `k`.
    pub fn polarization(&self, k: usize, j: usize) -> &[f64] {
        let d = self.d;
        let base = (k * (d - 1) + j) * d;
        &self.pols[base..base + d]
    }

    /// The same basis with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut nb = self.clone();
        nb.amp_sq.iter_mut().for_each(|a| *a *= factor * factor);
        nb.modes.iter_mut().for_each(|m| m.amplitude *= factor.abs());
        nb.c0_truncated *= factor * factor;
        nb
    }

    /// `Σ_k amp² Σ_j a_j a_jᵀ`, which should equal `c0_truncated · I`.
    pub fn covariance_at_origin(&self) -> Vec<f64> {
        let d = self.d;
        let mut q = vec![0.0; d * d];
        for k in 0..self.amp_sq.len() {
            for j in 0..d - 1 {
                let a = self.polarization(k, j);
                for r in 0..d {
                    for c in 0..d {
                        q[r * d + c] += self.amp_sq[k] * a[r] * a[c];
                    }
                }
            }
        }
        q
    }
}

/// Builds the noise basis over every lattice wavevector.
pub fn build_noise_basis(lat: &Lattice, alpha: f64) -> Result<NoiseBasis> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("need 0 < alpha < 1, got {alpha}")));
    }
    let d = lat.d;
    let expo = -0.5 * (d as f64 + 2.0 * alpha);
    let mut amp_sq = Vec::with_capacity(lat.len());
    let mut pols = Vec::with_capacity(lat.len() * (d - 1) * d);
    let mut modes = Vec::with_capacity(lat.len() * (d - 1) * 2);
    for k in 0..lat.len() {
        let kv: Vec<f64> = lat.mode(k).iter().map(|&x| x as f64).collect();
        let k2: f64 = kv.iter().map(|x| x * x).sum();
        let a2 = (1.0 + k2).powf(expo);
        amp_sq.push(a2);
        pols.extend(orthonormal_complement(&kv));
        for j in 0..d - 1 {
            for phase in [Phase::Cos, Phase::Sin] {
                modes.push(NoiseMode {
                    k,
                    polarization: j,
                    amplitude: a2.sqrt(),
                    phase,
                });
            }
        }
    }
    let c0_truncated = (d as f64 - 1.0) / d as f64 * amp_sq.iter().sum::<f64>();
    let nb = NoiseBasis {
        d,
        alpha,
        modes,
        c0_truncated,
        amp_sq,
        pols,
    };
    let q = nb.covariance_at_origin();
    let mut off = 0.0f64;
    let mut diag = 0.0f64;
    for r in 0..d {
        for c in 0..d {
            if r == c {
                diag = diag.max((q[r * d + c] - c0_truncated).abs());
            } else {
                off = off.max(q[r * d + c].abs());
            }
        }
    }
    if off > 1e-14 * c0_truncated.max(1.0) || diag > 1e-12 * c0_truncated {
        return Err(Error::NonConvergence {
            what: "isotropy of the truncated noise covariance".into(),
            error: off.max(diag),
        });
    }
    Ok(nb)
}

/// Fourier coefficients of one noise mode at `+k` and `−k`.
fn mode_coefficients(mode: &NoiseMode) -> (Complex64, Complex64) {
    let h = 0.5 * mode.amplitude;
    match mode.phase {
        Phase::Cos => (Complex64::new(h, 0.0), Complex64::new(h, 0.0)),
        Phase::Sin => (Complex64::new(0.0, -h), Complex64::new(0.0, h)),
    }
}

/// Output buffer for sparse applications of `B`, remembering which modes were written.
#[derive(Debug, Clone)]
pub struct BScratch {
    pub field: SpectralField,
    pub touched: Vec<usize>,
    mark: Vec<bool>,
}

impl BScratch {
    pub fn new(lat: &Lattice) -> Self {
        BScratch {
            field: SpectralField::zeros(lat),
            touched: Vec::new(),
            mark: vec![false; lat.len()],
        }
    }

    pub fn clear(&mut self) {
        for &n in &self.touched {
            self.field.at_mut(n).iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            self.mark[n] = false;
        }
        self.touched.clear();
    }

    /// `Σ_touched |2πn|^{2e}|·|²`.
    pub fn norm_sq(&self, weights: &[f64]) -> f64 {
        self.touched
            .iter()
            .map(|&n| weights[n] * self.field.at(n).iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// Adds `c · 2πi[(a·m)M̂(m) − (M̂(m)·q)a]` at mode `m + q` for every `m` in `support`.
fn push_shifted(
    lat: &Lattice,
    field: &SpectralField,
    support: &[usize],
    q: usize,
    a: &[f64],
    c: Complex64,
    out: &mut BScratch,
) {
    let d = lat.d;
    let qv = lat.mode(q);
    let ic = Complex64::new(0.0, TWO_PI) * c;
    for &m in support {
        let Some(n) = lat.add(m, q) else { continue };
        let mv = lat.mode(m);
        let src = field.at(m);
        let am: f64 = a.iter().zip(mv).map(|(x, &y)| x * y as f64).sum();
        let mq: Complex64 = src.iter().zip(qv).map(|(x, &y)| x * y as f64).sum();
        if !out.mark[n] {
            out.mark[n] = true;
            out.touched.push(n);
        }
        let dst = out.field.at_mut(n);
        for i in 0..d {
            dst[i] += ic * (src[i] * am - mq * a[i]);
        }
    }
}

/// `B[M]σ` for one noise mode, Galerkin-truncated to the lattice.
pub fn apply_b(lat: &Lattice, m: &SpectralField, nb: &NoiseBasis, mode: &NoiseMode) -> SpectralField {
    let support = m.support();
    let mut out = BScratch::new(lat);
    apply_b_sparse(lat, m, &support, nb, mode, &mut out);
    out.field
}

/// As [`apply_b`], accumulating into `out`; only modes in `support` are read from `m`.
pub fn apply_b_sparse(
    lat: &Lattice,
    m: &SpectralField,
    support: &[usize],
    nb: &NoiseBasis,
    mode: &NoiseMode,
    out: &mut BScratch,
) {
    let a = nb.polarization(mode.k, mode.polarization);
    let (cp, cm) = mode_coefficients(mode);
    push_shifted(lat, m, support, mode.k, a, cp, out);
    push_shifted(lat, m, support, lat.neg(mode.k), a, cm, out);
}

/// `(d−1)/d · Σ_k amp² |2πk|²`: the rate at which the stretching Itô term feeds `‖M‖²_{L²}`.
pub fn l2_drift_coefficient(lat: &Lattice, nb: &NoiseBasis) -> f64 {
    let d = nb.d as f64;
    (d - 1.0) / d * (0..lat.len()).map(|k| nb.amp_sq[k] * lat.wave_sq(k)).sum::<f64>()
}

/// `Σ_{k,j} amp² a_j a_jᵀ` in the `(0,0)` slot: the transport Itô coefficient of `‖∇M‖²`.
pub fn transport_ito_coefficient(nb: &NoiseBasis) -> f64 {
    nb.covariance_at_origin()[0]
}

/// Largest entry of `Σ_k amp² P⊥_k ⊗ k`, the tensor multiplying the mixed Itô term.
pub fn mixed_ito_residual(lat: &Lattice, nb: &NoiseBasis) -> f64 {
    let d = nb.d;
    let mut t = vec![0.0; d * d * d];
    for k in 0..lat.len() {
        let kv = lat.mode(k);
        for j in 0..d - 1 {
            let a = nb.polarization(k, j);
            for l in 0..d {
                for i in 0..d {
                    for m in 0..d {
                        t[(l * d + i) * d + m] += nb.amp_sq[k] * a[l] * a[i] * kv[m] as f64;
                    }
                }
            }
        }
    }
    t.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn mode_count_for_unit_cube() {
        let lat = Lattice::new(3, 1).unwrap();
        let nb = build_noise_basis(&lat, 0.25).unwrap();
        assert_eq!(nb.modes.len(), 26 * 2 * 2);
    }

    #[test]
    fn polarizations_are_orthonormal_and_transverse() {
        let lat = Lattice::new(3, 2).unwrap();
        let nb = build_noise_basis(&lat, 0.5).unwrap();
        for k in 0..lat.len() {
            let kv = lat.mode(k);
            for j in 0..2 {
                let a = nb.polarization(k, j);
                let ak: f64 = a.iter().zip(kv).map(|(x, &y)| x * y as f64).sum();
                assert!(ak.abs() < 1e-14);
                assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
            }
            let a = nb.polarization(k, 0);
            let b = nb.polarization(k, 1);
            assert!(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn c0_truncated_increases_with_cutoff() {
        let mut prev = 0.0;
        for n in 1..6 {
            let lat = Lattice::new(3, n).unwrap();
            let c = build_noise_basis(&lat, 0.3).unwrap().c0_truncated;
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let lat = Lattice::new(2, 3).unwrap();
        let nb = build_noise_basis(&lat, 0.5).unwrap();
        let z = SpectralField::zeros(&lat);
        for mode in nb.modes.iter().take(10) {
            assert!(apply_b(&lat, &z, &nb, mode).coeffs.iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn single_mode_output_sits_on_shifted_modes() {
        let lat = Lattice::new(3, 3).unwrap();
        let nb = build_noise_basis(&lat, 0.25).unwrap();
        let n0 = lat.index_of(&[1, 0, 0]).unwrap();
        let mut m = SpectralField::zeros(&lat);
        m.at_mut(n0)[1] = Complex64::new(1.0, 0.0);
        m.at_mut(lat.neg(n0))[1] = Complex64::new(1.0, 0.0);
        let k = lat.index_of(&[0, 1, 1]).unwrap();
        let mode = nb.modes.iter().find(|md| md.k == k).unwrap();
        let out = apply_b(&lat, &m, &nb, mode);
        let allowed: Vec<usize> = [[1, 1, 1], [1, -1, -1], [-1, 1, 1], [-1, -1, -1]]
            .iter()
            .map(|c| lat.index_of(c).unwrap())
            .collect();
        for i in out.support() {
            assert!(allowed.contains(&i), "unexpected mode {:?}", lat.mode(i));
        }
    }

    #[test]
    fn output_is_solenoidal_and_real() {
        let lat = Lattice::new(3, 4).unwrap();
        let nb = build_noise_basis(&lat, 0.25).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let m = SpectralField::random(&lat, 1.0, Some(20), &mut rng);
        for mode in nb.modes.iter().step_by(37) {
            let out = apply_b(&lat, &m, &nb, mode);
            assert!(out.divergence_residual(&lat) < 1e-13);
            assert!(out.reality_residual(&lat) < 1e-13);
        }
    }

    #[test]
    fn transport_term_cancels_laplacian_and_mixed_term_vanishes() {
        for (d, n) in [(2, 6), (3, 4)] {
            let lat = Lattice::new(d, n).unwrap();
            let nb = build_noise_basis(&lat, 0.4).unwrap();
            assert!((transport_ito_coefficient(&nb) - nb.c0_truncated).abs() <= 1e-12 * nb.c0_truncated);
            assert!(mixed_ito_residual(&lat, &nb) < 1e-12);
        }
    }
}
