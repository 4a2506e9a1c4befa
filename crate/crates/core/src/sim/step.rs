//! Euler–Maruyama step of `dM = −B[M]dW + (ν + c₀/2)ΔM dt` on the lattice.
//!
//! The noise term is evaluated pseudo-spectrally: since `u` and `M` are divergence-free,
//! `(u·∇)M − (M·∇)u = ∇·(u⊗M − M⊗u)`, so one product of physical-space fields and one
//! divergence in Fourier space suffice. The grid has at least `3n_max + 1` points per
//! axis, which makes the truncated convolution exact.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::sim::lattice::{Lattice, SpectralField};
use crate::sim::noise::NoiseBasis;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest admissible `dt·(ν + c₀/2)·max|2πn|²`.
pub const STABILITY_LIMIT: f64 = 0.5;

/// Largest stable step: `max|2πn|²` is attained at the lattice corner, `(2π)² d n_max²`.
pub fn max_stable_dt(lat: &Lattice, nb: &NoiseBasis, nu: f64) -> f64 {
    let corner = TWO_PI * TWO_PI * (lat.d * lat.n_max * lat.n_max) as f64;
    STABILITY_LIMIT / ((nu + 0.5 * nb.c0_truncated) * corner)
}

fn smooth_size(min: usize) -> usize {
    (min..)
        .find(|&n| {
            let mut r = n;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("5-smooth numbers are unbounded")
}

/// Multidimensional complex FFT on a `g^d` grid, axis by axis.
///
/// Lattice fields occupy only the band `|c| ≤ n_max` of each axis. Inverse transforms start
/// from band-limited data and forward transforms are only read back on the band, so lines
/// lying entirely outside the band in an untransformed (inverse) or discarded (forward)
/// coordinate are skipped.
struct FftGrid {
    d: usize,
    g: usize,
    in_band: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    block: Vec<Complex64>,
}

impl FftGrid {
    fn new(d: usize, g: usize, n_max: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(g);
        let inv = planner.plan_fft_inverse(g);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let in_band = (0..g).map(|c| c <= n_max || c >= g - n_max).collect();
        FftGrid {
            d,
            g,
            in_band,
            fwd,
            inv,
            scratch: vec![ZERO; len],
            block: vec![ZERO; g.pow(d as u32)],
        }
    }

    fn size(&self) -> usize {
        self.g.pow(self.d as u32)
    }

    /// True when every coordinate of the leading `axes` digits of `o` lies in the band.
    fn leading_in_band(&self, mut o: usize, axes: usize) -> bool {
        for _ in 0..axes {
            if !self.in_band[o % self.g] {
                return false;
            }
            o /= self.g;
        }
        true
    }

    fn transform_axis(&mut self, buf: &mut [Complex64], axis: usize, inverse: bool) {
        let g = self.g;
        let stride = g.pow((self.d - 1 - axis) as u32);
        let outer = buf.len() / (stride * g);
        let fft = if inverse { self.inv.clone() } else { self.fwd.clone() };
        for o in 0..outer {
            if !self.leading_in_band(o, axis) {
                continue;
            }
            let base = o * stride * g;
            if stride == 1 {
                fft.process_with_scratch(&mut buf[base..base + g], &mut self.scratch);
                continue;
            }
            // Gather the `stride` interleaved lines as contiguous rows, transform, scatter.
            let block = &mut self.block[..stride * g];
            for j in 0..g {
                let row = &buf[base + j * stride..base + (j + 1) * stride];
                for (inner, v) in row.iter().enumerate() {
                    block[inner * g + j] = *v;
                }
            }
            fft.process_with_scratch(block, &mut self.scratch);
            for j in 0..g {
                let row = &mut buf[base + j * stride..base + (j + 1) * stride];
                for (inner, v) in row.iter_mut().enumerate() {
                    *v = block[inner * g + j];
                }
            }
        }
    }

    fn transform(&mut self, buf: &mut [Complex64], inverse: bool) {
        if inverse {
            for axis in (0..self.d).rev() {
                self.transform_axis(buf, axis, true);
            }
        } else {
            for axis in 0..self.d {
                self.transform_axis(buf, axis, false);
            }
        }
    }
}

/// Reusable state for stepping fields on one lattice.
pub struct Stepper<'a> {
    lat: &'a Lattice,
    nb: &'a NoiseBasis,
    pub nu: f64,
    grid: FftGrid,
    /// Grid offset of each lattice mode.
    cell: Vec<usize>,
    phys_u: Vec<Vec<f64>>,
    phys_m: Vec<Vec<f64>>,
    buf: Vec<Complex64>,
    u_hat: SpectralField,
    y_hat: SpectralField,
    tensor: Vec<SpectralField>,
}

impl<'a> Stepper<'a> {
    pub fn new(lat: &'a Lattice, nb: &'a NoiseBasis, nu: f64) -> Result<Self> {
        if nb.d != lat.d {
            return Err(Error::domain("noise basis and lattice dimensions differ"));
        }
        if nu < 0.0 {
            return Err(Error::domain(format!("viscosity must satisfy nu >= 0, got {nu}")));
        }
        let g = smooth_size(3 * lat.n_max + 1);
        let grid = FftGrid::new(lat.d, g, lat.n_max);
        let cell = (0..lat.len())
            .map(|i| {
                lat.mode(i)
                    .iter()
                    .fold(0usize, |acc, &c| acc * g + c.rem_euclid(g as i32) as usize)
            })
            .collect();
        let size = grid.size();
        let d = lat.d;
        let pairs = d * (d - 1) / 2;
        Ok(Stepper {
            lat,
            nb,
            nu,
            grid,
            cell,
            phys_u: vec![vec![0.0; size]; d],
            phys_m: vec![vec![0.0; size]; d],
            buf: vec![ZERO; size],
            u_hat: SpectralField::zeros(lat),
            y_hat: SpectralField::zeros(lat),
            tensor: (0..pairs).map(|_| SpectralField::zeros(lat)).collect(),
        })
    }

    pub fn max_stable_dt(&self) -> f64 {
        max_stable_dt(self.lat, self.nb, self.nu)
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        let limit = self.max_stable_dt();
        if !(dt > 0.0) || dt > limit {
            return Err(Error::StabilityGuard { dt, limit });
        }
        Ok(())
    }

    /// Fills `u_hat` with the Fourier coefficients of `Σ_σ σ ΔW_σ`, `ΔW_σ ~ N(0, dt)`.
    fn draw_noise<R: Rng>(&mut self, dt: f64, rng: &mut R) {
        let lat = self.lat;
        let d = lat.d;
        let sd = dt.sqrt();
        self.u_hat.coeffs.iter_mut().for_each(|c| *c = ZERO);
        for k in 0..lat.len() {
            let h = 0.5 * self.nb.amplitude_sq(k).sqrt() * sd;
            let nk = lat.neg(k);
            for j in 0..d - 1 {
                let xc: f64 = rng.sample(StandardNormal);
                let xs: f64 = rng.sample(StandardNormal);
                let plus = Complex64::new(h * xc, -h * xs);
                let a = self.nb.polarization(k, j);
                for i in 0..d {
                    self.u_hat.coeffs[k * d + i] += plus * a[i];
                    self.u_hat.coeffs[nk * d + i] += plus.conj() * a[i];
                }
            }
        }
    }

    /// Physical-space values of the `d` components, two real fields per complex transform.
    fn to_physical(&mut self, f: &SpectralField, which_m: bool) {
        let d = self.lat.d;
        let mut comp = 0;
        while comp < d {
            self.buf.iter_mut().for_each(|c| *c = ZERO);
            let second = comp + 1 < d;
            for (i, &cell) in self.cell.iter().enumerate() {
                let a = f.coeffs[i * d + comp];
                let b = if second { f.coeffs[i * d + comp + 1] } else { ZERO };
                self.buf[cell] = a + Complex64::new(-b.im, b.re);
            }
            self.grid.transform(&mut self.buf, true);
            let out = if which_m { &mut self.phys_m } else { &mut self.phys_u };
            for (x, c) in self.buf.iter().enumerate() {
                out[comp][x] = c.re;
                if second {
                    out[comp + 1][x] = c.im;
                }
            }
            comp += 2;
        }
    }

    /// `ŷ = B[M]u` restricted to the lattice, with `M` already in `phys_m`.
    fn noise_term(&mut self) {
        let lat = self.lat;
        let d = lat.d;
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        let norm = 1.0 / self.grid.size() as f64;
        let mut p = 0;
        while p < pairs.len() {
            let second = p + 1 < pairs.len();
            for x in 0..self.buf.len() {
                let t = |(i, j): (usize, usize)| {
                    self.phys_u[j][x] * self.phys_m[i][x] - self.phys_m[j][x] * self.phys_u[i][x]
                };
                let a = t(pairs[p]);
                let b = if second { t(pairs[p + 1]) } else { 0.0 };
                self.buf[x] = Complex64::new(a, b);
            }
            self.grid.transform(&mut self.buf, false);
            for i in 0..lat.len() {
                let z = self.buf[self.cell[i]] * norm;
                let zc = self.buf[self.cell[lat.neg(i)]].conj() * norm;
                self.tensor[p].coeffs[i] = 0.5 * (z + zc);
                if second {
                    self.tensor[p + 1].coeffs[i] = Complex64::new(0.0, -0.5) * (z - zc);
                }
            }
            p += 2;
        }
        // ŷ_i(n) = Σ_j 2πi n_j T̂_ij(n), T antisymmetric.
        self.y_hat.coeffs.iter_mut().for_each(|c| *c = ZERO);
        for (pi, &(i, j)) in pairs.iter().enumerate() {
            for n in 0..lat.len() {
                let t = self.tensor[pi].coeffs[n];
                let mv = lat.mode(n);
                let it = Complex64::new(-t.im, t.re) * TWO_PI;
                self.y_hat.coeffs[n * d + i] += it * mv[j] as f64;
                self.y_hat.coeffs[n * d + j] -= it * mv[i] as f64;
            }
        }
    }

    /// `B[M]u` for a given noise field `u`, Galerkin-truncated.
    pub fn b_of(&mut self, m: &SpectralField, u: &SpectralField) -> SpectralField {
        self.to_physical(m, true);
        self.to_physical(u, false);
        self.noise_term();
        self.y_hat.clone()
    }

    fn heat_factor(&self, i: usize, dt: f64) -> f64 {
        1.0 - dt * (self.nu + 0.5 * self.nb.c0_truncated) * self.lat.wave_sq(i)
    }

    /// One Euler–Maruyama step; `antithetic` flips the sign of the Brownian increment.
    pub fn step<R: Rng>(&mut self, m: &mut SpectralField, dt: f64, rng: &mut R, antithetic: bool) -> Result<()> {
        self.check_dt(dt)?;
        self.draw_noise(dt, rng);
        self.to_physical(m, true);
        let u = std::mem::replace(&mut self.u_hat, SpectralField::zeros(self.lat));
        self.to_physical(&u, false);
        self.u_hat = u;
        self.noise_term();
        let sign = if antithetic { 1.0 } else { -1.0 };
        self.apply_update(m, dt, sign);
        Ok(())
    }

    /// Advances two states with opposite Brownian increments drawn once.
    pub fn step_pair<R: Rng>(&mut self, a: &mut SpectralField, b: &mut SpectralField, dt: f64, rng: &mut R) -> Result<()> {
        self.check_dt(dt)?;
        self.draw_noise(dt, rng);
        let u = std::mem::replace(&mut self.u_hat, SpectralField::zeros(self.lat));
        self.to_physical(&u, false);
        self.u_hat = u;
        self.to_physical(a, true);
        self.noise_term();
        self.apply_update(a, dt, -1.0);
        self.to_physical(b, true);
        self.noise_term();
        self.apply_update(b, dt, 1.0);
        Ok(())
    }

    fn apply_update(&self, m: &mut SpectralField, dt: f64, sign: f64) {
        let d = self.lat.d;
        for i in 0..self.lat.len() {
            let f = self.heat_factor(i, dt);
            for c in 0..d {
                let k = i * d + c;
                m.coeffs[k] = m.coeffs[k] * f + self.y_hat.coeffs[k] * sign;
            }
        }
        m.symmetrize(self.lat);
    }

    /// Antithetic Monte Carlo of the one-step drift `(E‖M_dt‖²_{Ḣ⁻ˢ} − ‖M‖²_{Ḣ⁻ˢ})/dt`
    /// over `pairs` pairs of increments. Returns the mean and its standard error.
    pub fn one_step_drift_mc<R: Rng>(
        &mut self,
        m: &SpectralField,
        s: f64,
        dt: f64,
        pairs: usize,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        self.check_dt(dt)?;
        if pairs < 2 {
            return Err(Error::domain("need at least two increment pairs"));
        }
        let lat = self.lat;
        let d = lat.d;
        let w: Vec<f64> = (0..lat.len()).map(|i| lat.weight(i, -s)).collect();
        let n0 = m.norm_sq(lat, -s);
        let heat: f64 = (0..lat.len())
            .map(|i| w[i] * self.heat_factor(i, dt).powi(2) * m.at(i).iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum();
        self.to_physical(m, true);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..pairs {
            self.draw_noise(dt, rng);
            let u = std::mem::replace(&mut self.u_hat, SpectralField::zeros(lat));
            self.to_physical(&u, false);
            self.u_hat = u;
            self.noise_term();
            let y2: f64 = (0..lat.len())
                .map(|i| w[i] * self.y_hat.coeffs[i * d..(i + 1) * d].iter().map(|c| c.norm_sqr()).sum::<f64>())
                .sum();
            // Mean of the ± pair: cross terms cancel exactly.
            let v = (heat - n0 + y2) / dt;
            sum += v;
            sum_sq += v * v;
        }
        let n = pairs as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Ok((mean, (var / n).sqrt()))
    }

    /// Exact expectation of the quantity estimated by [`Stepper::one_step_drift_mc`]:
    /// the continuous drift plus the `dt ‖(ν + c₀/2)ΔM‖²_{Ḣ⁻ˢ}` bias of the explicit step.
    pub fn one_step_drift_exact(&self, m: &SpectralField, s: f64, dt: f64) -> f64 {
        let lat = self.lat;
        let a = self.nu + 0.5 * self.nb.c0_truncated;
        let bias: f64 = (0..lat.len())
            .map(|i| {
                let q = lat.wave_sq(i);
                lat.weight(i, -s) * a * a * q * q * m.at(i).iter().map(|c| c.norm_sqr()).sum::<f64>()
            })
            .sum();
        crate::sim::drift::exact_drift(lat, m, self.nb, self.nu, s) + dt * bias
    }
}

/// One Euler–Maruyama step with a freshly planned [`Stepper`].
pub fn ito_step<R: Rng>(
    lat: &Lattice,
    m: &SpectralField,
    nb: &NoiseBasis,
    nu: f64,
    dt: f64,
    rng: &mut R,
) -> Result<SpectralField> {
    let mut st = Stepper::new(lat, nb, nu)?;
    let mut out = m.clone();
    st.step(&mut out, dt, rng, false)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::noise::{apply_b, build_noise_basis, NoiseMode, Phase};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(25), 25);
        assert_eq!(smooth_size(13), 15);
        assert_eq!(smooth_size(37), 40);
    }

    #[test]
    fn pseudo_spectral_matches_mode_sum() {
        for (d, n) in [(2, 4), (3, 3)] {
            let lat = Lattice::new(d, n).unwrap();
            let nb = build_noise_basis(&lat, 0.3).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(2);
            let m = SpectralField::random(&lat, 0.5, None, &mut rng);
            let mut st = Stepper::new(&lat, &nb, 0.0).unwrap();
            let picks: Vec<NoiseMode> = nb.modes.iter().step_by(5).take(12).copied().collect();
            for mode in picks {
                // The noise field of a single mode with unit increment.
                let mut u = SpectralField::zeros(&lat);
                let a = nb.polarization(mode.k, mode.polarization);
                let h = 0.5 * mode.amplitude;
                let (cp, cm) = match mode.phase {
                    Phase::Cos => (Complex64::new(h, 0.0), Complex64::new(h, 0.0)),
                    Phase::Sin => (Complex64::new(0.0, -h), Complex64::new(0.0, h)),
                };
                for i in 0..d {
                    u.at_mut(mode.k)[i] += cp * a[i];
                    u.at_mut(lat.neg(mode.k))[i] += cm * a[i];
                }
                let fast = st.b_of(&m, &u);
                let slow = apply_b(&lat, &m, &nb, &mode);
                let scale = slow.coeffs.iter().map(|c| c.norm()).fold(1e-300, f64::max);
                for (x, y) in fast.coeffs.iter().zip(&slow.coeffs) {
                    assert!((x - y).norm() < 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn zero_stays_zero_and_invariants_hold() {
        let lat = Lattice::new(3, 3).unwrap();
        let nb = build_noise_basis(&lat, 0.25).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let dt = 0.5 * max_stable_dt(&lat, &nb, 0.0);
        let z = SpectralField::zeros(&lat);
        let out = ito_step(&lat, &z, &nb, 0.0, dt, &mut rng).unwrap();
        assert!(out.coeffs.iter().all(|c| c.norm() == 0.0));
        let m = SpectralField::random(&lat, 1.0, None, &mut rng);
        let out = ito_step(&lat, &m, &nb, 0.0, dt, &mut rng).unwrap();
        assert!(out.divergence_residual(&lat) < 1e-12);
        assert_eq!(out.reality_residual(&lat), 0.0);
    }

    #[test]
    fn stability_guard_trips() {
        let lat = Lattice::new(2, 4).unwrap();
        let nb = build_noise_basis(&lat, 0.5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let m = SpectralField::zeros(&lat);
        let dt = 2.0 * max_stable_dt(&lat, &nb, 0.1);
        assert!(matches!(
            ito_step(&lat, &m, &nb, 0.1, dt, &mut rng),
            Err(Error::StabilityGuard { .. })
        ));
    }
}
