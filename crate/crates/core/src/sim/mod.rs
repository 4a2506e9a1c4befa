//! Fourier–Galerkin simulation of the Itô vector advection equation on a periodic lattice.

pub mod drift;
pub mod lattice;
pub mod noise;
pub mod step;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::ModelParams;
use crate::error::{Error, Result};
use lattice::{Lattice, SpectralField};
use noise::{build_noise_basis, orthonormal_complement, NoiseBasis};
use step::Stepper;

/// Stream reserved for drawing the broadband initial field.
const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// One Fourier mode `k` (and its mirror) with the first polarization of `k`.
    SingleMode(Vec<i32>),
    /// Random solenoidal field with `E|M̂(n)|² ∝ |2πn|^{−2γ}` on the whole lattice.
    Broadband(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub n_max: usize,
    pub nu: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub output_times: Vec<f64>,
    pub init: InitialCondition,
}

/// Ensemble statistics at the output times. Paths run in antithetic pairs; standard errors
/// are taken over the pair means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub mean_hs_norm_sq: Vec<f64>,
    pub stderr_hs_norm_sq: Vec<f64>,
    pub mean_gain_norm_sq: Vec<f64>,
    pub stderr_gain_norm_sq: Vec<f64>,
    pub mean_l2_sq: Vec<f64>,
    pub stderr_l2_sq: Vec<f64>,
    /// `Σ_{t_j < t} dt · E‖M_{t_j}‖²_{Ḣ^{1−s−α}}`.
    pub mean_integrated_gain: Vec<f64>,
    pub stderr_integrated_gain: Vec<f64>,
    pub ensemble_size: usize,
    pub initial_hs_norm_sq: f64,
    /// Per pair and output time: `[hs, gain, l2, integrated gain]`.
    #[serde(skip)]
    pub pair_samples: Vec<Vec<[f64; 4]>>,
}

impl NormSeries {
    /// Mean and standard error over pairs of `‖M_t‖²_{Ḣ⁻ˢ} + η Σ dt ‖M‖²_{gain}` at output `idx`.
    pub fn lyapunov_lhs(&self, idx: usize, eta: f64) -> (f64, f64) {
        let v: Vec<f64> = self.pair_samples.iter().map(|p| p[idx][0] + eta * p[idx][3]).collect();
        mean_stderr(&v)
    }
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Initial field normalized to `‖M₀‖_{Ḣ⁻ˢ} = 1`.
pub fn initial_field(lat: &Lattice, init: &InitialCondition, s: f64, seed: u64) -> Result<SpectralField> {
    let mut m = match init {
        InitialCondition::SingleMode(k) => {
            if k.len() != lat.d {
                return Err(Error::domain(format!("single_mode needs {} integer components", lat.d)));
            }
            let i = lat.index_of(k).ok_or_else(|| {
                Error::domain(format!("single_mode {k:?} is not a nonzero mode with |k|_inf <= n_max"))
            })?;
            let kv: Vec<f64> = k.iter().map(|&x| x as f64).collect();
            let a = orthonormal_complement(&kv);
            let mut m = SpectralField::zeros(lat);
            for c in 0..lat.d {
                m.at_mut(i)[c] = a[c].into();
                m.at_mut(lat.neg(i))[c] = a[c].into();
            }
            m
        }
        InitialCondition::Broadband(gamma) => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(INIT_STREAM);
            SpectralField::random(lat, *gamma, None, &mut rng)
        }
    };
    let n = m.norm_sq(lat, -s);
    m.scale(1.0 / n.sqrt());
    Ok(m)
}

fn validate(cfg: &SimConfig) -> Result<()> {
    let p = &cfg.params;
    if !(p.s > 0.0 && p.s < 0.5 * p.df()) {
        return Err(Error::domain(format!("need 0 < s < d/2 = {}, got {}", 0.5 * p.df(), p.s)));
    }
    if cfg.n_paths < 2 || cfg.n_paths % 2 != 0 {
        return Err(Error::domain(format!(
            "n_paths must be even and >= 2 (paths run in antithetic pairs), got {}",
            cfg.n_paths
        )));
    }
    if !(cfg.dt > 0.0 && cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
        return Err(Error::domain("need dt > 0 and t_final > 0"));
    }
    if cfg.nu < 0.0 {
        return Err(Error::domain(format!("need nu >= 0, got {}", cfg.nu)));
    }
    for &t in &cfg.output_times {
        if !(0.0..=cfg.t_final * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::domain(format!("output time {t} outside [0, t_final = {}]", cfg.t_final)));
        }
    }
    Ok(())
}

/// Runs the ensemble on a freshly built lattice and noise basis.
pub fn run_ensemble(cfg: &SimConfig) -> Result<NormSeries> {
    let lat = Lattice::new(cfg.params.d, cfg.n_max)?;
    let nb = build_noise_basis(&lat, cfg.params.alpha)?;
    run_ensemble_with(cfg, &lat, &nb)
}

pub fn run_ensemble_with(cfg: &SimConfig, lat: &Lattice, nb: &NoiseBasis) -> Result<NormSeries> {
    validate(cfg)?;
    let s = cfg.params.s;
    let gain_exp = 1.0 - s - cfg.params.alpha;
    let limit = step::max_stable_dt(lat, nb, cfg.nu);
    let dt = cfg.dt;
    if dt > limit {
        return Err(Error::StabilityGuard { dt, limit });
    }
    let n_steps = (cfg.t_final / dt - 1e-9).ceil() as usize;
    let mut out_steps: Vec<usize> = cfg
        .output_times
        .iter()
        .map(|t| ((t / dt).round() as usize).min(n_steps))
        .collect();
    if out_steps.is_empty() {
        out_steps.push(n_steps);
    }
    let m0 = initial_field(lat, &cfg.init, s, cfg.seed)?;
    let pairs = cfg.n_paths / 2;

    let samples: Vec<Vec<[f64; 4]>> = (0..pairs)
        .into_par_iter()
        .map(|p| -> Result<Vec<[f64; 4]>> {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(p as u64);
            let mut stepper = Stepper::new(lat, nb, cfg.nu)?;
            let mut a = m0.clone();
            let mut b = m0.clone();
            let mut integ = [0.0f64; 2];
            let mut rec = vec![[0.0; 4]; out_steps.len()];
            for j in 0..=n_steps {
                let norms = |m: &SpectralField| [m.norm_sq(lat, -s), m.norm_sq(lat, gain_exp), m.norm_sq(lat, 0.0)];
                let na = norms(&a);
                let nb_ = norms(&b);
                for (slot, &st) in rec.iter_mut().zip(&out_steps) {
                    if st == j {
                        *slot = [
                            0.5 * (na[0] + nb_[0]),
                            0.5 * (na[1] + nb_[1]),
                            0.5 * (na[2] + nb_[2]),
                            0.5 * (integ[0] + integ[1]),
                        ];
                    }
                }
                if j == n_steps {
                    break;
                }
                integ[0] += dt * na[1];
                integ[1] += dt * nb_[1];
                stepper.step_pair(&mut a, &mut b, dt, &mut rng)?;
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    let n_out = out_steps.len();
    let stat = |col: usize, i: usize| mean_stderr(&samples.iter().map(|p| p[i][col]).collect::<Vec<_>>());
    let mut series = NormSeries {
        times: out_steps.iter().map(|&j| j as f64 * dt).collect(),
        mean_hs_norm_sq: Vec::with_capacity(n_out),
        stderr_hs_norm_sq: Vec::with_capacity(n_out),
        mean_gain_norm_sq: Vec::with_capacity(n_out),
        stderr_gain_norm_sq: Vec::with_capacity(n_out),
        mean_l2_sq: Vec::with_capacity(n_out),
        stderr_l2_sq: Vec::with_capacity(n_out),
        mean_integrated_gain: Vec::with_capacity(n_out),
        stderr_integrated_gain: Vec::with_capacity(n_out),
        ensemble_size: cfg.n_paths,
        initial_hs_norm_sq: m0.norm_sq(lat, -s),
        pair_samples: samples.clone(),
    };
    for i in 0..n_out {
        let (m, e) = stat(0, i);
        series.mean_hs_norm_sq.push(m);
        series.stderr_hs_norm_sq.push(e);
        let (m, e) = stat(1, i);
        series.mean_gain_norm_sq.push(m);
        series.stderr_gain_norm_sq.push(e);
        let (m, e) = stat(2, i);
        series.mean_l2_sq.push(m);
        series.stderr_l2_sq.push(e);
        let (m, e) = stat(3, i);
        series.mean_integrated_gain.push(m);
        series.stderr_integrated_gain.push(e);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_paths: usize) -> SimConfig {
        SimConfig {
            params: ModelParams::new(2, 0.75, 0.5).unwrap(),
            n_max: 3,
            nu: 0.01,
            dt: 1e-4,
            t_final: 0.01,
            n_paths,
            seed: 4,
            output_times: vec![0.0, 0.005, 0.01],
            init: InitialCondition::Broadband(1.0),
        }
    }

    #[test]
    fn reproducible_and_guarded() {
        let a = run_ensemble(&cfg(4)).unwrap();
        let b = run_ensemble(&cfg(4)).unwrap();
        assert_eq!(a, b);
        assert!((a.mean_hs_norm_sq[0] - 1.0).abs() < 1e-12);
        assert_eq!(a.stderr_hs_norm_sq[0], 0.0);
    }

    #[test]
    fn odd_ensembles_are_rejected() {
        assert!(run_ensemble(&cfg(3)).is_err());
    }

    #[test]
    fn unstable_steps_are_rejected() {
        let c = SimConfig { dt: 1.0, ..cfg(2) };
        assert!(matches!(run_ensemble(&c), Err(Error::StabilityGuard { .. })));
    }

    #[test]
    fn pure_heat_decay_without_noise() {
        let c = SimConfig {
            init: InitialCondition::SingleMode(vec![1, 2]),
            nu: 0.3,
            ..cfg(2)
        };
        let lat = Lattice::new(2, 3).unwrap();
        let nb = build_noise_basis(&lat, 0.5).unwrap().scaled(0.0);
        let out = run_ensemble_with(&c, &lat, &nb).unwrap();
        let q = 4.0 * std::f64::consts::PI.powi(2) * 5.0;
        for (t, m) in out.times.iter().zip(&out.mean_hs_norm_sq) {
            let steps = (t / c.dt).round() as i32;
            let expect = (1.0 - c.dt * 0.3 * q).powi(2 * steps);
            assert!((m - expect).abs() < 1e-12 * expect.max(1e-300));
        }
    }
}
