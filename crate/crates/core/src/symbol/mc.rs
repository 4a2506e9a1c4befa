//! Importance-sampled Monte Carlo of the full `d`-dimensional symbol integrals.
//!
//! The proposal is an equal mixture of `q₁ ∝ ⟨k−n⟩^{−d−2α}` on `ℝ^d` and
//! `q₂ ∝ |k|^{−p}` on the ball of radius `max(|n|, 1)`, `p = min(2s, d − 1/2)`.
//! Samples are split into batches; batch `b` draws from ChaCha stream `(seed, b)`
//! and the batch means are reduced in batch order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::constants::ModelParams;
use crate::error::{Error, Result};
use crate::specfun::{gamma_real, sphere_area};
use crate::symbol::{IntegralResult, Method, SymbolRequest, Target};

pub const BATCHES: usize = 64;
pub const MIN_SAMPLES: u64 = 10_000;
/// Batch means further than this many standard deviations from the mean flag a variance explosion.
pub const EXPLOSION_SIGMAS: f64 = 5.0;

/// Geometry of one evaluation: the wavevector `n` and a unit vector `v ⊥ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub n: Vec<f64>,
    pub v: Vec<f64>,
}

impl Geometry {
    /// `n = λe₁`, `v = e₂`.
    pub fn canonical(d: usize, lambda: f64) -> Self {
        let mut n = vec![0.0; d];
        let mut v = vec![0.0; d];
        n[0] = lambda;
        v[1] = 1.0;
        Geometry { n, v }
    }

    pub fn new(n: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if n.len() != v.len() || n.len() < 2 {
            return Err(Error::domain("n and v must have the same dimension d >= 2"));
        }
        let nn = dot(&n, &n).sqrt();
        let vv = dot(&v, &v).sqrt();
        if nn == 0.0 || (vv - 1.0).abs() > 1e-12 || dot(&n, &v).abs() > 1e-12 * nn {
            return Err(Error::domain("need n != 0 and a unit vector v orthogonal to n"));
        }
        Ok(Geometry { n, v })
    }

    pub fn lambda(&self) -> f64 {
        dot(&self.n, &self.n).sqrt()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-sample values of the five targets, in the order of [`Target::ALL`].
struct Integrands<'a> {
    p: &'a ModelParams,
    g: &'a Geometry,
    lambda_pow: f64,
}

impl Integrands<'_> {
    fn eval(&self, k: &[f64], out: &mut [f64; 5]) {
        let d = self.p.d;
        let (s, beta) = (self.p.s, 0.5 * self.p.df() + self.p.alpha);
        let n = &self.g.n;
        let v = &self.g.v;
        // m = n − k; P⊥_m k = P⊥_m n since P⊥_m m = 0.
        let mut m2 = 0.0;
        let mut mn = 0.0;
        let mut k2 = 0.0;
        for i in 0..d {
            let mi = n[i] - k[i];
            m2 += mi * mi;
            mn += mi * n[i];
            k2 += k[i] * k[i];
        }
        if !(k2 > 0.0 && m2.is_finite() && k2.is_finite()) {
            *out = [0.0; 5];
            return;
        }
        let w = (-beta * m2.ln_1p()).exp();
        let ks = (-s * k2.ln()).exp();
        let n2 = dot(n, n);
        let (pk2, vpk) = if m2 > 0.0 {
            // |P⊥_m n|² = |n|² − (m·n)²/|m|², v·P⊥_m n = −(v·m)(m·n)/|m|² since v ⊥ n.
            let vm = -dot(v, k);
            ((n2 - mn * mn / m2).max(0.0), -vm * mn / m2)
        } else {
            (0.0, 0.0)
        };
        let vk = dot(v, k);
        let tra = w * (ks - self.lambda_pow) * pk2;
        let st = w * ks * vk * vk;
        let mx = w * ks * vpk * vk;
        let dm1 = self.p.df() - 1.0;
        let h = tra + dm1 * st - 2.0 * mx;
        let f = w * ks * (pk2 + dm1 * vk * vk - 2.0 * vpk * vk);
        *out = [tra, st, mx, h, f];
    }
}

struct Proposal {
    d: usize,
    beta: f64,
    center: Vec<f64>,
    z1: f64,
    radius: f64,
    p: f64,
    z2: f64,
    shape_num: Gamma<f64>,
    shape_den: Gamma<f64>,
}

impl Proposal {
    fn new(pm: &ModelParams, n: &[f64]) -> Result<Self> {
        let d = pm.d;
        let df = pm.df();
        let a = pm.alpha;
        let z1 = sphere_area(d - 1) * gamma_real(0.5 * df)? * gamma_real(a)? / (2.0 * gamma_real(0.5 * df + a)?);
        let lambda = dot(n, n).sqrt();
        let radius = lambda.max(1.0);
        let p = (2.0 * pm.s).min(df - 0.5);
        let z2 = sphere_area(d - 1) * radius.powf(df - p) / (df - p);
        let gamma = |k: f64| Gamma::new(k, 1.0).map_err(|e| Error::domain(e.to_string()));
        Ok(Proposal {
            d,
            beta: 0.5 * df + a,
            center: n.to_vec(),
            z1,
            radius,
            p,
            z2,
            shape_num: gamma(0.5 * df)?,
            shape_den: gamma(a)?,
        })
    }

    fn direction<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        loop {
            let mut r2 = 0.0;
            for x in out.iter_mut() {
                *x = rng.sample(StandardNormal);
                r2 += *x * *x;
            }
            if r2 > 1e-300 {
                let r = r2.sqrt();
                out.iter_mut().for_each(|x| *x /= r);
                return;
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, k: &mut [f64]) {
        self.direction(rng, k);
        if rng.gen::<bool>() {
            // ρ² is beta-prime(d/2, α), a ratio of independent Gamma variates.
            let g1: f64 = self.shape_num.sample(rng);
            let g2: f64 = self.shape_den.sample(rng);
            let rho = (g1 / g2).sqrt();
            for i in 0..self.d {
                k[i] = self.center[i] + rho * k[i];
            }
        } else {
            let u: f64 = 1.0 - rng.gen::<f64>();
            let rho = self.radius * u.powf(1.0 / (self.d as f64 - self.p));
            k.iter_mut().for_each(|x| *x *= rho);
        }
    }

    fn density(&self, k: &[f64]) -> f64 {
        let mut m2 = 0.0;
        let mut k2 = 0.0;
        for i in 0..self.d {
            let m = k[i] - self.center[i];
            m2 += m * m;
            k2 += k[i] * k[i];
        }
        let q1 = (-self.beta * m2.ln_1p()).exp() / self.z1;
        let q2 = if k2 <= self.radius * self.radius {
            (-0.5 * self.p * k2.ln()).exp() / self.z2
        } else {
            0.0
        };
        0.5 * (q1 + q2)
    }
}

/// Monte Carlo estimates of all five targets from one shared sample set.
pub fn mc_all(p: &ModelParams, geom: &Geometry, n_samples: u64, seed: u64) -> Result<[IntegralResult; 5]> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::domain(format!(
            "Monte Carlo needs at least {MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    if geom.n.len() != p.d {
        return Err(Error::domain("geometry dimension does not match d"));
    }
    p.require_symbol_range()?;
    let lambda = geom.lambda();
    let integrands = Integrands {
        p,
        g: geom,
        lambda_pow: lambda.powf(-2.0 * p.s),
    };
    let proposal = Proposal::new(p, &geom.n)?;
    let per = n_samples / BATCHES as u64;
    let extra = n_samples % BATCHES as u64;

    let means: Vec<[f64; 5]> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = per + u64::from((b as u64) < extra);
            let mut k = vec![0.0; p.d];
            let mut vals = [0.0; 5];
            let mut acc = [0.0; 5];
            for _ in 0..count {
                proposal.sample(&mut rng, &mut k);
                let q = proposal.density(&k);
                if !(q > 0.0 && q.is_finite()) {
                    continue;
                }
                integrands.eval(&k, &mut vals);
                for (a, v) in acc.iter_mut().zip(vals) {
                    *a += v / q;
                }
            }
            acc.map(|a| a / count as f64)
        })
        .collect();

    let mut out = [IntegralResult {
        value: 0.0,
        error_estimate: 0.0,
        method: Method::MonteCarlo,
        samples_or_evals: n_samples,
    }; 5];
    for (t, res) in out.iter_mut().enumerate() {
        let bm: Vec<f64> = means.iter().map(|m| m[t]).collect();
        let nb = bm.len() as f64;
        let mean = bm.iter().sum::<f64>() / nb;
        let var = bm.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        let sd = var.sqrt();
        if !mean.is_finite() {
            return Err(Error::VarianceExplosion { spread: f64::INFINITY });
        }
        let spread = bm.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) / sd.max(f64::MIN_POSITIVE);
        if sd > 0.0 && spread > EXPLOSION_SIGMAS {
            return Err(Error::VarianceExplosion { spread });
        }
        res.value = mean;
        res.error_estimate = sd / nb.sqrt();
    }
    Ok(out)
}

/// Monte Carlo estimate of one target in the canonical geometry `n = λe₁`, `v = e₂`.
pub fn mc_symbol(req: &SymbolRequest, n_samples: u64, seed: u64) -> Result<IntegralResult> {
    let g = Geometry::canonical(req.params.d, req.lambda);
    mc_symbol_with(req, &g, n_samples, seed)
}

/// As [`mc_symbol`] with an arbitrary `n` (of modulus `req.lambda`) and `v ⊥ n`.
pub fn mc_symbol_with(req: &SymbolRequest, geom: &Geometry, n_samples: u64, seed: u64) -> Result<IntegralResult> {
    if (geom.lambda() - req.lambda).abs() > 1e-12 * req.lambda {
        return Err(Error::domain("geometry |n| does not match the requested lambda"));
    }
    let all = mc_all(&req.params, geom, n_samples, seed)?;
    let idx = Target::ALL.iter().position(|t| *t == req.target).expect("listed");
    Ok(all[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::reduced;

    fn mp() -> ModelParams {
        ModelParams::new(3, 1.25, 0.25).unwrap()
    }

    #[test]
    fn proposal_density_is_normalized() {
        // E_q[1_{ball}/q] over the mixture equals the ball volume when q covers it.
        let p = mp();
        let g = Geometry::canonical(3, 2.0);
        let prop = Proposal::new(&p, &g.n).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut k = vec![0.0; 3];
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            prop.sample(&mut rng, &mut k);
            if dot(&k, &k) < 1.0 {
                acc += 1.0 / prop.density(&k);
            }
        }
        let vol = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((acc / n as f64 / vol - 1.0).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_bits() {
        let req = SymbolRequest::new(mp(), 2.0, Target::IStr).unwrap();
        let a = mc_symbol(&req, 20_000, 7).unwrap();
        let b = mc_symbol(&req, 20_000, 7).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let c = mc_symbol(&req, 20_000, 8).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn agrees_with_quadrature_at_moderate_samples() {
        let p = mp();
        let g = Geometry::canonical(3, 2.0);
        let all = mc_all(&p, &g, 400_000, 3).unwrap();
        let q = reduced::symbol_parts(&p, 2.0).unwrap();
        for (mc, qv) in all.iter().zip([q.i_tra, q.i_str, q.i_mix, q.h_form]) {
            assert!((mc.value - qv.value).abs() < 4.0 * mc.error_estimate, "{mc:?} vs {qv:?}");
        }
    }

    #[test]
    fn rejects_small_sample_counts_and_bad_geometry() {
        let req = SymbolRequest::new(mp(), 1.0, Target::IStr).unwrap();
        assert!(mc_symbol(&req, 100, 0).is_err());
        assert!(Geometry::new(vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]).is_err());
    }
}
