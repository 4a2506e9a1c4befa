//! Truncated Fourier lattice `{n ∈ ℤ^d \ {0} : |n|_∞ ≤ n_max}` and fields on it.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub d: usize,
    pub n_max: usize,
    side: usize,
    coords: Vec<i32>,
    lookup: Vec<u32>,
    wave_sq: Vec<f64>,
}

impl Lattice {
    pub fn new(d: usize, n_max: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::domain(format!("dimension must satisfy d >= 2, got {d}")));
        }
        if n_max == 0 {
            return Err(Error::domain("lattice cutoff n_max must be positive"));
        }
        let side = 2 * n_max + 1;
        let cube = side
            .checked_pow(d as u32)
            .filter(|c| *c < NONE as usize)
            .ok_or_else(|| Error::domain("lattice too large"))?;
        let centre = (cube - 1) / 2;
        let mut coords = Vec::with_capacity((cube - 1) * d);
        let mut lookup = vec![NONE; cube];
        let mut count = 0u32;
        for (c, slot) in lookup.iter_mut().enumerate() {
            if c == centre {
                continue;
            }
            let mut rem = c;
            let start = coords.len();
            coords.resize(start + d, 0);
            for axis in (0..d).rev() {
                coords[start + axis] = (rem % side) as i32 - n_max as i32;
                rem /= side;
            }
            *slot = count;
            count += 1;
        }
        let wave_sq = coords
            .chunks(d)
            .map(|c| TWO_PI * TWO_PI * c.iter().map(|&x| (x * x) as f64).sum::<f64>())
            .collect();
        Ok(Lattice {
            d,
            n_max,
            side,
            coords,
            lookup,
            wave_sq,
        })
    }

    /// Number of stored modes.
    pub fn len(&self) -> usize {
        self.wave_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wave_sq.is_empty()
    }

    pub fn mode(&self, i: usize) -> &[i32] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    /// Index of `−n`. Removing the centre of the cube keeps the ordering antisymmetric.
    #[inline]
    pub fn neg(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    /// `|2πn|²`.
    #[inline]
    pub fn wave_sq(&self, i: usize) -> f64 {
        self.wave_sq[i]
    }

    pub fn index_of(&self, c: &[i32]) -> Option<usize> {
        let n = self.n_max as i32;
        let mut idx = 0usize;
        for &x in c {
            if x.abs() > n {
                return None;
            }
            idx = idx * self.side + (x + n) as usize;
        }
        match self.lookup[idx] {
            NONE => None,
            v => Some(v as usize),
        }
    }

    /// Index of `mode(i) + mode(j)`, if it lies in the lattice.
    #[inline]
    pub fn add(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n_max as i32;
        let (a, b) = (self.mode(i), self.mode(j));
        let mut idx = 0usize;
        for ax in 0..self.d {
            let x = a[ax] + b[ax];
            if x.abs() > n {
                return None;
            }
            idx = idx * self.side + (x + n) as usize;
        }
        match self.lookup[idx] {
            NONE => None,
            v => Some(v as usize),
        }
    }

    /// Sobolev weight `|2πn|^{2e}` of the `Ḣ^e` norm.
    #[inline]
    pub fn weight(&self, i: usize, e: f64) -> f64 {
        self.wave_sq[i].powf(e)
    }
}

/// Fourier coefficients `M̂(n) ∈ ℂ^d` of a real vector field, zero mode excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub d: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(lat: &Lattice) -> Self {
        SpectralField {
            d: lat.d,
            coeffs: vec![Complex64::new(0.0, 0.0); lat.len() * lat.d],
        }
    }

    pub fn at(&self, i: usize) -> &[Complex64] {
        &self.coeffs[i * self.d..(i + 1) * self.d]
    }

    pub fn at_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.coeffs[i * self.d..(i + 1) * self.d]
    }

    /// Modes with a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        (0..self.coeffs.len() / self.d)
            .filter(|&i| self.at(i).iter().any(|c| c.norm_sqr() > 0.0))
            .collect()
    }

    /// `‖M‖²_{Ḣ^e} = Σ |2πn|^{2e} |M̂(n)|²`.
    pub fn norm_sq(&self, lat: &Lattice, e: f64) -> f64 {
        (0..lat.len())
            .map(|i| lat.weight(i, e) * self.at(i).iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Largest `|n·M̂(n)| / |M̂(n)|` over the lattice.
    pub fn divergence_residual(&self, lat: &Lattice) -> f64 {
        (0..lat.len())
            .map(|i| {
                let m = self.at(i);
                let norm = m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return 0.0;
                }
                let n = lat.mode(i);
                let div: Complex64 = m.iter().zip(n).map(|(c, &k)| c * k as f64).sum();
                div.norm() / (norm * n.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt())
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|M̂(−n) − conj M̂(n)|` relative to the field's largest coefficient.
    pub fn reality_residual(&self, lat: &Lattice) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        (0..lat.len())
            .map(|i| {
                let j = lat.neg(i);
                self.at(i)
                    .iter()
                    .zip(self.at(j))
                    .map(|(a, b)| (a.conj() - b).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
            / scale
    }

    /// Overwrites the `−n` half with conjugates of the `n` half.
    pub fn symmetrize(&mut self, lat: &Lattice) {
        for i in 0..lat.len() / 2 {
            let j = lat.neg(i);
            for c in 0..self.d {
                let v = self.coeffs[j * self.d + c].conj();
                self.coeffs[i * self.d + c] = v;
            }
        }
    }

    /// Applies the Leray projection `I − n nᵀ/|n|²` mode by mode.
    pub fn project(&mut self, lat: &Lattice) {
        for i in 0..lat.len() {
            let n = lat.mode(i);
            let n2 = n.iter().map(|&k| (k * k) as f64).sum::<f64>();
            let m = self.at_mut(i);
            let dot: Complex64 = m.iter().zip(n).map(|(c, &k)| c * k as f64).sum();
            for (c, &k) in m.iter_mut().zip(n) {
                *c -= dot * (k as f64 / n2);
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.coeffs.iter_mut().for_each(|x| *x *= c);
    }

    /// The same field on a lattice containing every mode of `from`.
    pub fn embed(&self, from: &Lattice, to: &Lattice) -> Result<SpectralField> {
        if from.d != to.d || from.n_max > to.n_max {
            return Err(Error::domain("target lattice must contain the source lattice"));
        }
        let mut g = SpectralField::zeros(to);
        for i in 0..from.len() {
            let j = to.index_of(from.mode(i)).expect("source mode lies in the target cube");
            g.at_mut(j).copy_from_slice(self.at(i));
        }
        Ok(g)
    }

    /// Random divergence-free real field with `E|M̂(n)|² ∝ |2πn|^{−2γ}`.
    ///
    /// With `support = Some(m)` only `m` random modes (and their mirrors) are excited.
    pub fn random<R: Rng>(lat: &Lattice, gamma: f64, support: Option<usize>, rng: &mut R) -> Self {
        let mut f = SpectralField::zeros(lat);
        let half = lat.len() / 2;
        let chosen: Vec<usize> = match support {
            Some(m) if m < half => rand::seq::index::sample(rng, half, m).into_vec(),
            _ => (0..half).collect(),
        };
        for i in chosen {
            let amp = lat.wave_sq(i).powf(-0.5 * gamma);
            for c in f.at_mut(i) {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *c = Complex64::new(re, im) * amp;
            }
        }
        f.project(lat);
        for i in 0..half {
            let j = lat.neg(i);
            for c in 0..f.d {
                f.coeffs[j * f.d + c] = f.coeffs[i * f.d + c].conj();
            }
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn counts_and_mirror_indices() {
        let lat = Lattice::new(3, 1).unwrap();
        assert_eq!(lat.len(), 26);
        for i in 0..lat.len() {
            let j = lat.neg(i);
            let neg: Vec<i32> = lat.mode(i).iter().map(|x| -x).collect();
            assert_eq!(lat.mode(j), neg.as_slice());
            assert_eq!(lat.index_of(lat.mode(i)), Some(i));
        }
        assert_eq!(lat.index_of(&[0, 0, 0]), None);
        assert_eq!(lat.index_of(&[2, 0, 0]), None);
    }

    #[test]
    fn addition_respects_truncation() {
        let lat = Lattice::new(2, 2).unwrap();
        let a = lat.index_of(&[2, 1]).unwrap();
        let b = lat.index_of(&[-1, 1]).unwrap();
        assert_eq!(lat.add(a, b), lat.index_of(&[1, 2]));
        let c = lat.index_of(&[1, 0]).unwrap();
        assert_eq!(lat.add(a, c), None);
        assert_eq!(lat.add(a, lat.neg(a)), None);
    }

    #[test]
    fn random_fields_are_real_and_solenoidal() {
        let lat = Lattice::new(3, 3).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for support in [None, Some(7)] {
            let f = SpectralField::random(&lat, 1.0, support, &mut rng);
            assert!(f.divergence_residual(&lat) < 1e-14);
            assert_eq!(f.reality_residual(&lat), 0.0);
        }
        let f = SpectralField::random(&lat, 1.0, Some(7), &mut rng);
        assert_eq!(f.support().len(), 14);
        let big = Lattice::new(3, 5).unwrap();
        let g = f.embed(&lat, &big).unwrap();
        assert_eq!(g.support().len(), 14);
        assert_eq!(g.norm_sq(&big, -1.0), f.norm_sq(&lat, -1.0));
        assert!(g.embed(&big, &lat).is_err());
    }
}
