use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{check_point, BandParams, Geometry, Geometry3, Resolution, ScalarGrid, ScalarGrid3};
use crate::error::{param, Error, Result};
use crate::rng::rng_from_seed;

/// Trigonometric polynomial on the unit flat torus `[0, 1)^dim`:
/// `f(x) = normalization * sum_m (a_m cos 2pi<m,x> + b_m sin 2pi<m,x>)`,
/// one term per `{m, -m}` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusField {
    pub dim: usize,
    pub freqs: Vec<Vec<i32>>,
    pub cos_amps: Vec<f64>,
    pub sin_amps: Vec<f64>,
    pub normalization: f64,
}

/// Non-zero integer vectors with `2 pi |m|` in the band, one representative
/// (first non-zero coordinate positive) per `{m, -m}` pair.
pub fn torus_frequencies(params: &BandParams, dim: usize) -> Vec<Vec<i32>> {
    let r = (params.t / TAU).floor() as i32 + 1;
    let mut out = Vec::new();
    let mut m = vec![-r; dim];
    loop {
        let first = m.iter().find(|&&c| c != 0).copied().unwrap_or(0);
        if first > 0 {
            let norm = m.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
            if params.contains(TAU * norm) {
                out.push(m.clone());
            }
        }
        // odometer increment
        let mut d = dim;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            if m[d] < r {
                m[d] += 1;
                break;
            }
            m[d] = -r;
        }
    }
}

fn sample_dim(params: &BandParams, dim: usize, seed: u64) -> Result<TorusField> {
    params.validate()?;
    let freqs = torus_frequencies(params, dim);
    if freqs.is_empty() {
        return param(format!("no torus frequency lies in the band {:?}", params.window()));
    }
    let mut rng = rng_from_seed(seed);
    let n = freqs.len();
    let mut cos_amps = Vec::with_capacity(n);
    let mut sin_amps = Vec::with_capacity(n);
    for _ in 0..n {
        cos_amps.push(rng.sample(StandardNormal));
        sin_amps.push(rng.sample(StandardNormal));
    }
    Ok(TorusField { dim, freqs, cos_amps, sin_amps, normalization: (1.0 / n as f64).sqrt() })
}

/// Random band-limited function on the unit 2-torus.
pub fn sample_torus(params: &BandParams, seed: u64) -> Result<TorusField> {
    sample_dim(params, 2, seed)
}

/// Random band-limited function on the unit 3-torus.
pub fn sample_torus3(params: &BandParams, seed: u64) -> Result<TorusField> {
    sample_dim(params, 3, seed)
}

impl TorusField {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.dim)?;
        let mut s = 0.0;
        for ((m, a), b) in self.freqs.iter().zip(&self.cos_amps).zip(&self.sin_amps) {
            // Reduce the phase in integer arithmetic on the fractional parts
            // so that shifts by lattice vectors are exact.
            let ph: f64 = m.iter().zip(x).map(|(&mi, &xi)| mi as f64 * (xi - xi.floor())).sum();
            let (sn, cs) = (TAU * (ph - ph.floor())).sin_cos();
            s += a * cs + b * sn;
        }
        Ok(self.normalization * s)
    }

    /// Largest `2 pi |m|`.
    pub fn t_max(&self) -> f64 {
        self.freqs
            .iter()
            .map(|m| TAU * m.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    fn samples_per_side(&self, res: Resolution) -> Result<usize> {
        res.check()?;
        let kmax = self.freqs.iter().flatten().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
        let wl = TAU / self.t_max();
        let n = ((1.0 / wl) * res.per_wavelength).ceil() as usize;
        let n = n.max(2 * kmax + 1).max(4);
        res.check_spacing(1.0 / n as f64, wl)?;
        Ok(n)
    }

    /// Exact synthesis on an `n^dim` grid by inverse FFT.
    fn synthesize(&self, n: usize) -> Vec<f64> {
        let total = n.pow(self.dim as u32);
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        for ((m, &a), &b) in self.freqs.iter().zip(&self.cos_amps).zip(&self.sin_amps) {
            let mut idx = 0;
            let mut stride = 1;
            for &c in m {
                idx += (c.rem_euclid(n as i32) as usize) * stride;
                stride *= n;
            }
            buf[idx] += Complex::new(a, -b);
        }
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        let mut line = vec![Complex::new(0.0, 0.0); n];
        let mut stride = 1;
        for _ in 0..self.dim {
            let block = stride * n;
            for base in 0..total / n {
                let start = (base / stride) * block + base % stride;
                for (t, z) in line.iter_mut().enumerate() {
                    *z = buf[start + t * stride];
                }
                fft.process(&mut line);
                for (t, z) in line.iter().enumerate() {
                    buf[start + t * stride] = *z;
                }
            }
            stride *= n;
        }
        buf.iter().map(|z| self.normalization * z.re).collect()
    }

    /// Samples a 2-D torus field on an `n x n` grid; `x` varies along columns.
    pub fn evaluate_grid(&self, res: Resolution) -> Result<ScalarGrid> {
        if self.dim != 2 {
            return param("evaluate_grid needs a 2-D torus field");
        }
        let n = self.samples_per_side(res)?;
        let h = 1.0 / n as f64;
        ScalarGrid::new(Geometry::FlatTorus, n, n, (h, h), (0.0, 0.0), self.synthesize(n))
    }

    /// Samples a 3-D torus field on an `n^3` grid.
    pub fn evaluate_grid3(&self, res: Resolution) -> Result<ScalarGrid3> {
        if self.dim != 3 {
            return Err(Error::Parameter("evaluate_grid3 needs a 3-D torus field".into()));
        }
        let n = self.samples_per_side(res)?;
        ScalarGrid3::new(Geometry3::Torus3, [n, n, n], 1.0 / n as f64, [0.0; 3], self.synthesize(n))
    }
}
