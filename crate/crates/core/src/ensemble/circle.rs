use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{check_point, BandParams};
use crate::error::{param, Result};
use crate::rng::rng_from_seed;

/// Trigonometric polynomial `normalization * sum_j (a_j cos jx + b_j sin jx)`
/// on the circle `[0, 2 pi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleField {
    pub freqs: Vec<u32>,
    pub cos_amps: Vec<f64>,
    pub sin_amps: Vec<f64>,
    pub normalization: f64,
}

/// Random band-limited function on the circle with integer frequencies
/// `j >= 1` in the band.
pub fn sample_circle(params: &BandParams, seed: u64) -> Result<CircleField> {
    params.validate()?;
    let hi = params.t.floor() as u32 + 1;
    let freqs: Vec<u32> = (1..=hi).filter(|&j| params.contains(j as f64)).collect();
    if freqs.is_empty() {
        return param(format!("no circle frequency lies in the band {:?}", params.window()));
    }
    let mut rng = rng_from_seed(seed);
    let n = freqs.len();
    let mut cos_amps = Vec::with_capacity(n);
    let mut sin_amps = Vec::with_capacity(n);
    for _ in 0..n {
        cos_amps.push(rng.sample(StandardNormal));
        sin_amps.push(rng.sample(StandardNormal));
    }
    Ok(CircleField { freqs, cos_amps, sin_amps, normalization: (1.0 / n as f64).sqrt() })
}

impl CircleField {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_point(x, 1)?;
        let mut s = 0.0;
        for ((&j, a), b) in self.freqs.iter().zip(&self.cos_amps).zip(&self.sin_amps) {
            let (sn, cs) = (j as f64 * x[0]).sin_cos();
            s += a * cs + b * sn;
        }
        Ok(self.normalization * s)
    }

    /// Samples at `x_k = 2 pi k / n` by inverse FFT; `n` must exceed twice the
    /// top frequency.
    pub fn sample_uniform(&self, n: usize) -> Result<Vec<f64>> {
        let top = self.freqs.iter().copied().max().unwrap_or(0) as usize;
        if n <= 2 * top {
            return param(format!("{n} samples cannot represent frequency {top}"));
        }
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for ((&j, &a), &b) in self.freqs.iter().zip(&self.cos_amps).zip(&self.sin_amps) {
            buf[j as usize] += Complex::new(a, -b);
        }
        FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
        Ok(buf.iter().map(|z| self.normalization * z.re).collect())
    }

    /// Number of sign changes around the circle on an `n`-point grid.
    pub fn count_zeros(&self, n: usize) -> Result<usize> {
        let v = self.sample_uniform(n)?;
        Ok((0..n).filter(|&k| (v[k] >= 0.0) != (v[(k + 1) % n] >= 0.0)).count())
    }

    /// Expected zero count on the circle from the Kac-Rice formula,
    /// `2 sqrt(mean j^2)` for equal weights.
    pub fn kac_rice_expected_zeros(&self) -> f64 {
        let n = self.freqs.len() as f64;
        let m2 = self.freqs.iter().map(|&j| (j as f64).powi(2)).sum::<f64>() / n;
        TAU * m2.sqrt() / std::f64::consts::PI
    }
}
