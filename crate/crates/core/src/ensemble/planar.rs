use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_point, Resolution, ScalarGrid, Window, MIN_PLANE_WAVES};
use crate::error::{param, Result};
use crate::rng::rng_from_seed;

/// Finite plane-wave sum
/// `f(x) = normalization * sum_j (a_j cos<k_j, x> + b_j sin<k_j, x>)`.
///
/// Sampled realizations approximate the translation-invariant field whose
/// spectral measure is uniform on the annulus `alpha <= |k| <= 1`; lengths
/// are measured in units of `1/T`, so one wavelength is `2 pi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveField {
    pub alpha: f64,
    pub wavevectors: Vec<Vec<f64>>,
    pub cos_amps: Vec<f64>,
    pub sin_amps: Vec<f64>,
    pub normalization: f64,
}

/// Samples `num_waves` plane waves with wavevectors area-uniform on the
/// annulus and standard Gaussian amplitudes.
pub fn sample_planar(alpha: f64, num_waves: usize, seed: u64) -> Result<PlaneWaveField> {
    if !(0.0..=1.0).contains(&alpha) {
        return param(format!("alpha = {alpha} must lie in [0, 1]"));
    }
    if num_waves < MIN_PLANE_WAVES {
        return param(format!("J = {num_waves} is below the minimum of {MIN_PLANE_WAVES}"));
    }
    let mut rng = rng_from_seed(seed);
    let mut wavevectors = Vec::with_capacity(num_waves);
    let mut cos_amps = Vec::with_capacity(num_waves);
    let mut sin_amps = Vec::with_capacity(num_waves);
    let a2 = alpha * alpha;
    for _ in 0..num_waves {
        let u: f64 = rng.random();
        let r = if alpha == 1.0 { 1.0 } else { (a2 + u * (1.0 - a2)).sqrt() };
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        wavevectors.push(vec![r * theta.cos(), r * theta.sin()]);
        cos_amps.push(rng.sample(StandardNormal));
        sin_amps.push(rng.sample(StandardNormal));
    }
    Ok(PlaneWaveField {
        alpha,
        wavevectors,
        cos_amps,
        sin_amps,
        normalization: (1.0 / num_waves as f64).sqrt(),
    })
}

impl PlaneWaveField {
    /// Builds a field from explicit parts.
    pub fn from_parts(wavevectors: Vec<Vec<f64>>, cos_amps: Vec<f64>, sin_amps: Vec<f64>, normalization: f64) -> Result<Self> {
        if wavevectors.is_empty() || wavevectors.len() != cos_amps.len() || cos_amps.len() != sin_amps.len() {
            return param("plane-wave lists must be non-empty and of equal length");
        }
        let dim = wavevectors[0].len();
        if dim == 0 || wavevectors.iter().any(|k| k.len() != dim) {
            return param("wavevectors must share one dimension");
        }
        let norms = wavevectors.iter().map(|k| k.iter().map(|c| c * c).sum::<f64>().sqrt());
        let alpha = norms.fold(f64::INFINITY, f64::min);
        Ok(PlaneWaveField { alpha, wavevectors, cos_amps, sin_amps, normalization })
    }

    pub fn dim(&self) -> usize {
        self.wavevectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.wavevectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavevectors.is_empty()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.dim())?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((k, a), b) in self.wavevectors.iter().zip(&self.cos_amps).zip(&self.sin_amps) {
            let ph: f64 = k.iter().zip(x).map(|(ki, xi)| ki * xi).sum();
            let (sn, cs) = ph.sin_cos();
            s += a * cs + b * sn;
        }
        self.normalization * s
    }

    /// Samples the field on a planar window. The requested density is checked
    /// against the wavelength `2 pi / max|k|`.
    pub fn evaluate_grid(&self, window: Window, res: Resolution) -> Result<ScalarGrid> {
        res.check()?;
        if self.dim() != 2 {
            return param("planar grids need a 2-D field");
        }
        let kmax = self
            .wavevectors
            .iter()
            .map(|k| (k[0] * k[0] + k[1] * k[1]).sqrt())
            .fold(0.0, f64::max)
            .max(1e-12);
        let h = std::f64::consts::TAU / kmax / res.per_wavelength;
        let cols = (window.width / h).ceil() as usize + 1;
        let rows = (window.height / h).ceil() as usize + 1;
        let dx = window.width / (cols - 1) as f64;
        let dy = window.height / (rows - 1) as f64;
        res.check_spacing(dx.max(dy), std::f64::consts::TAU / kmax)?;

        // Separable synthesis: e^{i<k,x>} = e^{i k_x x} e^{i k_y y}.
        let mut acc = vec![0.0; rows * cols];
        let mut ex = vec![(0.0, 0.0); cols];
        for ((k, &a), &b) in self.wavevectors.iter().zip(&self.cos_amps).zip(&self.sin_amps) {
            for (j, e) in ex.iter_mut().enumerate() {
                let (s, c) = (k[0] * (window.x0 + j as f64 * dx)).sin_cos();
                *e = (c, s);
            }
            for i in 0..rows {
                let (sy, cy) = (k[1] * (window.y0 + i as f64 * dy)).sin_cos();
                let row = &mut acc[i * cols..(i + 1) * cols];
                for (v, &(cx, sx)) in row.iter_mut().zip(&ex) {
                    let c = cx * cy - sx * sy;
                    let s = sx * cy + cx * sy;
                    *v += a * c + b * s;
                }
            }
        }
        for v in &mut acc {
            *v *= self.normalization;
        }
        ScalarGrid::new(super::Geometry::PlanarRect, rows, cols, (dy, dx), (window.y0, window.x0), acc)
    }
}
