use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{check_point, BandParams, Geometry, Resolution, ScalarGrid};
use crate::error::{param, Error, Result};
use crate::rng::rng_from_seed;

/// Sum of real orthonormal spherical harmonics over degrees
/// `ell_min..=ell_max`, times `normalization`.
///
/// Coefficients are stored degree by degree, `m = -l..=l` within a degree.
/// The basis is `Y_l0 = N P_l`, `Y_lm = sqrt(2) N P_l^m cos(m phi)` and
/// `Y_l,-m = sqrt(2) N P_l^m sin(m phi)` without the Condon-Shortley phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalField {
    pub ell_min: u32,
    pub ell_max: u32,
    pub coeffs: Vec<f64>,
    pub normalization: f64,
}

/// Degrees `l >= 1` whose root `sqrt(l(l+1))` lies in the band.
pub fn sphere_degrees(params: &BandParams) -> Vec<u32> {
    let hi = params.t.ceil() as u32 + 1;
    (1..=hi)
        .filter(|&l| {
            let lf = l as f64;
            params.contains((lf * (lf + 1.0)).sqrt())
        })
        .collect()
}

/// Random band-limited function on the unit sphere, rescaled to unit
/// pointwise variance.
pub fn sample_sphere(params: &BandParams, seed: u64) -> Result<SphericalField> {
    params.validate()?;
    let degrees = sphere_degrees(params);
    let (Some(&ell_min), Some(&ell_max)) = (degrees.first(), degrees.last()) else {
        return param(format!("no sphere degree lies in the band {:?}", params.window()));
    };
    let mut rng = rng_from_seed(seed);
    let count = SphericalField::coeff_count(ell_min, ell_max);
    let coeffs: Vec<f64> = (0..count).map(|_| rng.sample(StandardNormal)).collect();
    // sum_m Y_lm(x)^2 = (2l+1)/(4 pi) at every point.
    let variance: f64 = (ell_min..=ell_max).map(|l| (2 * l + 1) as f64).sum::<f64>() / (4.0 * PI);
    Ok(SphericalField { ell_min, ell_max, coeffs, normalization: 1.0 / variance.sqrt() })
}

/// Fully normalized associated Legendre values `N_lm P_l^m(cos theta)` for
/// `0 <= m <= l <= lmax`, stored at `l(l+1)/2 + m`. `N_lm` makes `Y_l0`
/// orthonormal on the sphere.
pub fn legendre_table(lmax: usize, cos_t: f64, sin_t: f64, out: &mut Vec<f64>) {
    let n = (lmax + 1) * (lmax + 2) / 2;
    out.clear();
    out.resize(n, 0.0);
    let at = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_t;
        }
        out[at(m, m)] = pmm;
        if m == lmax {
            break;
        }
        out[at(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * cos_t * pmm;
        for l in m + 2..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            out[at(l, m)] = a * (cos_t * out[at(l - 1, m)] - b * out[at(l - 2, m)]);
        }
    }
}

impl SphericalField {
    pub fn coeff_count(ell_min: u32, ell_max: u32) -> usize {
        (ell_min..=ell_max).map(|l| 2 * l as usize + 1).sum()
    }

    pub fn from_coeffs(ell_min: u32, ell_max: u32, coeffs: Vec<f64>) -> Result<Self> {
        if ell_min > ell_max || coeffs.len() != Self::coeff_count(ell_min, ell_max) {
            return param("coefficient count does not match the degree range");
        }
        Ok(SphericalField { ell_min, ell_max, coeffs, normalization: 1.0 })
    }

    /// Coefficient of `Y_lm`.
    pub fn coeff(&self, l: u32, m: i32) -> f64 {
        let off: usize = Self::coeff_count(self.ell_min, l) - (2 * l as usize + 1);
        self.coeffs[off + (m + l as i32) as usize]
    }

    /// Root `T` of the top degree.
    pub fn t_max(&self) -> f64 {
        let l = self.ell_max as f64;
        (l * (l + 1.0)).sqrt()
    }

    /// Per-order Fourier coefficients `(A_m, B_m)` of the longitude profile at
    /// one colatitude.
    fn longitude_profile(&self, cos_t: f64, sin_t: f64, table: &mut Vec<f64>, a: &mut [f64], b: &mut [f64]) {
        let lmax = self.ell_max as usize;
        legendre_table(lmax, cos_t, sin_t, table);
        a.iter_mut().for_each(|v| *v = 0.0);
        b.iter_mut().for_each(|v| *v = 0.0);
        let mut off = 0;
        for l in self.ell_min as usize..=lmax {
            let row = l * (l + 1) / 2;
            let c = &self.coeffs[off..off + 2 * l + 1];
            a[0] += c[l] * table[row];
            for m in 1..=l {
                let p = std::f64::consts::SQRT_2 * table[row + m];
                a[m] += c[l + m] * p;
                b[m] += c[l - m] * p;
            }
            off += 2 * l + 1;
        }
    }

    /// Value at colatitude `theta` in `[0, pi]` and longitude `phi`.
    pub fn value(&self, p: &[f64]) -> Result<f64> {
        check_point(p, 2)?;
        let (theta, phi) = (p[0], p[1]);
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::Domain(format!("colatitude {theta} outside [0, pi]")));
        }
        let n = self.ell_max as usize + 1;
        let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
        let mut table = Vec::new();
        let (s, c) = theta.sin_cos();
        self.longitude_profile(c, s, &mut table, &mut a, &mut b);
        let mut v = a[0];
        for m in 1..n {
            let (sm, cm) = (m as f64 * phi).sin_cos();
            v += a[m] * cm + b[m] * sm;
        }
        Ok(self.normalization * v)
    }

    /// Samples on an equiangular grid with at least `res.per_wavelength`
    /// samples per wavelength `2 pi / T` along the equator.
    pub fn evaluate_grid(&self, res: Resolution) -> Result<ScalarGrid> {
        res.check()?;
        let t = self.t_max();
        let mut cols = (res.per_wavelength * t).ceil() as usize;
        cols = cols.max(2 * self.ell_max as usize + 2);
        cols += cols % 2;
        self.evaluate_grid_shape(cols / 2 + 1, cols, res)
    }

    /// Samples on a `rows x cols` equiangular grid.
    pub fn evaluate_grid_shape(&self, rows: usize, cols: usize, res: Resolution) -> Result<ScalarGrid> {
        let lmax = self.ell_max as usize;
        if cols <= 2 * lmax || rows < 3 {
            return Err(Error::Resolution(format!("{rows}x{cols} grid cannot represent degree {lmax}")));
        }
        let dtheta = PI / (rows - 1) as f64;
        let dphi = TAU / cols as f64;
        res.check_spacing(dtheta.max(dphi), TAU / self.t_max())?;

        let fft = FftPlanner::<f64>::new().plan_fft_inverse(cols);
        let mut values = vec![0.0; rows * cols];
        let mut table = Vec::new();
        let (mut a, mut b) = (vec![0.0; lmax + 1], vec![0.0; lmax + 1]);
        let mut buf = vec![Complex::new(0.0, 0.0); cols];
        for i in 0..rows {
            let (sin_t, cos_t) = if i == 0 {
                (0.0, 1.0)
            } else if i == rows - 1 {
                (0.0, -1.0)
            } else {
                (i as f64 * dtheta).sin_cos()
            };
            self.longitude_profile(cos_t, sin_t, &mut table, &mut a, &mut b);
            buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
            buf[0] = Complex::new(a[0], 0.0);
            // Re sum_m (A_m - i B_m) e^{i m phi}.
            for m in 1..=lmax {
                buf[m] = Complex::new(a[m], -b[m]);
            }
            fft.process(&mut buf);
            let row = &mut values[i * cols..(i + 1) * cols];
            if sin_t == 0.0 {
                row.iter_mut().for_each(|v| *v = self.normalization * a[0]);
            } else {
                for (v, z) in row.iter_mut().zip(&buf) {
                    *v = self.normalization * z.re;
                }
            }
        }
        ScalarGrid::new(Geometry::SphereLonLat, rows, cols, (dtheta, dphi), (0.0, 0.0), values)
    }
}
