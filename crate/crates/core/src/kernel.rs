//! Limiting covariance of the scaled ensembles and the special functions it
//! needs.
//!
//! `B_{n,alpha}(r)` is the Fourier transform of normalized Lebesgue measure on
//! the annulus `alpha <= |xi| <= 1` in `R^n`, with the `e^{i<w,xi>}`
//! convention so that the monochromatic planar kernel is `J0(r)`.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::ensemble::PlaneWaveField;
use crate::error::{param, Result};

/// Which limiting kernel to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub n: u32,
    pub alpha: f64,
}

impl CovarianceSpec {
    pub fn new(n: u32, alpha: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return param(format!("dimension {n} not in 1..=3"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return param(format!("alpha = {alpha} must lie in [0, 1]"));
        }
        Ok(CovarianceSpec { n, alpha })
    }
}

/// Volume of the unit `n`-ball.
pub fn unit_ball_volume(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        n => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// Nazarov-Sodin constant of the circle ensemble, `sqrt((1 + a + a^2) / 3)`.
pub fn ns_constant_1d(alpha: f64) -> f64 {
    (1.0 + alpha + alpha * alpha).sqrt() / 3f64.sqrt()
}

// ---------------------------------------------------------------------------
// Bessel functions of the first kind, orders 0 and 1.

const SERIES_LIMIT: f64 = 12.0;
const MILLER_LIMIT: f64 = 50.0;

fn bessel_series(order: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let (mut term, scale) = if order == 0 { (1.0, 1.0) } else { (1.0, 0.5 * x) };
    let mut sum = term;
    let nu = order as f64;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 4 {
            break;
        }
    }
    scale * sum
}

/// Miller's backward recurrence normalized by `J0 + 2 sum J_2k = 1`.
fn bessel_miller(x: f64) -> (f64, f64) {
    let mut top = (x + 30.0 + 6.0 * x.cbrt()) as usize;
    top += top % 2;
    let (mut jp, mut j) = (0.0f64, 1e-300f64);
    let (mut j0, mut j1) = (0.0, 0.0);
    let mut norm = 0.0;
    for k in (1..=top).rev() {
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        // j now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
        if k - 1 == 1 {
            j1 = j;
        }
        if k - 1 == 0 {
            j0 = j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += j0;
    (j0 / norm, j1 / norm)
}

fn bessel_asymptotic(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let z = 8.0 * x;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * z);
        if term.abs() >= last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    let chi = x - (0.5 * order as f64 + 0.5) * PI + FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_order(x)` for `order` in `{0, 1}` and `x >= 0`.
///
/// Power series up to `x = 12`, Miller's backward recurrence up to `x = 50`
/// and the Hankel asymptotic expansion beyond.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    assert!(order <= 1, "only orders 0 and 1 are supported");
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT {
        bessel_series(order, ax)
    } else if ax <= MILLER_LIMIT {
        let (j0, j1) = bessel_miller(ax);
        if order == 0 { j0 } else { j1 }
    } else {
        bessel_asymptotic(order, ax)
    };
    if order == 1 && x < 0.0 { -v } else { v }
}

// ---------------------------------------------------------------------------
// Quadrature.

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 {
            v
        } else {
            let m = 0.5 * (a + b);
            rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
        }
    }
    rec(&f, a, b, tol, 0)
}

/// Angular average of `e^{i<w,xi>}` over the unit sphere in `R^n`, as a
/// function of `s = |w||xi|`.
fn angular_kernel(n: u32, s: f64) -> f64 {
    match n {
        1 => s.cos(),
        2 => bessel_j(0, s),
        _ => {
            if s.abs() < 1e-4 {
                1.0 - s * s / 6.0
            } else {
                s.sin() / s
            }
        }
    }
}

/// Radial-quadrature evaluation of `B_{n,alpha}(r)`, valid for every `alpha`.
pub fn covariance_quadrature(spec: CovarianceSpec, r: f64) -> f64 {
    let (n, a) = (spec.n, spec.alpha);
    if a == 1.0 {
        return angular_kernel(n, r);
    }
    let ni = n as i32;
    let mass = (1.0 - a.powi(ni)) / n as f64;
    // Panels no wider than half an oscillation of the integrand.
    let width = if r > 0.0 { (PI / r).min(1.0 - a) } else { 1.0 - a };
    let panels = ((1.0 - a) / width).ceil().max(1.0) as usize;
    let step = (1.0 - a) / panels as f64;
    let tol = 1e-12 / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * step;
        sum += integrate(|rho| rho.powi(ni - 1) * angular_kernel(n, r * rho), lo, lo + step, tol);
    }
    sum / mass
}

/// `B_{n,alpha}(r)` for `r >= 0`, from closed forms where available.
pub fn covariance(spec: CovarianceSpec, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    if spec.alpha == 1.0 {
        angular_kernel(spec.n, r)
    } else if spec.n == 2 && spec.alpha == 0.0 {
        2.0 * bessel_j(1, r) / r
    } else {
        covariance_quadrature(spec, r)
    }
}

// ---------------------------------------------------------------------------
// Empirical covariance of planar realizations.

/// One row of an empirical covariance table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub lag: f64,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub rows: Vec<CovarianceEstimate>,
    pub warnings: Vec<String>,
}

/// Minimum field count below which a warning is attached.
pub const MIN_COVARIANCE_FIELDS: usize = 100;

/// Sweep geometry for [`empirical_covariance`].
#[derive(Clone, Copy, Debug)]
pub struct SweepConfig {
    pub directions: usize,
    /// Base points per direction, spaced by the lag step.
    pub base_points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { directions: 8, base_points: 64 }
    }
}

/// Values of `f` at `x0 + q * step * e` for `q in 0..count`, by rotating each
/// wave's phasor.
fn line_samples(field: &PlaneWaveField, x0: [f64; 2], e: [f64; 2], step: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for ((k, &a), &b) in field.wavevectors.iter().zip(&field.cos_amps).zip(&field.sin_amps) {
        let (s0, c0) = (k[0] * x0[0] + k[1] * x0[1]).sin_cos();
        let (sd, cd) = (step * (k[0] * e[0] + k[1] * e[1])).sin_cos();
        let (mut c, mut s) = (c0, s0);
        for v in out.iter_mut() {
            *v += a * c + b * s;
            let nc = c * cd - s * sd;
            s = s * cd + c * sd;
            c = nc;
        }
    }
    for v in out.iter_mut() {
        *v *= field.normalization;
    }
}

/// Averages `f(x0) f(x0 + r e)` over base points, directions and fields.
///
/// Lags must be non-negative integer multiples of a common step (the smallest
/// positive lag). The standard error is taken across fields.
pub fn empirical_covariance(fields: &[PlaneWaveField], lags: &[f64], sweep: SweepConfig) -> Result<CovarianceReport> {
    let plan = LagPlan::new(lags)?;
    let per_field = fields.iter().map(|f| plan.products(f, sweep)).collect::<Result<Vec<_>>>()?;
    plan.summarize(&per_field)
}

/// Lags as integer multiples of the smallest positive lag.
#[derive(Clone, Debug, PartialEq)]
pub struct LagPlan {
    pub lags: Vec<f64>,
    step: f64,
    offsets: Vec<usize>,
}

impl LagPlan {
    pub fn new(lags: &[f64]) -> Result<Self> {
        if lags.is_empty() || lags.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return param("lags must be finite, non-negative and non-empty");
        }
        let step = lags.iter().copied().filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min);
        let step = if step.is_finite() { step } else { 1.0 };
        let mut offsets = Vec::with_capacity(lags.len());
        for &r in lags {
            let q = (r / step).round();
            if (q * step - r).abs() > 1e-9 * step.max(1.0) {
                return param(format!("lag {r} is not a multiple of the step {step}"));
            }
            offsets.push(q as usize);
        }
        Ok(LagPlan { lags: lags.to_vec(), step, offsets })
    }

    /// Evenly spaced lags `0, step, ..., <= max`.
    pub fn uniform(step: f64, max: f64) -> Result<Self> {
        if !(step > 0.0 && max >= step) {
            return param("need 0 < step <= max");
        }
        let n = (max / step + 1e-9).floor() as usize;
        Self::new(&(0..=n).map(|i| i as f64 * step).collect::<Vec<_>>())
    }

    /// Mean lagged products of one field along the sweep lines.
    pub fn products(&self, field: &PlaneWaveField, sweep: SweepConfig) -> Result<Vec<f64>> {
        if field.dim() != 2 {
            return param("empirical covariance needs planar fields");
        }
        let max_off = self.offsets.iter().copied().max().unwrap_or(0);
        let mut line = vec![0.0; sweep.base_points + max_off];
        let mut acc = vec![0.0; self.lags.len()];
        for d in 0..sweep.directions {
            let ang = PI * d as f64 / sweep.directions as f64;
            let e = [ang.cos(), ang.sin()];
            let x0 = [97.0 * d as f64, -61.0 * d as f64];
            line_samples(field, x0, e, self.step, &mut line);
            for (slot, &off) in acc.iter_mut().zip(&self.offsets) {
                *slot += (0..sweep.base_points).map(|q| line[q] * line[q + off]).sum::<f64>();
            }
        }
        let norm = (sweep.directions * sweep.base_points) as f64;
        acc.iter_mut().for_each(|v| *v /= norm);
        Ok(acc)
    }

    /// Across-field means and standard errors of per-field products.
    pub fn summarize(&self, per_field: &[Vec<f64>]) -> Result<CovarianceReport> {
        if per_field.is_empty() {
            return param("no fields supplied");
        }
        let mut report = CovarianceReport::default();
        if per_field.len() < MIN_COVARIANCE_FIELDS {
            report.warnings.push(format!(
                "only {} fields; at least {MIN_COVARIANCE_FIELDS} recommended",
                per_field.len()
            ));
        }
        let nf = per_field.len() as f64;
        for (l, &lag) in self.lags.iter().enumerate() {
            let mean = per_field.iter().map(|v| v[l]).sum::<f64>() / nf;
            let var = if per_field.len() > 1 {
                per_field.iter().map(|v| (v[l] - mean).powi(2)).sum::<f64>() / (nf - 1.0)
            } else {
                0.0
            };
            report.rows.push(CovarianceEstimate { lag, estimate: mean, stderr: (var / nf).sqrt() });
        }
        Ok(report)
    }
}

/// CSV `r,B(r)` of the limiting covariance.
pub fn covariance_csv(spec: CovarianceSpec, lags: &[f64]) -> String {
    let mut out = String::from("r,covariance\n");
    for &r in lags {
        out.push_str(&format!("{r},{}\n", covariance(spec, r)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: `J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt`
    /// by the trapezoid rule, which converges geometrically for periodic
    /// integrands.
    fn bessel_oracle(n: u32, x: f64) -> f64 {
        let m = 2 * (x as usize + 80);
        let h = 2.0 * PI / m as f64;
        (0..m).map(|k| (n as f64 * k as f64 * h - x * (k as f64 * h).sin()).cos()).sum::<f64>() / m as f64
    }

    #[test]
    fn bessel_known_values() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
        assert!((bessel_j(0, 1.0) - 0.765_197_686_6).abs() < 1e-10);
        assert!(bessel_j(0, 2.404_825_6).abs() < 1e-6);
    }

    #[test]
    fn bessel_matches_integral_oracle() {
        let mut x = 0.0;
        while x < 120.0 {
            for n in 0..2 {
                let d = (bessel_j(n, x) - bessel_oracle(n, x)).abs();
                assert!(d < 1e-12, "J{n}({x}) off by {d}");
            }
            x += 0.37;
        }
    }

    #[test]
    fn bessel_branches_agree_at_crossovers() {
        for &x in &[SERIES_LIMIT, MILLER_LIMIT] {
            let (m0, m1) = bessel_miller(x);
            let (s0, s1) = if x == SERIES_LIMIT {
                (bessel_series(0, x), bessel_series(1, x))
            } else {
                (bessel_asymptotic(0, x), bessel_asymptotic(1, x))
            };
            assert!((m0 - s0).abs() < 1e-12 && (m1 - s1).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn ns_constant_values() {
        assert!((ns_constant_1d(0.0) - 0.577_350_3).abs() < 1e-7);
        assert!((ns_constant_1d(1.0) - 1.0).abs() < 1e-15);
        assert!((ns_constant_1d(0.5) - 0.763_762_6).abs() < 1e-7);
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = ns_constant_1d(i as f64 / 100.0);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn covariance_at_zero_and_first_zero() {
        let s = CovarianceSpec::new(2, 1.0).unwrap();
        assert_eq!(covariance(s, 0.0), 1.0);
        assert!(covariance(s, 2.404_825_6).abs() < 1e-6);
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        for &a in &[0.0, 1.0] {
            let s = CovarianceSpec::new(2, a).unwrap();
            let mut r = 0.0;
            while r <= 20.0 {
                let d = (covariance(s, r) - covariance_quadrature(s, r)).abs();
                assert!(d < 1e-8, "alpha {a} r {r}: {d}");
                r += 0.25;
            }
        }
    }

    #[test]
    fn annulus_closed_form_general_alpha() {
        // B = 2 (J1(r) - a J1(a r)) / (r (1 - a^2)) for the planar annulus.
        let a = 0.5;
        let s = CovarianceSpec::new(2, a).unwrap();
        for &r in &[0.3, 3.0, 9.5] {
            let cf = 2.0 * (bessel_j(1, r) - a * bessel_j(1, a * r)) / (r * (1.0 - a * a));
            assert!((covariance(s, r) - cf).abs() < 1e-9);
        }
    }

    #[test]
    fn direct_polar_quadrature_oracle() {
        // Tensor rule over the annulus: Gauss-Legendre in radius, trapezoid in
        // angle, integrating cos(r rho cos t) without any Bessel function.
        let (a, r) = (0.5, 3.0);
        let (x, w) = gauss_legendre(40);
        let nt = 256;
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let rho = a + (1.0 - a) * 0.5 * (xi + 1.0);
            let jac = (1.0 - a) * 0.5 * wi * rho;
            let ang: f64 = (0..nt).map(|k| (r * rho * (2.0 * PI * k as f64 / nt as f64).cos()).cos()).sum::<f64>()
                / nt as f64;
            num += jac * ang;
            den += jac;
        }
        let oracle = num / den;
        let s = CovarianceSpec::new(2, a).unwrap();
        assert!((covariance(s, r) - oracle).abs() < 1e-3);
    }

    #[test]
    fn kernels_are_bounded_by_one() {
        for n in 1..=3 {
            for &a in &[0.0, 0.3, 0.8, 1.0] {
                let s = CovarianceSpec::new(n, a).unwrap();
                for i in 0..60 {
                    let v = covariance(s, i as f64 * 0.5);
                    assert!(v.abs() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn three_d_monochromatic_is_sinc() {
        let s = CovarianceSpec::new(3, 0.0).unwrap();
        // int_0^1 3 rho^2 sin(r rho)/(r rho) d rho = 3 (sin r - r cos r) / r^3
        let r: f64 = 4.0;
        let cf = 3.0 * (r.sin() - r * r.cos()) / r.powi(3);
        assert!((covariance(s, r) - cf).abs() < 1e-10);
    }

    #[test]
    fn empirical_covariance_of_zero_fields() {
        let mut f = crate::ensemble::sample_planar(1.0, 64, 0).unwrap();
        f.cos_amps.iter_mut().for_each(|v| *v = 0.0);
        f.sin_amps.iter_mut().for_each(|v| *v = 0.0);
        let rep = empirical_covariance(&vec![f; 3], &[0.0, 1.0], SweepConfig::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.estimate == 0.0 && r.stderr == 0.0));
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn empirical_covariance_tracks_j0() {
        let fields: Vec<_> = (0..150).map(|s| crate::ensemble::sample_planar(1.0, 512, s).unwrap()).collect();
        let lags: Vec<f64> = (0..=8).map(|i| i as f64).collect();
        let rep = empirical_covariance(&fields, &lags, SweepConfig::default()).unwrap();
        assert!(rep.warnings.is_empty());
        for row in &rep.rows {
            let b = bessel_j(0, row.lag);
            assert!((row.estimate - b).abs() < 4.0 * row.stderr + 1e-3, "{row:?} vs {b}");
        }
    }

    #[test]
    fn rejects_incommensurate_lags() {
        let f = crate::ensemble::sample_planar(1.0, 64, 0).unwrap();
        assert!(empirical_covariance(&[f], &[0.0, 1.0, 1.5], SweepConfig::default()).is_err());
    }
}
