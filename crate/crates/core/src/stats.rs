//! Empirical topology measures, Nazarov-Sodin estimates, discrepancies and
//! power-law tail fits.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::kernel::unit_ball_volume;

/// Probability measure on atoms plus an explicit unresolved bucket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure<K: Ord> {
    pub atoms: BTreeMap<K, f64>,
    pub unresolved_mass: f64,
    pub total_count: u64,
}

impl<K: Ord + Clone> EmpiricalMeasure<K> {
    /// Normalizes pooled counts. Errors if nothing was counted.
    pub fn from_counts(counts: &BTreeMap<K, u64>, unresolved: u64) -> Result<Self> {
        let total = counts.values().sum::<u64>() + unresolved;
        if total == 0 {
            return Err(Error::InsufficientData("no atoms counted".into()));
        }
        let t = total as f64;
        Ok(EmpiricalMeasure {
            atoms: counts.iter().filter(|(_, &c)| c > 0).map(|(k, &c)| (k.clone(), c as f64 / t)).collect(),
            unresolved_mass: unresolved as f64 / t,
            total_count: total,
        })
    }

    /// Measure from reference masses, with the remainder put in the
    /// unresolved bucket.
    pub fn from_masses(masses: impl IntoIterator<Item = (K, f64)>, total_count: u64) -> Result<Self> {
        let atoms: BTreeMap<K, f64> = masses.into_iter().collect();
        let sum: f64 = atoms.values().sum();
        if atoms.values().any(|&m| m < 0.0) || sum > 1.0 + 1e-12 {
            return param("masses must be non-negative with total at most 1");
        }
        Ok(EmpiricalMeasure { atoms, unresolved_mass: (1.0 - sum).max(0.0), total_count: total_count.max(1) })
    }

    pub fn mass(&self, k: &K) -> f64 {
        self.atoms.get(k).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.values().sum::<f64>() + self.unresolved_mass
    }
}

impl EmpiricalMeasure<u32> {
    /// Mean over resolved atoms, renormalized to them.
    pub fn resolved_mean(&self) -> f64 {
        let m: f64 = self.atoms.values().sum();
        if m == 0.0 {
            return 0.0;
        }
        self.atoms.iter().map(|(&k, &p)| k as f64 * p).sum::<f64>() / m
    }
}

/// One sample's atoms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts<K: Ord> {
    pub counts: BTreeMap<K, u64>,
    pub unresolved: u64,
}

impl<K: Ord + Clone> SampleCounts<K> {
    pub fn from_atoms(atoms: impl IntoIterator<Item = K>, unresolved: u64) -> Self {
        let mut counts = BTreeMap::new();
        for a in atoms {
            *counts.entry(a).or_insert(0) += 1;
        }
        SampleCounts { counts, unresolved }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.unresolved
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Moments {
    sum: f64,
    sum_sq: f64,
    /// Sum of the atom count times the sample total.
    cross: f64,
}

impl Moments {
    fn add(&mut self, n: f64, total: f64) {
        self.sum += n;
        self.sum_sq += n * n;
        self.cross += n * total;
    }

    fn merge(&mut self, o: &Moments) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.cross += o.cross;
    }
}

/// Streaming pooled aggregation with per-atom delta-method errors. Memory is
/// proportional to the number of distinct atoms, not samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureAccumulator<K: Ord> {
    atoms: BTreeMap<K, Moments>,
    unresolved: Moments,
    samples: u64,
    total: f64,
    total_sq: f64,
}

impl<K: Ord> Default for MeasureAccumulator<K> {
    fn default() -> Self {
        MeasureAccumulator {
            atoms: BTreeMap::new(),
            unresolved: Moments::default(),
            samples: 0,
            total: 0.0,
            total_sq: 0.0,
        }
    }
}

/// Pooled measure with standard errors per atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate<K: Ord> {
    pub measure: EmpiricalMeasure<K>,
    pub stderr: BTreeMap<K, f64>,
    pub unresolved_stderr: f64,
    pub samples: u64,
}

impl<K: Ord + Clone> MeasureAccumulator<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn add(&mut self, s: &SampleCounts<K>) {
        let t = s.total() as f64;
        for (k, &c) in &s.counts {
            self.atoms.entry(k.clone()).or_default().add(c as f64, t);
        }
        self.unresolved.add(s.unresolved as f64, t);
        self.samples += 1;
        self.total += t;
        self.total_sq += t * t;
    }

    pub fn merge(&mut self, other: &MeasureAccumulator<K>) {
        for (k, m) in &other.atoms {
            self.atoms.entry(k.clone()).or_default().merge(m);
        }
        self.unresolved.merge(&other.unresolved);
        self.samples += other.samples;
        self.total += other.total;
        self.total_sq += other.total_sq;
    }

    fn ratio_stderr(&self, m: &Moments) -> f64 {
        let s = self.samples as f64;
        if self.samples < 2 || self.total == 0.0 {
            return 0.0;
        }
        let p = m.sum / self.total;
        let resid = (m.sum_sq - 2.0 * p * m.cross + p * p * self.total_sq).max(0.0) / (s - 1.0);
        let mean_total = self.total / s;
        (resid / s).sqrt() / mean_total
    }

    pub fn finish(&self) -> Result<MeasureEstimate<K>> {
        if self.samples == 0 {
            return param("no samples accumulated");
        }
        if self.total == 0.0 {
            return Err(Error::InsufficientData("samples contain no atoms".into()));
        }
        let t = self.total;
        let atoms = self.atoms.iter().map(|(k, m)| (k.clone(), m.sum / t)).collect();
        let stderr = self.atoms.iter().map(|(k, m)| (k.clone(), self.ratio_stderr(m))).collect();
        Ok(MeasureEstimate {
            measure: EmpiricalMeasure { atoms, unresolved_mass: self.unresolved.sum / t, total_count: t as u64 },
            stderr,
            unresolved_stderr: self.ratio_stderr(&self.unresolved),
            samples: self.samples,
        })
    }
}

/// Pools samples into one measure.
pub fn accumulate<K: Ord + Clone>(samples: &[SampleCounts<K>]) -> Result<EmpiricalMeasure<K>> {
    if samples.is_empty() {
        return param("no samples");
    }
    let mut acc = MeasureAccumulator::new();
    samples.iter().for_each(|s| acc.add(s));
    Ok(acc.finish()?.measure)
}

/// `sup_F |a(F) - b(F)|` over finite sets of atoms, the unresolved bucket
/// included as an atom.
pub fn discrepancy<K: Ord>(a: &EmpiricalMeasure<K>, b: &EmpiricalMeasure<K>) -> f64 {
    let (mut pos, mut neg) = (0.0, 0.0);
    let mut push = |d: f64| {
        if d > 0.0 {
            pos += d
        } else {
            neg -= d
        }
    };
    for (k, &pa) in &a.atoms {
        push(pa - b.atoms.get(k).copied().unwrap_or(0.0));
    }
    for (k, &pb) in &b.atoms {
        if !a.atoms.contains_key(k) {
            push(-pb);
        }
    }
    push(a.unresolved_mass - b.unresolved_mass);
    f64::max(pos, neg)
}

/// Nazarov-Sodin constant estimate from per-sample component counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsEstimate {
    pub beta_hat: f64,
    pub stderr: f64,
    pub n: u32,
    pub alpha: f64,
    pub samples: usize,
    pub mean_count: f64,
    pub min_count: f64,
    pub max_count: f64,
}

/// `beta = mean(count) (2 pi)^n / (omega_n vol T^n)`, with `vol` the volume
/// of the manifold.
pub fn ns_estimate(counts: &[f64], volume: f64, t: f64, n: u32, alpha: f64) -> Result<NsEstimate> {
    if counts.is_empty() {
        return param("no counts");
    }
    if !(volume > 0.0 && t > 0.0) || n == 0 {
        return param("volume, T and n must be positive");
    }
    let k = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / k;
    let var = if counts.len() > 1 {
        counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let scale = (2.0 * PI).powi(n as i32) / (unit_ball_volume(n) * volume * t.powi(n as i32));
    Ok(NsEstimate {
        beta_hat: mean * scale,
        stderr: (var / k).sqrt() * scale,
        n,
        alpha,
        samples: counts.len(),
        mean_count: mean,
        min_count: counts.iter().copied().fold(f64::INFINITY, f64::min),
        max_count: counts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Expected components of a degree-`t` projective curve over the Harnack
/// bound `(t-1)(t-2)/2 + 1`. The real projective plane carries the round
/// metric of the unit sphere modulo antipodes, so its area is `2 pi`.
pub fn harnack_ratio(beta: f64, t: u32) -> Result<f64> {
    if t < 3 {
        return param("degree must be at least 3");
    }
    let tf = t as f64;
    let expected = beta * unit_ball_volume(2) / (2.0 * PI).powi(2) * (2.0 * PI) * tf * tf;
    Ok(expected / ((tf - 1.0) * (tf - 2.0) / 2.0 + 1.0))
}

/// Hurwitz zeta `sum_{k >= 0} (q + k)^{-s}` for `s > 1`, `q > 0`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const N: usize = 12;
    // B_2k / (2k)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let mut sum: f64 = (0..N).map(|k| (q + k as f64).powf(-s)).sum();
    let a = q + N as f64;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // Rising factorial s (s+1) ... (s+2j-2) times a^{-s-2j+1}.
    let mut fac = s;
    let mut pow = a.powf(-s - 1.0);
    for (j, b) in B.iter().enumerate() {
        sum += b * fac * pow;
        let m = 2.0 * j as f64;
        fac *= (s + m + 1.0) * (s + m + 2.0);
        pow /= a * a;
    }
    sum
}

/// Discrete power-law fit of a connectivity tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub stderr: f64,
    pub m_min: u32,
    pub num_points: u64,
}

const EXPONENT_RANGE: (f64, f64) = (1.0005, 12.0);

/// Maximum-likelihood exponent of `P(m) = m^{-s} / zeta(s, m_min)` over the
/// atoms at or above `m_min`, weighting atoms by their pooled counts.
pub fn fit_power_law(measure: &EmpiricalMeasure<u32>, m_min: u32) -> Result<TailFit> {
    if m_min < 2 {
        return param("m_min must be at least 2");
    }
    let tail: Vec<(f64, f64)> = measure
        .atoms
        .iter()
        .filter(|(&m, &p)| m >= m_min && p > 0.0)
        .map(|(&m, &p)| (m as f64, p * measure.total_count as f64))
        .collect();
    if tail.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} atoms at or above {m_min}; at least 5 needed",
            tail.len()
        )));
    }
    let n: f64 = tail.iter().map(|t| t.1).sum();
    let log_sum: f64 = tail.iter().map(|(m, w)| w * m.ln()).sum();
    let q = m_min as f64;
    let nll = |s: f64| s * log_sum + n * hurwitz_zeta(s, q).ln();
    let s = golden_min(nll, EXPONENT_RANGE.0, EXPONENT_RANGE.1, 1e-10);
    let h = 1e-4 * s;
    let lz = |s: f64| hurwitz_zeta(s, q).ln();
    let curv = (lz(s + h) - 2.0 * lz(s) + lz(s - h)) / (h * h);
    let stderr = if curv > 0.0 { 1.0 / (n * curv).sqrt() } else { f64::INFINITY };
    Ok(TailFit { exponent: s, stderr, m_min, num_points: n.round() as u64 })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Measured against reference mass at one atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow<K> {
    pub atom: K,
    pub measured: f64,
    pub reference: f64,
    pub deviation: f64,
    pub stderr: f64,
}

pub fn table_compare<K: Ord + Clone>(est: &MeasureEstimate<K>, table: &[(K, f64)]) -> Vec<TableRow<K>> {
    table
        .iter()
        .map(|(k, r)| {
            let m = est.measure.mass(k);
            TableRow {
                atom: k.clone(),
                measured: m,
                reference: *r,
                deviation: (m - r).abs(),
                stderr: est.stderr.get(k).copied().unwrap_or(0.0),
            }
        })
        .collect()
}

/// Connectivity distribution of nodal domains of random spherical harmonics
/// (monochromatic, `m = 1..=26`) from published Monte-Carlo simulations.
pub const CONNECTIVITY_TABLE_MONOCHROMATIC: [f64; 26] = [
    0.91171, 0.05143, 0.01322, 0.00628, 0.00364, 0.00230, 0.00159, 0.00117, 0.00090, 0.00070, 0.00058, 0.00047, 0.00039,
    0.00034, 0.00030, 0.00026, 0.00023, 0.00021, 0.00018, 0.00017, 0.00016, 0.00014, 0.00013, 0.00012, 0.000098,
    0.000097,
];

/// As [`CONNECTIVITY_TABLE_MONOCHROMATIC`] for the full band, `alpha = 0`.
pub const CONNECTIVITY_TABLE_FULL_BAND: [f64; 26] = [
    0.94473, 0.02820, 0.00889, 0.00437, 0.00261, 0.00173, 0.00128, 0.00093, 0.00072, 0.00056, 0.00048, 0.00039, 0.00034,
    0.00029, 0.00026, 0.00025, 0.00021, 0.00019, 0.00016, 0.00014, 0.00013, 0.00011, 0.00011, 0.00009, 0.00008, 0.00008,
];

/// Published tail exponents of the two tables and the percolation constant
/// they are compared with.
pub const TAIL_EXPONENT_MONOCHROMATIC: f64 = 2.149;
pub const TAIL_EXPONENT_FULL_BAND: f64 = 2.057;
pub const FISHER_EXPONENT: f64 = 187.0 / 91.0;

/// Reference table as `(m, mass)` pairs.
pub fn reference_table(alpha_is_one: bool) -> Vec<(u32, f64)> {
    let t = if alpha_is_one { &CONNECTIVITY_TABLE_MONOCHROMATIC } else { &CONNECTIVITY_TABLE_FULL_BAND };
    t.iter().enumerate().map(|(i, &p)| (i as u32 + 1, p)).collect()
}

/// CSV with `atom,mass,stderr` rows and a trailing `unresolved` row.
pub fn measure_csv<K: Ord + Clone + Display>(est: &MeasureEstimate<K>) -> String {
    let mut out = String::from("atom,mass,stderr\n");
    for (k, m) in &est.measure.atoms {
        out.push_str(&format!("{k},{m:.10},{:.10}\n", est.stderr.get(k).copied().unwrap_or(0.0)));
    }
    out.push_str(&format!("unresolved,{:.10},{:.10}\n", est.measure.unresolved_mass, est.unresolved_stderr));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Zeta};

    #[test]
    fn single_sample_measure() {
        let m = accumulate(&[SampleCounts::from_atoms([1u32, 1, 2], 0)]).unwrap();
        assert!((m.mass(&1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.mass(&2) - 1.0 / 3.0).abs() < 1e-15);
        let u = accumulate(&[SampleCounts::<u32>::from_atoms([], 4)]).unwrap();
        assert_eq!(u.unresolved_mass, 1.0);
        let s = SampleCounts::from_atoms([1u32, 3, 3, 7], 2);
        assert_eq!(accumulate(&[s.clone(), s.clone()]).unwrap(), {
            let mut one = accumulate(&[s]).unwrap();
            one.total_count *= 2;
            one
        });
        assert!(accumulate::<u32>(&[]).is_err());
    }

    #[test]
    fn accumulator_merge_is_pooling() {
        let samples: Vec<_> = (0..10u32).map(|i| SampleCounts::from_atoms([1, 1 + i % 3, 2 * i], i as u64 % 2)).collect();
        let mut whole = MeasureAccumulator::new();
        samples.iter().for_each(|s| whole.add(s));
        let (mut a, mut b) = (MeasureAccumulator::new(), MeasureAccumulator::new());
        samples[..4].iter().for_each(|s| a.add(s));
        samples[4..].iter().for_each(|s| b.add(s));
        a.merge(&b);
        let (x, y) = (whole.finish().unwrap(), a.finish().unwrap());
        assert_eq!(x.measure, y.measure);
        assert!((x.measure.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_stderr_matches_binomial_case() {
        // One atom per sample, resolved with probability p: stderr of the
        // pooled mass is sqrt(p (1 - p) / S).
        let mut rng = crate::rng::rng_from_seed(3);
        let mut acc = MeasureAccumulator::new();
        let s = 20000;
        for _ in 0..s {
            let hit = rng.random::<f64>() < 0.3;
            acc.add(&SampleCounts::from_atoms(if hit { vec![1u32] } else { vec![] }, u64::from(!hit)));
        }
        let e = acc.finish().unwrap();
        let want = (0.3f64 * 0.7 / s as f64).sqrt();
        assert!((e.stderr[&1] - want).abs() < 0.05 * want);
    }

    fn measure(pairs: &[(u32, f64)]) -> EmpiricalMeasure<u32> {
        EmpiricalMeasure::from_masses(pairs.iter().copied(), 1).unwrap()
    }

    /// Brute force over all subsets of the support, unresolved bucket
    /// included as one more atom.
    fn brute_discrepancy(a: &EmpiricalMeasure<u32>, b: &EmpiricalMeasure<u32>) -> f64 {
        let mut keys: Vec<Option<u32>> = a.atoms.keys().chain(b.atoms.keys()).map(|&k| Some(k)).collect();
        keys.sort();
        keys.dedup();
        keys.push(None);
        let m = |x: &EmpiricalMeasure<u32>, k: Option<u32>| k.map_or(x.unresolved_mass, |k| x.mass(&k));
        (0u32..1 << keys.len())
            .map(|mask| {
                keys.iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &k)| m(a, k) - m(b, k))
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn discrepancy_examples() {
        let a = measure(&[(1, 0.5), (2, 0.5)]);
        assert_eq!(discrepancy(&a, &a), 0.0);
        assert_eq!(discrepancy(&measure(&[(1, 1.0)]), &measure(&[(2, 1.0)])), 1.0);
        assert!((discrepancy(&a, &measure(&[(1, 1.0)])) - 0.5).abs() < 1e-15);
        assert!((brute_discrepancy(&a, &measure(&[(1, 1.0)])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn discrepancy_matches_subset_enumeration() {
        let mut rng = crate::rng::rng_from_seed(11);
        for _ in 0..200 {
            let mut draw = || {
                let w: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
                let s: f64 = w.iter().sum::<f64>() * (1.0 + rng.random::<f64>());
                measure(&w.iter().enumerate().map(|(i, &x)| (i as u32, x / s)).collect::<Vec<_>>())
            };
            let (a, b) = (draw(), draw());
            assert!((discrepancy(&a, &b) - brute_discrepancy(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn ns_estimate_circle() {
        let est = ns_estimate(&[0.0, 0.0], 2.0 * PI, 10.0, 1, 0.0).unwrap();
        assert_eq!(est.beta_hat, 0.0);
        // Circle: beta = count / (2 T).
        let est = ns_estimate(&[2.0 * 100.0 / 3f64.sqrt()], 2.0 * PI, 100.0, 1, 0.0).unwrap();
        assert!((est.beta_hat - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn harnack_ratio_limits() {
        assert_eq!(harnack_ratio(0.0, 10).unwrap(), 0.0);
        let r = |t| harnack_ratio(0.04, t).unwrap();
        assert!((r(100_000) - 0.04).abs() < 1e-5);
        assert!((r(1000) - r(2000)).abs() < 1e-4);
        assert!(harnack_ratio(1.0, 2).is_err());
    }

    #[test]
    fn hurwitz_zeta_values() {
        let pi2 = PI * PI;
        assert!((hurwitz_zeta(2.0, 1.0) - pi2 / 6.0).abs() < 1e-13);
        assert!((hurwitz_zeta(4.0, 1.0) - pi2 * pi2 / 90.0).abs() < 1e-13);
        assert!((hurwitz_zeta(2.0, 3.0) - (pi2 / 6.0 - 1.25)).abs() < 1e-13);
        // Direct summation far enough out that the tail is below 1e-12.
        let direct: f64 = (0..2_000_000).map(|k| (5.0 + k as f64).powf(-3.5)).sum::<f64>();
        let tail = (5.0f64 + 2e6).powf(-2.5) / 2.5;
        assert!((hurwitz_zeta(3.5, 5.0) - direct - tail).abs() < 1e-12);
    }

    #[test]
    fn power_law_errors() {
        let m = measure(&[(3, 1.0)]);
        assert!(matches!(fit_power_law(&m, 2), Err(Error::InsufficientData(_))));
        assert!(fit_power_law(&m, 1).is_err());
    }

    #[test]
    fn power_law_recovers_zeta_exponent() {
        let z = Zeta::new(2.1).unwrap();
        let mut rng = crate::rng::rng_from_seed(5);
        let mut counts = BTreeMap::new();
        for _ in 0..200_000 {
            let v: f64 = z.sample(&mut rng);
            *counts.entry(v.min(u32::MAX as f64) as u32).or_insert(0u64) += 1;
        }
        let m = EmpiricalMeasure::from_counts(&counts, 0).unwrap();
        let fit = fit_power_law(&m, 2).unwrap();
        assert!((fit.exponent - 2.1).abs() < 4.0 * fit.stderr.max(0.005), "{fit:?}");
        assert!(fit.stderr > 0.0 && fit.stderr < 0.05);
    }

    #[test]
    fn csv_has_trailing_unresolved_row() {
        let mut acc = MeasureAccumulator::new();
        acc.add(&SampleCounts::from_atoms([1u32, 2], 1));
        let csv = measure_csv(&acc.finish().unwrap());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "atom,mass,stderr");
        assert!(lines.last().unwrap().starts_with("unresolved,"));
        assert_eq!(lines.len(), 4);
    }
}
