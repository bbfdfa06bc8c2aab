//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances are fixed; see README for the protocol of each line.

use std::process::ExitCode;
use std::time::Instant;

use nodal_topology::barriers::{realize_tree, TreeOptions};
use nodal_topology::ensemble::{sample_circle, sample_planar, BandParams, Resolution, ScalarGrid3};
use nodal_topology::experiment::{connectivity_measure, domain_sample, for_each_sample, Manifold};
use nodal_topology::kernel::{covariance, covariance_quadrature, ns_constant_1d, CovarianceSpec, LagPlan, SweepConfig};
use nodal_topology::nesting::rooted_trees;
use nodal_topology::nodal3d::{marching_cubes, split_components};
use nodal_topology::rng::{rng_from_seed, sample_seed};
use nodal_topology::stats::{
    discrepancy, fit_power_law, ns_estimate, EmpiricalMeasure, FISHER_EXPONENT, TAIL_EXPONENT_MONOCHROMATIC,
};
use rand::Rng;
use rand_distr::Zeta;

type Outcome = Result<(bool, String), String>;

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn run(&mut self, id: &str, name: &str, f: impl FnOnce() -> Outcome) {
        let t0 = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>3} {name}: {detail} ({:.1}s)", t0.elapsed().as_secs_f64());
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Protocol resolution for the sphere tables: 24 samples per wavelength.
const TABLE_RESOLUTION: f64 = 24.0;
const TABLE_SAMPLES: usize = 300;

fn sphere_tree_identity() -> Outcome {
    let mut failures = 0;
    let mut total = 0;
    for ell in [20u32, 40, 80] {
        let band = BandParams::spherical_harmonic(ell).map_err(e2s)?;
        for_each_sample(
            200,
            1,
            |i| domain_sample(Manifold::Sphere, &band, Resolution::default(), sample_seed(1000 + ell as u64, i as u64), false),
            |_, s| {
                total += 1;
                if !(s.is_tree && s.degree_sum + 2 == 2 * s.domains) {
                    failures += 1;
                }
                Ok(())
            },
        )
        .map_err(e2s)?;
    }
    Ok((failures == 0, format!("{}/{total} samples are trees with sum d = 2|V| - 2", total - failures)))
}

fn table_monochromatic(mass_mono: &mut Option<EmpiricalMeasure<u32>>) -> Outcome {
    let band = BandParams::spherical_harmonic(80).map_err(e2s)?;
    let est = connectivity_measure(Manifold::Sphere, &band, Resolution::new(TABLE_RESOLUTION), TABLE_SAMPLES, 2, 1)
        .map_err(e2s)?;
    let (m1, m2) = (est.measure.mass(&1), est.measure.mass(&2));
    let ok = (m1 - 0.91171).abs() <= 0.015 && (m2 - 0.05143).abs() <= 0.01;
    let detail = format!(
        "m=1 {m1:.5} (+-{:.5}) vs 0.91171 tol 0.015; m=2 {m2:.5} (+-{:.5}) vs 0.05143 tol 0.01; unresolved {:.5}",
        est.stderr[&1], est.stderr[&2], est.measure.unresolved_mass
    );
    *mass_mono = Some(est.measure);
    Ok((ok, detail))
}

fn table_full_band() -> Outcome {
    let band = BandParams::new(0.0, (80.0f64 * 81.0).sqrt()).map_err(e2s)?;
    let est = connectivity_measure(Manifold::Sphere, &band, Resolution::new(TABLE_RESOLUTION), TABLE_SAMPLES, 3, 1)
        .map_err(e2s)?;
    let m1 = est.measure.mass(&1);
    let ok = (m1 - 0.94473).abs() <= 0.015;
    Ok((
        ok,
        format!(
            "m=1 {m1:.5} (+-{:.5}) vs 0.94473 tol 0.015; unresolved {:.5}",
            est.stderr[&1], est.measure.unresolved_mass
        ),
    ))
}

fn ns_1d() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.0, 0.5, 1.0] {
        let band = BandParams::new(alpha, 200.0).map_err(e2s)?;
        let counts: Vec<f64> = (0..500u64)
            .map(|i| {
                let f = sample_circle(&band, sample_seed(4, i))?;
                Ok(f.count_zeros(4096)? as f64)
            })
            .collect::<nodal_topology::Result<_>>()
            .map_err(e2s)?;
        let est = ns_estimate(&counts, std::f64::consts::TAU, 200.0, 1, alpha).map_err(e2s)?;
        let exact = ns_constant_1d(alpha);
        let rel = (est.beta_hat - exact).abs() / exact;
        ok &= rel <= 0.02;
        parts.push(format!("alpha {alpha}: {:.5} vs {exact:.5} ({:.2}%)", est.beta_hat, 100.0 * rel));
    }
    Ok((ok, parts.join("; ") + "; tol 2%"))
}

fn covariance_oracle() -> Outcome {
    let plan = LagPlan::uniform(0.25, 8.0).map_err(e2s)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [1.0, 0.0] {
        let spec = CovarianceSpec::new(2, alpha).map_err(e2s)?;
        // The closed form must agree with direct quadrature of the annulus integral.
        let closed_vs_quad = plan.lags.iter().map(|&r| (covariance(spec, r) - covariance_quadrature(spec, r)).abs()).fold(0.0, f64::max);
        let mut rows = Vec::new();
        for_each_sample(
            2000,
            1,
            |i| plan.products(&sample_planar(alpha, 4096, sample_seed(5 + alpha as u64, i as u64))?, SweepConfig::default()),
            |_, r| {
                rows.push(r);
                Ok(())
            },
        )
        .map_err(e2s)?;
        let report = plan.summarize(&rows).map_err(e2s)?;
        let sup = report.rows.iter().map(|r| (r.estimate - covariance(spec, r.lag)).abs()).fold(0.0, f64::max);
        ok &= sup <= 0.02 && closed_vs_quad <= 1e-8;
        let name = if alpha == 1.0 { "J0(r)" } else { "2J1(r)/r" };
        parts.push(format!("alpha {alpha} vs {name}: sup dev {sup:.4} (closed form vs quadrature {closed_vs_quad:.1e})"));
    }
    Ok((ok, parts.join("; ") + "; tol 0.02 on r in [0, 8]"))
}

fn genus_of(f: impl Fn(f64, f64, f64) -> f64, lo: f64, hi: f64) -> Result<Vec<Option<u32>>, String> {
    let g = ScalarGrid3::from_fn_box(lo, hi, 128, f).map_err(e2s)?;
    Ok(split_components(&marching_cubes(&g)).map_err(e2s)?.iter().map(|c| c.genus).collect())
}

fn genus_exactness() -> Outcome {
    let sphere = genus_of(|x, y, z| x * x + y * y + z * z - 0.64, -1.0, 1.0)?;
    let torus = genus_of(
        |x, y, z| {
            let q = (x * x + y * y).sqrt() - 0.6;
            q * q + z * z - 0.0625
        },
        -1.0,
        1.0,
    )?;
    let double = genus_of(
        |x, y, z| {
            let g = x * (x - 1.0) * (x - 1.0) * (x - 2.0) + y * y;
            g * g + z * z - 0.01
        },
        -1.0,
        3.0,
    )?;
    let ok = sphere == [Some(0)] && torus == [Some(1)] && double == [Some(2)];
    Ok((ok, format!("sphere {sphere:?}, torus {torus:?}, genus-2 surface {double:?} at 128^3")))
}

fn barrier_realization() -> Outcome {
    let mut total = 0;
    let mut bad = Vec::new();
    let mut exactly_seven = 0;
    for n in 1..=7 {
        for t in rooted_trees(n) {
            total += 1;
            exactly_seven += usize::from(n == 7);
            match realize_tree(&t, &TreeOptions::default()) {
                Ok(r) if r.code == t.code => {}
                Ok(r) => bad.push(format!("{} -> {}", t.code, r.code)),
                Err(e) => bad.push(format!("{}: {e}", t.code)),
            }
        }
    }
    let ok = bad.is_empty() && total == 85 && exactly_seven == 48;
    let mut detail = format!(
        "{}/{total} trees with at most 7 vertices ({exactly_seven} with exactly 7) realized with exact code match",
        total - bad.len()
    );
    if !bad.is_empty() {
        detail.push_str(&format!("; failures: {}", bad.join(", ")));
    }
    Ok((ok, detail))
}

fn discrepancy_convergence() -> Outcome {
    let band = BandParams::spherical_harmonic(40).map_err(e2s)?;
    let res = Resolution::default();
    let mut ratios = Vec::new();
    let (mut small, mut large) = (0.0, 0.0);
    for rep in 0..10u64 {
        let run = |n: usize, stream: u64| connectivity_measure(Manifold::Sphere, &band, res, n, sample_seed(800 + rep, stream), 1);
        let a = run(100, 0).map_err(e2s)?.measure;
        let b = run(100, 1).map_err(e2s)?.measure;
        let c = run(400, 2).map_err(e2s)?.measure;
        let d = run(400, 3).map_err(e2s)?.measure;
        let (ds, dl) = (discrepancy(&a, &b), discrepancy(&c, &d));
        small += ds / 10.0;
        large += dl / 10.0;
        ratios.push(dl / ds);
    }
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok((
        mean_ratio < 0.75,
        format!("mean D(400)/D(100) over 10 repeats {mean_ratio:.3} (mean D {small:.4} -> {large:.4}); tol < 0.75"),
    ))
}

fn power_law_synthetic() -> Outcome {
    let zeta = Zeta::new(2.1).map_err(e2s)?;
    let mut rng = rng_from_seed(9);
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..1_000_000 {
        let m: f64 = rng.sample(zeta);
        *counts.entry(m.min(u32::MAX as f64) as u32).or_insert(0u64) += 1;
    }
    let measure = EmpiricalMeasure::from_counts(&counts, 0).map_err(e2s)?;
    let fit = fit_power_law(&measure, 2).map_err(e2s)?;
    let ok = (fit.exponent - 2.10).abs() <= 0.05;
    Ok((ok, format!("exponent {:.4} +- {:.4} from 10^6 draws of zeta(2.1), m >= 2; tol 0.05", fit.exponent, fit.stderr)))
}

fn power_law_experiment(mono: Option<&EmpiricalMeasure<u32>>) -> Outcome {
    let mono = mono.ok_or("monochromatic measure unavailable")?;
    let fit = fit_power_law(mono, 3).map_err(e2s)?;
    let ok = (1.8..=2.5).contains(&fit.exponent);
    Ok((
        ok,
        format!(
            "connectivity tail of the l = 80 run, m >= 3: exponent {:.3} +- {:.3} over {} domains; range [1.8, 2.5]; \
             comparison points {TAIL_EXPONENT_MONOCHROMATIC} and Fisher {FISHER_EXPONENT:.4}",
            fit.exponent, fit.stderr, fit.num_points
        ),
    ))
}

fn main() -> ExitCode {
    let mut suite = Suite { passed: 0, failed: 0 };
    let mut mono = None;
    suite.run("1", "sphere tree identity", sphere_tree_identity);
    suite.run("2", "monochromatic connectivity table", || table_monochromatic(&mut mono));
    suite.run("3", "full-band connectivity table", table_full_band);
    suite.run("4", "1-D component constant", ns_1d);
    suite.run("5", "covariance oracle", covariance_oracle);
    suite.run("6", "genus exactness", genus_exactness);
    suite.run("7", "barrier realization", barrier_realization);
    suite.run("8", "discrepancy convergence", discrepancy_convergence);
    suite.run("9a", "power-law fitter on synthetic zeta draws", power_law_synthetic);
    suite.run("9b", "power-law fit of the connectivity tail", || power_law_experiment(mono.as_ref()));
    println!(
        "[NOTE]  10 not reproducible at desk scale: exact constants for n >= 2, the limits as T grows, and genus \
         support claims; covered by the tree-identity, unresolved-bucket and resolution-doubling properties in the \
         integration tests"
    );
    println!("acceptance: {} passed, {} failed", suite.passed, suite.failed);
    if suite.failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
