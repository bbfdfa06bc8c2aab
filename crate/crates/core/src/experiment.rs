//! Reproducible experiment runner.
//!
//! A run is a pure function of its [`ExperimentConfig`]: sample `i` uses seed
//! `sample_seed(seed, i)`, samples are evaluated in parallel chunks and folded
//! in index order, so outputs are bit-identical for any worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::barriers::{realize_tree, TreeOptions, DEFAULT_EPSILON};
use crate::ensemble::{
    sample_circle, sample_planar, sample_sphere, sample_torus, sphere_degrees, torus_frequencies, BandParams,
    Resolution, ScalarGrid, MIN_PLANE_WAVES,
};
use crate::error::{Error, Result};
use crate::kernel::{covariance, ns_constant_1d, unit_ball_volume, CovarianceSpec, LagPlan, SweepConfig};
use crate::nesting::{all_ends, build_nesting_graph, degree_identity, is_tree, EndResult, RootedTree};
use crate::nodal2d::{connectivity, extract, write_label_pgm};
use crate::nodal3d::{genus_sample, marching_cubes, split_components};
use crate::rng::sample_seed;
use crate::stats::{
    fit_power_law, harnack_ratio, measure_csv, ns_estimate, reference_table, table_compare, MeasureAccumulator,
    MeasureEstimate, SampleCounts,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CovarianceCheck,
    Kacrice1d,
    MeasureOmega2d,
    MeasureEnds2d,
    Genus3d,
    NsConstant,
    BarrierDemo,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::CovarianceCheck,
        Experiment::Kacrice1d,
        Experiment::MeasureOmega2d,
        Experiment::MeasureEnds2d,
        Experiment::Genus3d,
        Experiment::NsConstant,
        Experiment::BarrierDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CovarianceCheck => "covariance-check",
            Experiment::Kacrice1d => "kacrice-1d",
            Experiment::MeasureOmega2d => "measure-omega-2d",
            Experiment::MeasureEnds2d => "measure-ends-2d",
            Experiment::Genus3d => "genus-3d",
            Experiment::NsConstant => "ns-constant",
            Experiment::BarrierDemo => "barrier-demo",
        }
    }

    fn default_geometry(self) -> Manifold {
        match self {
            Experiment::CovarianceCheck | Experiment::BarrierDemo => Manifold::Plane,
            Experiment::Kacrice1d => Manifold::Circle,
            Experiment::Genus3d => Manifold::Torus3,
            _ => Manifold::Sphere,
        }
    }

    fn allowed_geometries(self) -> &'static [Manifold] {
        match self {
            Experiment::CovarianceCheck | Experiment::BarrierDemo => &[Manifold::Plane],
            Experiment::Kacrice1d => &[Manifold::Circle],
            Experiment::MeasureOmega2d | Experiment::MeasureEnds2d => &[Manifold::Sphere, Manifold::Torus],
            Experiment::Genus3d => &[Manifold::Torus3],
            Experiment::NsConstant => &[Manifold::Circle, Manifold::Sphere, Manifold::Torus, Manifold::Torus3],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// Model geometry of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Manifold {
    Plane,
    Circle,
    Sphere,
    Torus,
    Torus3,
}

impl Manifold {
    pub fn name(self) -> &'static str {
        match self {
            Manifold::Plane => "plane",
            Manifold::Circle => "circle",
            Manifold::Sphere => "sphere",
            Manifold::Torus => "torus",
            Manifold::Torus3 => "torus3",
        }
    }

    fn dim(self) -> u32 {
        match self {
            Manifold::Circle => 1,
            Manifold::Torus3 => 3,
            _ => 2,
        }
    }

    /// Volume of the model manifold.
    fn volume(self) -> f64 {
        match self {
            Manifold::Circle => std::f64::consts::TAU,
            Manifold::Sphere => 4.0 * std::f64::consts::PI,
            _ => 1.0,
        }
    }
}

impl FromStr for Manifold {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Manifold::Plane, Manifold::Circle, Manifold::Sphere, Manifold::Torus, Manifold::Torus3]
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown geometry `{s}`"))
    }
}

/// Every parameter of a run. Unset options fall back to per-experiment
/// defaults when the run starts; the manifest records the resolved values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub geometry: Option<Manifold>,
    pub alpha: f64,
    /// Spectral parameter; on the sphere `ell` takes precedence.
    pub t: Option<f64>,
    pub ell: Option<u32>,
    pub eta: Option<f64>,
    pub samples: usize,
    /// Samples per wavelength.
    pub resolution: f64,
    pub allow_under_resolved: bool,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub num_waves: usize,
    pub lag_step: f64,
    pub max_lag: f64,
    pub tree: Option<String>,
    pub epsilon: f64,
    /// Write per-sample raw counts as JSON lines.
    pub spool: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            geometry: None,
            alpha: 1.0,
            t: None,
            ell: None,
            eta: None,
            samples: 100,
            resolution: Resolution::DEFAULT_PER_WAVELENGTH,
            allow_under_resolved: false,
            seed: 0,
            workers: 1,
            out: PathBuf::from("out"),
            num_waves: crate::ensemble::DEFAULT_PLANE_WAVES,
            lag_step: 0.25,
            max_lag: 8.0,
            tree: None,
            epsilon: DEFAULT_EPSILON,
            spool: true,
        }
    }

    pub fn geometry(&self) -> Manifold {
        self.geometry.unwrap_or(self.experiment.default_geometry())
    }

    /// Sets one key from a config file or flag.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |m: String| Error::Config { field: key.to_string(), message: m };
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("cannot parse `{v}`: {e}"))
        }
        fn flag(v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(format!("expected a boolean, got `{v}`")),
            }
        }
        let r: std::result::Result<(), String> = (|| {
            match key {
                "experiment" => self.experiment = value.parse()?,
                "geometry" => self.geometry = Some(value.parse()?),
                "alpha" => self.alpha = num(value)?,
                "t" | "T" => self.t = Some(num(value)?),
                "ell" => self.ell = Some(num(value)?),
                "eta" => self.eta = Some(num(value)?),
                "samples" => self.samples = num(value)?,
                "resolution" => self.resolution = num(value)?,
                "allow-under-resolved" => self.allow_under_resolved = flag(value)?,
                "seed" => self.seed = num(value)?,
                "workers" => self.workers = num(value)?,
                "out" => self.out = PathBuf::from(value),
                "num-waves" => self.num_waves = num(value)?,
                "lag-step" => self.lag_step = num(value)?,
                "max-lag" => self.max_lag = num(value)?,
                "tree" => self.tree = Some(value.to_string()),
                "epsilon" => self.epsilon = num(value)?,
                "spool" => self.spool = flag(value)?,
                _ => return Err("unknown key".to_string()),
            }
            Ok(())
        })();
        r.map_err(bad)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                field: format!("line {}", n + 1),
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    fn resolution_spec(&self) -> Resolution {
        Resolution { per_wavelength: self.resolution, allow_under: self.allow_under_resolved }
    }

    /// Spectral parameter with geometry defaults: degree 40 on the sphere,
    /// `T = 200` on the circle, frequency radius 20 on the 2-torus and 5 on
    /// the 3-torus.
    pub fn spectral_t(&self) -> f64 {
        let tau = std::f64::consts::TAU;
        match self.geometry() {
            Manifold::Sphere => {
                if let Some(l) = self.ell {
                    let l = l as f64;
                    (l * (l + 1.0)).sqrt()
                } else {
                    self.t.unwrap_or((40.0f64 * 41.0).sqrt())
                }
            }
            Manifold::Circle => self.t.unwrap_or(200.0),
            Manifold::Torus => self.t.unwrap_or(tau * 20.0),
            Manifold::Torus3 => self.t.unwrap_or(tau * 5.0),
            Manifold::Plane => 1.0,
        }
    }

    pub fn band(&self) -> Result<BandParams> {
        BandParams::with_eta(self.alpha, self.spectral_t(), self.eta.unwrap_or(BandParams::DEFAULT_ETA))
    }
}

/// One failed config check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Empty exactly when [`run`] accepts the config.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut push = |f: &str, m: String| v.push(Violation { field: f.into(), message: m });
    let geo = cfg.geometry();
    if !cfg.experiment.allowed_geometries().contains(&geo) {
        push("geometry", format!("{} does not run on {}", cfg.experiment, geo.name()));
    }
    if !(0.0..=1.0).contains(&cfg.alpha) {
        push("alpha", format!("{} is outside [0, 1]", cfg.alpha));
    }
    if cfg.samples < 1 {
        push("samples", "at least one sample is required".into());
    }
    if cfg.workers < 1 {
        push("workers", "at least one worker is required".into());
    }
    if !(cfg.resolution > 0.0) {
        push("resolution", "must be positive".into());
    } else if cfg.resolution < Resolution::MIN_PER_WAVELENGTH && !cfg.allow_under_resolved {
        push(
            "resolution",
            format!("{} samples per wavelength is below {}", cfg.resolution, Resolution::MIN_PER_WAVELENGTH),
        );
    }
    if let Some(t) = cfg.t {
        if !(t > 0.0 && t.is_finite()) {
            push("t", format!("{t} must be positive"));
        }
    }
    if cfg.ell == Some(0) {
        push("ell", "degree must be at least 1".into());
    }
    if let Some(eta) = cfg.eta {
        if !(eta > 0.0 && eta < cfg.spectral_t()) {
            push("eta", format!("{eta} must lie in (0, T)"));
        }
    }
    let band_ok = (0.0..=1.0).contains(&cfg.alpha) && cfg.t.is_none_or(|t| t > 0.0) && cfg.ell != Some(0);
    if band_ok && cfg.experiment != Experiment::BarrierDemo && cfg.experiment != Experiment::CovarianceCheck {
        match cfg.band() {
            Ok(p) => {
                let empty = match geo {
                    Manifold::Sphere => sphere_degrees(&p).is_empty(),
                    Manifold::Torus => torus_frequencies(&p, 2).is_empty(),
                    Manifold::Torus3 => torus_frequencies(&p, 3).is_empty(),
                    Manifold::Circle => sample_circle(&p, 0).is_err(),
                    Manifold::Plane => false,
                };
                if empty {
                    push("t", format!("no eigenvalue of the {} lies in the band {:?}", geo.name(), p.window()));
                }
            }
            Err(e) => push("eta", e.to_string()),
        }
    }
    if cfg.experiment == Experiment::CovarianceCheck {
        if cfg.num_waves < MIN_PLANE_WAVES {
            push("num-waves", format!("{} is below {MIN_PLANE_WAVES}", cfg.num_waves));
        }
        if !(cfg.lag_step > 0.0 && cfg.max_lag >= cfg.lag_step) {
            push("lag-step", "need 0 < lag-step <= max-lag".into());
        }
    }
    if cfg.experiment == Experiment::BarrierDemo {
        match cfg.tree.as_deref().map(RootedTree::parse) {
            None => push("tree", "barrier-demo needs a tree code".into()),
            Some(Err(e)) => push("tree", e.to_string()),
            Some(Ok(t)) if t.size > TreeOptions::default().max_size => {
                push("tree", format!("size {} exceeds {}", t.size, TreeOptions::default().max_size))
            }
            Some(Ok(_)) => {}
        }
        if !(cfg.epsilon > 0.0 && cfg.epsilon < 0.5) {
            push("epsilon", format!("{} must lie in (0, 0.5)", cfg.epsilon));
        }
    }
    v
}

/// Record of a finished run; re-running its `config` reproduces every
/// listed output byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub version: String,
    pub config: ExperimentConfig,
    pub geometry: Manifold,
    pub band: Option<BandParams>,
    pub seed_rule: String,
    pub sample_seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub summary: Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Loads the config stored in a run manifest.
pub fn config_from_manifest(path: &Path) -> Result<ExperimentConfig> {
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(m.config)
}

/// Samples evaluated per parallel chunk before folding.
const CHUNK: usize = 32;

/// Maps `f` over sample indices on `workers` threads and feeds results to
/// `fold` in index order.
pub fn for_each_sample<T: Send>(
    samples: usize,
    workers: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
    mut fold: impl FnMut(usize, T) -> Result<()>,
) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let mut start = 0;
    while start < samples {
        let end = (start + CHUNK * workers.max(1)).min(samples);
        let chunk: Vec<Result<T>> = pool.install(|| (start..end).into_par_iter().map(&f).collect());
        for (i, r) in (start..end).zip(chunk) {
            fold(i, r?)?;
        }
        start = end;
    }
    Ok(())
}

/// Topology of one sampled nodal structure on a closed surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSample {
    pub domains: usize,
    pub curves: usize,
    pub is_tree: bool,
    pub degree_sum: usize,
    /// Connectivity per domain; sub-resolution domains are unresolved.
    pub connectivity: SampleCounts<u32>,
    /// Tree ends per curve; ties and non-separating curves are unresolved.
    pub ends: Option<SampleCounts<String>>,
}

pub fn surface_grid(geometry: Manifold, band: &BandParams, res: Resolution, seed: u64) -> Result<ScalarGrid> {
    match geometry {
        Manifold::Sphere => sample_sphere(band, seed)?.evaluate_grid(res),
        Manifold::Torus => sample_torus(band, seed)?.evaluate_grid(res),
        g => Err(Error::Parameter(format!("{} is not a closed surface", g.name()))),
    }
}

pub fn domain_sample(geometry: Manifold, band: &BandParams, res: Resolution, seed: u64, with_ends: bool) -> Result<DomainSample> {
    let grid = surface_grid(geometry, band, res, seed)?;
    let s = extract(&grid)?;
    let g = build_nesting_graph(&s.components, &s.curves);
    let conn = connectivity(&s.components, &s.curves);
    let mut counts = SampleCounts::default();
    for (d, &m) in s.components.components.iter().zip(&conn) {
        if d.sub_resolution {
            counts.unresolved += 1;
        } else {
            *counts.counts.entry(m).or_insert(0) += 1;
        }
    }
    let ends = with_ends.then(|| {
        let mut e = SampleCounts::default();
        for r in all_ends(&g) {
            match r {
                Ok(EndResult::Tree(t)) => *e.counts.entry(t.code).or_insert(0) += 1,
                _ => e.unresolved += 1,
            }
        }
        e
    });
    Ok(DomainSample {
        domains: g.vertex_count(),
        curves: g.edge_count(),
        is_tree: is_tree(&g),
        degree_sum: degree_identity(&g).0,
        connectivity: counts,
        ends,
    })
}

/// Pooled connectivity measure of `samples` sphere or torus fields.
pub fn connectivity_measure(
    geometry: Manifold,
    band: &BandParams,
    res: Resolution,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<MeasureEstimate<u32>> {
    let mut acc = MeasureAccumulator::new();
    for_each_sample(
        samples,
        workers,
        |i| domain_sample(geometry, band, res, sample_seed(seed, i as u64), false),
        |_, s| {
            acc.add(&s.connectivity);
            Ok(())
        },
    )?;
    acc.finish()
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn jsonl_line(v: Value) -> String {
    let mut s = v.to_string();
    s.push('\n');
    s
}

/// Validates, runs and writes outputs plus `manifest.json` to `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    if let Some(v) = validate(cfg).into_iter().next() {
        return Err(Error::Config { field: v.field, message: v.message });
    }
    let mut out = Outputs::new(&cfg.out)?;
    let geometry = cfg.geometry();
    let band = match cfg.experiment {
        Experiment::CovarianceCheck | Experiment::BarrierDemo => None,
        _ => Some(cfg.band()?),
    };
    let res = cfg.resolution_spec();
    let n = cfg.samples;
    let summary = match cfg.experiment {
        Experiment::CovarianceCheck => run_covariance(cfg, &mut out)?,
        Experiment::Kacrice1d => run_kacrice(cfg, &band.unwrap(), &mut out)?,
        Experiment::MeasureOmega2d | Experiment::MeasureEnds2d => run_domains(cfg, geometry, &band.unwrap(), res, &mut out)?,
        Experiment::Genus3d => run_genus(cfg, &band.unwrap(), res, &mut out)?,
        Experiment::NsConstant => run_ns(cfg, geometry, &band.unwrap(), res, &mut out)?,
        Experiment::BarrierDemo => run_barrier(cfg, &mut out)?,
    };
    let seeds = if cfg.experiment == Experiment::BarrierDemo { vec![cfg.seed] } else { (0..n as u64).map(|i| sample_seed(cfg.seed, i)).collect() };
    let mut outputs = out.files.clone();
    outputs.push(MANIFEST_FILE.into());
    let manifest = RunManifest {
        experiment: cfg.experiment,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        geometry,
        band,
        seed_rule: "sample i uses ChaCha8 seeded with splitmix64(seed + i)".into(),
        sample_seeds: seeds,
        outputs,
        summary,
    };
    out.write(MANIFEST_FILE, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

fn run_covariance(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let plan = LagPlan::uniform(cfg.lag_step, cfg.max_lag)?;
    let sweep = SweepConfig::default();
    let mut rows = Vec::with_capacity(cfg.samples);
    for_each_sample(
        cfg.samples,
        cfg.workers,
        |i| plan.products(&sample_planar(cfg.alpha, cfg.num_waves, sample_seed(cfg.seed, i as u64))?, sweep),
        |_, r| {
            rows.push(r);
            Ok(())
        },
    )?;
    let report = plan.summarize(&rows)?;
    let spec = CovarianceSpec::new(2, cfg.alpha)?;
    let mut csv = String::from("lag,estimate,stderr,exact,deviation\n");
    let mut sup: f64 = 0.0;
    for r in &report.rows {
        let exact = covariance(spec, r.lag);
        sup = sup.max((r.estimate - exact).abs());
        csv.push_str(&format!("{},{},{},{},{}\n", r.lag, r.estimate, r.stderr, exact, r.estimate - exact));
    }
    out.write("covariance.csv", csv)?;
    Ok(json!({ "sup_deviation": sup, "fields": cfg.samples, "warnings": report.warnings }))
}

fn run_kacrice(cfg: &ExperimentConfig, band: &BandParams, out: &mut Outputs) -> Result<Value> {
    let mut counts = Vec::with_capacity(cfg.samples);
    let mut spool = String::new();
    let mut kr_sum = 0.0;
    for_each_sample(
        cfg.samples,
        cfg.workers,
        |i| {
            let seed = sample_seed(cfg.seed, i as u64);
            let f = sample_circle(band, seed)?;
            let top = f.freqs.iter().copied().max().unwrap_or(1) as f64;
            let grid = ((cfg.resolution * top).ceil() as usize).max(2 * top as usize + 2);
            Ok((seed, f.count_zeros(grid)?, f.kac_rice_expected_zeros()))
        },
        |i, (seed, z, kr)| {
            counts.push(z as f64);
            kr_sum += kr;
            if cfg.spool {
                spool.push_str(&jsonl_line(json!({ "index": i, "seed": seed, "zeros": z })));
            }
            Ok(())
        },
    )?;
    let est = ns_estimate(&counts, Manifold::Circle.volume(), band.t, 1, band.alpha)?;
    let exact = ns_constant_1d(band.alpha);
    let kr_mean = kr_sum / cfg.samples as f64;
    let rel = (est.beta_hat - exact) / exact;
    let mut csv = String::from("alpha,T,samples,beta_hat,stderr,exact,relative_error,mean_zeros,kac_rice_zeros\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        band.alpha, band.t, cfg.samples, est.beta_hat, est.stderr, exact, rel, est.mean_count, kr_mean
    ));
    out.write("kacrice.csv", csv)?;
    if cfg.spool {
        out.write("samples.jsonl", spool)?;
    }
    Ok(json!({ "beta_hat": est.beta_hat, "stderr": est.stderr, "exact": exact, "relative_error": rel }))
}

fn run_domains(cfg: &ExperimentConfig, geometry: Manifold, band: &BandParams, res: Resolution, out: &mut Outputs) -> Result<Value> {
    let ends_mode = cfg.experiment == Experiment::MeasureEnds2d;
    let mut conn = MeasureAccumulator::new();
    let mut ends = MeasureAccumulator::<String>::new();
    let mut spool = String::new();
    let mut tree_failures = 0usize;
    for_each_sample(
        cfg.samples,
        cfg.workers,
        |i| domain_sample(geometry, band, res, sample_seed(cfg.seed, i as u64), ends_mode),
        |i, s| {
            conn.add(&s.connectivity);
            if let Some(e) = &s.ends {
                ends.add(e);
            }
            let identity = s.degree_sum + 2 == 2 * s.domains;
            if geometry == Manifold::Sphere && !(s.is_tree && identity) {
                tree_failures += 1;
            }
            if cfg.spool {
                spool.push_str(&jsonl_line(json!({
                    "index": i,
                    "seed": sample_seed(cfg.seed, i as u64),
                    "domains": s.domains,
                    "curves": s.curves,
                    "is_tree": s.is_tree,
                    "connectivity": s.connectivity,
                    "ends": s.ends,
                })));
            }
            Ok(())
        },
    )?;
    let mut summary = json!({ "samples": cfg.samples });
    if geometry == Manifold::Sphere {
        summary["tree_identity_failures"] = json!(tree_failures);
    }
    if ends_mode {
        let est = ends.finish()?;
        out.write("ends.csv", measure_csv(&est))?;
        summary["unresolved_mass"] = json!(est.measure.unresolved_mass);
        summary["distinct_ends"] = json!(est.measure.atoms.len());
    } else {
        let est = conn.finish()?;
        out.write("omega.csv", measure_csv(&est))?;
        summary["mean_connectivity"] = json!(est.measure.resolved_mean());
        summary["unresolved_mass"] = json!(est.measure.unresolved_mass);
        if geometry == Manifold::Sphere && (band.alpha == 1.0 || band.alpha == 0.0) {
            let rows = table_compare(&est, &reference_table(band.alpha == 1.0));
            let mut csv = String::from("atom,measured,reference,deviation,stderr\n");
            for r in &rows {
                csv.push_str(&format!("{},{},{},{},{}\n", r.atom, r.measured, r.reference, r.deviation, r.stderr));
            }
            out.write("table_compare.csv", csv)?;
        }
        match fit_power_law(&est.measure, 3) {
            Ok(fit) => summary["tail_fit"] = serde_json::to_value(fit)?,
            Err(e) => summary["tail_fit_error"] = json!(e.to_string()),
        }
    }
    if cfg.spool {
        out.write("samples.jsonl", spool)?;
    }
    if tree_failures > 0 {
        return Err(Error::Consistency(format!("{tree_failures} sphere samples violate the tree identity")));
    }
    Ok(summary)
}

fn run_genus(cfg: &ExperimentConfig, band: &BandParams, res: Resolution, out: &mut Outputs) -> Result<Value> {
    let mut acc = MeasureAccumulator::new();
    let mut spool = String::new();
    for_each_sample(
        cfg.samples,
        cfg.workers,
        |i| genus_sample(band, res, sample_seed(cfg.seed, i as u64)),
        |i, c| {
            acc.add(&c);
            if cfg.spool {
                spool.push_str(&jsonl_line(json!({ "index": i, "seed": sample_seed(cfg.seed, i as u64), "genus": c })));
            }
            Ok(())
        },
    )?;
    let est = acc.finish()?;
    out.write("genus.csv", measure_csv(&est))?;
    if cfg.spool {
        out.write("samples.jsonl", spool)?;
    }
    Ok(json!({ "mean_genus": est.measure.resolved_mean(), "unresolved_mass": est.measure.unresolved_mass }))
}

fn component_count(geometry: Manifold, band: &BandParams, res: Resolution, seed: u64) -> Result<usize> {
    match geometry {
        Manifold::Circle => {
            let f = sample_circle(band, seed)?;
            let top = f.freqs.iter().copied().max().unwrap_or(1) as f64;
            f.count_zeros(((res.per_wavelength * top).ceil() as usize).max(2 * top as usize + 2))
        }
        Manifold::Torus3 => {
            let grid = sample_torus3_grid(band, res, seed)?;
            Ok(split_components(&marching_cubes(&grid))?.len())
        }
        g => Ok(extract(&surface_grid(g, band, res, seed)?)?.curves.curves.len()),
    }
}

fn sample_torus3_grid(band: &BandParams, res: Resolution, seed: u64) -> Result<crate::ensemble::ScalarGrid3> {
    crate::ensemble::sample_torus3(band, seed)?.evaluate_grid3(res)
}

fn run_ns(cfg: &ExperimentConfig, geometry: Manifold, band: &BandParams, res: Resolution, out: &mut Outputs) -> Result<Value> {
    let mut counts = Vec::with_capacity(cfg.samples);
    let mut spool = String::new();
    for_each_sample(
        cfg.samples,
        cfg.workers,
        |i| component_count(geometry, band, res, sample_seed(cfg.seed, i as u64)),
        |i, c| {
            counts.push(c as f64);
            if cfg.spool {
                spool.push_str(&jsonl_line(json!({ "index": i, "seed": sample_seed(cfg.seed, i as u64), "components": c })));
            }
            Ok(())
        },
    )?;
    let n = geometry.dim();
    let est = ns_estimate(&counts, geometry.volume(), band.t, n, band.alpha)?;
    let mut summary = serde_json::to_value(&est)?;
    let mut csv = String::from("geometry,n,alpha,T,samples,beta_hat,stderr,mean_count,unit_ball_volume\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        geometry.name(),
        n,
        band.alpha,
        band.t,
        cfg.samples,
        est.beta_hat,
        est.stderr,
        est.mean_count,
        unit_ball_volume(n)
    ));
    out.write("ns.csv", csv)?;
    if n == 1 {
        summary["exact"] = json!(ns_constant_1d(band.alpha));
    }
    if geometry == Manifold::Sphere && band.alpha == 0.0 {
        let degree = sphere_degrees(band).into_iter().max().unwrap_or(0);
        if let Ok(h) = harnack_ratio(est.beta_hat, degree) {
            summary["harnack_ratio"] = json!(h);
        }
    }
    if cfg.spool {
        out.write("samples.jsonl", spool)?;
    }
    Ok(summary)
}

fn run_barrier(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let target = RootedTree::parse(cfg.tree.as_deref().unwrap_or_default())?;
    let mut opts = TreeOptions { epsilon: cfg.epsilon, ..TreeOptions::default() };
    opts.barrier.seed = cfg.seed;
    let r = realize_tree(&target, &opts)?;
    let (x, y, w, h) = r.window;
    let grid = r.function.evaluate_grid_2d(x, y, w, h, opts.barrier.samples_per_unit)?;
    let s = r.structure.as_ref().expect("verified constructions carry their structure");
    out.write("field.pgm", field_pgm(&grid))?;
    let mut labels = Vec::new();
    write_label_pgm(&s.components, &mut labels)?;
    out.write("labels.pgm", labels)?;
    out.write("curves.json", s.to_json()?)?;
    out.write("barrier.json", serde_json::to_string(&r)?)?;
    out.write("code.txt", format!("{}\n", r.code))?;
    let mut sites = BTreeMap::new();
    for s in &r.spec.signs {
        *sites.entry(*s).or_insert(0usize) += 1;
    }
    Ok(json!({
        "code": r.code,
        "verified": true,
        "lattice_points": r.spec.points.len(),
        "epsilon": r.function.epsilon,
        "kappa": r.function.perturbation.kappa,
        "condition_number": r.function.perturbation.condition_number,
        "attempts": r.attempts,
        "positive_sites": sites.get(&1).copied().unwrap_or(0),
        "negative_sites": sites.get(&-1).copied().unwrap_or(0),
    }))
}

/// 8-bit PGM of the grid values, mid-grey at zero.
pub fn field_pgm(grid: &ScalarGrid) -> Vec<u8> {
    let scale = grid.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut out = format!("P5\n{} {}\n255\n", grid.cols, grid.rows).into_bytes();
    out.extend(grid.values.iter().map(|v| (127.5 + 127.5 * v / scale).round().clamp(0.0, 255.0) as u8));
    out
}
