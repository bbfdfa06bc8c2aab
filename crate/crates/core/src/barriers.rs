//! Deterministic barrier constructions on the grid function
//! `f0 = sin(pi x) sin(pi y)` and its 3-D analogue.
//!
//! `f0` vanishes on the integer grid with conic singularities at lattice
//! points. Adding `eps * psi`, where `psi` is a monochromatic wave sum with
//! prescribed signs on a finite set `K`, resolves the singularity at each
//! `k` in `K`: the two positive quadrants at `k` join when `psi(k) > 0`, the
//! two negative ones otherwise.
//!
//! Tree layout works in rotated coordinates `(u, v)` in which positive cells
//! form the square lattice `Z^2` and negative cells its dual `(Z + 1/2)^2`.
//! Every lattice point of the plane is the midpoint of one primal and one
//! dual edge, and exactly one of the two is open.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Geometry, PlaneWaveField, ScalarGrid, Window};
use crate::error::{Error, Result};
use crate::nesting::{build_nesting_graph, tree_end, EndResult, RootedTree};
use crate::nodal2d::{extract, NodalStructure};
use crate::rng::{rng_from_seed, sample_seed};

/// `sin(pi x)` with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let s = (PI * (x - n)).sin();
    if (n as i64) % 2 == 0 { s } else { -s }
}

pub fn grid_function_2d(x: f64, y: f64) -> f64 {
    sin_pi(x) * sin_pi(y)
}

pub fn boxes_function_3d(x: f64, y: f64, z: f64) -> f64 {
    let (a, b, c) = (sin_pi(x), sin_pi(y), sin_pi(z));
    a * b + a * c + b * c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseFunction {
    Grid2d,
    Boxes3d,
}

impl BaseFunction {
    pub fn dim(self) -> usize {
        match self {
            BaseFunction::Grid2d => 2,
            BaseFunction::Boxes3d => 3,
        }
    }

    pub fn value(self, x: &[f64]) -> f64 {
        match self {
            BaseFunction::Grid2d => grid_function_2d(x[0], x[1]),
            BaseFunction::Boxes3d => boxes_function_3d(x[0], x[1], x[2]),
        }
    }
}

/// Prescribed signs at lattice points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub points: Vec<Vec<i64>>,
    pub signs: Vec<i8>,
    pub epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.1;

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.into()));
        if self.points.is_empty() {
            return bad("K must be non-empty");
        }
        if self.points.len() != self.signs.len() {
            return bad("one sign per point is required");
        }
        let dim = self.points[0].len();
        if !(2..=3).contains(&dim) || self.points.iter().any(|p| p.len() != dim) {
            return bad("points must share dimension 2 or 3");
        }
        if self.points.iter().collect::<BTreeSet<_>>().len() != self.points.len() {
            return bad("points must be distinct");
        }
        if self.signs.iter().any(|&s| s != 1 && s != -1) {
            return bad("signs must be +1 or -1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return bad("epsilon must lie in (0, 0.5)");
        }
        Ok(())
    }
}

/// `psi(x) = field(kappa x)` where every wavevector of `field` has norm 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignInterpolant {
    pub field: PlaneWaveField,
    pub kappa: f64,
    pub condition_number: f64,
    pub residual: f64,
    pub retries: usize,
}

impl SignInterpolant {
    pub fn value(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().map(|v| v * self.kappa).collect();
        self.field.value_unchecked(&y)
    }

    /// `sum_j |(a_j, b_j)|`, which bounds `|psi|`; derivatives of order `r`
    /// are bounded by `kappa^r` times it.
    pub fn amplitude_bound(&self) -> f64 {
        self.field.normalization.abs()
            * self.field.cos_amps.iter().zip(&self.field.sin_amps).map(|(a, b)| a.hypot(*b)).sum::<f64>()
    }
}

/// Residual above which an interpolant is rejected.
pub const INTERPOLATION_TOLERANCE: f64 = 1e-8;
const MAX_RETRIES: usize = 10;

fn random_unit(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    if dim == 2 {
        let t = std::f64::consts::TAU * rng.random::<f64>();
        return vec![t.cos(), t.sin()];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Minimum-norm amplitudes for `num_waves` random unit wavevectors so that
/// `psi(k) = sign_k` on `K`, with phases `kappa <xi, k>`. Wavevectors are
/// redrawn when the residual exceeds the tolerance.
pub fn interpolate_signs(spec: &PerturbationSpec, num_waves: usize, seed: u64, kappa: f64) -> Result<SignInterpolant> {
    spec.validate()?;
    let nk = spec.points.len();
    if num_waves < 2 * nk {
        return Err(Error::Parameter(format!("{num_waves} waves for {nk} points; at least {} needed", 2 * nk)));
    }
    if !(kappa > 0.0) {
        return Err(Error::Parameter("kappa must be positive".into()));
    }
    let dim = spec.points[0].len();
    let rhs = DVector::from_iterator(nk, spec.signs.iter().map(|&s| s as f64));
    let mut last_cond = f64::INFINITY;
    for attempt in 0..=MAX_RETRIES {
        let mut rng = rng_from_seed(sample_seed(seed, attempt as u64));
        let dirs: Vec<Vec<f64>> = (0..num_waves).map(|_| random_unit(dim, &mut rng)).collect();
        let m = DMatrix::from_fn(nk, 2 * num_waves, |r, c| {
            let xi = &dirs[c % num_waves];
            let ph: f64 = kappa * xi.iter().zip(&spec.points[r]).map(|(a, &b)| a * b as f64).sum::<f64>();
            if c < num_waves { ph.cos() } else { ph.sin() }
        });
        let svd = m.clone().svd(true, true);
        let sv = &svd.singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        last_cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let Ok(sol) = svd.solve(&rhs, smax * 1e-14) else { continue };
        let residual = (&m * &sol - &rhs).amax();
        if residual <= INTERPOLATION_TOLERANCE {
            let field = PlaneWaveField::from_parts(
                dirs,
                sol.rows(0, num_waves).iter().copied().collect(),
                sol.rows(num_waves, num_waves).iter().copied().collect(),
                1.0,
            )?;
            return Ok(SignInterpolant { field, kappa, condition_number: last_cond, residual, retries: attempt });
        }
    }
    Err(Error::Construction(format!(
        "sign interpolation failed after {MAX_RETRIES} retries; condition number {last_cond:.3e}"
    )))
}

/// `f0 + epsilon * psi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierFunction {
    pub base: BaseFunction,
    pub perturbation: SignInterpolant,
    /// Amplitude actually used; at most the requested one.
    pub epsilon: f64,
    pub requested_epsilon: f64,
}

/// Samples per unit length of barrier verification grids.
pub const SAMPLES_PER_UNIT: usize = 16;

impl BarrierFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) + self.epsilon * self.perturbation.value(x)
    }

    /// Samples `f` at `(lo + (i + 1/2) h)` with `h = 1 / per_unit`, so that
    /// lattice points are cell centres, and attaches cell-centre values.
    /// `lo` are the integer lower corners in `(x, y)`.
    pub fn evaluate_grid_2d(&self, x_lo: i64, y_lo: i64, width: usize, height: usize, per_unit: usize) -> Result<ScalarGrid> {
        if self.base != BaseFunction::Grid2d {
            return Err(Error::Parameter("2-D grids need the 2-D base function".into()));
        }
        let h = 1.0 / per_unit as f64;
        let cols = width * per_unit;
        let rows = height * per_unit;
        let (x0, y0) = (x_lo as f64 + 0.5 * h, y_lo as f64 + 0.5 * h);
        let values = self.synthesize(x0, y0, h, rows, cols);
        let centers = self.synthesize(x0 + 0.5 * h, y0 + 0.5 * h, h, rows, cols);
        let mut g = ScalarGrid::new(Geometry::PlanarRect, rows, cols, (h, h), (y0, x0), values)?;
        g.centers = Some(centers);
        Ok(g)
    }

    fn synthesize(&self, x0: f64, y0: f64, h: f64, rows: usize, cols: usize) -> Vec<f64> {
        let p = &self.perturbation;
        let mut acc = vec![0.0; rows * cols];
        let mut ex = vec![(0.0, 0.0); cols];
        for ((k, &a), &b) in p.field.wavevectors.iter().zip(&p.field.cos_amps).zip(&p.field.sin_amps) {
            let (kx, ky) = (p.kappa * k[0], p.kappa * k[1]);
            for (j, e) in ex.iter_mut().enumerate() {
                let (s, c) = (kx * (x0 + j as f64 * h)).sin_cos();
                *e = (c, s);
            }
            for i in 0..rows {
                let (sy, cy) = (ky * (y0 + i as f64 * h)).sin_cos();
                for (v, &(cx, sx)) in acc[i * cols..(i + 1) * cols].iter_mut().zip(&ex) {
                    *v += a * (cx * cy - sx * sy) + b * (sx * cy + cx * sy);
                }
            }
        }
        let scale = self.epsilon * p.field.normalization;
        for i in 0..rows {
            let y = y0 + i as f64 * h;
            let sy = sin_pi(y);
            for j in 0..cols {
                let v = &mut acc[i * cols + j];
                *v = sin_pi(x0 + j as f64 * h) * sy + scale * *v;
            }
        }
        acc
    }
}

/// Largest amplitude for which the resolution at every `k` follows
/// `sign psi(k)` and grids at `per_unit` samples show the signs of `f0`:
/// `eps A <= sin^2(pi h / 2) / 2`, `eps kappa^2 A^2 <= pi^2 / 4` and
/// `eps kappa^2 A <= pi^2 / 4`, with `A` the amplitude bound.
pub fn safe_epsilon(psi: &SignInterpolant, per_unit: usize) -> f64 {
    let a = psi.amplitude_bound().max(1e-300);
    let k2 = psi.kappa * psi.kappa;
    let h = 1.0 / per_unit as f64;
    let grid = 0.5 * (0.5 * PI * h).sin().powi(2) / a;
    let shift = 0.25 * PI * PI / (k2 * a * a);
    let curvature = 0.25 * PI * PI / (k2 * a);
    grid.min(shift).min(curvature)
}

/// Frequency scales tried when resolving singularities.
pub const KAPPA_LADDER: [f64; 5] = [2.0 * PI, 3.0 * PI, 4.0 * PI, 6.0 * PI, 8.0 * PI];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierOptions {
    /// Waves per point of `K`.
    pub waves_per_point: usize,
    pub seed: u64,
    /// Fixed frequency scale; `None` picks the best of [`KAPPA_LADDER`].
    pub kappa: Option<f64>,
    pub samples_per_unit: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions { waves_per_point: 4, seed: 0, kappa: None, samples_per_unit: SAMPLES_PER_UNIT }
    }
}

/// `f0 + eps psi` with `psi` interpolating the signs of `spec`.
pub fn resolve_singularities(base: BaseFunction, spec: &PerturbationSpec, opts: &BarrierOptions) -> Result<BarrierFunction> {
    spec.validate()?;
    if spec.points[0].len() != base.dim() {
        return Err(Error::Parameter("point dimension does not match the base function".into()));
    }
    let waves = (opts.waves_per_point.max(2) * spec.points.len()).max(8);
    let kappas: Vec<f64> = match opts.kappa {
        Some(k) => vec![k],
        None => KAPPA_LADDER.to_vec(),
    };
    let mut best: Option<(f64, SignInterpolant)> = None;
    let mut last_err = None;
    for (i, &kappa) in kappas.iter().enumerate() {
        match interpolate_signs(spec, waves, sample_seed(opts.seed, i as u64), kappa) {
            Ok(psi) => {
                let eps = safe_epsilon(&psi, opts.samples_per_unit);
                if best.as_ref().is_none_or(|(e, _)| eps > *e) {
                    best = Some((eps, psi));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (safe, psi) = best.ok_or_else(|| last_err.expect("at least one scale was tried"))?;
    Ok(BarrierFunction { base, perturbation: psi, epsilon: spec.epsilon.min(safe), requested_epsilon: spec.epsilon })
}

// ---------------------------------------------------------------------------
// Tree layout.

/// Doubled rotated coordinates: primal vertices have both even, dual
/// vertices both odd, edge midpoints one of each.
type Site = (i64, i64);

/// Lattice point of the plane at the edge midpoint `(U, V)`.
fn site_to_lattice((uu, vv): Site) -> [i64; 2] {
    if uu.rem_euclid(2) == 1 {
        let (u, v) = ((uu - 1) / 2, vv / 2);
        [u + v + 1, u - v + 1]
    } else {
        let (u, v) = (uu / 2, (vv - 1) / 2);
        [u + v + 1, u - v]
    }
}

/// Width of a node's drawing in lattice steps: leaves are segments.
fn layout_width(t: &RootedTree) -> i64 {
    let kids = t.children();
    kids.iter().map(|c| layout_width(c) + 1).sum()
}

fn layout_height(t: &RootedTree) -> i64 {
    t.children().iter().map(|c| layout_height(c) + 1).max().unwrap_or(0)
}

/// Opens the frame and wall edges of `t` drawn with lower-left vertex
/// `(x0, y0)` (doubled coordinates) and height `h` steps, then recurses into
/// the compartments with the opposite sign.
fn draw(t: &RootedTree, x0: i64, y0: i64, h: i64, sign: i8, out: &mut BTreeMap<Site, i8>) {
    let kids = t.children();
    let w = layout_width(t);
    fn open(out: &mut BTreeMap<Site, i8>, s: Site, sign: i8) {
        let prev = out.insert(s, sign);
        debug_assert!(prev.is_none(), "site {s:?} assigned twice");
    }
    if kids.is_empty() {
        for j in 0..h {
            open(out, (x0, y0 + 2 * j + 1), sign);
        }
        return;
    }
    for i in 0..w {
        open(out, (x0 + 2 * i + 1, y0), sign);
        open(out, (x0 + 2 * i + 1, y0 + 2 * h), sign);
    }
    let mut x = 0;
    let mut walls = vec![0];
    for c in &kids {
        draw(c, x0 + 2 * x + 1, y0 + 1, h - 1, -sign, out);
        x += layout_width(c) + 1;
        walls.push(x);
    }
    for &wx in &walls {
        for j in 0..h {
            open(out, (x0 + 2 * wx, y0 + 2 * j + 1), sign);
        }
    }
}

/// Signed lattice points realizing `target` as the positive root domain of a
/// drawing, enclosed by a controlled negative ring. Returns the spec and the
/// drawing's size `(W, H)` in lattice steps.
pub fn tree_layout(target: &RootedTree, epsilon: f64) -> (PerturbationSpec, (i64, i64)) {
    let (w, h) = (layout_width(target), layout_height(target));
    let mut sites = BTreeMap::new();
    draw(target, 0, 0, h, 1, &mut sites);
    // Every edge inside the drawing's rectangle and every edge leaving it.
    for uu in -1..=2 * w + 1 {
        for vv in -1..=2 * h + 1 {
            let mid = (uu + vv).rem_euclid(2) == 1;
            let inside = (0..=2 * w).contains(&uu) && (0..=2 * h).contains(&vv);
            let leaving = (uu == -1 || uu == 2 * w + 1) && vv % 2 == 0 && (0..=2 * h).contains(&vv)
                || (vv == -1 || vv == 2 * h + 1) && uu % 2 == 0 && (0..=2 * w).contains(&uu);
            if mid && (inside || leaving) {
                sites.entry((uu, vv)).or_insert(-1);
            }
        }
    }
    let (points, signs) = sites.iter().map(|(&s, &e)| (site_to_lattice(s).to_vec(), e)).unzip();
    (PerturbationSpec { points, signs, epsilon }, (w, h))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeOptions {
    pub epsilon: f64,
    pub max_size: usize,
    pub attempts: usize,
    pub barrier: BarrierOptions,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions { epsilon: DEFAULT_EPSILON, max_size: 64, attempts: 4, barrier: BarrierOptions::default() }
    }
}

/// A construction whose nesting end was verified on a sampled grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealizedTree {
    pub spec: PerturbationSpec,
    pub function: BarrierFunction,
    /// Integer window `(x_lo, y_lo, width, height)` of the verification grid.
    pub window: (i64, i64, usize, usize),
    pub code: String,
    pub attempts: usize,
    #[serde(skip)]
    pub structure: Option<NodalStructure>,
}

impl RealizedTree {
    pub fn window(&self) -> Window {
        let (x, y, w, h) = self.window;
        Window { x0: x as f64, y0: y as f64, width: w as f64, height: h as f64 }
    }
}

/// Builds `f0 + eps psi` whose nesting graph has `target` as the end of the
/// curve around the root domain, and checks it through the full pipeline.
pub fn realize_tree(target: &RootedTree, opts: &TreeOptions) -> Result<RealizedTree> {
    if target.size > opts.max_size {
        return Err(Error::Parameter(format!("tree of size {} exceeds the bound {}", target.size, opts.max_size)));
    }
    let target = RootedTree::parse(&target.code)?;
    let (spec, (w, h)) = tree_layout(&target, opts.epsilon);
    // The outer side must hold more domains than the target for the end to
    // be the enclosed side; curves reaching the window edge are discarded.
    let margin = 3 + target.size as i64;
    let (x_lo, y_lo) = (-margin, -h - margin);
    let width = (w + h + 1 + 2 * margin) as usize;
    let height = (w + h + 1 + 2 * margin) as usize;
    let mut diagnostics = Vec::new();
    for attempt in 0..opts.attempts.max(1) {
        let bopts = BarrierOptions { seed: sample_seed(opts.barrier.seed, attempt as u64), ..opts.barrier };
        let function = match resolve_singularities(BaseFunction::Grid2d, &spec, &bopts) {
            Ok(f) => f,
            Err(e) => {
                diagnostics.push(e.to_string());
                continue;
            }
        };
        let grid = function.evaluate_grid_2d(x_lo, y_lo, width, height, bopts.samples_per_unit)?;
        match verify_end(&grid, &target) {
            Ok(structure) => {
                return Ok(RealizedTree {
                    spec,
                    function,
                    window: (x_lo, y_lo, width, height),
                    code: target.code.clone(),
                    attempts: attempt + 1,
                    structure: Some(structure),
                });
            }
            Err(e) => diagnostics.push(e.to_string()),
        }
    }
    Err(Error::Construction(format!("could not realize {}: {}", target.code, diagnostics.join("; "))))
}

fn domain_at(grid: &ScalarGrid, s: &NodalStructure, x: f64, y: f64) -> u32 {
    let i = ((y - grid.origin.0) / grid.spacing.0).floor() as usize;
    let j = ((x - grid.origin.1) / grid.spacing.1).floor() as usize;
    s.components.label(i, j)
}

/// Runs the pipeline and compares the end of the curve between the root
/// domain (positive cell at the origin) and the enclosing ring.
fn verify_end(grid: &ScalarGrid, target: &RootedTree) -> Result<NodalStructure> {
    let s = extract(grid)?;
    let root = domain_at(grid, &s, 0.5, 0.5);
    let outer = domain_at(grid, &s, -0.5, 0.5);
    let between: Vec<usize> = s
        .curves
        .curves
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            (c.positive_domain, c.negative_domain) == (root, outer) || (c.positive_domain, c.negative_domain) == (outer, root)
        })
        .map(|(k, _)| k)
        .collect();
    if between.len() != 1 {
        return Err(Error::Construction(format!("{} curves separate the root from its ring", between.len())));
    }
    let g = build_nesting_graph(&s.components, &s.curves);
    match tree_end(&g, between[0])? {
        EndResult::Tree(t) if t == *target => Ok(s),
        other => Err(Error::Construction(format!("end is {other:?}, wanted {}", target.code))),
    }
}
