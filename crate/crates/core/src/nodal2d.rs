//! Nodal domains and nodal curves of a sampled 2-D field.
//!
//! Domains are 4-connected sign components of the samples, with the two
//! same-sign diagonals of a saddle cell joined when the cell-centre value
//! agrees with them. Marching squares uses the same saddle decision, so every
//! extracted curve separates exactly two labelled domains.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Geometry, ScalarGrid};
use crate::error::{Error, Result};

/// Domains with fewer samples than this are flagged sub-resolution.
pub const MIN_RESOLVED_SAMPLES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Pos,
    #[serde(rename = "-")]
    Neg,
}

impl Sign {
    /// Exact zeros count as positive.
    #[inline]
    pub fn of(v: f64) -> Sign {
        if v >= 0.0 { Sign::Pos } else { Sign::Neg }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub id: u32,
    pub sign: Sign,
    pub cell_count: usize,
    pub touches_boundary: bool,
    pub sub_resolution: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedComponents {
    pub geometry: Geometry,
    pub rows: usize,
    pub cols: usize,
    /// Domain id per sample, row-major.
    pub label_grid: Vec<u32>,
    pub components: Vec<Domain>,
}

impl SignedComponents {
    pub fn label(&self, i: usize, j: usize) -> u32 {
        self.label_grid[i * self.cols + j]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Closed polyline in (row, column) physical coordinates. The last point is
/// joined back to the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalCurve {
    pub points: Vec<[f64; 2]>,
    pub positive_domain: u32,
    pub negative_domain: u32,
}

impl NodalCurve {
    /// Euclidean polygon length in the grid's coordinates. Wrapped steps are
    /// measured through the periodic boundary.
    pub fn length(&self, period: Option<(f64, f64)>) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|k| {
                let (a, b) = (self.points[k], self.points[(k + 1) % n]);
                let mut dy = b[0] - a[0];
                let mut dx = b[1] - a[1];
                if let Some((py, px)) = period {
                    dy -= py * (dy / py).round();
                    dx -= px * (dx / px).round();
                }
                dy.hypot(dx)
            })
            .sum()
    }

    pub fn domains(&self) -> (u32, u32) {
        (self.positive_domain, self.negative_domain)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodalCurveSet {
    pub curves: Vec<NodalCurve>,
    /// Chains that left a planar window.
    pub discarded_open: usize,
}

/// Labelled domains and curves of one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalStructure {
    pub components: SignedComponents,
    pub curves: NodalCurveSet,
}

impl NodalStructure {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = p;
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Corner sample indices of cell `(i, j)` in cyclic order
/// `(i,j), (i,j+1), (i+1,j+1), (i+1,j)`.
#[inline]
fn cell_corners(grid: &ScalarGrid, i: usize, j: usize) -> [usize; 4] {
    let i1 = (i + 1) % grid.rows;
    let j1 = (j + 1) % grid.cols;
    [grid.idx(i, j), grid.idx(i, j1), grid.idx(i1, j1), grid.idx(i1, j)]
}

/// For a saddle cell, whether corners 0 and 2 are joined. With explicit
/// centre samples the centre's sign decides; otherwise the bilinear
/// interpolant's saddle value does, which has the sign of corner 0 exactly
/// when `v0 v2 > v1 v3`. `None` when the deciding value is exactly zero: the
/// nodal set then crosses itself and neither diagonal is joined.
#[inline]
fn saddle_joins_02(grid: &ScalarGrid, i: usize, j: usize, c: &[usize; 4]) -> Option<bool> {
    let v = |k: usize| grid.values[c[k]];
    match &grid.centers {
        Some(cs) => {
            let centre = cs[grid.idx(i, j)];
            (centre != 0.0).then(|| Sign::of(centre) == Sign::of(v(0)))
        }
        None => {
            let (diag, anti) = (v(0) * v(2), v(1) * v(3));
            (diag != anti).then_some(diag > anti)
        }
    }
}

#[inline]
fn is_saddle(s: &[Sign; 4]) -> bool {
    s[0] == s[2] && s[1] == s[3] && s[0] != s[1]
}

fn corner_signs(grid: &ScalarGrid, c: &[usize; 4]) -> [Sign; 4] {
    [0, 1, 2, 3].map(|k| Sign::of(grid.values[c[k]]))
}

/// Sign components of the samples.
pub fn label_domains(grid: &ScalarGrid) -> SignedComponents {
    let (rows, cols) = (grid.rows, grid.cols);
    let n = rows * cols;
    let mut uf = UnionFind::new(n);
    let signs: Vec<Sign> = grid.values.iter().map(|&v| Sign::of(v)).collect();
    let wrap_c = grid.geometry.wraps_cols();
    let wrap_r = grid.geometry.wraps_rows();
    for i in 0..rows {
        for j in 0..cols {
            let k = grid.idx(i, j);
            if j + 1 < cols || wrap_c {
                let r = grid.idx(i, (j + 1) % cols);
                if signs[k] == signs[r] {
                    uf.union(k as u32, r as u32);
                }
            }
            if i + 1 < rows || wrap_r {
                let d = grid.idx((i + 1) % rows, j);
                if signs[k] == signs[d] {
                    uf.union(k as u32, d as u32);
                }
            }
        }
    }
    if grid.geometry == Geometry::SphereLonLat {
        for &i in &[0, rows - 1] {
            for j in 1..cols {
                if signs[grid.idx(i, j)] == signs[grid.idx(i, 0)] {
                    uf.union(grid.idx(i, 0) as u32, grid.idx(i, j) as u32);
                }
            }
        }
    }
    let (ncr, ncc) = grid.cell_shape();
    for i in 0..ncr {
        for j in 0..ncc {
            let c = cell_corners(grid, i, j);
            let s = corner_signs(grid, &c);
            if is_saddle(&s) {
                match saddle_joins_02(grid, i, j, &c) {
                    Some(true) => uf.union(c[0] as u32, c[2] as u32),
                    Some(false) => uf.union(c[1] as u32, c[3] as u32),
                    None => {}
                }
            }
        }
    }
    let mut root_to_id: HashMap<u32, u32> = HashMap::new();
    let mut label_grid = vec![0u32; n];
    let mut components: Vec<Domain> = Vec::new();
    for k in 0..n {
        let root = uf.find(k as u32);
        let id = *root_to_id.entry(root).or_insert_with(|| {
            components.push(Domain {
                id: components.len() as u32,
                sign: signs[k],
                cell_count: 0,
                touches_boundary: false,
                sub_resolution: false,
            });
            components.len() as u32 - 1
        });
        label_grid[k] = id;
        let d = &mut components[id as usize];
        d.cell_count += 1;
        if grid.geometry == Geometry::PlanarRect {
            let (i, j) = (k / cols, k % cols);
            if i == 0 || j == 0 || i + 1 == rows || j + 1 == cols {
                d.touches_boundary = true;
            }
        }
    }
    for d in &mut components {
        d.sub_resolution = d.cell_count < MIN_RESOLVED_SAMPLES;
    }
    SignedComponents { geometry: grid.geometry, rows, cols, label_grid, components }
}

struct Segment {
    start_edge: usize,
    end_edge: usize,
    start_pt: [f64; 2],
    positive: u32,
    negative: u32,
}

/// Global edge id of the `k`-th edge of cell `(i, j)` and whether the edge
/// runs against its canonical direction.
#[inline]
fn edge_id(grid: &ScalarGrid, i: usize, j: usize, k: usize) -> usize {
    let i1 = (i + 1) % grid.rows;
    let j1 = (j + 1) % grid.cols;
    match k {
        0 => 2 * grid.idx(i, j),
        1 => 2 * grid.idx(i, j1) + 1,
        2 => 2 * grid.idx(i1, j),
        _ => 2 * grid.idx(i, j) + 1,
    }
}

#[inline]
fn crossing(grid: &ScalarGrid, i: usize, j: usize, c: &[usize; 4], k: usize) -> [f64; 2] {
    let pos = |q: usize| -> (f64, f64) {
        match q {
            0 => (i as f64, j as f64),
            1 => (i as f64, j as f64 + 1.0),
            2 => (i as f64 + 1.0, j as f64 + 1.0),
            _ => (i as f64 + 1.0, j as f64),
        }
    };
    let (a, b) = (k, (k + 1) % 4);
    let (va, vb) = (grid.values[c[a]], grid.values[c[b]]);
    let t = if va == vb { 0.5 } else { va / (va - vb) };
    let (pa, pb) = (pos(a), pos(b));
    let r = pa.0 + t * (pb.0 - pa.0);
    let q = pa.1 + t * (pb.1 - pa.1);
    [grid.origin.0 + r * grid.spacing.0, grid.origin.1 + q * grid.spacing.1]
}

/// Marching squares with the labelling's saddle rule.
///
/// Each segment runs from a `(+,-)` cell edge to a `(-,+)` edge in cyclic
/// corner order, so every crossing point starts exactly one segment and ends
/// exactly one segment unless it lies on a planar window edge.
pub fn extract_nodal_curves(grid: &ScalarGrid, components: &SignedComponents) -> Result<NodalCurveSet> {
    if components.rows != grid.rows || components.cols != grid.cols {
        return Err(Error::Parameter("components were computed on a different grid".into()));
    }
    let labels = &components.label_grid;
    let (ncr, ncc) = grid.cell_shape();
    let mut segs: Vec<Segment> = Vec::new();
    for i in 0..ncr {
        for j in 0..ncc {
            let c = cell_corners(grid, i, j);
            let s = corner_signs(grid, &c);
            if s.iter().all(|&x| x == s[0]) {
                continue;
            }
            let mut pairs: [(usize, usize); 2] = [(0, 0); 2];
            let mut np = 0;
            if is_saddle(&s) {
                let join02 = saddle_joins_02(grid, i, j, &c).ok_or_else(|| {
                    Error::Extraction(format!("singular saddle in cell ({i}, {j}); the nodal set is not smooth"))
                })?;
                // Cut off each corner of the pair that is not joined.
                let cut = if join02 { [1, 3] } else { [0, 2] };
                for &q in &cut {
                    let before = (q + 3) % 4;
                    let (e_in, e_out) = if s[q] == Sign::Neg { (before, q) } else { (q, before) };
                    pairs[np] = (e_in, e_out);
                    np += 1;
                }
            } else {
                let starts: Vec<usize> =
                    (0..4).filter(|&k| s[k] == Sign::Pos && s[(k + 1) % 4] == Sign::Neg).collect();
                let ends: Vec<usize> = (0..4).filter(|&k| s[k] == Sign::Neg && s[(k + 1) % 4] == Sign::Pos).collect();
                debug_assert_eq!(starts.len(), 1);
                debug_assert_eq!(ends.len(), 1);
                pairs[0] = (starts[0], ends[0]);
                np = 1;
            }
            for &(e_in, e_out) in &pairs[..np] {
                segs.push(Segment {
                    start_edge: edge_id(grid, i, j, e_in),
                    end_edge: edge_id(grid, i, j, e_out),
                    start_pt: crossing(grid, i, j, &c, e_in),
                    positive: labels[c[e_in]],
                    negative: labels[c[(e_in + 1) % 4]],
                });
            }
        }
    }
    chain_segments(&segs)
}

fn chain_segments(segs: &[Segment]) -> Result<NodalCurveSet> {
    let mut by_start: HashMap<usize, usize> = HashMap::with_capacity(segs.len());
    for (k, s) in segs.iter().enumerate() {
        if by_start.insert(s.start_edge, k).is_some() {
            return Err(Error::Consistency(format!("edge {} starts two segments", s.start_edge)));
        }
    }
    let ends: std::collections::HashSet<usize> = segs.iter().map(|s| s.end_edge).collect();
    let mut used = vec![false; segs.len()];
    let mut out = NodalCurveSet::default();
    // Open chains begin at a crossing that ends no segment.
    for k in 0..segs.len() {
        if used[k] || ends.contains(&segs[k].start_edge) {
            continue;
        }
        let mut cur = Some(k);
        while let Some(c) = cur {
            if used[c] {
                break;
            }
            used[c] = true;
            cur = by_start.get(&segs[c].end_edge).copied();
        }
        out.discarded_open += 1;
    }
    for k in 0..segs.len() {
        if used[k] {
            continue;
        }
        let (pos, neg) = (segs[k].positive, segs[k].negative);
        let mut points = Vec::new();
        let mut cur = k;
        loop {
            if used[cur] {
                if cur == k {
                    break;
                }
                return Err(Error::Consistency("nodal chain merges into another chain".into()));
            }
            used[cur] = true;
            let s = &segs[cur];
            if s.positive != pos || s.negative != neg {
                return Err(Error::Consistency(format!(
                    "curve meets domains {pos}/{neg} and {}/{}",
                    s.positive, s.negative
                )));
            }
            points.push(s.start_pt);
            match by_start.get(&s.end_edge) {
                Some(&n) => cur = n,
                None => return Err(Error::Consistency("closed chain is broken".into())),
            }
        }
        out.curves.push(NodalCurve { points, positive_domain: pos, negative_domain: neg });
    }
    Ok(out)
}

/// Labels domains and extracts curves in one pass.
pub fn extract(grid: &ScalarGrid) -> Result<NodalStructure> {
    let components = label_domains(grid);
    let curves = extract_nodal_curves(grid, &components)?;
    Ok(NodalStructure { components, curves })
}

/// Number of curves bounding each domain, indexed by domain id.
pub fn connectivity(components: &SignedComponents, curves: &NodalCurveSet) -> Vec<u32> {
    let mut m = vec![0u32; components.len()];
    for c in &curves.curves {
        m[c.positive_domain as usize] += 1;
        m[c.negative_domain as usize] += 1;
    }
    m
}

/// Domains and curves of a planar window that stay clear of its boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilteredView {
    pub domains: Vec<u32>,
    pub curves: Vec<usize>,
    pub raw_domains: usize,
    pub raw_curves: usize,
}

/// Drops domains touching the window or having a sample within `margin` of
/// it, and curves with a point within `margin` of it. Open chains are never
/// part of the view.
pub fn filter_boundary(
    grid: &ScalarGrid,
    components: &SignedComponents,
    curves: &NodalCurveSet,
    margin: f64,
) -> Result<FilteredView> {
    if grid.geometry != Geometry::PlanarRect {
        return Err(Error::Parameter("boundary filtering needs a planar window".into()));
    }
    if !(margin >= 0.0) {
        return Err(Error::Parameter("margin must be non-negative".into()));
    }
    let (y0, x0) = grid.origin;
    let y1 = y0 + (grid.rows - 1) as f64 * grid.spacing.0;
    let x1 = x0 + (grid.cols - 1) as f64 * grid.spacing.1;
    let near = |y: f64, x: f64| y - y0 < margin || y1 - y < margin || x - x0 < margin || x1 - x < margin;
    let mut drop: Vec<bool> = components.components.iter().map(|d| d.touches_boundary).collect();
    if margin > 0.0 {
        for i in 0..grid.rows {
            for j in 0..grid.cols {
                let y = y0 + i as f64 * grid.spacing.0;
                let x = x0 + j as f64 * grid.spacing.1;
                if near(y, x) {
                    drop[components.label(i, j) as usize] = true;
                }
            }
        }
    }
    let kept_curves = curves
        .curves
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.points.iter().any(|p| near(p[0], p[1])))
        .map(|(k, _)| k)
        .collect();
    Ok(FilteredView {
        domains: (0..components.len() as u32).filter(|&d| !drop[d as usize]).collect(),
        curves: kept_curves,
        raw_domains: components.len(),
        raw_curves: curves.curves.len() + curves.discarded_open,
    })
}

/// Writes the label grid as a plain (ASCII) PGM image.
pub fn write_label_pgm(components: &SignedComponents, mut w: impl Write) -> Result<()> {
    let maxval = (components.len() as u64).clamp(1, 65535);
    writeln!(w, "P2\n{} {}\n{}", components.cols, components.rows, maxval)?;
    for i in 0..components.rows {
        let row: Vec<String> = (0..components.cols)
            .map(|j| (components.label(i, j) as u64 % (maxval + 1)).to_string())
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Window;
    use std::f64::consts::PI;

    fn planar(n: usize, lo: f64, hi: f64, f: impl Fn(f64, f64) -> f64) -> ScalarGrid {
        ScalarGrid::from_fn_planar(Window::square(lo, lo, hi - lo), n, n, f).unwrap()
    }

    #[test]
    fn all_positive_grid() {
        let g = planar(8, 0.0, 1.0, |_, _| 1.0);
        let s = extract(&g).unwrap();
        assert_eq!(s.components.len(), 1);
        assert_eq!(s.components.components[0].sign, Sign::Pos);
        assert!(s.curves.curves.is_empty());
    }

    #[test]
    fn checkerboard_cells_stay_separate() {
        let vals: Vec<f64> = (0..36).map(|k| if (k / 6 + k % 6) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let g = ScalarGrid::new(Geometry::PlanarRect, 6, 6, (1.0, 1.0), (0.0, 0.0), vals).unwrap();
        assert_eq!(label_domains(&g).len(), 36);
        assert!(matches!(extract(&g), Err(Error::Extraction(_))));
        // Negative centres join the negative diagonals only.
        let g = ScalarGrid { centers: Some(vec![-1.0; 36]), ..g };
        let c = label_domains(&g);
        assert_eq!(c.components.iter().filter(|d| d.sign == Sign::Pos).count(), 18);
        assert_eq!(c.components.iter().filter(|d| d.sign == Sign::Neg).count(), 1);
    }

    #[test]
    fn grid_function_on_torus_has_four_domains() {
        // sin(pi x) sin(pi y) on [0, 2)^2 sampled half a step off the nodal
        // lines, built from one exact quarter-period table so that every
        // crossing cell has an exactly zero centre.
        let n = 64;
        let h = 2.0 / n as f64;
        let quarter: Vec<f64> = (0..n / 4).map(|i| (PI * (i as f64 + 0.5) * h).sin()).collect();
        let u: Vec<f64> = (0..n)
            .map(|i| {
                let (half, k) = (i / (n / 2), i % (n / 2));
                let v = if k < n / 4 { quarter[k] } else { quarter[n / 2 - 1 - k] };
                if half == 0 { v } else { -v }
            })
            .collect();
        let vals: Vec<f64> = (0..n * n).map(|k| u[k / n] * u[k % n]).collect();
        let g = ScalarGrid::new(Geometry::FlatTorus, n, n, (h, h), (0.5 * h, 0.5 * h), vals).unwrap();
        let c = label_domains(&g);
        assert_eq!(c.len(), 4);
        assert_eq!(c.components.iter().filter(|d| d.sign == Sign::Pos).count(), 2);
        assert!(c.components.iter().all(|d| d.cell_count == 32 * 32));
        assert!(matches!(extract(&g), Err(Error::Extraction(_))));
    }

    #[test]
    fn unit_circle_length() {
        let g = planar(256, -1.5, 1.5, |y, x| x * x + y * y - 1.0);
        let s = extract(&g).unwrap();
        assert_eq!(s.curves.curves.len(), 1);
        let len = s.curves.curves[0].length(None);
        assert!((len - 2.0 * PI).abs() < 0.01 * 2.0 * PI, "{len}");
        let m = connectivity(&s.components, &s.curves);
        assert_eq!(m, vec![1, 1]);
    }

    #[test]
    fn annulus_has_connectivity_two() {
        let g = planar(200, -3.0, 3.0, |y, x| {
            let r = (x * x + y * y).sqrt();
            (r - 1.0) * (r - 2.0)
        });
        let s = extract(&g).unwrap();
        assert_eq!(s.curves.curves.len(), 2);
        let m = connectivity(&s.components, &s.curves);
        let mid = s.components.label(100, 100 + 50);
        assert_eq!(m[mid as usize], 2);
        assert_eq!(s.components.components[mid as usize].sign, Sign::Neg);
    }

    #[test]
    fn curves_separate_opposite_signs() {
        let g = planar(120, 0.0, 6.0, |y, x| (1.3 * x).sin() + (1.7 * y + 0.4).cos() + 0.3 * (x * y).sin());
        let s = extract(&g).unwrap();
        for c in &s.curves.curves {
            assert_eq!(s.components.components[c.positive_domain as usize].sign, Sign::Pos);
            assert_eq!(s.components.components[c.negative_domain as usize].sign, Sign::Neg);
        }
    }

    #[test]
    fn torus_stripes_give_two_curves_per_pair() {
        let g = ScalarGrid::from_fn_torus(1.0, 48, |_, x| (2.0 * PI * x + 0.1).cos()).unwrap();
        let s = extract(&g).unwrap();
        assert_eq!(s.components.len(), 2);
        assert_eq!(s.curves.curves.len(), 2);
        assert_eq!(connectivity(&s.components, &s.curves), vec![2, 2]);
    }

    #[test]
    fn boundary_filtering() {
        let inside = planar(100, -2.0, 2.0, |y, x| x * x + y * y - 1.0);
        let s = extract(&inside).unwrap();
        let v = filter_boundary(&inside, &s.components, &s.curves, 0.0).unwrap();
        assert_eq!(v.curves, vec![0]);
        assert_eq!(v.domains.len(), 1);
        let crossing = planar(100, -2.0, 2.0, |y, x| (x - 2.0).powi(2) + y * y - 1.0);
        let s = extract(&crossing).unwrap();
        assert_eq!(s.curves.discarded_open, 1);
        let v = filter_boundary(&crossing, &s.components, &s.curves, 0.0).unwrap();
        assert!(v.curves.is_empty() && v.domains.is_empty());
        let s = extract(&inside).unwrap();
        let v = filter_boundary(&inside, &s.components, &s.curves, 1.5).unwrap();
        assert!(v.domains.is_empty());
    }

    #[test]
    fn pgm_export_shape() {
        let g = planar(5, -1.0, 1.0, |y, x| x * x + y * y - 0.3);
        let c = label_domains(&g);
        let mut buf = Vec::new();
        write_label_pgm(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert_eq!(lines.next(), Some("5 5"));
        assert_eq!(text.lines().count(), 3 + 5);
    }
}
