//! Nodal surfaces of sampled 3-D fields and their genus.
//!
//! Each cube face is contoured like a marching-squares cell, with ambiguous
//! faces resolved by the asymptotic decider. Oriented face segments chain into
//! closed loops inside the cube, and each loop is triangulated as a fan.
//! Neighbouring cubes see a shared face with opposite orientation, so the mesh
//! is closed and consistently oriented wherever the grid wraps.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_torus3, BandParams, Geometry3, Resolution, ScalarGrid3};
use crate::error::{Error, Result};
use crate::rng::sample_seed;
use crate::stats::{MeasureAccumulator, MeasureEstimate, SampleCounts};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    /// Side of the periodic cell when the mesh lives on a 3-torus.
    pub period: Option<f64>,
}

impl TriangleMesh {
    fn delta(&self, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        let mut d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        if let Some(p) = self.period {
            d.iter_mut().for_each(|x| *x -= p * (*x / p).round());
        }
        d
    }

    pub fn triangle_area(&self, t: [u32; 3]) -> f64 {
        let v = |k: usize| self.vertices[t[k] as usize];
        let u = self.delta(v(0), v(1));
        let w = self.delta(v(0), v(2));
        let c = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
        0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|&t| self.triangle_area(t)).sum()
    }

    /// OFF text export.
    pub fn write_off(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "OFF\n{} {} 0", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Corner offsets; corner index is `x + 2y + 4z`.
const CORNER: [[usize; 3]; 8] =
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]];

/// Faces as corner cycles, counter-clockwise seen from outside the cube.
const FACES: [[usize; 4]; 6] = [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]];

#[inline]
fn positive(v: f64) -> bool {
    v >= 0.0
}

/// Whether the positive diagonal of a saddle face is connected, from the
/// bilinear interpolant's value at its saddle point.
#[inline]
fn face_joins_positive(v: [f64; 4]) -> bool {
    let den = (v[0] + v[2]) - (v[1] + v[3]);
    if den == 0.0 {
        return positive((v[0] + v[1]) + (v[2] + v[3]));
    }
    let saddle = (v[0] * v[2] - v[1] * v[3]) / den;
    positive(saddle)
}

struct Extractor<'a> {
    grid: &'a ScalarGrid3,
    wrap: bool,
    vertex_of_edge: HashMap<usize, u32>,
    mesh: TriangleMesh,
}

impl<'a> Extractor<'a> {
    fn corner_index(&self, base: [usize; 3], c: usize) -> [usize; 3] {
        let s = self.grid.shape;
        [0, 1, 2].map(|a| (base[a] + CORNER[c][a]) % s[a])
    }

    /// Mesh vertex on the grid edge between cube corners `a` and `b`.
    fn edge_vertex(&mut self, base: [usize; 3], a: usize, b: usize) -> u32 {
        let (lo, hi) = if CORNER[a].iter().sum::<usize>() < CORNER[b].iter().sum::<usize>() { (a, b) } else { (b, a) };
        let axis = (0..3).find(|&k| CORNER[lo][k] != CORNER[hi][k]).expect("corners differ along one axis");
        let p = self.corner_index(base, lo);
        let q = self.corner_index(base, hi);
        let g = self.grid;
        let id = 3 * g.idx(p[0], p[1], p[2]) + axis;
        if let Some(&v) = self.vertex_of_edge.get(&id) {
            return v;
        }
        let (va, vb) = (g.values[g.idx(p[0], p[1], p[2])], g.values[g.idx(q[0], q[1], q[2])]);
        let t = if va == vb { 0.5 } else { va / (va - vb) };
        let mut pos = [0.0; 3];
        for k in 0..3 {
            let x = p[k] as f64 + if k == axis { t } else { 0.0 };
            pos[k] = g.origin[k] + x * g.spacing;
        }
        let v = self.mesh.vertices.len() as u32;
        self.mesh.vertices.push(pos);
        self.vertex_of_edge.insert(id, v);
        v
    }

    fn cube(&mut self, base: [usize; 3]) {
        let g = self.grid;
        let mut val = [0.0; 8];
        for (c, v) in val.iter_mut().enumerate() {
            let p = self.corner_index(base, c);
            *v = g.values[g.idx(p[0], p[1], p[2])];
        }
        let npos = val.iter().filter(|&&v| positive(v)).count();
        if npos == 0 || npos == 8 {
            return;
        }
        // Oriented segments keyed by the (unordered) cube edge they start on.
        let mut next: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for face in &FACES {
            let v = face.map(|c| val[c]);
            let s = v.map(positive);
            let edge = |k: usize| {
                let (a, b) = (face[k], face[(k + 1) % 4]);
                if a < b { (a, b) } else { (b, a) }
            };
            let mut add = |e_in: usize, e_out: usize| {
                next.insert(edge(e_in), edge(e_out));
            };
            if s[0] == s[2] && s[1] == s[3] && s[0] != s[1] {
                let pos_joined = face_joins_positive(v);
                // Cut off the pair of corners that is not joined.
                let cut_positive = !pos_joined;
                for (q, &sq) in s.iter().enumerate() {
                    if sq == cut_positive {
                        let before = (q + 3) % 4;
                        if sq { add(q, before) } else { add(before, q) }
                    }
                }
            } else {
                let start = (0..4).find(|&k| s[k] && !s[(k + 1) % 4]);
                let end = (0..4).find(|&k| !s[k] && s[(k + 1) % 4]);
                if let (Some(a), Some(b)) = (start, end) {
                    add(a, b);
                }
            }
        }
        let mut keys: Vec<(usize, usize)> = next.keys().copied().collect();
        keys.sort_unstable();
        let mut done: std::collections::HashSet<(usize, usize)> = Default::default();
        for k in keys {
            if done.contains(&k) {
                continue;
            }
            let mut lp = Vec::new();
            let mut cur = k;
            while done.insert(cur) {
                lp.push(self.edge_vertex(base, cur.0, cur.1));
                cur = next[&cur];
            }
            self.emit_loop(&lp);
        }
    }

    fn emit_loop(&mut self, lp: &[u32]) {
        if lp.len() == 3 {
            self.mesh.triangles.push([lp[0], lp[1], lp[2]]);
            return;
        }
        let first = self.mesh.vertices[lp[0] as usize];
        let mut c = [0.0; 3];
        for &v in lp {
            let d = self.mesh.delta(first, self.mesh.vertices[v as usize]);
            (0..3).for_each(|k| c[k] += d[k] / lp.len() as f64);
        }
        let centre = [first[0] + c[0], first[1] + c[1], first[2] + c[2]];
        let ci = self.mesh.vertices.len() as u32;
        self.mesh.vertices.push(centre);
        for k in 0..lp.len() {
            self.mesh.triangles.push([ci, lp[k], lp[(k + 1) % lp.len()]]);
        }
    }
}

/// Triangulated zero set of the trilinear interpolant (up to the fan
/// triangulation of each cube loop).
pub fn marching_cubes(grid: &ScalarGrid3) -> TriangleMesh {
    let wrap = grid.geometry == Geometry3::Torus3;
    let s = grid.shape;
    let cubes = if wrap { s } else { [s[0] - 1, s[1] - 1, s[2] - 1] };
    let mut ex = Extractor {
        grid,
        wrap,
        vertex_of_edge: HashMap::new(),
        mesh: TriangleMesh { period: wrap.then(|| s[0] as f64 * grid.spacing), ..Default::default() },
    };
    debug_assert!(!ex.wrap || (s[0] == s[1] && s[1] == s[2]));
    for k in 0..cubes[2] {
        for j in 0..cubes[1] {
            for i in 0..cubes[0] {
                ex.cube([i, j, k]);
            }
        }
    }
    ex.mesh
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceComponent {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    /// `(2 - euler) / 2` for watertight components.
    pub genus: Option<u32>,
    pub watertight: bool,
    pub area: f64,
}

/// Splits a mesh into edge-connected components.
///
/// Errors if an edge borders more than two triangles, if a directed edge
/// repeats (inconsistent orientation), or if a closed mesh has a border.
pub fn split_components(mesh: &TriangleMesh) -> Result<Vec<SurfaceComponent>> {
    let closed = mesh.period.is_some();
    let nt = mesh.triangles.len();
    let mut edge_tris: HashMap<(u32, u32), Vec<u32>> = HashMap::with_capacity(nt * 3 / 2);
    let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(nt * 3);
    for (ti, t) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if directed.insert((a, b), ti as u32).is_some() {
                return Err(Error::Extraction(format!("directed edge {a}->{b} repeats; orientation is inconsistent")));
            }
            edge_tris.entry((a.min(b), a.max(b))).or_default().push(ti as u32);
        }
    }
    let mut parent: Vec<u32> = (0..nt as u32).collect();
    fn find(p: &mut [u32], mut x: u32) -> u32 {
        while p[x as usize] != x {
            p[x as usize] = p[p[x as usize] as usize];
            x = p[x as usize];
        }
        x
    }
    let mut border_edges = vec![false; nt];
    for (&(a, b), tris) in &edge_tris {
        match tris.len() {
            1 if closed => {
                return Err(Error::Extraction(format!("edge {a}-{b} has one triangle on a closed mesh")));
            }
            1 => border_edges[tris[0] as usize] = true,
            2 => {
                let (x, y) = (find(&mut parent, tris[0]), find(&mut parent, tris[1]));
                if x != y {
                    parent[x.max(y) as usize] = x.min(y);
                }
            }
            n => return Err(Error::Extraction(format!("edge {a}-{b} borders {n} triangles"))),
        }
    }
    let mut comp_of_root: HashMap<u32, usize> = HashMap::new();
    let mut tris_of: Vec<Vec<u32>> = Vec::new();
    for t in 0..nt as u32 {
        let r = find(&mut parent, t);
        let c = *comp_of_root.entry(r).or_insert_with(|| {
            tris_of.push(Vec::new());
            tris_of.len() - 1
        });
        tris_of[c].push(t);
    }
    Ok(tris_of
        .iter()
        .map(|tris| {
            let mut verts: Vec<u32> = tris.iter().flat_map(|&t| mesh.triangles[t as usize]).collect();
            verts.sort_unstable();
            verts.dedup();
            let mut edges: Vec<(u32, u32)> = tris
                .iter()
                .flat_map(|&t| {
                    let v = mesh.triangles[t as usize];
                    [0, 1, 2].map(|k| (v[k].min(v[(k + 1) % 3]), v[k].max(v[(k + 1) % 3])))
                })
                .collect();
            edges.sort_unstable();
            edges.dedup();
            let watertight = !tris.iter().any(|&t| border_edges[t as usize]);
            let euler = verts.len() as i64 - edges.len() as i64 + tris.len() as i64;
            let genus = (watertight && euler <= 2 && euler % 2 == 0).then(|| ((2 - euler) / 2) as u32);
            SurfaceComponent {
                vertices: verts.len(),
                edges: edges.len(),
                faces: tris.len(),
                euler,
                genus,
                watertight,
                area: tris.iter().map(|&t| mesh.triangle_area(mesh.triangles[t as usize])).sum(),
            }
        })
        .collect())
}

/// Genus histogram over watertight components of independent 3-torus
/// samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenusReport {
    pub estimate: MeasureEstimate<u32>,
    pub mean_genus: f64,
    pub mean_genus_stderr: f64,
    /// Per-sample sum of `2 (1 - g)` over components, per unit volume.
    pub euler_density: f64,
    pub flagged_samples: usize,
}

/// Genus counts of one 3-torus sample.
pub fn genus_sample(params: &BandParams, resolution: Resolution, seed: u64) -> Result<SampleCounts<u32>> {
    let field = sample_torus3(params, seed)?;
    let grid = field.evaluate_grid3(resolution)?;
    let comps = split_components(&marching_cubes(&grid))?;
    let mut counts = SampleCounts::default();
    for c in comps {
        match c.genus {
            Some(g) => *counts.counts.entry(g).or_insert(0) += 1,
            None => counts.unresolved += 1,
        }
    }
    Ok(counts)
}

/// Samples `num_samples` fields on the unit 3-torus from seeds split off
/// `master_seed`. Samples whose mesh fails the manifold checks are flagged
/// and excluded.
pub fn genus_distribution(params: &BandParams, num_samples: usize, master_seed: u64, resolution: Resolution) -> Result<GenusReport> {
    let mut acc = MeasureAccumulator::new();
    let mut flagged = 0;
    let mut per_sample_genus = Vec::new();
    let mut euler_sum = 0.0;
    for s in 0..num_samples {
        match genus_sample(params, resolution, sample_seed(master_seed, s as u64)) {
            Ok(c) => {
                let n: u64 = c.counts.values().sum();
                let gsum: u64 = c.counts.iter().map(|(&g, &k)| g as u64 * k).sum();
                if n > 0 {
                    per_sample_genus.push(gsum as f64 / n as f64);
                }
                euler_sum += c.counts.iter().map(|(&g, &k)| 2.0 * (1.0 - g as f64) * k as f64).sum::<f64>();
                acc.add(&c);
            }
            Err(Error::Extraction(_)) => flagged += 1,
            Err(e) => return Err(e),
        }
    }
    let estimate = acc.finish()?;
    let mean_genus = estimate.measure.resolved_mean();
    let k = per_sample_genus.len() as f64;
    let mean_ps = per_sample_genus.iter().sum::<f64>() / k.max(1.0);
    let var = if k > 1.0 { per_sample_genus.iter().map(|g| (g - mean_ps).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    let used = (num_samples - flagged).max(1) as f64;
    Ok(GenusReport {
        estimate,
        mean_genus,
        mean_genus_stderr: (var / k.max(1.0)).sqrt(),
        euler_density: euler_sum / used,
        flagged_samples: flagged,
    })
}

/// CSV `genus,count` rows.
pub fn genus_csv(components: &[SurfaceComponent]) -> String {
    let mut hist = std::collections::BTreeMap::new();
    let mut open = 0;
    for c in components {
        match c.genus {
            Some(g) => *hist.entry(g).or_insert(0u64) += 1,
            None => open += 1,
        }
    }
    let mut out = String::from("genus,count\n");
    for (g, n) in hist {
        out.push_str(&format!("{g},{n}\n"));
    }
    out.push_str(&format!("unresolved,{open}\n"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus_fn(x: f64, y: f64, z: f64) -> f64 {
        ((x * x + y * y).sqrt() - 1.0).powi(2) + z * z - 0.16
    }

    #[test]
    fn sphere_is_genus_zero_with_correct_area() {
        let g = ScalarGrid3::from_fn_box(-1.5, 1.5, 64, |x, y, z| x * x + y * y + z * z - 1.0).unwrap();
        let comps = split_components(&marching_cubes(&g)).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].genus, Some(0));
        assert!((comps[0].area - 4.0 * PI).abs() < 0.02 * 4.0 * PI);
        assert_eq!(3 * comps[0].faces, 2 * comps[0].edges);
    }

    #[test]
    fn torus_is_genus_one() {
        let g = ScalarGrid3::from_fn_box(-1.6, 1.6, 64, torus_fn).unwrap();
        let comps = split_components(&marching_cubes(&g)).unwrap();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].genus, Some(1));
    }

    #[test]
    fn two_spheres_two_components() {
        let g = ScalarGrid3::from_fn_box(-3.0, 3.0, 60, |x, y, z| {
            let a = (x - 1.5).powi(2) + y * y + z * z - 1.0;
            let b = (x + 1.5).powi(2) + y * y + z * z - 1.0;
            a.min(b)
        })
        .unwrap();
        let comps = split_components(&marching_cubes(&g)).unwrap();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.genus == Some(0)));
    }

    #[test]
    fn empty_and_open_meshes() {
        let g = ScalarGrid3::from_fn_box(-1.0, 1.0, 8, |_, _, _| 1.0).unwrap();
        assert!(split_components(&marching_cubes(&g)).unwrap().is_empty());
        let g = ScalarGrid3::from_fn_box(-1.0, 1.0, 16, |x, _, _| x - 0.03).unwrap();
        let comps = split_components(&marching_cubes(&g)).unwrap();
        assert_eq!(comps.len(), 1);
        assert!(!comps[0].watertight && comps[0].genus.is_none());
    }

    #[test]
    fn planes_on_the_three_torus_are_tori() {
        // cos(2 pi x) vanishes on two planes, each a flat 2-torus.
        let g = ScalarGrid3::from_fn_torus(1.0, 24, |x, _, _| (2.0 * PI * x + 0.1).cos()).unwrap();
        let comps = split_components(&marching_cubes(&g)).unwrap();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.genus == Some(1) && c.watertight));
        assert!(comps.iter().all(|c| (c.area - 1.0).abs() < 1e-9));
    }

    #[test]
    fn off_export() {
        let g = ScalarGrid3::from_fn_box(-1.5, 1.5, 12, |x, y, z| x * x + y * y + z * z - 1.0).unwrap();
        let m = marching_cubes(&g);
        let mut buf = Vec::new();
        m.write_off(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("OFF\n"));
        assert_eq!(text.lines().count(), 2 + m.vertices.len() + m.triangles.len());
        let comps = split_components(&m).unwrap();
        assert!(genus_csv(&comps).starts_with("genus,count\n0,1\n"));
    }

    #[test]
    fn random_torus_meshes_are_closed_manifolds() {
        let p = BandParams::new(0.0, 2.0 * PI * 2.0).unwrap();
        for seed in 0..3 {
            let c = genus_sample(&p, Resolution::default(), seed).unwrap();
            assert_eq!(c.unresolved, 0);
        }
    }
}
