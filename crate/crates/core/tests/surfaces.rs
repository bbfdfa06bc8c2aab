use std::collections::{HashMap, HashSet};

use nodal_topology::ensemble::{sample_torus3, BandParams, Resolution, ScalarGrid3};
use nodal_topology::nodal3d::{marching_cubes, split_components, TriangleMesh};

/// Euler characteristic and component count straight from the triangle list,
/// sharing nothing with the library's component split: vertices and
/// undirected edges are deduplicated by position and by endpoint pair.
fn euler_by_counting(mesh: &TriangleMesh) -> (i64, usize, bool) {
    let key = |v: usize| mesh.vertices[v].map(|c| (c * 1e9).round() as i64);
    let ids: Vec<[i64; 3]> = (0..mesh.vertices.len()).map(key).collect();
    let mut canon: HashMap<[i64; 3], usize> = HashMap::new();
    let rep: Vec<usize> = ids.iter().enumerate().map(|(i, k)| *canon.entry(*k).or_insert(i)).collect();
    let mut verts = HashSet::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let mut parent: Vec<usize> = (0..mesh.vertices.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for t in &mesh.triangles {
        let v = t.map(|i| rep[i as usize]);
        for k in 0..3 {
            verts.insert(v[k]);
            let (a, b) = (v[k], v[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    let closed = edges.values().all(|&n| n == 2);
    let roots: HashSet<usize> = verts.iter().map(|&v| find(&mut parent, v)).collect();
    let chi = verts.len() as i64 - edges.len() as i64 + mesh.triangles.len() as i64;
    (chi, roots.len(), closed)
}

type Field = fn(f64, f64, f64) -> f64;

fn double_torus(x: f64, y: f64, z: f64) -> f64 {
    let g = x * (x - 1.0) * (x - 1.0) * (x - 2.0) + y * y;
    g * g + z * z - 0.01
}

#[test]
fn genus_two_surface_by_two_routes() {
    let grid = ScalarGrid3::from_fn_box(-1.0, 3.0, 128, double_torus).unwrap();
    let mesh = marching_cubes(&grid);
    let comps = split_components(&mesh).unwrap();
    assert_eq!(comps.len(), 1);
    assert_eq!(comps[0].genus, Some(2));
    let (chi, count, closed) = euler_by_counting(&mesh);
    assert!(closed);
    assert_eq!(count, 1);
    assert_eq!(chi, -2);
}

#[test]
fn analytic_surfaces_by_counting() {
    let cases: [(Field, i64); 3] = [
        (|x, y, z| x * x + y * y + z * z - 0.5, 2),
        (
            |x, y, z| {
                let q = (x * x + y * y).sqrt() - 0.6;
                q * q + z * z - 0.04
            },
            0,
        ),
        (|x, y, z| (x - 0.45).powi(2).min((x + 0.45).powi(2)) + y * y + z * z - 0.1, 4),
    ];
    for (f, chi_expected) in cases {
        let mesh = marching_cubes(&ScalarGrid3::from_fn_box(-1.0, 1.0, 64, f).unwrap());
        let (chi, _, closed) = euler_by_counting(&mesh);
        assert!(closed);
        assert_eq!(chi, chi_expected);
        let lib: i64 = split_components(&mesh).unwrap().iter().map(|c| c.euler).sum();
        assert_eq!(lib, chi_expected);
    }
}

#[test]
fn random_torus3_surfaces_agree_with_counting() {
    let band = BandParams::new(0.0, std::f64::consts::TAU * 3.0).unwrap();
    for seed in 0..4 {
        let grid = sample_torus3(&band, seed).unwrap().evaluate_grid3(Resolution::default()).unwrap();
        let mesh = marching_cubes(&grid);
        let comps = split_components(&mesh).unwrap();
        let (chi, count, closed) = euler_by_counting(&mesh);
        assert!(closed, "periodic nodal surfaces have no border");
        assert_eq!(count, comps.len());
        assert_eq!(chi, comps.iter().map(|c| c.euler).sum::<i64>());
        // Euler characteristic is even on each closed orientable component.
        assert!(comps.iter().all(|c| c.euler % 2 == 0));
    }
}
