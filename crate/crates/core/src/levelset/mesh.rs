//! Triangle meshes of level sets and their topology.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tensor::Sym3;

/// Indexed triangle mesh in chart coordinates. Angular coordinates are
/// stored wrapped into one period; `periods` marks the periodic axes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub periods: [Option<f64>; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeshCounts {
    pub v: usize,
    pub e: usize,
    pub f: usize,
}

impl MeshCounts {
    pub fn euler(&self) -> i64 {
        self.v as i64 - self.e as i64 + self.f as i64
    }
}

fn edge(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl TriMesh {
    fn edge_uses(&self) -> HashMap<(usize, usize), usize> {
        let mut uses = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *uses.entry(edge(t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        uses
    }

    /// Counts over vertices actually referenced by a triangle.
    pub fn counts(&self) -> MeshCounts {
        let used: HashSet<usize> = self.triangles.iter().flatten().copied().collect();
        MeshCounts { v: used.len(), e: self.edge_uses().len(), f: self.triangles.len() }
    }

    pub fn is_closed(&self) -> bool {
        self.edge_uses().values().all(|&n| n == 2)
    }

    pub fn euler_characteristic(&self) -> Result<i64> {
        if let Some((e, n)) = self.edge_uses().into_iter().find(|&(_, n)| n != 2) {
            return Err(Error::OpenMesh(format!("edge {e:?} is used by {n} triangles")));
        }
        Ok(self.counts().euler())
    }

    /// Connected pieces, each with its own compact vertex list. Pieces are
    /// ordered by their smallest original vertex index.
    pub fn components(&self) -> Vec<TriMesh> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for t in &self.triangles {
            for k in 1..3 {
                let (a, b) = (find(&mut parent, t[0]), find(&mut parent, t[k]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut pieces: Vec<(usize, TriMesh, HashMap<usize, usize>)> = Vec::new();
        let mut by_root: HashMap<usize, usize> = HashMap::new();
        for t in &self.triangles {
            let root = find(&mut parent, t[0]);
            let slot = *by_root.entry(root).or_insert_with(|| {
                pieces.push((root, TriMesh { periods: self.periods, ..TriMesh::default() }, HashMap::new()));
                pieces.len() - 1
            });
            let (_, mesh, map) = &mut pieces[slot];
            let tri = t.map(|v| {
                *map.entry(v).or_insert_with(|| {
                    mesh.vertices.push(self.vertices[v]);
                    mesh.vertices.len() - 1
                })
            });
            mesh.triangles.push(tri);
        }
        pieces.sort_by_key(|p| p.0);
        pieces.into_iter().map(|p| p.1).collect()
    }

    /// `b − a` with periodic axes taken to the nearest image.
    pub fn delta(&self, a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|i| {
            let d = b[i] - a[i];
            match self.periods[i] {
                Some(p) => d - p * (d / p).round(),
                None => d,
            }
        })
    }
}

/// Edge vectors measured with a metric.
fn g_dot(g: &Sym3, a: &[f64; 3], b: &[f64; 3]) -> f64 {
    g.bilinear(a, b)
}

/// Intrinsic geometry of a mesh whose edges are measured by a metric field.
#[derive(Debug, Clone, Serialize)]
pub struct MeshGeometry {
    pub area: f64,
    /// Angle defect divided by one third of the incident area, per vertex.
    pub gauss_curvature: Vec<f64>,
    /// One third of the incident triangle area, per vertex.
    pub vertex_area: Vec<f64>,
    /// Sum of angle defects; equals 2πχ for a closed mesh.
    pub total_defect: f64,
}

pub fn mesh_geometry(mesh: &TriMesh, metric: impl Fn(&[f64; 3]) -> Sym3) -> MeshGeometry {
    let nv = mesh.vertices.len();
    let mut angle_sum = vec![0.0; nv];
    let mut vertex_area = vec![0.0; nv];
    let mut area = 0.0;
    for t in &mesh.triangles {
        let p = t.map(|v| mesh.vertices[v]);
        let e1 = mesh.delta(&p[0], &p[1]);
        let e2 = mesh.delta(&p[0], &p[2]);
        let centroid: [f64; 3] = std::array::from_fn(|i| p[0][i] + (e1[i] + e2[i]) / 3.0);
        let g = metric(&centroid);
        let local = [[0.0; 3], e1, e2];
        let a_t = 0.5 * (g_dot(&g, &e1, &e1) * g_dot(&g, &e2, &e2) - g_dot(&g, &e1, &e2).powi(2)).max(0.0).sqrt();
        area += a_t;
        for k in 0..3 {
            let o = local[k];
            let x: [f64; 3] = std::array::from_fn(|i| local[(k + 1) % 3][i] - o[i]);
            let y: [f64; 3] = std::array::from_fn(|i| local[(k + 2) % 3][i] - o[i]);
            let denom = (g_dot(&g, &x, &x) * g_dot(&g, &y, &y)).sqrt();
            if denom > 0.0 {
                angle_sum[t[k]] += (g_dot(&g, &x, &y) / denom).clamp(-1.0, 1.0).acos();
            }
            vertex_area[t[k]] += a_t / 3.0;
        }
    }
    let used: HashSet<usize> = mesh.triangles.iter().flatten().copied().collect();
    let mut total_defect = 0.0;
    let gauss_curvature = (0..nv)
        .map(|v| {
            if !used.contains(&v) {
                return 0.0;
            }
            let defect = 2.0 * std::f64::consts::PI - angle_sum[v];
            total_defect += defect;
            if vertex_area[v] > 0.0 {
                defect / vertex_area[v]
            } else {
                0.0
            }
        })
        .collect();
    MeshGeometry { area, gauss_curvature, vertex_area, total_defect }
}

/// Kuhn subdivision of the unit cube into six tetrahedra sharing the main
/// diagonal; it is face-compatible between neighbouring cubes.
const KUHN: [[[usize; 3]; 4]; 6] = {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = [[[0usize; 3]; 4]; 6];
    let mut k = 0;
    while k < 6 {
        let mut v = [0usize; 3];
        tets[k][0] = v;
        let mut s = 0;
        while s < 3 {
            v[perms[k][s]] = 1;
            tets[k][s + 1] = v;
            s += 1;
        }
        k += 1;
    }
    tets
};

/// Marching tetrahedra over the lattice for the level `u = t`. A node is
/// "above" when `u ≥ t`; this tie-break keeps every surface closed.
/// Returns the mesh and, for every triangle, the lattice cell it came from.
pub fn march_tetrahedra(grid: &Grid, u: &[f64], t: f64) -> (TriMesh, Vec<usize>) {
    let periods = [None, Some(grid.periods[0]), Some(grid.periods[1])];
    let mut mesh = TriMesh { periods, ..TriMesh::default() };
    let mut cells = Vec::new();
    let mut vertex_of: HashMap<(usize, usize), usize> = HashMap::new();
    let h = grid.spacings();
    let angular = |n: usize| if grid.is_radial() { 0 } else { n };
    let (nj, nl) = (angular(grid.n_xi), angular(grid.n_theta));
    if nj == 0 {
        return (mesh, cells);
    }
    for i in 0..grid.n_r - 1 {
        for j in 0..nj {
            for l in 0..nl {
                let corner = |o: [usize; 3]| {
                    let n = grid.index(i + o[0], grid.wrap(1, (j + o[1]) as isize), grid.wrap(2, (l + o[2]) as isize));
                    let x = [grid.r(i) + o[0] as f64 * h[0], grid.xi(j) + o[1] as f64 * h[1], grid.theta(l) + o[2] as f64 * h[2]];
                    (n, x)
                };
                let cell = grid.index(i, j, l);
                for tet in KUHN.iter() {
                    let vs = tet.map(corner);
                    let above = vs.map(|(n, _)| u[n] >= t);
                    let n_above = above.iter().filter(|a| **a).count();
                    if n_above == 0 || n_above == 4 {
                        continue;
                    }
                    let mut point = |a: usize, b: usize| -> (usize, [f64; 3]) {
                        let ((na, xa), (nb, xb)) = (vs[a], vs[b]);
                        let s = if u[nb] == u[na] { 0.5 } else { ((t - u[na]) / (u[nb] - u[na])).clamp(0.0, 1.0) };
                        let x: [f64; 3] = std::array::from_fn(|c| xa[c] + s * (xb[c] - xa[c]));
                        let id = *vertex_of.entry(edge(na, nb)).or_insert_with(|| {
                            let mut w = x;
                            for c in 1..3 {
                                let p = grid.periods[c - 1];
                                w[c] = x[c].rem_euclid(p);
                            }
                            mesh.vertices.push(w);
                            mesh.vertices.len() - 1
                        });
                        (id, x)
                    };
                    let ups: Vec<usize> = (0..4).filter(|&k| above[k]).collect();
                    let downs: Vec<usize> = (0..4).filter(|&k| !above[k]).collect();
                    let mut tris: Vec<[(usize, [f64; 3]); 3]> = Vec::with_capacity(2);
                    if ups.len() == 1 || downs.len() == 1 {
                        let (lone, others) = if ups.len() == 1 { (ups[0], &downs) } else { (downs[0], &ups) };
                        tris.push([point(lone, others[0]), point(lone, others[1]), point(lone, others[2])]);
                    } else {
                        let (a, b, c, d) = (ups[0], ups[1], downs[0], downs[1]);
                        let (ac, ad, bd, bc) = (point(a, c), point(a, d), point(b, d), point(b, c));
                        tris.push([ac, ad, bd]);
                        tris.push([ac, bd, bc]);
                    }
                    // Orient normals toward increasing u.
                    let centroid = |ks: &[usize]| -> [f64; 3] {
                        std::array::from_fn(|c| ks.iter().map(|&k| vs[k].1[c]).sum::<f64>() / ks.len() as f64)
                    };
                    let (cu, cd) = (centroid(&ups), centroid(&downs));
                    let dir: [f64; 3] = std::array::from_fn(|c| (cu[c] - cd[c]) / h[c]);
                    for tri in tris {
                        let e1: [f64; 3] = std::array::from_fn(|c| (tri[1].1[c] - tri[0].1[c]) / h[c]);
                        let e2: [f64; 3] = std::array::from_fn(|c| (tri[2].1[c] - tri[0].1[c]) / h[c]);
                        let nrm = [
                            e1[1] * e2[2] - e1[2] * e2[1],
                            e1[2] * e2[0] - e1[0] * e2[2],
                            e1[0] * e2[1] - e1[1] * e2[0],
                        ];
                        let ids = if nrm.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() >= 0.0 {
                            [tri[0].0, tri[1].0, tri[2].0]
                        } else {
                            [tri[0].0, tri[2].0, tri[1].0]
                        };
                        mesh.triangles.push(ids);
                        cells.push(cell);
                    }
                }
            }
        }
    }
    (mesh, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(grid: &Grid, f: impl Fn([usize; 3], [f64; 3]) -> f64) -> Vec<f64> {
        (0..grid.len()).map(|n| f(grid.unindex(n), grid.coords(grid.unindex(n)))).collect()
    }

    #[test]
    fn radial_levels_give_one_torus() {
        let grid = Grid::torus(1.0, 2.0, 12, 8, 10);
        let u = field(&grid, |_, x| x[0] - 1.0);
        let (mesh, _) = march_tetrahedra(&grid, &u, 0.37);
        let pieces = mesh.components();
        assert_eq!(pieces.len(), 1);
        assert!(pieces[0].is_closed());
        assert_eq!(pieces[0].euler_characteristic().unwrap(), 0);
    }

    #[test]
    fn bump_gives_a_sphere() {
        let grid = Grid::torus(1.0, 2.0, 16, 16, 16);
        let u = field(&grid, |_, x| (x[0] - 1.5).powi(2) + (x[1] - 0.5).powi(2) + (x[2] - 0.5).powi(2));
        let (mesh, _) = march_tetrahedra(&grid, &u, 0.09);
        let pieces = mesh.components();
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].euler_characteristic().unwrap(), 2);
    }

    #[test]
    fn slab_with_two_holes_has_genus_two() {
        let grid = Grid::torus(1.0, 2.0, 20, 20, 20);
        let inside = |idx: [usize; 3]| {
            let [i, j, l] = idx;
            let block = (4..=15).contains(&i) && (4..=15).contains(&j) && (7..=11).contains(&l);
            let hole = |lo: usize| (lo..=lo + 1).contains(&i) && (8..=11).contains(&j);
            block && !hole(6) && !hole(12)
        };
        let u = field(&grid, |idx, _| if inside(idx) { 1.0 } else { 0.0 });
        let (mesh, _) = march_tetrahedra(&grid, &u, 0.5);
        let pieces = mesh.components();
        assert_eq!(pieces.len(), 1);
        assert_eq!(pieces[0].euler_characteristic().unwrap(), -2);
    }

    #[test]
    fn open_mesh_is_rejected() {
        let mesh = TriMesh { vertices: vec![[0.0; 3]; 3], triangles: vec![[0, 1, 2]], periods: [None; 3] };
        assert!(matches!(mesh.euler_characteristic(), Err(Error::OpenMesh(_))));
    }

    #[test]
    fn angle_defects_sum_to_two_pi_chi() {
        let grid = Grid::torus(1.0, 2.0, 14, 14, 14);
        let u = field(&grid, |_, x| (x[0] - 1.5).powi(2) + 2.0 * (x[1] - 0.5).powi(2) + (x[2] - 0.5).powi(2));
        let (mesh, _) = march_tetrahedra(&grid, &u, 0.06);
        let geo = mesh_geometry(&mesh, |x| Sym3::diag(1.0 + x[0], 2.0, 1.0));
        assert!((geo.total_defect - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn flat_coordinate_torus_area() {
        let grid = Grid::torus(1.0, 2.0, 10, 8, 8).with_periods([2.0, 3.0]);
        let u = field(&grid, |_, x| x[0]);
        let (mesh, _) = march_tetrahedra(&grid, &u, 1.53);
        let geo = mesh_geometry(&mesh, |_| Sym3::IDENTITY);
        assert!((geo.area - 6.0).abs() < 1e-12, "{}", geo.area);
        assert!(geo.gauss_curvature.iter().all(|k| k.abs() < 1e-9));
    }
}
