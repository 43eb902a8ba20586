//! Closed, oriented triangle meshes and per-vertex features.

use std::collections::{BTreeSet, HashMap};

use crate::error::MeshError;

pub type Point = [f64; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise when seen from outside.
    pub triangles: Vec<[usize; 3]>,
}

/// Result of a successful validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Topology {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    pub genus: i64,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

impl Mesh {
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Self {
        Mesh { vertices, triangles }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let set: BTreeSet<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        set.into_iter().collect()
    }

    /// Sorted neighbour lists.
    pub fn one_rings(&self) -> Vec<Vec<usize>> {
        let mut rings = vec![BTreeSet::new(); self.num_vertices()];
        for (a, b) in self.edges() {
            rings[a].insert(b);
            rings[b].insert(a);
        }
        rings.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    /// Vertices within `radius` edges of any seed.
    pub fn ring_neighbourhood(&self, seeds: &[usize], radius: usize, rings: &[Vec<usize>]) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = seeds.iter().copied().collect();
        let mut frontier: Vec<usize> = seen.iter().copied().collect();
        for _ in 0..radius {
            let mut next = Vec::new();
            for v in frontier {
                for &w in &rings[v] {
                    if seen.insert(w) {
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        seen
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Checks that the mesh is closed, consistently oriented, edge-manifold
    /// and free of degenerate faces.
    pub fn validate(&self, name: &str) -> Result<Topology, MeshError> {
        let n = self.num_vertices();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (f, t) in self.triangles.iter().enumerate() {
            if let Some(&v) = t.iter().find(|&&v| v >= n) {
                return Err(MeshError::BadIndex {
                    mesh: name.into(),
                    face: f,
                    vertex: v,
                });
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] || !(self.triangle_area(f) > 0.0) {
                return Err(MeshError::DegenerateTriangle {
                    mesh: name.into(),
                    face: f,
                });
            }
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        let mut keys: Vec<_> = directed.keys().copied().collect();
        keys.sort_unstable();
        for (a, b) in keys {
            let count = directed[&(a, b)];
            if count > 1 {
                return Err(MeshError::NotManifold {
                    mesh: name.into(),
                    a,
                    b,
                    count,
                });
            }
            if !directed.contains_key(&(b, a)) {
                return Err(MeshError::NotClosed {
                    mesh: name.into(),
                    a: a.min(b),
                    b: a.max(b),
                });
            }
        }
        let edges = directed.len() / 2;
        let euler = n as i64 - edges as i64 + self.num_triangles() as i64;
        if euler % 2 != 0 {
            return Err(MeshError::OddEuler {
                mesh: name.into(),
                chi: euler,
            });
        }
        Ok(Topology {
            vertices: n,
            edges,
            faces: self.num_triangles(),
            euler,
            genus: (2 - euler) / 2,
        })
    }

    /// Mixed Voronoi areas: cotangent Voronoi regions on non-obtuse
    /// triangles, and half / quarter of the triangle area at the obtuse /
    /// other corners of obtuse ones. Sums to the surface area.
    pub fn mixed_vertex_areas(&self) -> Result<Vec<f64>, MeshError> {
        let mut areas = vec![0.0; self.num_vertices()];
        for (f, t) in self.triangles.iter().enumerate() {
            let p = t.map(|v| self.vertices[v]);
            let area = self.triangle_area(f);
            if !(area > 0.0) {
                return Err(MeshError::DegenerateTriangle {
                    mesh: String::new(),
                    face: f,
                });
            }
            // corner angles via dot products of the incident edges
            let corner_dot = |i: usize| dot(sub(p[(i + 1) % 3], p[i]), sub(p[(i + 2) % 3], p[i]));
            let dots = [corner_dot(0), corner_dot(1), corner_dot(2)];
            if let Some(obtuse) = (0..3).find(|&i| dots[i] < 0.0) {
                for i in 0..3 {
                    areas[t[i]] += if i == obtuse { area / 2.0 } else { area / 4.0 };
                }
                continue;
            }
            // cot of corner i = dot / |cross| = dot / (2 area)
            let cot = dots.map(|d| d / (2.0 * area));
            for i in 0..3 {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                let len_ij = dot(sub(p[j], p[i]), sub(p[j], p[i]));
                let len_ik = dot(sub(p[k], p[i]), sub(p[k], p[i]));
                // edge ij is opposite corner k, edge ik opposite corner j
                areas[t[i]] += (len_ik * cot[j] + len_ij * cot[k]) / 8.0;
            }
        }
        Ok(areas)
    }
}

/// Per-vertex feature rows, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MeshError> {
        if data.len() != rows * cols {
            return Err(MeshError::FeatureRowMismatch {
                rows: data.len() / cols.max(1),
                vertices: rows,
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(MeshError::NonFiniteFeature(i / cols.max(1)));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MeshError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(MeshError::FeatureDimensionMismatch { a: cols, b: bad.len() });
        }
        FeatureMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<(), MeshError> {
        if self.rows != mesh.num_vertices() {
            return Err(MeshError::FeatureRowMismatch {
                rows: self.rows,
                vertices: mesh.num_vertices(),
            });
        }
        Ok(())
    }

    /// Euclidean distance between row `i` of `self` and row `j` of `other`.
    pub fn distance(&self, i: usize, other: &FeatureMatrix, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(other.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Vertex positions as 3-dimensional features.
    pub fn from_positions(mesh: &Mesh) -> Self {
        FeatureMatrix {
            rows: mesh.num_vertices(),
            cols: 3,
            data: mesh.vertices.iter().flatten().copied().collect(),
        }
    }
}

/// Small closed meshes for fixtures and tests.
pub mod shapes {
    use super::*;

    /// Orients every face of a star-shaped mesh around the origin outward.
    fn orient_outward(vertices: &[Point], faces: &mut [[usize; 3]]) {
        for t in faces.iter_mut() {
            let [a, b, c] = t.map(|v| vertices[v]);
            let n = cross(sub(b, a), sub(c, a));
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0];
            if dot(n, centroid) < 0.0 {
                t.swap(1, 2);
            }
        }
    }

    pub fn tetrahedron() -> Mesh {
        let vertices = vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        let mut faces = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
        orient_outward(&vertices, &mut faces);
        Mesh::new(vertices, faces)
    }

    pub fn octahedron() -> Mesh {
        let vertices = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let mut faces = Vec::new();
        for &x in &[0, 1] {
            for &y in &[2, 3] {
                for &z in &[4, 5] {
                    faces.push([x, y, z]);
                }
            }
        }
        orient_outward(&vertices, &mut faces);
        Mesh::new(vertices, faces)
    }

    /// Regular icosahedron with unit circumradius.
    pub fn icosahedron() -> Mesh {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let vertices: Vec<Point> = raw
            .iter()
            .map(|p| {
                let r = norm(*p);
                [p[0] / r, p[1] / r, p[2] / r]
            })
            .collect();
        let mut faces = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        orient_outward(&vertices, &mut faces);
        Mesh::new(vertices, faces)
    }

    /// Loop-style 1-to-4 subdivision projected to the unit sphere. Returns the
    /// fine mesh and, per fine vertex, the coarse vertex it projects to (old
    /// vertices to themselves, edge midpoints to the lower endpoint).
    pub fn subdivide_sphere(mesh: &Mesh) -> (Mesh, Vec<usize>) {
        let mut vertices = mesh.vertices.clone();
        let mut projection: Vec<usize> = (0..vertices.len()).collect();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces = Vec::with_capacity(mesh.num_triangles() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>, projection: &mut Vec<usize>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0];
                let r = norm(m);
                vertices.push([m[0] / r, m[1] / r, m[2] / r]);
                projection.push(key.0);
                vertices.len() - 1
            })
        };
        for t in &mesh.triangles {
            let [a, b, c] = *t;
            let ab = mid(a, b, &mut vertices, &mut projection);
            let bc = mid(b, c, &mut vertices, &mut projection);
            let ca = mid(c, a, &mut vertices, &mut projection);
            faces.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        (Mesh::new(vertices, faces), projection)
    }

    /// Icosahedron subdivided `level` times (20 * 4^level faces).
    pub fn icosphere(level: usize) -> Mesh {
        let mut m = icosahedron();
        for _ in 0..level {
            m = subdivide_sphere(&m).0;
        }
        m
    }

    /// Latitude-longitude sphere with `slices * 2 * (stacks - 1)` faces.
    pub fn uv_sphere(slices: usize, stacks: usize) -> Mesh {
        assert!(slices >= 3 && stacks >= 2);
        let mut vertices = vec![[0.0, 0.0, 1.0]];
        for i in 1..stacks {
            let theta = std::f64::consts::PI * i as f64 / stacks as f64;
            for j in 0..slices {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
                vertices.push([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
            }
        }
        vertices.push([0.0, 0.0, -1.0]);
        let south = vertices.len() - 1;
        let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
        let mut faces = Vec::new();
        for j in 0..slices {
            faces.push([0, ring(1, j), ring(1, j + 1)]);
        }
        for i in 1..stacks - 1 {
            for j in 0..slices {
                faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
                faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
            }
        }
        for j in 0..slices {
            faces.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
        }
        orient_outward(&vertices, &mut faces);
        Mesh::new(vertices, faces)
    }

    /// Torus with `major * minor * 2` faces.
    pub fn torus(major: usize, minor: usize) -> Mesh {
        let (big, small) = (2.0, 0.7);
        let mut vertices = Vec::new();
        for i in 0..major {
            let u = 2.0 * std::f64::consts::PI * i as f64 / major as f64;
            for j in 0..minor {
                let v = 2.0 * std::f64::consts::PI * j as f64 / minor as f64;
                let r = big + small * v.cos();
                vertices.push([r * u.cos(), r * u.sin(), small * v.sin()]);
            }
        }
        let id = |i: usize, j: usize| (i % major) * minor + j % minor;
        let mut faces = Vec::new();
        for i in 0..major {
            for j in 0..minor {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Mesh::new(vertices, faces)
    }
}
