//! Triangle meshes: OBJ I/O, primitive tessellation, area-weighted surface
//! sampling and signed distance via the generalized winding number.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::pose::Pose;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting out-of-range indices and dropping zero-area triangles.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(v) = vertices.iter().find(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::data(format!("non-finite mesh vertex {v:?}")));
        }
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::data(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        let mut mesh = TriangleMesh {
            vertices,
            triangles: Vec::new(),
        };
        let scale = mesh.bounding_box().map_or(0.0, |(lo, hi)| (hi - lo).norm());
        let min_area = f64::EPSILON * scale * scale;
        mesh.triangles = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| mesh.vertices[i as usize]);
                0.5 * (b - a).cross(&(c - a)).norm() > min_area
            })
            .collect();
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn bounding_box(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    pub fn triangle_areas(&self) -> Vec<f64> {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.triangle_areas().iter().sum()
    }

    pub fn transformed(&self, pose: &Pose) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn scaled(&self, scale: [f64; 3]) -> TriangleMesh {
        let s = Vector3::from(scale);
        let mut out = TriangleMesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| Point3::from(v.coords.component_mul(&s)))
                .collect(),
            triangles: self.triangles.clone(),
        };
        // Mirroring scales flip orientation.
        if scale.iter().filter(|c| **c < 0.0).count() % 2 == 1 {
            for t in &mut out.triangles {
                t.swap(1, 2);
            }
        }
        out
    }

    pub fn merge(&mut self, other: &TriangleMesh) {
        let offset = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
    }

    /// Parses `v x y z` and triangular `f` records; everything else is ignored.
    pub fn from_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("v") => {
                    let coords: Vec<f64> = tokens
                        .take(3)
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::Parse {
                            line: line_no,
                            message: format!("bad vertex: {e}"),
                        })?;
                    if coords.len() != 3 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "vertex needs three coordinates".into(),
                        });
                    }
                    vertices.push(Point3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let idx: Vec<u32> = tokens
                        .map(|t| parse_face_index(t, vertices.len(), line_no))
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("face has {} vertices, only triangles are supported", idx.len()),
                        });
                    }
                    triangles.push([idx[0], idx[1], idx[2]]);
                }
                _ => {}
            }
        }
        TriangleMesh::new(vertices, triangles)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {:?} {:?} {:?}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        out
    }

    /// Axis-aligned box centered at the origin.
    pub fn cuboid(size: [f64; 3]) -> TriangleMesh {
        let h = Vector3::from(size) / 2.0;
        let vertices = (0..8)
            .map(|i| {
                Point3::new(
                    if i & 1 == 0 { -h.x } else { h.x },
                    if i & 2 == 0 { -h.y } else { h.y },
                    if i & 4 == 0 { -h.z } else { h.z },
                )
            })
            .collect();
        let quads: [[u32; 4]; 6] = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriangleMesh {
            vertices,
            triangles,
        }
    }

    /// Closed cylinder along z, centered at the origin.
    pub fn cylinder(radius: f64, length: f64, segments: usize) -> TriangleMesh {
        let segments = segments.max(3);
        let hz = length / 2.0;
        let mut vertices = vec![Point3::new(0.0, 0.0, -hz), Point3::new(0.0, 0.0, hz)];
        for i in 0..segments {
            let a = 2.0 * PI * i as f64 / segments as f64;
            let (s, c) = a.sin_cos();
            vertices.push(Point3::new(radius * c, radius * s, -hz));
            vertices.push(Point3::new(radius * c, radius * s, hz));
        }
        let mut triangles = Vec::new();
        for i in 0..segments as u32 {
            let j = (i + 1) % segments as u32;
            let (b0, t0, b1, t1) = (2 + 2 * i, 3 + 2 * i, 2 + 2 * j, 3 + 2 * j);
            triangles.push([0, b1, b0]);
            triangles.push([1, t0, t1]);
            triangles.push([b0, b1, t1]);
            triangles.push([b0, t1, t0]);
        }
        TriangleMesh {
            vertices,
            triangles,
        }
    }

    /// Subdivided icosahedron with vertices on the sphere of `radius`.
    pub fn icosphere(radius: f64, subdivisions: usize) -> TriangleMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vector3<f64>> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|v| Vector3::from(*v).normalize())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
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
        for _ in 0..subdivisions {
            let mut cache = std::collections::HashMap::new();
            let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                    verts.len() as u32 - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        TriangleMesh {
            vertices: verts.into_iter().map(|v| Point3::from(v * radius)).collect(),
            triangles: faces,
        }
    }

    /// `n` points drawn uniformly over the surface area.
    pub fn sample_surface<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<Point3<f64>>> {
        if self.is_empty() {
            return Err(Error::data("cannot sample an empty mesh"));
        }
        let mut cdf = Vec::with_capacity(self.triangles.len());
        let mut acc = 0.0;
        for a in self.triangle_areas() {
            acc += a;
            cdf.push(acc);
        }
        let total = acc;
        Ok((0..n)
            .map(|_| {
                let r = rng.random::<f64>() * total;
                let tri = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
                let [a, b, c] = self.triangle(tri);
                let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                a + (b - a) * u + (c - a) * v
            })
            .collect())
    }

    /// Unsigned distance to the surface and the closest point on it.
    pub fn closest_point(&self, p: &Point3<f64>) -> (f64, Point3<f64>) {
        let mut best = (f64::INFINITY, *p);
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(i);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (q - p).norm_squared();
            if d2 < best.0 {
                best = (d2, q);
            }
        }
        (best.0.sqrt(), best.1)
    }

    /// Generalized winding number: ≈1 inside a closed outward-oriented mesh, ≈0 outside.
    pub fn winding_number(&self, p: &Point3<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle(i);
            total += solid_angle(&(a - p), &(b - p), &(c - p));
        }
        total / (4.0 * PI)
    }

    /// Negative inside the mesh.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        let (d, _) = self.closest_point(p);
        if self.winding_number(p) > 0.5 {
            -d
        } else {
            d
        }
    }

    /// Probes winding numbers on a lattice around the mesh; a closed mesh yields
    /// near-integer values everywhere off the surface.
    pub fn check_watertight(&self) -> Result<()> {
        let Some((lo, hi)) = self.bounding_box() else {
            return Err(Error::data("mesh has no vertices"));
        };
        if self.is_empty() {
            return Err(Error::data("mesh has no triangles"));
        }
        let ext = hi - lo;
        let steps = 5;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    // Lattice offset off the grid so probes avoid axis-aligned faces.
                    let f = |n: usize, axis: usize| {
                        lo[axis] - 0.25 * ext[axis] + ext[axis] * 1.5 * (n as f64 + 0.37) / (steps as f64 + 0.74)
                    };
                    let p = Point3::new(f(i, 0), f(j, 1), f(k, 2));
                    let w = self.winding_number(&p);
                    if (w - w.round()).abs() > 1e-3 {
                        return Err(Error::data(format!(
                            "mesh is not watertight: winding number {w:.4} at {:?}",
                            p.coords.as_slice()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn parse_face_index(token: &str, n_vertices: usize, line: usize) -> Result<u32> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|e| Error::Parse {
        line,
        message: format!("bad face index `{token}`: {e}"),
    })?;
    let idx = if raw < 0 {
        n_vertices as i64 + raw
    } else {
        raw - 1
    };
    if idx < 0 || idx >= n_vertices as i64 {
        return Err(Error::Parse {
            line,
            message: format!("face index {raw} out of range"),
        });
    }
    Ok(idx as u32)
}

/// Signed solid angle subtended by triangle `(a, b, c)` seen from the origin
/// (Van Oosterom–Strackee).
fn solid_angle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    2.0 * num.atan2(den)
}

/// Closest point on a triangle by Voronoi-region classification.
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
