use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// Triangle mesh with vertices in meters.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates indices and drops zero-area triangles. Returns the number of
    /// dropped triangles alongside the mesh.
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<(Self, usize)> {
        for tri in &triangles {
            for &i in tri {
                if i >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        index: i,
                        vertex_count: vertices.len(),
                    });
                }
            }
        }
        for v in &vertices {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(Error::NonFinite("mesh vertex".into()));
            }
        }
        let mut kept = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for tri in triangles {
            let [a, b, c] = tri;
            let area = (vertices[b] - vertices[a])
                .cross(&(vertices[c] - vertices[a]))
                .norm()
                * 0.5;
            if area > MIN_TRIANGLE_AREA {
                kept.push(tri);
            } else {
                dropped += 1;
            }
        }
        Ok((
            Self {
                vertices,
                triangles: kept,
            },
            dropped,
        ))
    }

    pub fn triangle_vertices(&self, i: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(i);
        (b - a).cross(&(c - a)).norm() * 0.5
    }

    /// CCW outward normal of triangle `i`.
    pub fn triangle_normal(&self, i: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle_vertices(i);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Vector3<f64> {
        // Area-weighted centroid of the surface.
        let mut acc = Vector3::zeros();
        let mut total = 0.0;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_vertices(i);
            let area = self.triangle_area(i);
            acc += (a + b + c) / 3.0 * area;
            total += area;
        }
        acc / total
    }

    /// Radius of the bounding sphere about the centroid.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.centroid();
        self.vertices
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max)
    }

    /// Signed volume via the divergence theorem; meaningful for closed meshes.
    pub fn volume(&self) -> f64 {
        let mut v = 0.0;
        for i in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_vertices(i);
            v += a.dot(&b.cross(&c)) / 6.0;
        }
        v
    }

    pub fn transformed(&self, t: &crate::geometry::Transform3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| t.apply(*v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v * s).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Area-weighted uniform surface sampling, deterministic per seed.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<PointCloud> {
        if self.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for i in 0..self.triangles.len() {
            total += self.triangle_area(i);
            cumulative.push(total);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.random::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c < u).min(self.triangles.len() - 1);
            let [a, b, c] = self.triangle_vertices(idx);
            let (mut r1, mut r2) = (rng.random::<f64>(), rng.random::<f64>());
            if r1 + r2 > 1.0 {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            points.push(a + (b - a) * r1 + (c - a) * r2);
        }
        Ok(PointCloud { points })
    }

    /// Wavefront OBJ: `v` and triangular `f` records only. Positions are
    /// multiplied by `scale` to bring them to meters.
    pub fn load_obj(path: impl AsRef<Path>, scale: f64) -> Result<(Self, usize)> {
        let file = std::fs::File::open(path)?;
        Self::read_obj(BufReader::new(file), scale)
    }

    pub fn read_obj(reader: impl BufRead, scale: f64) -> Result<(Self, usize)> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let coords: Vec<f64> = it
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::Parse(format!("obj line {}: {e}", lineno + 1)))?;
                    if coords.len() != 3 {
                        return Err(Error::Parse(format!(
                            "obj line {}: vertex needs 3 coordinates",
                            lineno + 1
                        )));
                    }
                    vertices.push(Vector3::new(coords[0], coords[1], coords[2]) * scale);
                }
                Some("f") => {
                    let idx: Vec<usize> = it
                        .map(|tok| {
                            let first = tok.split('/').next().unwrap_or(tok);
                            first.parse::<usize>().map_err(|e| {
                                Error::Parse(format!("obj line {}: {e}", lineno + 1))
                            })
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::Parse(format!(
                            "obj line {}: only triangular faces supported",
                            lineno + 1
                        )));
                    }
                    triangles.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
                }
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn write_obj(&self, mut w: impl Write) -> Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }
}
