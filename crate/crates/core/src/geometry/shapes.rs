//! Procedural primitive meshes: boxes, cylinders, hemispheres-capped tips.
//! All meshes are closed and CCW-oriented with outward normals.

use nalgebra::Vector3;

use crate::geometry::TriangleMesh;

/// Axis-aligned box centered at the origin with full extents `size`.
pub fn box_mesh(size: Vector3<f64>) -> TriangleMesh {
    let h = size / 2.0;
    let v = |x: f64, y: f64, z: f64| Vector3::new(x * h.x, y * h.y, z * h.z);
    let vertices = vec![
        v(-1.0, -1.0, -1.0),
        v(1.0, -1.0, -1.0),
        v(1.0, 1.0, -1.0),
        v(-1.0, 1.0, -1.0),
        v(-1.0, -1.0, 1.0),
        v(1.0, -1.0, 1.0),
        v(1.0, 1.0, 1.0),
        v(-1.0, 1.0, 1.0),
    ];
    // CCW when viewed from outside.
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2], // -z
        [4, 5, 6],
        [4, 6, 7], // +z
        [0, 1, 5],
        [0, 5, 4], // -y
        [2, 3, 7],
        [2, 7, 6], // +y
        [1, 2, 6],
        [1, 6, 5], // +x
        [3, 0, 4],
        [3, 4, 7], // -x
    ];
    TriangleMesh::new(vertices, triangles).expect("box mesh is valid").0
}

/// Closed cylinder along +z, base at z=0, of given radius and height.
pub fn cylinder_mesh(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let n = segments.max(3);
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for k in 0..n {
        let a = std::f64::consts::TAU * k as f64 / n as f64;
        vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), 0.0));
    }
    for k in 0..n {
        let a = std::f64::consts::TAU * k as f64 / n as f64;
        vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), height));
    }
    let bottom_center = vertices.len();
    vertices.push(Vector3::new(0.0, 0.0, 0.0));
    let top_center = vertices.len();
    vertices.push(Vector3::new(0.0, 0.0, height));

    let mut triangles = Vec::new();
    for k in 0..n {
        let k1 = (k + 1) % n;
        // Side quad.
        triangles.push([k, k1, n + k1]);
        triangles.push([k, n + k1, n + k]);
        // Caps.
        triangles.push([bottom_center, k1, k]);
        triangles.push([top_center, n + k, n + k1]);
    }
    TriangleMesh::new(vertices, triangles).expect("cylinder mesh is valid").0
}

/// UV sphere centered at the origin.
pub fn sphere_mesh(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    let rings = rings.max(2);
    let segs = segments.max(3);
    let mut vertices = Vec::new();
    vertices.push(Vector3::new(0.0, 0.0, radius)); // north pole
    for r in 1..rings {
        let phi = std::f64::consts::PI * r as f64 / rings as f64;
        for s in 0..segs {
            let theta = std::f64::consts::TAU * s as f64 / segs as f64;
            vertices.push(Vector3::new(
                radius * phi.sin() * theta.cos(),
                radius * phi.sin() * theta.sin(),
                radius * phi.cos(),
            ));
        }
    }
    let south = vertices.len();
    vertices.push(Vector3::new(0.0, 0.0, -radius));

    let ring_start = |r: usize| 1 + (r - 1) * segs;
    let mut triangles = Vec::new();
    for s in 0..segs {
        let s1 = (s + 1) % segs;
        triangles.push([0, ring_start(1) + s, ring_start(1) + s1]);
        triangles.push([south, ring_start(rings - 1) + s1, ring_start(rings - 1) + s]);
    }
    for r in 1..rings - 1 {
        for s in 0..segs {
            let s1 = (s + 1) % segs;
            let a = ring_start(r) + s;
            let b = ring_start(r) + s1;
            let c = ring_start(r + 1) + s;
            let d = ring_start(r + 1) + s1;
            triangles.push([a, d, b]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("sphere mesh is valid").0
}

/// Fingertip: cylinder stub of `radius` from z=0 to z=`stub`, capped by a
/// hemisphere, closed by a disc at z=0. Outward tip axis is +z.
pub fn fingertip_mesh(radius: f64, stub: f64, segments: usize, rings: usize) -> TriangleMesh {
    let segs = segments.max(3);
    let rings = rings.max(2);
    let mut vertices = Vec::new();
    // Base ring at z=0 and top ring at z=stub.
    for k in 0..segs {
        let a = std::f64::consts::TAU * k as f64 / segs as f64;
        vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), 0.0));
    }
    for k in 0..segs {
        let a = std::f64::consts::TAU * k as f64 / segs as f64;
        vertices.push(Vector3::new(radius * a.cos(), radius * a.sin(), stub));
    }
    let mut triangles = Vec::new();
    for k in 0..segs {
        let k1 = (k + 1) % segs;
        triangles.push([k, k1, segs + k1]);
        triangles.push([k, segs + k1, segs + k]);
    }
    // Hemisphere rings above z=stub.
    let mut prev_ring: Vec<usize> = (segs..2 * segs).collect();
    for r in 1..rings {
        let phi = std::f64::consts::FRAC_PI_2 * r as f64 / rings as f64;
        let ring: Vec<usize> = (0..segs)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / segs as f64;
                vertices.push(Vector3::new(
                    radius * phi.cos() * a.cos(),
                    radius * phi.cos() * a.sin(),
                    stub + radius * phi.sin(),
                ));
                vertices.len() - 1
            })
            .collect();
        for k in 0..segs {
            let k1 = (k + 1) % segs;
            triangles.push([prev_ring[k], prev_ring[k1], ring[k1]]);
            triangles.push([prev_ring[k], ring[k1], ring[k]]);
        }
        prev_ring = ring;
    }
    let apex = vertices.len();
    vertices.push(Vector3::new(0.0, 0.0, stub + radius));
    for k in 0..segs {
        let k1 = (k + 1) % segs;
        triangles.push([prev_ring[k], prev_ring[k1], apex]);
    }
    // Bottom disc.
    let base_center = vertices.len();
    vertices.push(Vector3::new(0.0, 0.0, 0.0));
    for k in 0..segs {
        let k1 = (k + 1) % segs;
        triangles.push([base_center, k1, k]);
    }
    TriangleMesh::new(vertices, triangles).expect("fingertip mesh is valid").0
}

/// L-shaped prism: union of two boxes sharing a corner, base at z=0.
/// Footprint is `outer` square minus a notch; height `height`.
pub fn l_shape_mesh(outer: f64, thickness: f64, height: f64) -> TriangleMesh {
    // Two boxes side by side: vertical bar and horizontal foot.
    let bar = box_offset(
        Vector3::new(thickness, outer, height),
        Vector3::new(thickness / 2.0, outer / 2.0, height / 2.0),
    );
    let foot = box_offset(
        Vector3::new(outer - thickness, thickness, height),
        Vector3::new(thickness + (outer - thickness) / 2.0, thickness / 2.0, height / 2.0),
    );
    merge(vec![bar, foot])
}

fn box_offset(size: Vector3<f64>, center: Vector3<f64>) -> TriangleMesh {
    let mut m = box_mesh(size);
    for v in &mut m.vertices {
        *v += center;
    }
    m
}

fn merge(meshes: Vec<TriangleMesh>) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for m in meshes {
        let base = vertices.len();
        vertices.extend(m.vertices);
        triangles.extend(m.triangles.into_iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
    TriangleMesh::new(vertices, triangles).expect("merged mesh is valid").0
}
