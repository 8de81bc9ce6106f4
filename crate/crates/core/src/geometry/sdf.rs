use nalgebra::Vector3;

use crate::geometry::TriangleMesh;

/// Signed-distance and nearest-point queries over a triangle mesh.
///
/// Distances come from a bounding-volume hierarchy over the triangles;
/// the sign comes from the generalized winding number, negative inside.
#[derive(Debug, Clone)]
pub struct DistanceQuery {
    mesh: TriangleMesh,
    nodes: Vec<BvhNode>,
    /// Triangle indices ordered by leaf.
    order: Vec<usize>,
}

#[derive(Debug, Clone)]
struct BvhNode {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
    /// Leaf: (start, count) into `order`. Internal: children at 2i+1, 2i+2
    /// are not used; children are stored explicitly.
    left: i32,
    right: i32,
    start: u32,
    count: u32,
}

const LEAF_SIZE: usize = 4;

impl DistanceQuery {
    pub fn build(mesh: TriangleMesh) -> Self {
        let n = mesh.triangles.len();
        let mut order: Vec<usize> = (0..n).collect();
        let centroids: Vec<Vector3<f64>> = (0..n)
            .map(|i| {
                let [a, b, c] = mesh.triangle_vertices(i);
                (a + b + c) / 3.0
            })
            .collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build_node(&mesh, &centroids, &mut order, 0, n, &mut nodes);
        }
        Self { mesh, nodes, order }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Nearest point on the surface and the owning triangle index.
    pub fn nearest_point(&self, p: Vector3<f64>) -> (Vector3<f64>, usize) {
        debug_assert!(!self.mesh.triangles.is_empty());
        let mut best_d2 = f64::INFINITY;
        let mut best = (Vector3::zeros(), 0usize);
        self.nearest_recurse(0, p, &mut best_d2, &mut best);
        best
    }

    fn nearest_recurse(
        &self,
        node: usize,
        p: Vector3<f64>,
        best_d2: &mut f64,
        best: &mut (Vector3<f64>, usize),
    ) {
        let n = &self.nodes[node];
        if aabb_dist2(&n.lo, &n.hi, &p) >= *best_d2 {
            return;
        }
        if n.count > 0 {
            for k in n.start..n.start + n.count {
                let tri = self.order[k as usize];
                let [a, b, c] = self.mesh.triangle_vertices(tri);
                let q = closest_point_on_triangle(p, a, b, c);
                let d2 = (p - q).norm_squared();
                if d2 < *best_d2 {
                    *best_d2 = d2;
                    *best = (q, tri);
                }
            }
        } else {
            // Visit the closer child first.
            let l = n.left as usize;
            let r = n.right as usize;
            let dl = aabb_dist2(&self.nodes[l].lo, &self.nodes[l].hi, &p);
            let dr = aabb_dist2(&self.nodes[r].lo, &self.nodes[r].hi, &p);
            let (first, second) = if dl <= dr { (l, r) } else { (r, l) };
            self.nearest_recurse(first, p, best_d2, best);
            self.nearest_recurse(second, p, best_d2, best);
        }
    }

    /// Generalized winding number at `p`; > 0.5 means inside a closed mesh.
    pub fn winding_number(&self, p: Vector3<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..self.mesh.triangles.len() {
            let [a, b, c] = self.mesh.triangle_vertices(i);
            total += solid_angle(p, a, b, c);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    pub fn contains(&self, p: Vector3<f64>) -> bool {
        // Points outside the root bounding box cannot be inside.
        if let Some(root) = self.nodes.first() {
            if aabb_dist2(&root.lo, &root.hi, &p) > 0.0 {
                return false;
            }
        }
        self.winding_number(p) > 0.5
    }

    /// Signed distance (negative inside) and the direction of increasing
    /// distance (outward unit normal direction).
    pub fn signed_distance(&self, p: Vector3<f64>) -> (f64, Vector3<f64>) {
        let (q, tri) = self.nearest_point(p);
        let delta = p - q;
        let dist = delta.norm();
        let inside = self.contains(p);
        let sign = if inside { -1.0 } else { 1.0 };
        let grad = if dist > 1e-9 {
            delta / dist * sign
        } else {
            self.mesh.triangle_normal(tri)
        };
        (sign * dist, grad)
    }

    /// Unsigned distance only; cheaper when the sign is not needed.
    pub fn distance(&self, p: Vector3<f64>) -> f64 {
        let (q, _) = self.nearest_point(p);
        (p - q).norm()
    }
}

fn build_node(
    mesh: &TriangleMesh,
    centroids: &[Vector3<f64>],
    order: &mut [usize],
    start: usize,
    count: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for &tri in &order[start..start + count] {
        for v in mesh.triangle_vertices(tri) {
            lo = lo.inf(&v);
            hi = hi.sup(&v);
        }
    }
    let idx = nodes.len();
    nodes.push(BvhNode {
        lo,
        hi,
        left: -1,
        right: -1,
        start: start as u32,
        count: 0,
    });
    if count <= LEAF_SIZE {
        nodes[idx].count = count as u32;
        return idx;
    }
    // Split on the longest centroid axis at the median.
    let mut clo = Vector3::repeat(f64::INFINITY);
    let mut chi = Vector3::repeat(f64::NEG_INFINITY);
    for &tri in &order[start..start + count] {
        clo = clo.inf(&centroids[tri]);
        chi = chi.sup(&centroids[tri]);
    }
    let extent = chi - clo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = count / 2;
    order[start..start + count].select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis]
            .partial_cmp(&centroids[b][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let left = build_node(mesh, centroids, order, start, mid, nodes);
    let right = build_node(mesh, centroids, order, start + mid, count - mid, nodes);
    nodes[idx].left = left as i32;
    nodes[idx].right = right as i32;
    idx
}

fn aabb_dist2(lo: &Vector3<f64>, hi: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    let mut d2 = 0.0;
    for k in 0..3 {
        let v = if p[k] < lo[k] {
            lo[k] - p[k]
        } else if p[k] > hi[k] {
            p[k] - hi[k]
        } else {
            0.0
        };
        d2 += v * v;
    }
    d2
}

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection).
pub fn closest_point_on_triangle(
    p: Vector3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Solid angle subtended by triangle abc at p (van Oosterom-Strackee).
fn solid_angle(p: Vector3<f64>, a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> f64 {
    let ra = a - p;
    let rb = b - p;
    let rc = c - p;
    let la = ra.norm();
    let lb = rb.norm();
    let lc = rc.norm();
    let num = ra.dot(&rb.cross(&rc));
    let den = la * lb * lc + ra.dot(&rb) * lc + rb.dot(&rc) * la + rc.dot(&ra) * lb;
    2.0 * num.atan2(den)
}
