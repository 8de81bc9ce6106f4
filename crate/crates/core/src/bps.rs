//! Basis-point-set encoding: an object cloud becomes a fixed-length vector
//! of shortest distances to a frozen set of basis points.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub const BPS_DIM: usize = 4096;
pub const BPS_RADIUS: f64 = 0.25;

const CACHE_MAGIC: [u8; 4] = *b"BPSC";
const CACHE_VERSION: u32 = 1;

/// Frozen basis points, uniform in a ball around the origin.
#[derive(Debug, Clone)]
pub struct BasisPointSet {
    pub basis: Vec<Vector3<f64>>,
    pub radius: f64,
    pub seed: u64,
}

impl BasisPointSet {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

/// Per-basis-point shortest distances to the cloud, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct BpsEncoding {
    pub features: Vec<f64>,
}

/// Uniform-in-ball sampling: direction from the unit sphere, radius
/// proportional to the cube root of a uniform draw.
pub fn generate_basis(seed: u64, n: usize, radius: f64) -> Result<BasisPointSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("basis must have at least one point".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("basis radius must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = Vec::with_capacity(n);
    while basis.len() < n {
        let v = Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let norm = v.norm();
        if norm < 1e-9 || norm > 1.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().cbrt();
        basis.push(v * (r / norm));
    }
    Ok(BasisPointSet { basis, radius, seed })
}

/// Shift the cloud so its x-y centroid is at the origin and its lowest point
/// touches z = 0. No scaling: the basis ball is sized for desk-scale objects.
pub fn canonicalize(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = cloud.points.len() as f64;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut min_z = f64::INFINITY;
    for p in &cloud.points {
        cx += p.x;
        cy += p.y;
        min_z = min_z.min(p.z);
    }
    cx /= n;
    cy /= n;
    let shift = Vector3::new(-cx, -cy, -min_z);
    Ok(PointCloud::new(
        cloud.points.iter().map(|p| p + shift).collect(),
    ))
}

/// Shortest distance from every basis point to the cloud. Uses a uniform
/// grid over the cloud; the result is identical to the brute-force scan.
pub fn encode(basis: &BasisPointSet, cloud: &PointCloud) -> Result<BpsEncoding> {
    if cloud.points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let grid = Grid::build(&cloud.points);
    let mut features = vec![0.0; basis.len()];
    basis
        .basis
        .par_iter()
        .map(|b| grid.nearest_distance(*b, &cloud.points))
        .collect_into_vec(&mut features);
    Ok(BpsEncoding { features })
}

/// Plain O(n*m) reference scan.
pub fn encode_brute_force(basis: &BasisPointSet, cloud: &PointCloud) -> Result<BpsEncoding> {
    if cloud.points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let features = basis
        .basis
        .iter()
        .map(|b| {
            cloud
                .points
                .iter()
                .map(|p| (p - b).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(BpsEncoding { features })
}

/// Uniform hash grid over the cloud's bounding box.
struct Grid {
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    origin: Vector3<f64>,
    cell: f64,
    /// Inclusive key range of occupied cells.
    kmin: (i64, i64, i64),
    kmax: (i64, i64, i64),
}

impl Grid {
    fn build(points: &[Vector3<f64>]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let diag = (hi - lo).norm().max(1e-6);
        // Aim for a few points per cell.
        let cell = diag / (points.len() as f64).cbrt().max(1.0);
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        let mut kmin = (i64::MAX, i64::MAX, i64::MAX);
        let mut kmax = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let k = Self::key(p - lo, cell);
            kmin = (kmin.0.min(k.0), kmin.1.min(k.1), kmin.2.min(k.2));
            kmax = (kmax.0.max(k.0), kmax.1.max(k.1), kmax.2.max(k.2));
            cells.entry(k).or_default().push(i);
        }
        Self {
            cells,
            origin: lo,
            cell,
            kmin,
            kmax,
        }
    }

    fn key(rel: Vector3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (rel.x / cell).floor() as i64,
            (rel.y / cell).floor() as i64,
            (rel.z / cell).floor() as i64,
        )
    }

    /// Exact nearest distance via expanding Chebyshev shells around the
    /// query cell, restricted to the occupied key box. Cells at shell k are
    /// at least (k-1) cell widths away, so once the best distance is under
    /// k cell widths the search is complete; past the key box there are no
    /// points at all.
    fn nearest_distance(&self, q: Vector3<f64>, points: &[Vector3<f64>]) -> f64 {
        let (qx, qy, qz) = Self::key(q - self.origin, self.cell);
        // First shell that can touch the occupied box.
        let dist_axis = |v: i64, lo: i64, hi: i64| {
            if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0
            }
        };
        let start = dist_axis(qx, self.kmin.0, self.kmax.0)
            .max(dist_axis(qy, self.kmin.1, self.kmax.1))
            .max(dist_axis(qz, self.kmin.2, self.kmax.2));
        let mut best = f64::INFINITY;
        let mut shell = start;
        loop {
            let mut in_box = false;
            for dx in -shell..=shell {
                let x = qx + dx;
                if x < self.kmin.0 || x > self.kmax.0 {
                    continue;
                }
                for dy in -shell..=shell {
                    let y = qy + dy;
                    if y < self.kmin.1 || y > self.kmax.1 {
                        continue;
                    }
                    for dz in -shell..=shell {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                            continue;
                        }
                        let z = qz + dz;
                        if z < self.kmin.2 || z > self.kmax.2 {
                            continue;
                        }
                        in_box = true;
                        if let Some(idx) = self.cells.get(&(x, y, z)) {
                            for &i in idx {
                                best = best.min((points[i] - q).norm());
                            }
                        }
                    }
                }
            }
            if best <= shell as f64 * self.cell {
                return best;
            }
            // Beyond the occupied box nothing remains; the first shells
            // starting at the box boundary always reach it.
            if !in_box && shell > start {
                return best;
            }
            shell += 1;
        }
    }
}

impl BpsEncoding {
    /// Write as the cache format: 16-byte header (magic, version, feature
    /// count) followed by little-endian 32-bit floats.
    pub fn write_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&CACHE_MAGIC)?;
        f.write_all(&CACHE_VERSION.to_le_bytes())?;
        f.write_all(&(self.features.len() as u64).to_le_bytes())?;
        for &v in &self.features {
            f.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cache(path: impl AsRef<Path>) -> Result<Self> {
        let mut f = std::fs::File::open(path)?;
        let mut header = [0u8; 16];
        f.read_exact(&mut header)?;
        if header[0..4] != CACHE_MAGIC {
            return Err(Error::Parse("bad encoding cache magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::Parse(format!("unsupported cache version {version}")));
        }
        let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let mut buf = vec![0u8; count * 4];
        f.read_exact(&mut buf)?;
        let features = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(Self { features })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_cloud(n: usize, seed: u64, scale: f64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Vector3::new(
                        (rng.random::<f64>() - 0.5) * scale,
                        (rng.random::<f64>() - 0.5) * scale,
                        rng.random::<f64>() * scale,
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn basis_contained_and_deterministic() {
        let a = generate_basis(3, BPS_DIM, BPS_RADIUS).unwrap();
        assert_eq!(a.len(), 4096);
        assert!(a.basis.iter().all(|p| p.norm() <= BPS_RADIUS + 1e-12));
        let b = generate_basis(3, BPS_DIM, BPS_RADIUS).unwrap();
        assert_eq!(a.basis, b.basis);
        let c = generate_basis(4, BPS_DIM, BPS_RADIUS).unwrap();
        assert_ne!(a.basis, c.basis);
    }

    // For a uniform ball the mean point norm is 3/4 of the radius.
    #[test]
    fn basis_mean_norm_matches_uniform_ball() {
        let b = generate_basis(7, BPS_DIM, BPS_RADIUS).unwrap();
        let mean: f64 = b.basis.iter().map(|p| p.norm()).sum::<f64>() / b.len() as f64;
        let expected = 0.75 * BPS_RADIUS;
        assert!(
            (mean - expected).abs() < 0.02 * expected,
            "mean = {mean}, expected ~{expected}"
        );
    }

    #[test]
    fn basis_argument_validation() {
        assert!(generate_basis(0, 0, 0.25).is_err());
        assert!(generate_basis(0, 16, 0.0).is_err());
    }

    #[test]
    fn canonicalize_postconditions() {
        let cloud = random_cloud(500, 1, 0.2);
        let canon = canonicalize(&cloud).unwrap();
        let n = canon.points.len() as f64;
        let cx: f64 = canon.points.iter().map(|p| p.x).sum::<f64>() / n;
        let cy: f64 = canon.points.iter().map(|p| p.y).sum::<f64>() / n;
        let min_z = canon.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
        assert!(cx.abs() < 1e-12 && cy.abs() < 1e-12);
        assert_eq!(min_z, 0.0);

        // Idempotent, and invariant to a prior translation.
        let again = canonicalize(&canon).unwrap();
        for (a, b) in canon.points.iter().zip(&again.points) {
            assert!((a - b).norm() < 1e-12);
        }
        let shifted = PointCloud::new(
            cloud
                .points
                .iter()
                .map(|p| p + Vector3::new(0.3, -0.7, 0.11))
                .collect(),
        );
        let canon2 = canonicalize(&shifted).unwrap();
        for (a, b) in canon.points.iter().zip(&canon2.points) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn canonicalize_empty_errors() {
        assert!(canonicalize(&PointCloud::new(vec![])).is_err());
    }

    #[test]
    fn encode_self_distance_is_zero() {
        let basis = generate_basis(2, 256, BPS_RADIUS).unwrap();
        let cloud = PointCloud::new(basis.basis.clone());
        let enc = encode(&basis, &cloud).unwrap();
        assert!(enc.features.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn encode_single_point_cloud() {
        let basis = generate_basis(2, 128, BPS_RADIUS).unwrap();
        let p = Vector3::new(0.02, -0.01, 0.05);
        let cloud = PointCloud::new(vec![p]);
        let enc = encode(&basis, &cloud).unwrap();
        for (f, b) in enc.features.iter().zip(&basis.basis) {
            assert_relative_eq!(*f, (b - p).norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn encode_matches_brute_force_bitwise() {
        let basis = generate_basis(5, BPS_DIM, BPS_RADIUS).unwrap();
        let cloud = canonicalize(&random_cloud(2048, 9, 0.15)).unwrap();
        let fast = encode(&basis, &cloud).unwrap();
        let slow = encode_brute_force(&basis, &cloud).unwrap();
        for (a, b) in fast.features.iter().zip(&slow.features) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(fast.features.iter().all(|&f| f >= 0.0));
    }

    #[test]
    fn encode_invariant_to_permutation_and_duplication() {
        let basis = generate_basis(6, 512, BPS_RADIUS).unwrap();
        let cloud = random_cloud(300, 11, 0.2);
        let base = encode(&basis, &cloud).unwrap();

        let mut reversed: Vec<Vector3<f64>> = cloud.points.clone();
        reversed.reverse();
        let perm = encode(&basis, &PointCloud::new(reversed)).unwrap();
        for (a, b) in base.features.iter().zip(&perm.features) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let mut doubled = cloud.points.clone();
        doubled.extend(cloud.points.iter().copied());
        let dup = encode(&basis, &PointCloud::new(doubled)).unwrap();
        for (a, b) in base.features.iter().zip(&dup.features) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    // Moving every cloud point by at most eps changes each feature by at
    // most eps.
    #[test]
    fn encode_is_lipschitz() {
        let basis = generate_basis(8, 512, BPS_RADIUS).unwrap();
        let cloud = random_cloud(400, 13, 0.2);
        let base = encode(&basis, &cloud).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let eps = 0.003;
        let moved = PointCloud::new(
            cloud
                .points
                .iter()
                .map(|p| {
                    let mut d = Vector3::new(
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                    );
                    if d.norm() < 1e-9 {
                        d = Vector3::x();
                    }
                    p + d.normalize() * (rng.random::<f64>() * eps)
                })
                .collect(),
        );
        // Verify the actual perturbation bound before using it.
        let max_shift = cloud
            .points
            .iter()
            .zip(&moved.points)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_shift <= eps + 1e-12);
        let enc = encode(&basis, &moved).unwrap();
        for (a, b) in base.features.iter().zip(&enc.features) {
            assert!((a - b).abs() <= max_shift + 1e-12);
        }
    }

    #[test]
    fn cache_roundtrip_and_header() {
        let basis = generate_basis(2, 64, BPS_RADIUS).unwrap();
        let cloud = random_cloud(100, 19, 0.2);
        let enc = encode(&basis, &cloud).unwrap();
        let dir = std::env::temp_dir().join(format!("bps_cache_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("obj.bps");
        enc.write_cache(&path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"BPSC");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 64);
        assert_eq!(bytes.len(), 16 + 64 * 4);

        let back = BpsEncoding::read_cache(&path).unwrap();
        for (a, b) in enc.features.iter().zip(&back.features) {
            assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        }

        // Corrupt magic is rejected.
        let mut bad = bytes.clone();
        bad[0] = b'X';
        let bad_path = dir.join("bad.bps");
        std::fs::write(&bad_path, &bad).unwrap();
        assert!(BpsEncoding::read_cache(&bad_path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
