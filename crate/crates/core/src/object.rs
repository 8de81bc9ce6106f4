//! Object under manipulation: mesh, surface cloud, signed-distance query,
//! and the planar-dynamics parameters used by the push simulation.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DistanceQuery, PointCloud, TriangleMesh};

/// Density used when the manifest does not give a mass, kg/m^3.
const DEFAULT_DENSITY: f64 = 500.0;
const DEFAULT_SUPPORT_FRICTION: f64 = 0.3;

/// Planar dynamics parameters for the quasi-static push model.
#[derive(Debug, Clone)]
pub struct ObjectDynamics {
    pub mass: f64,
    /// Support-surface friction coefficient.
    pub mu_s: f64,
    /// Torsional moment arm of the ellipsoidal limit surface, meters.
    pub pressure_radius: f64,
    pub com: Vector3<f64>,
    /// Convex support polygon on the table plane, CCW.
    pub support_polygon: Vec<Vector2<f64>>,
}

/// An object in its canonical table pose: x-y centroid at the origin,
/// resting on the table plane z = 0.
#[derive(Debug, Clone)]
pub struct ObjectModel {
    pub id: String,
    pub mesh: TriangleMesh,
    pub cloud: PointCloud,
    pub sdf: Arc<DistanceQuery>,
    pub dynamics: ObjectDynamics,
}

/// On-disk object manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectManifest {
    pub id: String,
    pub mesh: String,
    /// Multiplier applied to mesh coordinates to obtain meters.
    #[serde(default = "one")]
    pub scale: f64,
    pub mass: Option<f64>,
    pub mu_s: Option<f64>,
    #[serde(default = "default_cloud_points")]
    pub cloud_points: usize,
}

fn one() -> f64 {
    1.0
}

fn default_cloud_points() -> usize {
    2048
}

impl ObjectModel {
    /// Build from a mesh already in meters; recenters to the canonical table
    /// pose and derives dynamics.
    pub fn from_mesh(
        id: impl Into<String>,
        mesh: TriangleMesh,
        mass: Option<f64>,
        mu_s: Option<f64>,
        cloud_points: usize,
        seed: u64,
    ) -> Result<Self> {
        if mesh.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut mesh = mesh;
        // Canonicalize: x-y area centroid to origin, min z to the table.
        let c = mesh.centroid();
        let (lo, _) = mesh.aabb();
        let shift = Vector3::new(-c.x, -c.y, -lo.z);
        for v in &mut mesh.vertices {
            *v += shift;
        }

        let volume = mesh.volume().abs();
        let mass = mass.unwrap_or(volume * DEFAULT_DENSITY);
        if mass <= 0.0 {
            return Err(Error::InvalidArgument("object mass must be positive".into()));
        }
        let com = mesh.centroid();
        let support_polygon = support_polygon(&mesh);
        let circumradius = support_polygon
            .iter()
            .map(|p| p.norm())
            .fold(0.0, f64::max);
        let dynamics = ObjectDynamics {
            mass,
            mu_s: mu_s.unwrap_or(DEFAULT_SUPPORT_FRICTION),
            pressure_radius: 0.6 * circumradius,
            com,
            support_polygon,
        };
        let cloud = mesh.sample_surface(cloud_points, seed)?;
        Ok(Self {
            id: id.into(),
            sdf: Arc::new(DistanceQuery::build(mesh.clone())),
            mesh,
            cloud,
            dynamics,
        })
    }

    /// Load from a TOML manifest; the mesh path is relative to the manifest.
    pub fn load_manifest(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let manifest: ObjectManifest =
            toml::from_str(&text).map_err(|e| Error::Parse(format!("object manifest: {e}")))?;
        let mesh_path = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&manifest.mesh);
        let (mesh, _) = TriangleMesh::load_obj(mesh_path, manifest.scale)?;
        Self::from_mesh(
            manifest.id,
            mesh,
            manifest.mass,
            manifest.mu_s,
            manifest.cloud_points,
            seed,
        )
    }

    pub fn bounding_radius(&self) -> f64 {
        self.mesh.bounding_radius()
    }
}

/// Convex hull of vertices touching the table plane.
fn support_polygon(mesh: &TriangleMesh) -> Vec<Vector2<f64>> {
    let (lo, _) = mesh.aabb();
    let eps = 1e-6;
    let base: Vec<Vector2<f64>> = mesh
        .vertices
        .iter()
        .filter(|v| v.z <= lo.z + eps)
        .map(|v| Vector2::new(v.x, v.y))
        .collect();
    convex_hull(base)
}

/// Andrew's monotone chain, CCW output.
pub fn convex_hull(mut points: Vec<Vector2<f64>>) -> Vec<Vector2<f64>> {
    points.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    points.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    let n = points.len();
    if n < 3 {
        return points;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut lower: Vec<Vector2<f64>> = Vec::new();
    for p in &points {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 1e-15 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vector2<f64>> = Vec::new();
    for p in points.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 1e-15 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
