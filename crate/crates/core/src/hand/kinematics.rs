use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    rotation_from_axis_angle, shapes, DistanceQuery, PointCloud, Transform3, TriangleMesh,
};
use crate::hand::HandPose;

/// Primitive link geometry in the hand description file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinkShape {
    /// Box centered on the link origin extended along +y by half its length.
    Box { size: [f64; 3] },
    /// Cylinder stub plus hemispherical cap, extending along +y from the origin.
    Fingertip { radius: f64, stub: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub shape: LinkShape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub child: String,
    /// Joint origin in the parent link frame.
    pub origin: [f64; 3],
    /// Rotation axis in the child link frame.
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContactGroupSpec {
    /// `tip` (hemisphere-directed) or `surface` (area-uniform).
    pub kind: String,
    pub links: Vec<String>,
    pub count_per_link: usize,
}

/// On-disk hand description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandSpec {
    pub name: String,
    pub palm_link: String,
    pub palm_normal: [f64; 3],
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub contact_groups: Vec<ContactGroupSpec>,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub mesh: TriangleMesh,
    pub sdf: Arc<DistanceQuery>,
    /// Inscribed sphere for self-collision checks, in link frame.
    pub sphere_center: Vector3<f64>,
    pub sphere_radius: f64,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    pub origin: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub lower: f64,
    pub upper: f64,
}

/// Kinematic tree of a multi-finger hand, rooted at the palm.
///
/// Joint `i` drives link `joints[i].child`; theta has one entry per joint.
#[derive(Debug, Clone)]
pub struct HandKinematics {
    pub name: String,
    pub links: Vec<Link>,
    /// Topologically ordered: a joint's parent link always precedes its child.
    pub joints: Vec<Joint>,
    pub palm_link: usize,
    pub palm_normal_local: Vector3<f64>,
    pub contact_groups: Vec<ContactGroupSpec>,
}

impl HandKinematics {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_limits(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.joints.iter().map(|j| j.lower).collect(),
            self.joints.iter().map(|j| j.upper).collect(),
        )
    }

    /// Links directly connected by a joint (used to exempt adjacent pairs
    /// from self-collision).
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.joints
            .iter()
            .any(|j| (j.parent == a && j.child == b) || (j.parent == b && j.child == a))
    }

    pub fn load_str(text: &str) -> Result<Self> {
        let spec: HandSpec =
            toml::from_str(text).map_err(|e| Error::Parse(format!("hand description: {e}")))?;
        Self::from_spec(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_spec(spec: HandSpec) -> Result<Self> {
        let mut links = Vec::with_capacity(spec.links.len());
        let mut by_name = HashMap::new();
        for (i, l) in spec.links.iter().enumerate() {
            if by_name.insert(l.name.clone(), i).is_some() {
                return Err(Error::Parse(format!("duplicate link `{}`", l.name)));
            }
            let (mesh, sphere_center, sphere_radius) = build_link_geometry(&l.shape);
            links.push(Link {
                name: l.name.clone(),
                sdf: Arc::new(DistanceQuery::build(mesh.clone())),
                mesh,
                sphere_center,
                sphere_radius,
            });
        }
        let palm_link = *by_name
            .get(&spec.palm_link)
            .ok_or_else(|| Error::Parse(format!("palm link `{}` not defined", spec.palm_link)))?;

        let mut joints = Vec::with_capacity(spec.joints.len());
        for j in &spec.joints {
            let parent = *by_name
                .get(&j.parent)
                .ok_or_else(|| Error::Parse(format!("joint `{}`: unknown parent", j.name)))?;
            let child = *by_name
                .get(&j.child)
                .ok_or_else(|| Error::Parse(format!("joint `{}`: unknown child", j.name)))?;
            if j.lower >= j.upper {
                return Err(Error::Parse(format!(
                    "joint `{}`: lower limit must be below upper",
                    j.name
                )));
            }
            let axis = Vector3::from(j.axis);
            if axis.norm() < 1e-9 {
                return Err(Error::Parse(format!("joint `{}`: zero axis", j.name)));
            }
            joints.push(Joint {
                name: j.name.clone(),
                parent,
                child,
                origin: Vector3::from(j.origin),
                axis: axis.normalize(),
                lower: j.lower,
                upper: j.upper,
            });
        }

        let kin = Self {
            name: spec.name,
            links,
            joints,
            palm_link,
            palm_normal_local: Vector3::from(spec.palm_normal).normalize(),
            contact_groups: spec.contact_groups,
        };
        kin.validate_tree()?;
        Ok(kin)
    }

    /// Joint graph must be a tree rooted at the palm with parents ordered
    /// before children.
    fn validate_tree(&self) -> Result<()> {
        let mut has_parent = vec![false; self.links.len()];
        let mut reached = vec![false; self.links.len()];
        reached[self.palm_link] = true;
        for j in &self.joints {
            if has_parent[j.child] {
                return Err(Error::Parse(format!(
                    "link `{}` has multiple parent joints",
                    self.links[j.child].name
                )));
            }
            if j.child == self.palm_link {
                return Err(Error::Parse("palm link cannot be a joint child".into()));
            }
            if !reached[j.parent] {
                return Err(Error::Parse(format!(
                    "joint `{}` appears before its parent link is reachable",
                    j.name
                )));
            }
            has_parent[j.child] = true;
            reached[j.child] = true;
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(Error::Parse(format!(
                "link `{}` is not connected to the palm",
                self.links[i].name
            )));
        }
        Ok(())
    }

    /// World transform of every link for the given pose.
    pub fn forward_kinematics(&self, pose: &HandPose) -> Result<Vec<Transform3>> {
        if pose.theta.len() != self.dof() {
            return Err(Error::DimensionMismatch {
                expected: self.dof(),
                got: pose.theta.len(),
            });
        }
        let mut tf = vec![Transform3::identity(); self.links.len()];
        tf[self.palm_link] = pose.wrist;
        for (i, j) in self.joints.iter().enumerate() {
            let local = Transform3::new(
                rotation_from_axis_angle(j.axis, pose.theta[i]),
                j.origin,
            );
            tf[j.child] = tf[j.parent].compose(&local);
        }
        Ok(tf)
    }

    /// World-frame palm normal: wrist rotation applied to the local normal.
    pub fn palm_normal(&self, pose: &HandPose) -> Vector3<f64> {
        pose.wrist.rotation * self.palm_normal_local
    }

    /// Per-link surface samples in link-local frames; deterministic.
    pub fn local_surface_samples(&self, n_per_link: usize) -> Result<Vec<PointCloud>> {
        if n_per_link == 0 {
            return Err(Error::InvalidArgument("n_per_link must be >= 1".into()));
        }
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| l.mesh.sample_surface(n_per_link, 0x9d2f_0000 + i as u64))
            .collect()
    }

    /// Surface samples of the posed hand in the world frame.
    pub fn hand_surface_points(&self, pose: &HandPose, n_per_link: usize) -> Result<PointCloud> {
        let tf = self.forward_kinematics(pose)?;
        let local = self.local_surface_samples(n_per_link)?;
        let mut points = Vec::with_capacity(n_per_link * self.links.len());
        for (i, cloud) in local.iter().enumerate() {
            points.extend(cloud.points.iter().map(|p| tf[i].apply(*p)));
        }
        Ok(PointCloud::new(points))
    }

    /// Self-collision spheres in world frame for the given link transforms.
    pub fn world_spheres(&self, link_tf: &[Transform3]) -> Vec<(Vector3<f64>, f64)> {
        self.links
            .iter()
            .zip(link_tf)
            .map(|(l, t)| (t.apply(l.sphere_center), l.sphere_radius))
            .collect()
    }
}

/// Mesh plus an inscribed self-collision sphere, all in the link frame.
fn build_link_geometry(shape: &LinkShape) -> (TriangleMesh, Vector3<f64>, f64) {
    match shape {
        LinkShape::Box { size } => {
            // Box extends along +y from the link origin.
            let mut m = shapes::box_mesh(Vector3::new(size[0], size[1], size[2]));
            for v in &mut m.vertices {
                v.y += size[1] / 2.0;
            }
            let r = size.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
            (m, Vector3::new(0.0, size[1] / 2.0, 0.0), r)
        }
        LinkShape::Fingertip { radius, stub } => {
            // Generated along +z, rotated so the tip axis is +y.
            let m = shapes::fingertip_mesh(*radius, *stub, 16, 6);
            let rot = rotation_from_axis_angle(
                Vector3::new(1.0, 0.0, 0.0),
                -std::f64::consts::FRAC_PI_2,
            );
            let mesh = TriangleMesh {
                vertices: m.vertices.iter().map(|v| rot * v).collect(),
                triangles: m.triangles,
            };
            (mesh, Vector3::new(0.0, *stub, 0.0), *radius)
        }
    }
}

/// Center of the fingertip hemisphere cap in the link frame.
pub fn tip_cap_center(shape: &LinkShape) -> Option<Vector3<f64>> {
    match shape {
        LinkShape::Fingertip { stub, .. } => Some(Vector3::new(0.0, *stub, 0.0)),
        LinkShape::Box { .. } => None,
    }
}

/// Outward tip axis of a link in its local frame (+y by construction).
pub fn tip_axis_local() -> Vector3<f64> {
    Vector3::new(0.0, 1.0, 0.0)
}
