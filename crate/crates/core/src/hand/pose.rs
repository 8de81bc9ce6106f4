use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Transform3;

/// Pose vector length: translation (3) + 6-d rotation (6) + 16 joints.
pub const POSE_DIM: usize = 25;
pub const JOINT_DIM: usize = 16;

/// Hand configuration: joint angles plus wrist transform. Joint limits are
/// not enforced here; violations are penalized by the joint energy term.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub theta: Vec<f64>,
    pub wrist: Transform3,
}

impl HandPose {
    pub fn new(theta: Vec<f64>, wrist: Transform3) -> Self {
        Self { theta, wrist }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|t| t.is_finite())
            && self.wrist.translation.iter().all(|t| t.is_finite())
            && self.wrist.rotation.iter().all(|t| t.is_finite())
    }
}

/// Layout: [translation(3), rotation columns a1,a2 (6), theta(16)].
pub fn encode_pose(pose: &HandPose) -> Result<[f64; POSE_DIM]> {
    if pose.theta.len() != JOINT_DIM {
        return Err(Error::DimensionMismatch {
            expected: JOINT_DIM,
            got: pose.theta.len(),
        });
    }
    let mut v = [0.0; POSE_DIM];
    v[0..3].copy_from_slice(pose.wrist.translation.as_slice());
    let r = pose.wrist.rotation;
    for k in 0..3 {
        v[3 + k] = r[(k, 0)];
        v[6 + k] = r[(k, 1)];
    }
    v[9..25].copy_from_slice(&pose.theta);
    Ok(v)
}

/// Inverse of [`encode_pose`]; the rotation block is re-orthonormalized by
/// Gram-Schmidt, so any finite 6-d block with independent columns decodes.
pub fn decode_pose(v: &[f64]) -> Result<HandPose> {
    if v.len() != POSE_DIM {
        return Err(Error::DimensionMismatch {
            expected: POSE_DIM,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("pose vector".into()));
    }
    let translation = Vector3::new(v[0], v[1], v[2]);
    let a1 = Vector3::new(v[3], v[4], v[5]);
    let a2 = Vector3::new(v[6], v[7], v[8]);
    let rotation = gram_schmidt(a1, a2)?;
    Ok(HandPose {
        theta: v[9..25].to_vec(),
        wrist: Transform3::new(rotation, translation),
    })
}

fn gram_schmidt(a1: Vector3<f64>, a2: Vector3<f64>) -> Result<Matrix3<f64>> {
    let n1 = a1.norm();
    if n1 < 1e-8 {
        return Err(Error::DegenerateRotation("first column near zero".into()));
    }
    let b1 = a1 / n1;
    let proj = a2 - b1 * b1.dot(&a2);
    if b1.cross(&a2).norm() < 1e-8 {
        return Err(Error::DegenerateRotation(
            "rotation columns near parallel".into(),
        ));
    }
    let b2 = proj.normalize();
    let b3 = b1.cross(&b2);
    Ok(Matrix3::from_columns(&[b1, b2, b3]))
}
