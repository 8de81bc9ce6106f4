use nalgebra::{Matrix3, Vector3};

/// Rigid transform in SE(3): orthonormal rotation plus translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Transform3 {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about a unit axis by `angle` radians (Rodrigues).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        Self {
            rotation: rotation_from_axis_angle(axis, angle),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// (a.compose(b))(p) = a(b(p)).
    pub fn compose(&self, other: &Transform3) -> Transform3 {
        Transform3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform3 {
        let rt = self.rotation.transpose();
        Transform3 {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Orthonormal with determinant +1 within `tol`.
    pub fn rotation_valid(&self, tol: f64) -> bool {
        let r = self.rotation;
        let err = (r.transpose() * r - Matrix3::identity()).norm();
        err <= tol && (r.determinant() - 1.0).abs() <= tol
    }
}

pub fn rotation_from_axis_angle(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.norm();
    if n < 1e-15 {
        return Matrix3::identity();
    }
    let u = axis / n;
    let k = skew(u);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

pub fn skew(v: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Axis-angle vector (angle times unit axis) of a rotation matrix.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle < 1e-12 {
        return Vector3::zeros();
    }
    if (std::f64::consts::PI - angle).abs() < 1e-6 {
        // Near pi: extract axis from R + I.
        let m = r + Matrix3::identity();
        let col = (0..3)
            .max_by(|&a, &b| {
                m.column(a)
                    .norm()
                    .partial_cmp(&m.column(b).norm())
                    .unwrap()
            })
            .unwrap();
        let axis = m.column(col).normalize();
        return axis * angle;
    }
    let axis = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) / (2.0 * angle.sin());
    axis * angle
}

/// Angle in radians between two rotations.
pub fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_transform(rng: &mut impl Rng) -> Transform3 {
        let axis = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let t = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
        let mut tf = Transform3::from_axis_angle(axis, angle);
        tf.translation = t;
        tf
    }

    #[test]
    fn identity_compose_identity() {
        let i = Transform3::identity();
        let c = i.compose(&i);
        assert_relative_eq!(c.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(c.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = random_transform(&mut rng);
            let c = a.compose(&a.inverse());
            assert!((c.rotation - Matrix3::identity()).norm() < 1e-9);
            assert!(c.translation.norm() < 1e-9);
        }
    }

    #[test]
    fn compose_matches_matrix_oracle() {
        // Oracle: 4x4 homogeneous matrix product.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = random_transform(&mut rng);
            let b = random_transform(&mut rng);
            let p = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());

            let ha = to_homogeneous(&a);
            let hb = to_homogeneous(&b);
            let hp = nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
            let expect = ha * hb * hp;

            let got = a.compose(&b).apply(p);
            assert_relative_eq!(got.x, expect.x, epsilon = 1e-12);
            assert_relative_eq!(got.y, expect.y, epsilon = 1e-12);
            assert_relative_eq!(got.z, expect.z, epsilon = 1e-12);
        }
    }

    fn to_homogeneous(t: &Transform3) -> nalgebra::Matrix4<f64> {
        let mut m = nalgebra::Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&t.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t.translation);
        m
    }

    #[test]
    fn preserves_pairwise_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = random_transform(&mut rng);
            let p = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let q = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let d0 = (p - q).norm();
            let d1 = (t.apply(p) - t.apply(q)).norm();
            assert!((d0 - d1).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_log_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let axis = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5).normalize();
            let angle = rng.random::<f64>() * 3.0;
            let r = rotation_from_axis_angle(axis, angle);
            let w = rotation_log(&r);
            let r2 = rotation_from_axis_angle(w.normalize(), w.norm());
            assert!((r - r2).norm() < 1e-8);
        }
    }
}
