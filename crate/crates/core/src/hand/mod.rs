//! 16-DOF four-finger hand: kinematic tree, contact candidates, and the
//! 25-d pose codec used by the optimizer and the generator.

mod contacts;
pub mod kinematics;
mod pose;

pub use contacts::{generate_contact_candidates, ContactCandidate, ContactCandidateSet, ContactSelection};
pub use kinematics::{HandKinematics, HandSpec, Joint, Link, LinkShape};
pub use pose::{decode_pose, encode_pose, HandPose, JOINT_DIM, POSE_DIM};

use crate::error::{Error, Result};

const ALLEGRO_TOML: &str = include_str!("../../assets/hands/allegro.toml");
const LEAP_TOML: &str = include_str!("../../assets/hands/leap.toml");

/// Built-in hand profiles: `allegro` and `leap`.
pub fn builtin_hand(profile: &str) -> Result<HandKinematics> {
    match profile {
        "allegro" => HandKinematics::load_str(ALLEGRO_TOML),
        "leap" => HandKinematics::load_str(LEAP_TOML),
        other => Err(Error::UnknownProfile(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotation_from_axis_angle, Transform3};
    use nalgebra::Vector3;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn zero_pose(kin: &HandKinematics) -> HandPose {
        HandPose::new(vec![0.0; kin.dof()], Transform3::identity())
    }

    #[test]
    fn allegro_is_sixteen_dof() {
        let kin = builtin_hand("allegro").unwrap();
        assert_eq!(kin.dof(), 16);
        assert_eq!(kin.links.len(), 17);
    }

    #[test]
    fn fk_zero_configuration() {
        let kin = builtin_hand("allegro").unwrap();
        let tf = kin.forward_kinematics(&zero_pose(&kin)).unwrap();
        // Palm at the wrist.
        let palm = tf[kin.palm_link];
        assert!((palm.rotation - nalgebra::Matrix3::identity()).norm() < 1e-12);
        // At zero angles every link frame is axis-aligned; index base sits at
        // its palm attachment point.
        let idx = kin.link_index("index_base").unwrap();
        assert!((tf[idx].translation - Vector3::new(-0.03, 0.095, 0.0)).norm() < 1e-12);
        assert!((tf[idx].rotation - nalgebra::Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn fk_dimension_mismatch() {
        let kin = builtin_hand("allegro").unwrap();
        let pose = HandPose::new(vec![0.0; 7], Transform3::identity());
        assert!(kin.forward_kinematics(&pose).is_err());
    }

    #[test]
    fn fk_rigid_equivariance() {
        let kin = builtin_hand("allegro").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.3).collect();
        let base = HandPose::new(theta.clone(), Transform3::identity());
        let g = Transform3::new(
            rotation_from_axis_angle(Vector3::new(0.3, 1.0, -0.2).normalize(), 1.1),
            Vector3::new(0.4, -0.2, 0.7),
        );
        let moved = HandPose::new(theta, g);
        let tf0 = kin.forward_kinematics(&base).unwrap();
        let tf1 = kin.forward_kinematics(&moved).unwrap();
        for (a, b) in tf0.iter().zip(&tf1) {
            let expect = g.compose(a);
            assert!((expect.rotation - b.rotation).norm() < 1e-9);
            assert!((expect.translation - b.translation).norm() < 1e-9);
        }
    }

    #[test]
    fn single_revolute_analytic_oracle() {
        // One joint chain: child rotated 90 degrees about its axis.
        let spec_text = r#"
name = "single"
palm_link = "root"
palm_normal = [0.0, 0.0, 1.0]

[[links]]
name = "root"
shape = { kind = "box", size = [0.02, 0.02, 0.02] }

[[links]]
name = "child"
shape = { kind = "box", size = [0.02, 0.05, 0.02] }

[[joints]]
name = "j"
parent = "root"
child = "child"
origin = [0.0, 0.1, 0.0]
axis = [1.0, 0.0, 0.0]
lower = -2.0
upper = 2.0
"#;
        let kin = HandKinematics::load_str(spec_text).unwrap();
        let pose = HandPose::new(vec![std::f64::consts::FRAC_PI_2], Transform3::identity());
        let tf = kin.forward_kinematics(&pose).unwrap();
        let child = tf[kin.link_index("child").unwrap()];
        // Hand-computed frame: origin at (0, 0.1, 0); +y of the child maps
        // to world +z after a 90 degree rotation about +x.
        assert!((child.translation - Vector3::new(0.0, 0.1, 0.0)).norm() < 1e-12);
        let tip = child.apply(Vector3::new(0.0, 0.05, 0.0));
        assert!((tip - Vector3::new(0.0, 0.1, 0.05)).norm() < 1e-9);
    }

    #[test]
    fn palm_normal_identity_and_reflection() {
        let kin = builtin_hand("allegro").unwrap();
        let pose = zero_pose(&kin);
        let n = kin.palm_normal(&pose);
        assert!((n - kin.palm_normal_local).norm() < 1e-12);

        let flipped = HandPose::new(
            vec![0.0; 16],
            Transform3::from_axis_angle(Vector3::new(1.0, 0.0, 0.0), std::f64::consts::PI),
        );
        let n = kin.palm_normal(&flipped);
        assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
    }

    #[test]
    fn palm_normal_matches_rotation_oracle() {
        let kin = builtin_hand("allegro").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let axis = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            )
            .normalize();
            let r = rotation_from_axis_angle(axis, rng.random::<f64>() * 6.0);
            let pose = HandPose::new(vec![0.0; 16], Transform3::new(r, Vector3::zeros()));
            let n = kin.palm_normal(&pose);
            assert!((n - r * kin.palm_normal_local).norm() < 1e-9);
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hand_surface_points_membership_and_count() {
        let kin = builtin_hand("allegro").unwrap();
        let pose = zero_pose(&kin);
        let n_per_link = 8;
        let cloud = kin.hand_surface_points(&pose, n_per_link).unwrap();
        assert_eq!(cloud.len(), n_per_link * kin.links.len());
        // Points transformed back into link frames sit on their mesh surfaces.
        let tf = kin.forward_kinematics(&pose).unwrap();
        let local = kin.local_surface_samples(n_per_link).unwrap();
        for (i, lc) in local.iter().enumerate() {
            for p in &lc.points {
                let world = tf[i].apply(*p);
                let back = tf[i].inverse().apply(world);
                let (d, _) = kin.links[i].sdf.signed_distance(back);
                assert!(d.abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn hand_surface_points_equivariant() {
        let kin = builtin_hand("allegro").unwrap();
        let theta = vec![0.2; 16];
        let g = Transform3::new(
            rotation_from_axis_angle(Vector3::new(0.0, 0.0, 1.0), 0.8),
            Vector3::new(0.1, 0.2, 0.3),
        );
        let a = kin
            .hand_surface_points(&HandPose::new(theta.clone(), Transform3::identity()), 4)
            .unwrap();
        let b = kin
            .hand_surface_points(&HandPose::new(theta, g), 4)
            .unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((g.apply(*p) - q).norm() < 1e-9);
        }
    }
}
