//! Energy function over hand poses: force-closure surrogate, contact
//! distance, joint-limit, penetration, direction, and arm-feasibility terms.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DistanceQuery, PointCloud};
use crate::hand::{ContactCandidateSet, ContactSelection, HandKinematics, HandPose};

/// Scalar weights of the energy terms. `w_ff` and `w_fp` are accepted in
/// weight files for compatibility but drive no term.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EnergyWeights {
    pub w_fc: f64,
    pub w_dis: f64,
    pub w_pen: f64,
    pub w_spen: f64,
    pub w_tpen: f64,
    pub w_joints: f64,
    pub w_dir: f64,
    pub w_arm: f64,
    pub w_ff: f64,
    pub w_fp: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self {
            w_fc: 0.5,
            w_dis: 500.0,
            w_pen: 300.0,
            w_spen: 100.0,
            w_tpen: 100.0,
            w_joints: 1.0,
            w_dir: 200.0,
            w_arm: 100.0,
            w_ff: 3.0,
            w_fp: 0.0,
        }
    }
}

impl EnergyWeights {
    pub fn zeros() -> Self {
        Self {
            w_fc: 0.0,
            w_dis: 0.0,
            w_pen: 0.0,
            w_spen: 0.0,
            w_tpen: 0.0,
            w_joints: 0.0,
            w_dir: 0.0,
            w_arm: 0.0,
            w_ff: 0.0,
            w_fp: 0.0,
        }
    }

    pub fn load_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("weights file: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_fc, self.w_dis, self.w_pen, self.w_spen, self.w_tpen, self.w_joints,
            self.w_dir, self.w_arm, self.w_ff, self.w_fp,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "energy weights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-term values plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_fc: f64,
    pub e_dis: f64,
    pub e_joint: f64,
    pub e_pen_obj: f64,
    pub e_pen_table: f64,
    pub e_pen_self: f64,
    pub e_dir: f64,
    pub e_arm: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    /// Recompute the weighted sum of components.
    pub fn weighted_sum(&self, w: &EnergyWeights) -> f64 {
        w.w_fc * self.e_fc
            + w.w_dis * self.e_dis
            + w.w_joints * self.e_joint
            + w.w_pen * self.e_pen_obj
            + w.w_tpen * self.e_pen_table
            + w.w_spen * self.e_pen_self
            + w.w_dir * self.e_dir
            + w.w_arm * self.e_arm
    }

    /// The eight component values in dataset-record order.
    pub fn components(&self) -> [f64; 8] {
        [
            self.e_fc,
            self.e_dis,
            self.e_joint,
            self.e_pen_obj,
            self.e_pen_table,
            self.e_pen_self,
            self.e_dir,
            self.e_arm,
        ]
    }
}

/// Negative cosine between the push direction and the palm normal.
pub fn e_dir(u_dir: Vector3<f64>, v_palm: Vector3<f64>) -> Result<f64> {
    let nu = u_dir.norm();
    let nv = v_palm.norm();
    if nu < 1e-12 || nv < 1e-12 {
        return Err(Error::InvalidArgument("e_dir requires nonzero vectors".into()));
    }
    Ok((-u_dir.dot(&v_palm) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Penalizes an upward-facing palm: max(0, z-component of the palm normal).
pub fn e_arm(v_palm: Vector3<f64>) -> f64 {
    v_palm.z.max(0.0)
}

/// Sum of |signed distance| over the selected world-frame contact points.
pub fn e_dis(contacts: &[Vector3<f64>], obj: &DistanceQuery) -> Result<f64> {
    if contacts.is_empty() {
        return Err(Error::InvalidArgument("e_dis requires >= 1 contact".into()));
    }
    Ok(contacts
        .iter()
        .map(|p| obj.signed_distance(*p).0.abs())
        .sum())
}

/// Hinge penalty on joint-limit violations, L1-aggregated.
pub fn e_joint(theta: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    if theta.len() != lower.len() || theta.len() != upper.len() {
        return Err(Error::DimensionMismatch {
            expected: lower.len(),
            got: theta.len(),
        });
    }
    Ok(theta
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&t, (&lo, &hi))| (t - hi).max(0.0) + (lo - t).max(0.0))
        .sum())
}

/// Penetration penalties: hand points into the object, below the table, and
/// between non-adjacent self-collision spheres.
pub fn e_pen(
    hand_points: &PointCloud,
    obj: &DistanceQuery,
    table_z: f64,
    spheres: &[(Vector3<f64>, f64)],
    adjacent: impl Fn(usize, usize) -> bool,
) -> Result<(f64, f64, f64)> {
    if hand_points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut pen_obj = 0.0;
    let mut pen_table = 0.0;
    for p in &hand_points.points {
        let (d, _) = obj.signed_distance(*p);
        pen_obj += (-d).max(0.0);
        pen_table += (table_z - p.z).max(0.0);
    }
    let mut pen_self = 0.0;
    for i in 0..spheres.len() {
        for j in i + 1..spheres.len() {
            if adjacent(i, j) {
                continue;
            }
            let (ci, ri) = spheres[i];
            let (cj, rj) = spheres[j];
            pen_self += (ri + rj - (ci - cj).norm()).max(0.0);
        }
    }
    Ok((pen_obj, pen_table, pen_self))
}

/// Force-closure surrogate ||G c||: the residual net wrench of inward unit
/// contact normals, with torque arms taken about the contact centroid.
pub fn e_fc(points: &[Vector3<f64>], inward_normals: &[Vector3<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("e_fc requires >= 2 contacts".into()));
    }
    if points.len() != inward_normals.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: inward_normals.len(),
        });
    }
    let centroid: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for (x, c) in points.iter().zip(inward_normals) {
        force += c;
        torque += (x - centroid).cross(c);
    }
    Ok((force.norm_squared() + torque.norm_squared()).sqrt())
}

/// Immutable per-(object, direction) context shared by all energy
/// evaluations of one optimization run.
pub struct SceneContext<'a> {
    pub kin: &'a HandKinematics,
    pub candidates: &'a ContactCandidateSet,
    pub object: &'a DistanceQuery,
    pub table_z: f64,
    pub u_dir: Vector3<f64>,
    /// Hand surface sample points per link, in link frames.
    surface_local: Vec<PointCloud>,
}

impl<'a> SceneContext<'a> {
    pub fn new(
        kin: &'a HandKinematics,
        candidates: &'a ContactCandidateSet,
        object: &'a DistanceQuery,
        table_z: f64,
        u_dir: Vector3<f64>,
        surface_points_per_link: usize,
    ) -> Result<Self> {
        Ok(Self {
            kin,
            candidates,
            object,
            table_z,
            u_dir,
            surface_local: kin.local_surface_samples(surface_points_per_link)?,
        })
    }
}

/// Full energy of a pose under a contact selection.
pub fn total_energy(
    pose: &HandPose,
    selection: &ContactSelection,
    scene: &SceneContext,
    weights: &EnergyWeights,
) -> Result<EnergyBreakdown> {
    let link_tf = scene.kin.forward_kinematics(pose)?;

    // Selected contacts in world frame, with inward object normals at their
    // nearest surface points.
    let mut points = Vec::with_capacity(selection.indices.len());
    let mut inward = Vec::with_capacity(selection.indices.len());
    for &i in &selection.indices {
        let (p, _) = scene.candidates.world(i, &link_tf);
        let (_, grad) = scene.object.signed_distance(p);
        points.push(p);
        inward.push(-grad);
    }

    let e_fc_v = e_fc(&points, &inward)?;
    let e_dis_v = e_dis(&points, scene.object)?;
    let (lower, upper) = scene.kin.joint_limits();
    let e_joint_v = e_joint(&pose.theta, &lower, &upper)?;

    let mut hand_points = Vec::with_capacity(scene.surface_local.len() * 8);
    for (i, cloud) in scene.surface_local.iter().enumerate() {
        hand_points.extend(cloud.points.iter().map(|p| link_tf[i].apply(*p)));
    }
    let spheres = scene.kin.world_spheres(&link_tf);
    let (e_pen_obj_v, e_pen_table_v, e_pen_self_v) = e_pen(
        &PointCloud::new(hand_points),
        scene.object,
        scene.table_z,
        &spheres,
        |i, j| scene.kin.adjacent(i, j),
    )?;

    let v_palm = scene.kin.palm_normal(pose);
    let e_dir_v = e_dir(scene.u_dir, v_palm)?;
    let e_arm_v = e_arm(v_palm);

    let mut breakdown = EnergyBreakdown {
        e_fc: e_fc_v,
        e_dis: e_dis_v,
        e_joint: e_joint_v,
        e_pen_obj: e_pen_obj_v,
        e_pen_table: e_pen_table_v,
        e_pen_self: e_pen_self_v,
        e_dir: e_dir_v,
        e_arm: e_arm_v,
        total: 0.0,
    };
    breakdown.total = breakdown.weighted_sum(weights);
    if !breakdown.total.is_finite() {
        return Err(Error::NonFinite("energy total".into()));
    }
    Ok(breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotation_from_axis_angle, shapes, Transform3};
    use crate::hand::{builtin_hand, generate_contact_candidates};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_weights_match_table() {
        let w = EnergyWeights::default();
        assert_eq!(w.w_fc, 0.5);
        assert_eq!(w.w_dis, 500.0);
        assert_eq!(w.w_pen, 300.0);
        assert_eq!(w.w_spen, 100.0);
        assert_eq!(w.w_tpen, 100.0);
        assert_eq!(w.w_joints, 1.0);
        assert_eq!(w.w_dir, 200.0);
        assert_eq!(w.w_arm, 100.0);
        assert_eq!(w.w_ff, 3.0);
        assert_eq!(w.w_fp, 0.0);
    }

    #[test]
    fn e_dir_closed_form_cases() {
        let x = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(e_dir(x, x).unwrap(), -1.0);
        assert_eq!(e_dir(x, -x).unwrap(), 1.0);
        assert_eq!(e_dir(x, Vector3::new(0.0, 1.0, 0.0)).unwrap(), 0.0);
        assert!(e_dir(x, Vector3::zeros()).is_err());
    }

    #[test]
    fn e_dir_symmetry_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let u = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let v = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            if u.norm() < 1e-6 || v.norm() < 1e-6 {
                continue;
            }
            let a = e_dir(u, v).unwrap();
            assert!((a - e_dir(v, u).unwrap()).abs() < 1e-12);
            assert!((e_dir(u, -v).unwrap() + a).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn e_arm_cases() {
        assert_eq!(e_arm(Vector3::new(0.0, 0.0, -1.0)), 0.0);
        assert_eq!(e_arm(Vector3::new(0.0, 0.0, 0.7)), 0.7);
        assert_eq!(e_arm(Vector3::new(1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn e_dis_analytic_box() {
        let q = DistanceQuery::build(shapes::box_mesh(Vector3::new(1.0, 1.0, 1.0)));
        // On-surface contact.
        let v = e_dis(&[Vector3::new(0.5, 0.0, 0.0)], &q).unwrap();
        assert!(v < 1e-4);
        // 0.1 m off a face.
        let v = e_dis(&[Vector3::new(0.6, 0.0, 0.0)], &q).unwrap();
        assert!((v - 0.1).abs() < 1e-3);
        // Doubling the offset doubles the distance.
        let v2 = e_dis(&[Vector3::new(0.7, 0.0, 0.0)], &q).unwrap();
        assert!((v2 - 2.0 * v).abs() < 1e-9);
    }

    #[test]
    fn e_joint_hinge_cases() {
        let lower = vec![-1.0; 4];
        let upper = vec![1.0; 4];
        assert_eq!(e_joint(&[0.0, 0.5, -0.5, 0.9], &lower, &upper).unwrap(), 0.0);
        let v = e_joint(&[0.0, 0.0, 0.0, 1.1], &lower, &upper).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
        let v = e_joint(&[-1.2, 1.3, 0.0, 0.0], &lower, &upper).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn e_pen_cases() {
        let q = DistanceQuery::build(shapes::box_mesh(Vector3::new(1.0, 1.0, 1.0)));
        let table_z = -2.0;
        let far = PointCloud::new(vec![Vector3::new(5.0, 0.0, 0.0)]);
        let (a, b, c) = e_pen(&far, &q, table_z, &[], |_, _| false).unwrap();
        assert_eq!((a, b, c), (0.0, 0.0, 0.0));

        // 0.02 m inside a face.
        let p = PointCloud::new(vec![Vector3::new(0.48, 0.0, 0.0)]);
        let (a, _, _) = e_pen(&p, &q, table_z, &[], |_, _| false).unwrap();
        assert!((a - 0.02).abs() < 1e-3);

        // 0.01 m below the table.
        let p = PointCloud::new(vec![Vector3::new(5.0, 0.0, -2.01)]);
        let (_, b, _) = e_pen(&p, &q, table_z, &[], |_, _| false).unwrap();
        assert!((b - 0.01).abs() < 1e-12);

        // Overlapping non-adjacent spheres.
        let spheres = vec![
            (Vector3::zeros(), 0.05),
            (Vector3::new(0.08, 0.0, 0.0), 0.05),
        ];
        let (_, _, c) = e_pen(&far, &q, table_z, &spheres, |_, _| false).unwrap();
        assert!((c - 0.02).abs() < 1e-12);
        let (_, _, c) = e_pen(&far, &q, table_z, &spheres, |_, _| true).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn e_fc_antipodal_zero() {
        // Two antipodal contacts on a unit sphere, inward normals.
        let p = vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0)];
        let n = vec![Vector3::new(-1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)];
        assert!(e_fc(&p, &n).unwrap() < 1e-9);
    }

    #[test]
    fn e_fc_aligned_normals() {
        let p = vec![Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, -1.0, 0.0)];
        let n = vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)];
        // Force residual 2, torque cancels by symmetry about the centroid.
        let v = e_fc(&p, &n).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn e_fc_matches_dense_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let points: Vec<Vector3<f64>> = (0..4)
                .map(|_| Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let normals: Vec<Vector3<f64>> = (0..4)
                .map(|_| {
                    Vector3::new(
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                    )
                    .normalize()
                })
                .collect();
            // Oracle: explicit 6 x 3n grasp matrix times stacked normals.
            let centroid: Vector3<f64> = points.iter().sum::<Vector3<f64>>() / 4.0;
            let mut g = nalgebra::DMatrix::<f64>::zeros(6, 12);
            for (i, x) in points.iter().enumerate() {
                g.view_mut((0, 3 * i), (3, 3))
                    .copy_from(&nalgebra::Matrix3::identity());
                g.view_mut((3, 3 * i), (3, 3))
                    .copy_from(&crate::geometry::skew(x - centroid));
            }
            let mut c = nalgebra::DVector::<f64>::zeros(12);
            for (i, n) in normals.iter().enumerate() {
                c.rows_mut(3 * i, 3).copy_from(n);
            }
            let expect = (g * c).norm();
            let got = e_fc(&points, &normals).unwrap();
            assert!((got - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn e_fc_rigid_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let points: Vec<Vector3<f64>> = (0..5)
                .map(|_| Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
                .collect();
            let normals: Vec<Vector3<f64>> = (0..5)
                .map(|_| {
                    Vector3::new(
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                        rng.random::<f64>() - 0.5,
                    )
                    .normalize()
                })
                .collect();
            let base = e_fc(&points, &normals).unwrap();

            let r = rotation_from_axis_angle(
                Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    .normalize(),
                rng.random::<f64>() * 6.0,
            );
            let t = Vector3::new(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0);
            let rp: Vec<Vector3<f64>> = points.iter().map(|p| r * p + t).collect();
            let rn: Vec<Vector3<f64>> = normals.iter().map(|n| r * n).collect();
            let moved = e_fc(&rp, &rn).unwrap();
            assert!((base - moved).abs() < 1e-9);
        }
    }

    #[test]
    fn e_fc_too_few_contacts() {
        assert!(e_fc(&[Vector3::zeros()], &[Vector3::zeros()]).is_err());
    }

    fn test_scene<'a>(
        kin: &'a crate::hand::HandKinematics,
        candidates: &'a ContactCandidateSet,
        sdf: &'a DistanceQuery,
    ) -> SceneContext<'a> {
        SceneContext::new(kin, candidates, sdf, 0.0, Vector3::new(1.0, 0.0, 0.0), 4).unwrap()
    }

    fn sample_pose(rng: &mut impl Rng) -> HandPose {
        let axis = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            .normalize();
        let wrist = Transform3::new(
            rotation_from_axis_angle(axis, rng.random::<f64>() * 6.0),
            Vector3::new(
                rng.random::<f64>() * 0.4 - 0.2,
                rng.random::<f64>() * 0.4 - 0.2,
                rng.random::<f64>() * 0.2 + 0.05,
            ),
        );
        HandPose::new((0..16).map(|_| rng.random::<f64>() * 0.8 - 0.2).collect(), wrist)
    }

    #[test]
    fn breakdown_sum_identity_on_random_scenes() {
        let kin = builtin_hand("allegro").unwrap();
        let candidates = generate_contact_candidates(&kin, 3).unwrap();
        let sdf = DistanceQuery::build(shapes::box_mesh(Vector3::new(0.08, 0.08, 0.08)));
        let scene = test_scene(&kin, &candidates, &sdf);
        let weights = EnergyWeights::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let pose = sample_pose(&mut rng);
            let sel = ContactSelection::sample(8, candidates.len(), &mut rng).unwrap();
            let b = total_energy(&pose, &sel, &scene, &weights).unwrap();
            assert!((b.total - b.weighted_sum(&weights)).abs() < 1e-9);
            assert!(b.e_dis >= 0.0 && b.e_joint >= 0.0);
            assert!(b.e_pen_obj >= 0.0 && b.e_pen_table >= 0.0 && b.e_pen_self >= 0.0);
            assert!((-1.0..=1.0).contains(&b.e_dir));
        }
    }

    #[test]
    fn zero_weights_zero_total() {
        let kin = builtin_hand("allegro").unwrap();
        let candidates = generate_contact_candidates(&kin, 3).unwrap();
        let sdf = DistanceQuery::build(shapes::box_mesh(Vector3::new(0.08, 0.08, 0.08)));
        let scene = test_scene(&kin, &candidates, &sdf);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let pose = sample_pose(&mut rng);
        let sel = ContactSelection::sample(8, candidates.len(), &mut rng).unwrap();
        let b = total_energy(&pose, &sel, &scene, &EnergyWeights::zeros()).unwrap();
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn penalties_zero_for_clean_pose() {
        // Hand far above the object and table, palm facing down, joints mid-range.
        let kin = builtin_hand("allegro").unwrap();
        let candidates = generate_contact_candidates(&kin, 3).unwrap();
        let sdf = DistanceQuery::build(shapes::box_mesh(Vector3::new(0.08, 0.08, 0.08)));
        let scene = SceneContext::new(&kin, &candidates, &sdf, -10.0, Vector3::new(1.0, 0.0, 0.0), 4).unwrap();
        // Palm normal local +z; rotate 180 about x so it faces -z.
        let wrist = Transform3::new(
            rotation_from_axis_angle(Vector3::new(1.0, 0.0, 0.0), std::f64::consts::PI),
            Vector3::new(0.0, 0.0, 5.0),
        );
        let pose = HandPose::new(vec![0.3; 16], wrist);
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let sel = ContactSelection::sample(8, candidates.len(), &mut rng).unwrap();
        let b = total_energy(&pose, &sel, &scene, &EnergyWeights::default()).unwrap();
        assert_eq!(b.e_joint, 0.0);
        assert_eq!(b.e_pen_obj, 0.0);
        assert_eq!(b.e_pen_table, 0.0);
        assert_eq!(b.e_pen_self, 0.0);
        assert_eq!(b.e_arm, 0.0);
    }

    #[test]
    fn fd_gradient_step_consistency() {
        // Central differences at h = 1e-4 agree with h = 1e-6 on wrist
        // translation away from SDF kinks.
        let kin = builtin_hand("allegro").unwrap();
        let candidates = generate_contact_candidates(&kin, 3).unwrap();
        let sdf = DistanceQuery::build(shapes::box_mesh(Vector3::new(0.1, 0.1, 0.1)));
        let scene = SceneContext::new(&kin, &candidates, &sdf, 0.0, Vector3::new(1.0, 0.0, 0.0), 4).unwrap();
        let weights = EnergyWeights::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let sel = ContactSelection::sample(8, candidates.len(), &mut rng).unwrap();
        let wrist = Transform3::new(
            rotation_from_axis_angle(Vector3::new(0.0, 1.0, 0.0), 0.4),
            Vector3::new(-0.18, 0.0, 0.09),
        );
        let pose = HandPose::new(vec![0.2; 16], wrist);

        let eval = |offset: Vector3<f64>| {
            let mut p = pose.clone();
            p.wrist.translation += offset;
            total_energy(&p, &sel, &scene, &weights).unwrap().total
        };
        for axis in 0..3 {
            let mut e = Vector3::zeros();
            e[axis] = 1.0;
            let g_coarse = (eval(e * 1e-4) - eval(-e * 1e-4)) / 2e-4;
            let g_fine = (eval(e * 1e-6) - eval(-e * 1e-6)) / 2e-6;
            let denom = g_fine.abs().max(1.0);
            assert!(
                ((g_coarse - g_fine) / denom).abs() < 1e-3,
                "axis {axis}: coarse {g_coarse} fine {g_fine}"
            );
        }
    }
}
