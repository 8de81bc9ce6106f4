//! Quasi-static planar push rollout, the push success criterion, and
//! low-discrepancy pose augmentation for dataset building.
//!
//! The object is confined to (x, y, yaw) on the table. Each hand increment
//! resolves penetration by moving the object along a planar twist whose
//! direction follows the ellipsoidal limit-surface rule: (v_x, v_y, omega)
//! proportional to (f_x, f_y, tau / c^2), with (f_x, f_y, tau) the
//! depth-weighted contact wrench about the center of mass.

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{total_energy, EnergyWeights, SceneContext};
use crate::error::{Error, Result};
use crate::geometry::{halton, rotation_from_axis_angle, Transform3};
use crate::hand::{encode_pose, ContactSelection, HandKinematics, HandPose};
use crate::object::ObjectModel;

/// Default hand-travel distance per trial, meters.
pub const DEFAULT_PUSH_LENGTH: f64 = 0.20;
/// Default hand increment, meters.
pub const DEFAULT_STEP: f64 = 0.002;
/// Largest admissible increment, meters.
pub const MAX_STEP: f64 = 0.005;
/// Residual penetration tolerance after resolution, meters.
const RESOLVE_TOL: f64 = 1e-4;
/// Hand penetration beyond this at the start aborts the rollout, meters.
pub const INITIAL_PEN_TOL: f64 = 1e-3;
/// Hand surface samples per link used for contact detection.
const CONTACT_POINTS_PER_LINK: usize = 96;

/// Success thresholds.
pub const POSITION_TOLERANCE: f64 = 0.03;
pub const YAW_TOLERANCE_DEG: f64 = 45.0;

/// Augmentation bounds: rotation magnitude, translation per axis, joint
/// angle per joint.
pub const AUG_ROT_BOUND: f64 = 2.5 * std::f64::consts::PI / 180.0;
pub const AUG_TRANS_BOUND: f64 = 0.005;
pub const AUG_JOINT_BOUND: f64 = 0.05;
pub const AUG_COUNT: usize = 10;

/// One push: direction in the table plane and travel distance.
#[derive(Debug, Clone, Copy)]
pub struct PushTrial {
    /// Unit direction with zero z-component.
    pub u_dir: Vector3<f64>,
    pub push_length: f64,
    /// Target object center: initial center + push_length * u_dir.
    pub u_targ: Vector3<f64>,
}

impl PushTrial {
    pub fn new(u_dir: Vector3<f64>, object_center: Vector3<f64>, push_length: f64) -> Result<Self> {
        if u_dir.z.abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "push direction must lie in the table plane".into(),
            ));
        }
        let n = u_dir.norm();
        if n < 1e-9 {
            return Err(Error::InvalidArgument("push direction must be nonzero".into()));
        }
        if !(push_length > 0.0) {
            return Err(Error::InvalidArgument("push length must be positive".into()));
        }
        let u = u_dir / n;
        Ok(Self {
            u_dir: u,
            push_length,
            u_targ: object_center + push_length * u,
        })
    }
}

/// End state of a rollout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOutcome {
    /// Final object pose as planar state (x, y, yaw radians).
    pub final_state: [f64; 3],
    /// Distance from final object center to the target, meters.
    pub position_error: f64,
    /// Absolute yaw change, degrees.
    pub yaw_change: f64,
    pub toppled: bool,
    /// True when contact was lost for more than a quarter of the increments
    /// after first touch. Informational only.
    pub lost_contact: bool,
    pub success: bool,
    /// Largest object center displacement in a single increment, meters.
    pub max_object_step: f64,
}

impl SimOutcome {
    pub fn final_pose(&self) -> Transform3 {
        planar_transform(&self.final_state)
    }
}

fn planar_transform(state: &[f64; 3]) -> Transform3 {
    Transform3::new(
        rotation_from_axis_angle(Vector3::new(0.0, 0.0, 1.0), state[2]),
        Vector3::new(state[0], state[1], 0.0),
    )
}

/// The push success criterion: close enough, not spun, still standing.
pub fn evaluate_success(position_error: f64, yaw_change_deg: f64, toppled: bool) -> bool {
    position_error <= POSITION_TOLERANCE && yaw_change_deg <= YAW_TOLERANCE_DEG && !toppled
}

/// Deepest hand-surface penetration into the object at rest, meters
/// (zero when the hand is clear of it).
pub fn initial_penetration(
    kin: &HandKinematics,
    pose: &HandPose,
    obj: &ObjectModel,
) -> Result<f64> {
    let points = kin.hand_surface_points(pose, CONTACT_POINTS_PER_LINK)?.points;
    Ok(deepest_penetration(&points, obj, Vector3::zeros()))
}

fn deepest_penetration(points: &[Vector3<f64>], obj: &ObjectModel, offset: Vector3<f64>) -> f64 {
    let state = [0.0f64; 3];
    find_contacts(points, obj, &state, offset)
        .iter()
        .map(|c| c.depth)
        .fold(0.0, f64::max)
}

/// Turn an optimized pose into a pre-contact pose: translate the hand
/// backward along the push direction until its deepest surface penetration
/// is at most `clearance`. A pose already within tolerance is returned
/// unchanged.
///
/// The annealer tolerates residual overlap that the rollout's initial gate
/// does not, so every candidate should pass through here before validation.
pub fn retreat_to_contact(
    kin: &HandKinematics,
    pose: &HandPose,
    obj: &ObjectModel,
    u_dir: Vector3<f64>,
    clearance: f64,
) -> Result<HandPose> {
    if !(clearance >= 0.0) {
        return Err(Error::InvalidArgument("clearance must be nonnegative".into()));
    }
    let n = u_dir.norm();
    if n < 1e-9 {
        return Err(Error::InvalidArgument("push direction must be nonzero".into()));
    }
    let u = u_dir / n;
    let points = kin.hand_surface_points(pose, CONTACT_POINTS_PER_LINK)?.points;
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let depth_at = |s: f64| deepest_penetration(&points, obj, -s * u);
    if depth_at(0.0) <= clearance {
        return Ok(pose.clone());
    }

    // The hand span plus the object diameter is guaranteed clear; bisect the
    // crossing down from there.
    let span = points
        .iter()
        .map(|p| p.dot(&u))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    let mut hi = (span.1 - span.0) + 2.0 * obj.bounding_radius() + clearance + 1e-3;
    let mut lo = 0.0f64;
    debug_assert!(depth_at(hi) <= clearance);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if depth_at(mid) <= clearance {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(HandPose::new(
        pose.theta.clone(),
        Transform3::new(pose.wrist.rotation, pose.wrist.translation - hi * u),
    ))
}

/// Roll the hand along the push direction and drag the object with it.
///
/// The hand is rigid: joints are frozen at the pre-contact pose for the
/// whole travel.
pub fn simulate_push(
    kin: &HandKinematics,
    pose: &HandPose,
    obj: &ObjectModel,
    trial: &PushTrial,
    step: f64,
) -> Result<SimOutcome> {
    if !(step > 0.0 && step <= MAX_STEP) {
        return Err(Error::BadStep(step));
    }
    let hand_points = kin.hand_surface_points(pose, CONTACT_POINTS_PER_LINK)?.points;
    if hand_points.is_empty() {
        return Err(Error::EmptyCloud);
    }

    // Object state in the table plane; the mesh/SDF stay in the canonical
    // frame and queries map world points into it.
    let mut state = [0.0f64; 3];
    let com = obj.dynamics.com;
    let c2 = obj.dynamics.pressure_radius.max(1e-6).powi(2);

    // Initial penetration gate.
    {
        let contacts = find_contacts(&hand_points, obj, &state, Vector3::zeros());
        let deepest = contacts.iter().map(|c| c.depth).fold(0.0, f64::max);
        if deepest > INITIAL_PEN_TOL {
            return Err(Error::InitialPenetration { depth: deepest });
        }
    }

    let increments = (trial.push_length / step).round().max(1.0) as usize;
    let mut toppled = false;
    let mut first_contact: Option<usize> = None;
    let mut empty_after_contact = 0usize;
    let mut max_object_step = 0.0f64;

    'rollout: for i in 1..=increments {
        let hand_offset = trial.u_dir * (step * i as f64);
        let start_center = Vector2::new(state[0], state[1]);

        // Resolve penetration with repeated small twists.
        for _ in 0..100 {
            let contacts = find_contacts(&hand_points, obj, &state, hand_offset);
            let deepest = contacts.iter().map(|c| c.depth).fold(0.0, f64::max);
            if contacts.is_empty() || deepest <= RESOLVE_TOL {
                if contacts.is_empty() {
                    if first_contact.is_some() {
                        empty_after_contact += 1;
                    }
                } else {
                    first_contact.get_or_insert(i);
                }
                break;
            }
            first_contact.get_or_insert(i);

            // Depth-weighted wrench about the (current) world-frame COM.
            let world = planar_transform(&state);
            let com_w = world.apply(com);
            let mut f = Vector2::zeros();
            let mut tau = 0.0;
            let mut h_c = 0.0;
            let mut w_sum = 0.0;
            for contact in &contacts {
                let push = Vector2::new(contact.push_dir.x, contact.push_dir.y) * contact.depth;
                let r = Vector2::new(contact.point.x - com_w.x, contact.point.y - com_w.y);
                f += push;
                tau += r.x * push.y - r.y * push.x;
                h_c += contact.depth * contact.point.z;
                w_sum += contact.depth;
            }
            h_c /= w_sum;

            // Tipping: friction lever at the contact height beats the
            // support margin toward the leading edge.
            let f_norm = f.norm();
            if f_norm > 1e-12 {
                let lead = f / f_norm;
                let d_edge = obj
                    .dynamics
                    .support_polygon
                    .iter()
                    .map(|v| {
                        let w = world.apply(Vector3::new(v.x, v.y, 0.0));
                        (Vector2::new(w.x, w.y) - Vector2::new(com_w.x, com_w.y)).dot(&lead)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                if obj.dynamics.mu_s * h_c > d_edge {
                    toppled = true;
                    break 'rollout;
                }
            }

            // Limit-surface twist direction, scaled so the surface moves by
            // about one deepest-penetration length.
            let twist = Vector3::new(f.x, f.y, tau / c2);
            let lever = obj.bounding_radius();
            let speed = (twist.x * twist.x + twist.y * twist.y).sqrt() + lever * twist.z.abs();
            if speed < 1e-12 {
                break;
            }
            let s = deepest / speed;
            state[0] += s * twist.x;
            state[1] += s * twist.y;
            state[2] += s * twist.z;
        }

        // Quasi-static cap: the object never outruns the hand.
        let moved = Vector2::new(state[0], state[1]) - start_center;
        let dist = moved.norm();
        if dist > 1.5 * step {
            let clamped = moved * (1.5 * step / dist);
            state[0] = start_center.x + clamped.x;
            state[1] = start_center.y + clamped.y;
        }
        max_object_step = max_object_step.max(dist.min(1.5 * step));
    }

    let after = first_contact.map(|fc| increments - fc + 1).unwrap_or(0);
    let lost_contact = after > 0 && empty_after_contact * 4 > after;

    let center = Vector3::new(state[0], state[1], 0.0);
    let position_error = (center - Vector3::new(trial.u_targ.x, trial.u_targ.y, 0.0)).norm();
    let yaw_change = state[2].abs().to_degrees();
    Ok(SimOutcome {
        final_state: state,
        position_error,
        yaw_change,
        toppled,
        lost_contact,
        success: evaluate_success(position_error, yaw_change, toppled),
        max_object_step,
    })
}

struct Contact {
    point: Vector3<f64>,
    /// World direction the object must move to clear this point.
    push_dir: Vector3<f64>,
    depth: f64,
}

/// Hand points penetrating the object at the given planar state.
fn find_contacts(
    hand_points: &[Vector3<f64>],
    obj: &ObjectModel,
    state: &[f64; 3],
    hand_offset: Vector3<f64>,
) -> Vec<Contact> {
    let world = planar_transform(state);
    let inv = world.inverse();
    let mut out = Vec::new();
    for &p in hand_points {
        let pw = p + hand_offset;
        let local = inv.apply(pw);
        if !obj.sdf.contains(local) {
            continue;
        }
        let (d, grad_local) = obj.sdf.signed_distance(local);
        if d < 0.0 {
            // Outward SDF gradient at the hand point, rotated to world; the
            // object escapes by moving opposite it.
            let grad_world = world.rotation * grad_local;
            out.push(Contact {
                point: pw,
                push_dir: -grad_world,
                depth: -d,
            });
        }
    }
    out
}

/// Deterministic low-discrepancy perturbations of a pose: rotation magnitude
/// within 2.5 degrees, translation within 5 mm per axis, each joint within
/// 0.05 rad.
pub fn augment_pose(pose: &HandPose, count: usize, index_offset: usize) -> Result<Vec<HandPose>> {
    let dims = 6 + pose.theta.len();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let h = halton((index_offset + k + 1) as u64, dims)?;
        // Rotation axis from the first two coordinates, signed magnitude
        // from the third.
        let z = 2.0 * h[0] - 1.0;
        let phi = std::f64::consts::TAU * h[1];
        let r = (1.0 - z * z).max(0.0).sqrt();
        let axis = Vector3::new(r * phi.cos(), r * phi.sin(), z);
        let angle = (2.0 * h[2] - 1.0) * AUG_ROT_BOUND;
        let d_rot: Matrix3<f64> = rotation_from_axis_angle(axis, angle);

        let d_t = Vector3::new(
            (2.0 * h[3] - 1.0) * AUG_TRANS_BOUND,
            (2.0 * h[4] - 1.0) * AUG_TRANS_BOUND,
            (2.0 * h[5] - 1.0) * AUG_TRANS_BOUND,
        );
        let theta: Vec<f64> = pose
            .theta
            .iter()
            .enumerate()
            .map(|(j, &t)| t + (2.0 * h[6 + j] - 1.0) * AUG_JOINT_BOUND)
            .collect();
        out.push(HandPose::new(
            theta,
            Transform3::new(d_rot * pose.wrist.rotation, pose.wrist.translation + d_t),
        ));
    }
    Ok(out)
}

/// One dataset row: a pose, its energies, and its simulated outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub object_id: String,
    pub u_dir: [f64; 3],
    /// 25-d pose encoding.
    pub pose: Vec<f64>,
    /// Unweighted energy components in breakdown order.
    pub energy: [f64; 8],
    pub position_error: f64,
    pub yaw_change: f64,
    pub toppled: bool,
    pub lost_contact: bool,
    pub success: bool,
    /// Index of the originating pose in the input batch.
    pub source: usize,
    pub augmented: bool,
    /// Rollout error, if the trial could not run; success is false.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ValidationConfig {
    pub step: f64,
    pub augment_count: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            augment_count: AUG_COUNT,
        }
    }
}

/// Simulate every pose; augment the successful ones and simulate the
/// perturbed copies too. Per-pose failures become error records and the
/// batch continues. Deterministic in the input order.
pub fn validate_batch(
    kin: &HandKinematics,
    poses: &[(HandPose, ContactSelection)],
    obj: &ObjectModel,
    trial: &PushTrial,
    scene: &SceneContext,
    weights: &EnergyWeights,
    config: &ValidationConfig,
) -> Result<Vec<DatasetRecord>> {
    if poses.is_empty() {
        return Err(Error::InvalidArgument("empty pose batch".into()));
    }
    let mut per_pose: Vec<Result<Vec<DatasetRecord>>> = Vec::new();
    poses
        .par_iter()
        .enumerate()
        .map(|(i, (pose, selection))| {
            let mut records = Vec::new();
            let record = make_record(kin, pose, selection, obj, trial, scene, weights, config, i, false)?;
            let succeeded = record.success;
            records.push(record);
            if succeeded {
                let variants = augment_pose(pose, config.augment_count, i * config.augment_count)?;
                for v in &variants {
                    records.push(make_record(
                        kin, v, selection, obj, trial, scene, weights, config, i, true,
                    )?);
                }
            }
            Ok(records)
        })
        .collect_into_vec(&mut per_pose);
    let mut out = Vec::new();
    for group in per_pose {
        out.extend(group?);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    kin: &HandKinematics,
    pose: &HandPose,
    selection: &ContactSelection,
    obj: &ObjectModel,
    trial: &PushTrial,
    scene: &SceneContext,
    weights: &EnergyWeights,
    config: &ValidationConfig,
    source: usize,
    augmented: bool,
) -> Result<DatasetRecord> {
    let encoded = encode_pose(pose)?;
    let energy = total_energy(pose, selection, scene, weights)?;
    match simulate_push(kin, pose, obj, trial, config.step) {
        Ok(outcome) => Ok(DatasetRecord {
            object_id: obj.id.clone(),
            u_dir: [trial.u_dir.x, trial.u_dir.y, trial.u_dir.z],
            pose: encoded.to_vec(),
            energy: energy.components(),
            position_error: outcome.position_error,
            yaw_change: outcome.yaw_change,
            toppled: outcome.toppled,
            lost_contact: outcome.lost_contact,
            success: outcome.success,
            source,
            augmented,
            error: None,
        }),
        // A pose the rollout rejects (for instance, already buried in the
        // object) still produces a row so downstream counts line up.
        Err(Error::InitialPenetration { depth: d }) => Ok(DatasetRecord {
            object_id: obj.id.clone(),
            u_dir: [trial.u_dir.x, trial.u_dir.y, trial.u_dir.z],
            pose: encoded.to_vec(),
            energy: energy.components(),
            position_error: f64::NAN,
            yaw_change: f64::NAN,
            toppled: false,
            lost_contact: false,
            success: false,
            source,
            augmented,
            error: Some(format!("initial penetration {d:.4} m")),
        }),
        Err(e) => Err(e),
    }
}
