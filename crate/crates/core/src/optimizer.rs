//! Sampling-based energy minimization: RMSProp proposals on the 25-d pose
//! encoding, accepted or rejected by simulated annealing, with stochastic
//! contact resampling per iteration.

use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{total_energy, EnergyBreakdown, EnergyWeights, SceneContext};
use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axis_angle, Transform3};
use crate::hand::{
    decode_pose, encode_pose, ContactSelection, HandPose, POSE_DIM,
};
use crate::object::ObjectModel;

const RMSPROP_EPS: f64 = 1e-8;
/// Central-difference steps: translation/rotation block, then joints.
const FD_STEP_POSE: f64 = 1e-4;
const FD_STEP_JOINT: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct OptimizerConfig {
    pub switch_possibility: f64,
    /// RMSProp second-moment decay.
    pub mu: f64,
    pub step_size: f64,
    /// Iterations between step-size halvings.
    pub stepsize_period: usize,
    pub starting_temp: f64,
    /// Iterations between temperature decays.
    pub annealing_period: usize,
    pub temp_decay: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// Contacts selected per pose.
    pub contacts_k: usize,
    /// Hand surface samples per link for penetration terms.
    pub surface_points_per_link: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            switch_possibility: 0.5,
            mu: 0.98,
            step_size: 0.005,
            stepsize_period: 50,
            starting_temp: 18.0,
            annealing_period: 30,
            temp_decay: 0.95,
            iterations: 2000,
            restarts: 16,
            contacts_k: 8,
            surface_points_per_link: 8,
        }
    }
}

impl OptimizerConfig {
    pub fn load_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("optimizer config: {e}")))
    }

    /// Step size after `iteration` halvings periods.
    pub fn step_size_at(&self, iteration: usize) -> f64 {
        self.step_size / 2f64.powi((iteration / self.stepsize_period) as i32)
    }

    /// Temperature after the decay events up to `iteration`.
    pub fn temperature_at(&self, iteration: usize) -> f64 {
        self.starting_temp * self.temp_decay.powi((iteration / self.annealing_period) as i32)
    }
}

/// Mutable state of one annealing chain.
pub struct AnnealState {
    pub pose: HandPose,
    pub selection: ContactSelection,
    pub energy: EnergyBreakdown,
    pub temperature: f64,
    /// RMSProp second-moment accumulator over the 25-d encoding.
    pub accumulator: [f64; POSE_DIM],
    /// RMSProp decay.
    pub mu: f64,
    pub iteration: usize,
    pub rng: ChaCha8Rng,
}

/// Wrist placed on the side opposite the push direction, palm roughly facing
/// it; joints uniform inside limits; contacts uniform without replacement.
pub fn init_pose(
    obj: &ObjectModel,
    u_dir: Vector3<f64>,
    kin: &crate::hand::HandKinematics,
    candidate_count: usize,
    contacts_k: usize,
    seed: u64,
) -> Result<(HandPose, ContactSelection)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_pose_rng(obj, u_dir, kin, candidate_count, contacts_k, &mut rng)
}

pub fn init_pose_rng(
    obj: &ObjectModel,
    u_dir: Vector3<f64>,
    kin: &crate::hand::HandKinematics,
    candidate_count: usize,
    contacts_k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(HandPose, ContactSelection)> {
    let u = u_dir.normalize();
    let standoff = obj.bounding_radius() + 0.05;
    let center = obj.mesh.centroid();

    // Palm normal target: u_dir jittered by up to 30 degrees.
    let jitter_axis = random_unit(rng);
    let jitter_angle = (rng.random::<f64>() - 0.5) * std::f64::consts::FRAC_PI_3;
    let target = rotation_from_axis_angle(jitter_axis, jitter_angle) * u;

    // Rotation taking the local palm normal to `target`, with a random roll.
    let local = kin.palm_normal_local;
    let align = rotation_between(local, target);
    let roll = rotation_from_axis_angle(target, rng.random::<f64>() * std::f64::consts::TAU);
    let rotation = roll * align;

    let mut position = center - u * standoff;
    position.z = position.z.max(0.05);

    let (lower, upper) = kin.joint_limits();
    let theta: Vec<f64> = lower
        .iter()
        .zip(&upper)
        .map(|(&lo, &hi)| lo + rng.random::<f64>() * (hi - lo))
        .collect();

    let pose = HandPose::new(theta, Transform3::new(rotation, position));
    let selection = ContactSelection::sample(contacts_k, candidate_count, rng)?;
    Ok((pose, selection))
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 1e-6 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Shortest-arc rotation taking unit vector `a` to unit vector `b`.
fn rotation_between(a: Vector3<f64>, b: Vector3<f64>) -> nalgebra::Matrix3<f64> {
    let cross = a.cross(&b);
    let dot = a.dot(&b).clamp(-1.0, 1.0);
    if cross.norm() < 1e-12 {
        if dot > 0.0 {
            return nalgebra::Matrix3::identity();
        }
        // Antiparallel: rotate pi about any perpendicular axis.
        let perp = if a.x.abs() < 0.9 {
            a.cross(&Vector3::new(1.0, 0.0, 0.0)).normalize()
        } else {
            a.cross(&Vector3::new(0.0, 1.0, 0.0)).normalize()
        };
        return rotation_from_axis_angle(perp, std::f64::consts::PI);
    }
    rotation_from_axis_angle(cross.normalize(), dot.acos())
}

/// Central-difference gradient of the weighted total energy with respect to
/// the 25-d pose encoding.
pub fn fd_gradient(
    pose: &HandPose,
    selection: &ContactSelection,
    scene: &SceneContext,
    weights: &EnergyWeights,
) -> Result<[f64; POSE_DIM]> {
    let base = encode_pose(pose)?;
    let mut grad = [0.0; POSE_DIM];
    for k in 0..POSE_DIM {
        let h = if k < 9 { FD_STEP_POSE } else { FD_STEP_JOINT };
        let mut plus = base;
        plus[k] += h;
        let mut minus = base;
        minus[k] -= h;
        let ep = total_energy(&decode_pose(&plus)?, selection, scene, weights)?.total;
        let em = total_energy(&decode_pose(&minus)?, selection, scene, weights)?.total;
        grad[k] = (ep - em) / (2.0 * h);
    }
    Ok(grad)
}

/// RMSProp update: refresh the accumulator and return the proposed pose.
/// A non-finite gradient leaves the state untouched and returns the current
/// pose.
pub fn rmsprop_step(state: &mut AnnealState, grad: &[f64; POSE_DIM], eta: f64) -> Result<HandPose> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Ok(state.pose.clone());
    }
    let mut v = encode_pose(&state.pose)?;
    for k in 0..POSE_DIM {
        state.accumulator[k] = state.mu * state.accumulator[k] + (1.0 - state.mu) * grad[k] * grad[k];
        v[k] -= eta * grad[k] / (state.accumulator[k] + RMSPROP_EPS).sqrt();
    }
    decode_pose(&v)
}

/// Metropolis acceptance: always accept downhill, uphill with
/// probability exp(-dE / T).
pub fn anneal_accept(
    current_energy: f64,
    proposal_energy: f64,
    temperature: f64,
    rng: &mut impl Rng,
) -> bool {
    if proposal_energy <= current_energy {
        return true;
    }
    let p = (-(proposal_energy - current_energy) / temperature).exp();
    rng.random::<f64>() < p
}

/// Independently replace each selected index with probability
/// `switch_possibility` by a uniform draw from the unused candidates.
pub fn resample_contacts(
    selection: &ContactSelection,
    candidate_count: usize,
    switch_possibility: f64,
    rng: &mut impl Rng,
) -> ContactSelection {
    let mut used: std::collections::HashSet<usize> = selection.indices.iter().copied().collect();
    let mut indices = selection.indices.clone();
    for slot in indices.iter_mut() {
        if rng.random::<f64>() < switch_possibility {
            let unused: Vec<usize> = (0..candidate_count).filter(|i| !used.contains(i)).collect();
            if unused.is_empty() {
                continue;
            }
            let pick = unused[rng.random_range(0..unused.len())];
            used.remove(slot);
            used.insert(pick);
            *slot = pick;
        }
    }
    ContactSelection { indices }
}

/// Result of one annealing chain.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub chain: usize,
    pub best_pose: HandPose,
    pub best_energy: EnergyBreakdown,
    pub init_energy: EnergyBreakdown,
    pub best_selection: ContactSelection,
}

/// Run `restarts` independent annealing chains and return the best pose of
/// each, ordered by chain index. Deterministic for a fixed seed regardless
/// of worker count.
pub fn optimize(
    obj: &ObjectModel,
    u_dir: Vector3<f64>,
    kin: &crate::hand::HandKinematics,
    candidates: &crate::hand::ContactCandidateSet,
    config: &OptimizerConfig,
    weights: &EnergyWeights,
    seed: u64,
) -> Result<Vec<ChainResult>> {
    weights.validate()?;
    let mut results: Vec<Result<ChainResult>> = Vec::new();
    (0..config.restarts)
        .into_par_iter()
        .map(|chain| run_chain(obj, u_dir, kin, candidates, config, weights, seed, chain))
        .collect_into_vec(&mut results);
    results.into_iter().collect()
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    obj: &ObjectModel,
    u_dir: Vector3<f64>,
    kin: &crate::hand::HandKinematics,
    candidates: &crate::hand::ContactCandidateSet,
    config: &OptimizerConfig,
    weights: &EnergyWeights,
    seed: u64,
    chain: usize,
) -> Result<ChainResult> {
    let scene = SceneContext::new(
        kin,
        candidates,
        &obj.sdf,
        0.0,
        u_dir,
        config.surface_points_per_link,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 + 1);

    let (pose, selection) =
        init_pose_rng(obj, u_dir, kin, candidates.len(), config.contacts_k, &mut rng)?;
    let energy = total_energy(&pose, &selection, &scene, weights)?;
    let init_energy = energy;

    let mut state = AnnealState {
        pose,
        selection,
        energy,
        temperature: config.starting_temp,
        accumulator: [0.0; POSE_DIM],
        mu: config.mu,
        iteration: 0,
        rng,
    };
    let mut best_pose = state.pose.clone();
    let mut best_energy = state.energy;
    let mut best_selection = state.selection.clone();

    for iter in 0..config.iterations {
        state.iteration = iter;
        state.temperature = config.temperature_at(iter);

        // Contact resampling injects diversity; the selection switch is
        // adopted directly and the pose move is what Metropolis judges.
        let new_selection = resample_contacts(
            &state.selection,
            candidates.len(),
            config.switch_possibility,
            &mut state.rng,
        );
        if new_selection != state.selection {
            state.selection = new_selection;
            state.energy = total_energy(&state.pose, &state.selection, &scene, weights)?;
        }

        let grad = fd_gradient(&state.pose, &state.selection, &scene, weights)?;
        let eta = config.step_size_at(iter);
        let proposal = rmsprop_step(&mut state, &grad, eta)?;
        if !proposal.is_finite() {
            continue;
        }
        let proposal_energy = total_energy(&proposal, &state.selection, &scene, weights)?;
        if anneal_accept(
            state.energy.total,
            proposal_energy.total,
            state.temperature,
            &mut state.rng,
        ) {
            state.pose = proposal;
            state.energy = proposal_energy;
        }
        if state.energy.total < best_energy.total {
            best_pose = state.pose.clone();
            best_energy = state.energy;
            best_selection = state.selection.clone();
        }
    }

    Ok(ChainResult {
        chain,
        best_pose,
        best_energy,
        init_energy,
        best_selection,
    })
}
