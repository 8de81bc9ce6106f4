//! Candidate ranking, a kinematic-feasibility proxy for the arm, RRT* path
//! planning with inflated obstacle discs, and multi-step push composition.
//!
//! Ranking combines three signals per candidate: simulated goal error,
//! a collision flag (hand-table contact or object topple), and palm/push
//! alignment. The score is minimized; an executed collision costs as much
//! as twenty centimeters of goal error under the default weights.

use std::fmt;

use nalgebra::{Rotation2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::e_dir;
use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axis_angle, Transform3};
use crate::hand::{HandKinematics, HandPose};
use crate::object::ObjectModel;
use crate::push_sim::{
    retreat_to_contact, simulate_push, PushTrial, SimOutcome, DEFAULT_PUSH_LENGTH, DEFAULT_STEP,
    INITIAL_PEN_TOL,
};

/// Inflation radius applied to every planning obstacle, meters.
pub const OBSTACLE_RADIUS: f64 = 0.20;
/// Hand surface samples per link for the feasibility and table checks.
const FEASIBILITY_POINTS_PER_LINK: usize = 64;
/// RRT* extension length, meters.
const RRT_STEER: f64 = 0.08;
/// Fraction of RRT* iterations that sample the goal directly.
const RRT_GOAL_BIAS: f64 = 0.05;

/// Weights of the ranking score `V = alpha*l_goal + beta*l_coll + gamma*l_dir`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RankWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            beta: 1.0,
            gamma: 0.5,
        }
    }
}

impl RankWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::InvalidArgument(
                "rank weights must all be positive".into(),
            ));
        }
        Ok(())
    }

    /// Lower is better; `l_dir` is negative when the palm faces the push.
    pub fn score(&self, l_goal: f64, l_coll: f64, l_dir: f64) -> f64 {
        self.alpha * l_goal + self.beta * l_coll + self.gamma * l_dir
    }
}

/// A scored candidate. `index` is the position in the input candidate list.
#[derive(Debug, Clone)]
pub struct RankedPose {
    pub index: usize,
    pub pose: HandPose,
    /// Simulated distance from the target, meters.
    pub l_goal: f64,
    /// 1.0 when the rollout toppled the object or the hand touches the table.
    pub l_coll: f64,
    /// Alignment term in [-1, 1]; -1 means palm normal along the push.
    pub l_dir: f64,
    pub score: f64,
    pub outcome: SimOutcome,
}

/// Reachability proxy for the (unmodeled) arm: a planar annulus around the
/// base plus a table-clearance check on the hand surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WorkspaceModel {
    pub base: [f64; 3],
    pub r_min: f64,
    pub r_max: f64,
    pub table_z: f64,
    /// Extra height margin required between the hand and the table.
    pub clearance: f64,
}

impl WorkspaceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(Error::InvalidArgument(
                "workspace requires 0 < r_min < r_max".into(),
            ));
        }
        Ok(())
    }

    /// A forgiving desk-scale default: base half a meter behind the origin.
    pub fn desk() -> Self {
        Self {
            base: [-0.5, 0.0, 0.0],
            r_min: 0.10,
            r_max: 0.95,
            table_z: 0.0,
            clearance: 0.0,
        }
    }

    /// The same workspace expressed in a frame where the object sits at the
    /// origin with zero yaw; `state` is the object's planar pose (x, y, yaw).
    pub fn in_object_frame(&self, state: &[f64; 3]) -> Self {
        let rot = Rotation2::new(-state[2]);
        let b = rot * Vector2::new(self.base[0] - state[0], self.base[1] - state[1]);
        Self {
            base: [b.x, b.y, self.base[2]],
            ..*self
        }
    }
}

/// Shortest distance from `p` to the segment `a`-`b`.
fn point_segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 < 1e-18 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Arm-reachability proxy: wrist start and end inside the annulus, the whole
/// straight wrist path no closer than `r_min` to the base, and the hand
/// surface clear of the table at both ends of the travel.
pub fn check_feasibility(
    kin: &HandKinematics,
    pose: &HandPose,
    trial: &PushTrial,
    ws: &WorkspaceModel,
) -> Result<bool> {
    ws.validate()?;
    let base = Vector2::new(ws.base[0], ws.base[1]);
    let start = Vector2::new(pose.wrist.translation.x, pose.wrist.translation.y);
    let end = start + Vector2::new(trial.u_dir.x, trial.u_dir.y) * trial.push_length;
    for p in [start, end] {
        let r = (p - base).norm();
        if r < ws.r_min || r > ws.r_max {
            return Ok(false);
        }
    }
    if point_segment_distance(base, start, end) < ws.r_min {
        return Ok(false);
    }

    let points = kin
        .hand_surface_points(pose, FEASIBILITY_POINTS_PER_LINK)?
        .points;
    let min_z = points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    // The push is planar, so the height profile is the same at both ends.
    Ok(min_z >= ws.table_z + ws.clearance)
}

/// Roll out the push and fold the outcome into a score. The collision flag
/// covers object topple and hand-below-table contact (the table sits at z=0
/// in the simulation frame).
pub fn score_pose(
    kin: &HandKinematics,
    pose: &HandPose,
    obj: &ObjectModel,
    trial: &PushTrial,
    step: f64,
    weights: &RankWeights,
) -> Result<RankedPose> {
    weights.validate()?;
    let outcome = simulate_push(kin, pose, obj, trial, step)?;
    let points = kin
        .hand_surface_points(pose, FEASIBILITY_POINTS_PER_LINK)?
        .points;
    let min_z = points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let l_goal = outcome.position_error;
    let l_coll = if outcome.toppled || min_z < 0.0 { 1.0 } else { 0.0 };
    let l_dir = e_dir(trial.u_dir, kin.palm_normal(pose))?;
    Ok(RankedPose {
        index: 0,
        pose: pose.clone(),
        l_goal,
        l_coll,
        l_dir,
        score: weights.score(l_goal, l_coll, l_dir),
        outcome,
    })
}

/// Score every feasible candidate and sort ascending by score, breaking ties
/// by lower goal error then input index. Each candidate is first backed off
/// along the push direction to a pre-contact pose (sampled and bank poses may
/// carry residual overlap); the returned `RankedPose` holds the backed-off
/// pose that was actually simulated. Candidates that fail the workspace proxy
/// or still penetrate the object are dropped; an empty survivor set is an
/// error. The best candidate is the first entry.
pub fn rank_and_select(
    kin: &HandKinematics,
    candidates: &[HandPose],
    obj: &ObjectModel,
    trial: &PushTrial,
    ws: &WorkspaceModel,
    weights: &RankWeights,
    step: f64,
) -> Result<Vec<RankedPose>> {
    if candidates.is_empty() {
        return Err(Error::NoFeasibleCandidate);
    }
    weights.validate()?;
    let scored: Vec<Result<Option<RankedPose>>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            let pose = retreat_to_contact(kin, pose, obj, trial.u_dir, 0.5 * INITIAL_PEN_TOL)?;
            if !check_feasibility(kin, &pose, trial, ws)? {
                return Ok(None);
            }
            match score_pose(kin, &pose, obj, trial, step, weights) {
                Ok(mut r) => {
                    r.index = i;
                    Ok(Some(r))
                }
                Err(Error::InitialPenetration { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut ranked = Vec::new();
    for r in scored {
        if let Some(r) = r? {
            ranked.push(r);
        }
    }
    if ranked.is_empty() {
        return Err(Error::NoFeasibleCandidate);
    }
    ranked.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.l_goal.total_cmp(&b.l_goal))
            .then(a.index.cmp(&b.index))
    });
    Ok(ranked)
}

/// A planar obstacle inflated to a disc.
#[derive(Debug, Clone, Copy)]
pub struct Disc {
    pub center: Vector2<f64>,
    pub radius: f64,
}

impl Disc {
    /// The fixed inflation used throughout planning.
    pub fn standard(center: Vector2<f64>) -> Self {
        Self {
            center,
            radius: OBSTACLE_RADIUS,
        }
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        (p - self.center).norm() < self.radius
    }
}

fn segment_clear(a: Vector2<f64>, b: Vector2<f64>, obstacles: &[Disc]) -> bool {
    obstacles
        .iter()
        .all(|d| point_segment_distance(d.center, a, b) >= d.radius)
}

/// A collision-free polyline from start to goal.
#[derive(Debug, Clone)]
pub struct PathPlan {
    pub waypoints: Vec<Vector2<f64>>,
    pub obstacles: Vec<Disc>,
    pub edge_costs: Vec<f64>,
    /// Total length of the returned (shortcut) polyline.
    pub cost: f64,
    /// Length of the underlying search-tree path before shortcutting;
    /// non-increasing in iteration count for a fixed seed.
    pub tree_cost: f64,
}

impl PathPlan {
    /// Every segment keeps at least each obstacle's radius of clearance.
    pub fn is_clear(&self) -> bool {
        self.waypoints
            .windows(2)
            .all(|w| segment_clear(w[0], w[1], &self.obstacles))
    }
}

struct TreeNode {
    p: Vector2<f64>,
    parent: usize,
    edge: f64,
}

fn tree_cost_of(nodes: &[TreeNode], mut i: usize) -> f64 {
    let mut c = 0.0;
    while i != 0 {
        c += nodes[i].edge;
        i = nodes[i].parent;
    }
    c
}

/// RRT* in the plane. Returns `Ok(None)` when no collision-free path was
/// found within the iteration budget; errors if the query itself is invalid
/// (start or goal out of bounds or inside an obstacle). Deterministic for a
/// fixed seed; the rewiring radius follows the (log n / n)^(1/2) rule.
pub fn rrt_star(
    start: Vector2<f64>,
    goal: Vector2<f64>,
    obstacles: &[Disc],
    bounds: (Vector2<f64>, Vector2<f64>),
    iterations: usize,
    seed: u64,
) -> Result<Option<PathPlan>> {
    let (lo, hi) = bounds;
    if !(lo.x < hi.x && lo.y < hi.y) {
        return Err(Error::InvalidArgument("degenerate planning bounds".into()));
    }
    for (name, p) in [("start", start), ("goal", goal)] {
        if p.x < lo.x || p.x > hi.x || p.y < lo.y || p.y > hi.y {
            return Err(Error::InvalidArgument(format!("{name} outside bounds")));
        }
        if obstacles.iter().any(|d| d.contains(p)) {
            return Err(Error::InvalidArgument(format!("{name} inside an obstacle")));
        }
    }

    let area = (hi.x - lo.x) * (hi.y - lo.y);
    let gamma = 2.0 * (area / std::f64::consts::PI).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![TreeNode {
        p: start,
        parent: 0,
        edge: 0.0,
    }];

    for _ in 0..iterations {
        let target = if rng.random::<f64>() < RRT_GOAL_BIAS {
            goal
        } else {
            Vector2::new(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
            )
        };
        let nearest = (0..nodes.len())
            .min_by(|&a, &b| {
                (nodes[a].p - target)
                    .norm_squared()
                    .total_cmp(&(nodes[b].p - target).norm_squared())
            })
            .unwrap();
        let from = nodes[nearest].p;
        let d = (target - from).norm();
        if d < 1e-12 {
            continue;
        }
        let new = if d <= RRT_STEER {
            target
        } else {
            from + (target - from) * (RRT_STEER / d)
        };
        if !segment_clear(from, new, obstacles) {
            continue;
        }

        // Choose the cheapest collision-free parent in the shrinking ball.
        let n = nodes.len() as f64;
        let radius = gamma * (n.max(2.0).ln() / n).sqrt();
        let mut parent = nearest;
        let mut best = tree_cost_of(&nodes, nearest) + (new - from).norm();
        let neighbors: Vec<usize> = (0..nodes.len())
            .filter(|&i| (nodes[i].p - new).norm() <= radius)
            .collect();
        for &i in &neighbors {
            let c = tree_cost_of(&nodes, i) + (nodes[i].p - new).norm();
            if c < best && segment_clear(nodes[i].p, new, obstacles) {
                best = c;
                parent = i;
            }
        }
        let idx = nodes.len();
        nodes.push(TreeNode {
            p: new,
            parent,
            edge: (new - nodes[parent].p).norm(),
        });

        // Rewire neighbors through the new node when that is cheaper.
        for &i in &neighbors {
            if i == parent || i == 0 {
                continue;
            }
            let through = best + (nodes[i].p - new).norm();
            if through < tree_cost_of(&nodes, i) && segment_clear(nodes[i].p, new, obstacles) {
                nodes[i].parent = idx;
                nodes[i].edge = (nodes[i].p - new).norm();
            }
        }
    }

    // Best node that can legally connect to the goal.
    let mut best_goal: Option<(usize, f64)> = None;
    for i in 0..nodes.len() {
        let d = (nodes[i].p - goal).norm();
        if d > RRT_STEER || !segment_clear(nodes[i].p, goal, obstacles) {
            continue;
        }
        let c = tree_cost_of(&nodes, i) + d;
        if best_goal.map_or(true, |(_, bc)| c < bc) {
            best_goal = Some((i, c));
        }
    }
    let Some((leaf, tree_cost)) = best_goal else {
        return Ok(None);
    };

    let mut raw = vec![goal];
    let mut i = leaf;
    loop {
        raw.push(nodes[i].p);
        if i == 0 {
            break;
        }
        i = nodes[i].parent;
    }
    raw.reverse();

    // Greedy shortcutting: jump to the furthest waypoint still in line of
    // sight. Deterministic and never worse than the raw path.
    let mut waypoints = vec![raw[0]];
    let mut at = 0;
    while at + 1 < raw.len() {
        let mut next = at + 1;
        for j in (at + 1..raw.len()).rev() {
            if segment_clear(raw[at], raw[j], obstacles) {
                next = j;
                break;
            }
        }
        waypoints.push(raw[next]);
        at = next;
    }

    let edge_costs: Vec<f64> = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let cost = edge_costs.iter().sum();
    Ok(Some(PathPlan {
        waypoints,
        obstacles: obstacles.to_vec(),
        edge_costs,
        cost,
        tree_cost,
    }))
}

/// Supplies hand-pose candidates for one push. Poses are expressed in the
/// object's current frame (object at the origin with zero yaw); `u_dir` is
/// the push direction in that same frame.
pub trait CandidateSource {
    fn candidates(&self, obj: &ObjectModel, u_dir: Vector3<f64>) -> Result<Vec<HandPose>>;
}

/// A fixed bank of poses authored for a canonical +x push; rotated about z
/// to serve any direction.
#[derive(Debug, Clone, Default)]
pub struct PoseBank {
    pub poses: Vec<HandPose>,
}

impl CandidateSource for PoseBank {
    fn candidates(&self, _obj: &ObjectModel, u_dir: Vector3<f64>) -> Result<Vec<HandPose>> {
        let yaw = u_dir.y.atan2(u_dir.x);
        let rot = rotation_from_axis_angle(Vector3::new(0.0, 0.0, 1.0), yaw);
        Ok(self
            .poses
            .iter()
            .map(|p| {
                HandPose::new(
                    p.theta.clone(),
                    Transform3::new(rot * p.wrist.rotation, rot * p.wrist.translation),
                )
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlannerConfig {
    pub rrt_iterations: usize,
    pub seed: u64,
    pub sim_step: f64,
    /// A sub-target counts as reached within this distance, meters.
    pub goal_tolerance: f64,
    pub bounds: (Vector2<f64>, Vector2<f64>),
    /// Corrective pushes allowed per sub-target before declaring the edge
    /// blocked.
    pub max_pushes_per_target: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            rrt_iterations: 4000,
            seed: 0,
            sim_step: DEFAULT_STEP,
            goal_tolerance: 0.03,
            bounds: (Vector2::new(-1.0, -1.0), Vector2::new(1.0, 1.0)),
            max_pushes_per_target: 4,
        }
    }
}

/// One executed push of a multi-step plan.
#[derive(Debug, Clone)]
pub struct PlanStep {
    /// Index of the path edge this push serves.
    pub edge: usize,
    /// Sub-target this push aims at, world frame.
    pub target: Vector2<f64>,
    /// Push direction in the world frame.
    pub u_dir: [f64; 3],
    pub push_length: f64,
    /// Winning candidate, in the object frame at push time.
    pub selected: RankedPose,
    /// Object planar pose (x, y, yaw) after the push, world frame.
    pub object_state: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct MultiStepPlan {
    pub path: PathPlan,
    pub steps: Vec<PlanStep>,
    pub completed: bool,
    /// Path edge on which planning stalled, when incomplete.
    pub blocked_edge: Option<usize>,
}

impl fmt::Display for MultiStepPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "path ({} waypoints, cost {:.3} m):", self.path.waypoints.len(), self.path.cost)?;
        for (i, w) in self.path.waypoints.iter().enumerate() {
            writeln!(f, "  wp{i}: ({:.3}, {:.3})", w.x, w.y)?;
        }
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(
                f,
                "step {i}: edge {} u_dir ({:.3}, {:.3}) len {:.3} pose #{} V {:.4} (goal {:.4}, coll {:.0}, dir {:.3})",
                s.edge,
                s.u_dir[0],
                s.u_dir[1],
                s.push_length,
                s.selected.index,
                s.selected.score,
                s.selected.l_goal,
                s.selected.l_coll,
                s.selected.l_dir,
            )?;
        }
        match self.blocked_edge {
            Some(e) => writeln!(f, "status: blocked on edge {e}"),
            None => writeln!(f, "status: completed"),
        }
    }
}

/// Plan a route with RRT*, split it into pushes of at most the standard push
/// length, and pick a ranked hand pose for each push. The object's simulated
/// pose is carried forward between pushes; a sub-target missed after the
/// allowed corrective pushes, or a push with no feasible candidate, stops the
/// plan with the blocking edge recorded.
pub fn multi_step_plan(
    kin: &HandKinematics,
    obj: &ObjectModel,
    start: Vector2<f64>,
    goal: Vector2<f64>,
    obstacles: &[Disc],
    source: &dyn CandidateSource,
    ws: &WorkspaceModel,
    weights: &RankWeights,
    cfg: &PlannerConfig,
) -> Result<MultiStepPlan> {
    ws.validate()?;
    weights.validate()?;
    let path = rrt_star(start, goal, obstacles, cfg.bounds, cfg.rrt_iterations, cfg.seed)?
        .ok_or(Error::NoPath)?;

    let mut state = [start.x, start.y, 0.0];
    let mut steps = Vec::new();
    let mut blocked = None;

    'edges: for edge in 0..path.waypoints.len() - 1 {
        let from = path.waypoints[edge];
        let to = path.waypoints[edge + 1];
        let n_sub = ((to - from).norm() / DEFAULT_PUSH_LENGTH).ceil().max(1.0) as usize;
        for k in 1..=n_sub {
            let target = from + (to - from) * (k as f64 / n_sub as f64);
            for _attempt in 0..cfg.max_pushes_per_target {
                let center = Vector2::new(state[0], state[1]);
                let delta = target - center;
                let d = delta.norm();
                if d <= cfg.goal_tolerance {
                    break;
                }
                let len = d.min(DEFAULT_PUSH_LENGTH);
                let u_world = delta / d;
                let u_local = Rotation2::new(-state[2]) * u_world;
                let u_local3 = Vector3::new(u_local.x, u_local.y, 0.0);

                let cands = source.candidates(obj, u_local3)?;
                if cands.is_empty() {
                    blocked = Some(edge);
                    break 'edges;
                }
                let trial = PushTrial::new(u_local3, Vector3::zeros(), len)?;
                let ws_local = ws.in_object_frame(&state);
                let ranked = match rank_and_select(
                    kin, &cands, obj, &trial, &ws_local, weights, cfg.sim_step,
                ) {
                    Ok(r) => r,
                    Err(Error::NoFeasibleCandidate) => {
                        blocked = Some(edge);
                        break 'edges;
                    }
                    Err(e) => return Err(e),
                };
                let best = ranked.into_iter().next().expect("nonempty ranking");

                let fs = best.outcome.final_state;
                let moved = Rotation2::new(state[2]) * Vector2::new(fs[0], fs[1]);
                state[0] += moved.x;
                state[1] += moved.y;
                state[2] += fs[2];
                steps.push(PlanStep {
                    edge,
                    target,
                    u_dir: [u_world.x, u_world.y, 0.0],
                    push_length: len,
                    selected: best,
                    object_state: state,
                });
            }
            let center = Vector2::new(state[0], state[1]);
            if (target - center).norm() > cfg.goal_tolerance {
                blocked = Some(edge);
                break 'edges;
            }
        }
    }

    Ok(MultiStepPlan {
        path,
        completed: blocked.is_none(),
        blocked_edge: blocked,
        steps,
    })
}
