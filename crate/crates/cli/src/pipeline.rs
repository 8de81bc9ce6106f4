use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use anyhow::{bail, Context, Result};
use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use gd2p_core::bps::BasisPointSet;
use gd2p_core::generator::{make_schedule, sample, ModelArtifact, NoiseSchedule};
use gd2p_core::hand::{builtin_hand, decode_pose, encode_pose, HandPose, POSE_DIM};
use gd2p_core::object::ObjectModel;
use gd2p_core::planner::{
    multi_step_plan, rank_and_select, CandidateSource, Disc, MultiStepPlan, PlannerConfig,
    PoseBank, RankWeights, WorkspaceModel,
};
use gd2p_core::push_sim::{DatasetRecord, PushTrial, DEFAULT_STEP};
use gd2p_core::Error as CoreError;

use crate::util::{
    derive_seed, encode_object, load_object, read_jsonl, standard_basis, write_json, write_jsonl,
    Degenerate, Meta,
};

/// Workspace + ranking configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub workspace: Option<WorkspaceModel>,
    pub rank: Option<RankWeights>,
}

impl SceneConfig {
    pub fn load(path: &Option<PathBuf>) -> Result<(Self, String)> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
        };
        let text = toml::to_string(&cfg)?;
        Ok((cfg, text))
    }

    pub fn workspace(&self) -> WorkspaceModel {
        self.workspace.unwrap_or_else(WorkspaceModel::desk)
    }

    pub fn rank(&self) -> RankWeights {
        self.rank.unwrap_or_default()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub pose25: Vec<f64>,
}

pub struct SampleArgs {
    pub model: PathBuf,
    pub object: PathBuf,
    pub n_samples: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn load_model(path: &Path) -> Result<(ModelArtifact, NoiseSchedule)> {
    let artifact =
        ModelArtifact::load(path).with_context(|| format!("loading model {}", path.display()))?;
    let schedule = make_schedule(artifact.timesteps)?;
    Ok((artifact, schedule))
}

fn sample_poses(
    artifact: &ModelArtifact,
    schedule: &NoiseSchedule,
    basis: &BasisPointSet,
    obj: &ObjectModel,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; POSE_DIM]>> {
    let cond = encode_object(basis, obj)?.features;
    Ok(sample(&artifact.model, schedule, &artifact.norm, &cond, n, seed)?)
}

/// Draw pose vectors from the model conditioned on the object's BPS.
pub fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let (artifact, schedule) = load_model(&args.model)?;
    let obj = load_object(&args.object)?;
    let basis = standard_basis()?;
    let meta = Meta::new(
        "sample",
        args.seed,
        &format!("model={} object={}", args.model.display(), obj.id),
    );
    let poses = sample_poses(&artifact, &schedule, &basis, &obj, args.n_samples, args.seed)?;
    let records: Vec<SampleRecord> = poses
        .iter()
        .enumerate()
        .map(|(index, p)| SampleRecord {
            index,
            pose25: p.to_vec(),
        })
        .collect();
    let out = args.out.join("samples.jsonl");
    write_jsonl(&out, &meta, &records)?;
    println!("sample: {} poses -> {}", records.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct RankEntry {
    rank: usize,
    index: usize,
    score: f64,
    l_goal: f64,
    l_coll: f64,
    l_dir: f64,
    success: bool,
    pose25: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct RankingFile {
    meta: Meta,
    object_id: String,
    u_dir: [f64; 3],
    candidates: usize,
    feasible: usize,
    best_index: usize,
    ranked: Vec<RankEntry>,
}

pub struct RankArgs {
    pub model: PathBuf,
    pub object: PathBuf,
    pub direction: (f64, f64),
    pub n_samples: usize,
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub plot: bool,
}

/// Sample candidates, score each with the push rollout, and emit the full
/// ranking (and optionally a plottable CSV).
pub fn cmd_rank(args: &RankArgs) -> Result<()> {
    let (artifact, schedule) = load_model(&args.model)?;
    let obj = load_object(&args.object)?;
    let kin = builtin_hand("allegro")?;
    let (scene, scene_text) = SceneConfig::load(&args.config)?;
    let meta = Meta::new("rank", args.seed, &scene_text);
    let basis = standard_basis()?;

    let raw = sample_poses(&artifact, &schedule, &basis, &obj, args.n_samples, args.seed)?;
    let mut decoded: Vec<(usize, HandPose)> = Vec::new();
    for (i, p) in raw.iter().enumerate() {
        if let Ok(pose) = decode_pose(p) {
            decoded.push((i, pose));
        }
    }
    let candidates: Vec<HandPose> = decoded.iter().map(|(_, p)| p.clone()).collect();
    let u_dir = Vector3::new(args.direction.0, args.direction.1, 0.0);
    let trial = PushTrial::new(u_dir, Vector3::zeros(), 0.2)?;

    let ranked = match rank_and_select(
        &kin,
        &candidates,
        &obj,
        &trial,
        &scene.workspace(),
        &scene.rank(),
        DEFAULT_STEP,
    ) {
        Ok(r) => r,
        Err(CoreError::NoFeasibleCandidate) => {
            println!("rank: no feasible pose among {} candidates", candidates.len());
            return Err(Degenerate("no feasible candidate".into()).into());
        }
        Err(e) => return Err(e.into()),
    };

    let entries: Vec<RankEntry> = ranked
        .iter()
        .enumerate()
        .map(|(rank, r)| RankEntry {
            rank,
            index: decoded[r.index].0,
            score: r.score,
            l_goal: r.l_goal,
            l_coll: r.l_coll,
            l_dir: r.l_dir,
            success: r.outcome.success,
            pose25: encode_pose(&r.pose).map(|v| v.to_vec()).unwrap_or_default(),
        })
        .collect();
    let file = RankingFile {
        meta: meta.clone(),
        object_id: obj.id.clone(),
        u_dir: [u_dir.x, u_dir.y, u_dir.z],
        candidates: candidates.len(),
        feasible: ranked.len(),
        best_index: entries[0].index,
        ranked: entries,
    };
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("ranking.json"), &file)?;
    if args.plot {
        let mut csv = fs::File::create(args.out.join("ranking.csv"))?;
        writeln!(csv, "{}", meta.csv_comment())?;
        writeln!(csv, "index,score,l_goal,l_coll,l_dir")?;
        for e in &file.ranked {
            writeln!(
                csv,
                "{},{},{},{},{}",
                e.index, e.score, e.l_goal, e.l_coll, e.l_dir
            )?;
        }
    }
    println!(
        "rank: best candidate #{} score {:.4} ({} feasible of {})",
        file.best_index, file.ranked[0].score, file.feasible, file.candidates
    );
    Ok(())
}

/// Candidate source that re-samples the generator per push, sub-seeded by a
/// call counter, and rotates the (canonically +x trained) samples toward the
/// requested direction.
struct GeneratorSource {
    artifact: ModelArtifact,
    schedule: NoiseSchedule,
    condition: Vec<f64>,
    n: usize,
    seed: u64,
    calls: AtomicU64,
}

impl CandidateSource for GeneratorSource {
    fn candidates(
        &self,
        _obj: &ObjectModel,
        u_dir: Vector3<f64>,
    ) -> gd2p_core::Result<Vec<HandPose>> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        let raw = sample(
            &self.artifact.model,
            &self.schedule,
            &self.artifact.norm,
            &self.condition,
            self.n,
            derive_seed(self.seed, "plan-sample", call),
        )?;
        let mut poses = Vec::new();
        for p in &raw {
            if let Ok(pose) = decode_pose(p) {
                poses.push(pose);
            }
        }
        let bank = PoseBank { poses };
        bank.candidates(_obj, u_dir)
    }
}

#[derive(Debug, Serialize)]
struct PlanStepOut {
    edge: usize,
    u_dir: [f64; 3],
    push_length: f64,
    pose_index: usize,
    score: f64,
    l_goal: f64,
    l_coll: f64,
    l_dir: f64,
    object_state: [f64; 3],
}

#[derive(Debug, Serialize)]
struct PlanFile {
    meta: Meta,
    object_id: String,
    goal: [f64; 2],
    waypoints: Vec<[f64; 2]>,
    completed: bool,
    blocked_edge: Option<usize>,
    steps: Vec<PlanStepOut>,
}

pub struct PlanArgs {
    pub model: Option<PathBuf>,
    pub bank: Option<PathBuf>,
    pub object: PathBuf,
    pub goal: (f64, f64),
    pub obstacles: Option<PathBuf>,
    pub n_samples: usize,
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
struct ObstacleFile {
    obstacles: Vec<[f64; 2]>,
}

/// Route the object to the goal around disc obstacles and pick a ranked hand
/// pose for every push along the way.
pub fn cmd_plan(args: &PlanArgs) -> Result<()> {
    let obj = load_object(&args.object)?;
    let kin = builtin_hand("allegro")?;
    let (scene, scene_text) = SceneConfig::load(&args.config)?;
    let meta = Meta::new("plan", args.seed, &scene_text);

    let obstacles: Vec<Disc> = match &args.obstacles {
        None => Vec::new(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let parsed: ObstacleFile =
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            parsed
                .obstacles
                .iter()
                .map(|c| Disc::standard(Vector2::new(c[0], c[1])))
                .collect()
        }
    };

    let source: Box<dyn CandidateSource> = match (&args.model, &args.bank) {
        (Some(model), None) => {
            let (artifact, schedule) = load_model(model)?;
            let basis = standard_basis()?;
            let condition = encode_object(&basis, &obj)?.features;
            Box::new(GeneratorSource {
                artifact,
                schedule,
                condition,
                n: args.n_samples,
                seed: args.seed,
                calls: AtomicU64::new(0),
            })
        }
        (None, Some(bank)) => Box::new(load_bank(bank)?),
        _ => bail!("exactly one of --model or --bank is required"),
    };

    let cfg = PlannerConfig {
        seed: args.seed,
        ..PlannerConfig::default()
    };
    let plan = match multi_step_plan(
        &kin,
        &obj,
        Vector2::zeros(),
        Vector2::new(args.goal.0, args.goal.1),
        &obstacles,
        source.as_ref(),
        &scene.workspace(),
        &scene.rank(),
        &cfg,
    ) {
        Ok(p) => p,
        Err(CoreError::NoPath) => {
            println!("plan: no collision-free path to the goal");
            return Err(Degenerate("no path".into()).into());
        }
        Err(e) => return Err(e.into()),
    };

    write_plan(&args.out, &meta, &obj, args.goal, &plan)?;
    if plan.completed {
        println!(
            "plan: completed in {} pushes -> {}",
            plan.steps.len(),
            args.out.display()
        );
        Ok(())
    } else {
        println!(
            "plan: blocked on edge {} after {} pushes -> {}",
            plan.blocked_edge.unwrap_or(0),
            plan.steps.len(),
            args.out.display()
        );
        Err(Degenerate("partial plan".into()).into())
    }
}

/// Build a +x pose bank from a dataset's successful unaugmented records.
fn load_bank(path: &Path) -> Result<PoseBank> {
    let records: Vec<DatasetRecord> = read_jsonl(path)?;
    let mut poses = Vec::new();
    for r in &records {
        let aligned = (r.u_dir[0] - 1.0).abs() < 1e-9
            && r.u_dir[1].abs() < 1e-9
            && r.u_dir[2].abs() < 1e-9;
        if !(r.success && !r.augmented && aligned) {
            continue;
        }
        if let Ok(pose) = decode_pose(&r.pose) {
            poses.push(pose);
        }
    }
    Ok(PoseBank { poses })
}

fn write_plan(
    out: &Path,
    meta: &Meta,
    obj: &ObjectModel,
    goal: (f64, f64),
    plan: &MultiStepPlan,
) -> Result<()> {
    fs::create_dir_all(out)?;
    let steps: Vec<PlanStepOut> = plan
        .steps
        .iter()
        .map(|s| PlanStepOut {
            edge: s.edge,
            u_dir: s.u_dir,
            push_length: s.push_length,
            pose_index: s.selected.index,
            score: s.selected.score,
            l_goal: s.selected.l_goal,
            l_coll: s.selected.l_coll,
            l_dir: s.selected.l_dir,
            object_state: s.object_state,
        })
        .collect();
    write_json(
        &out.join("plan.json"),
        &PlanFile {
            meta: meta.clone(),
            object_id: obj.id.clone(),
            goal: [goal.0, goal.1],
            waypoints: plan.path.waypoints.iter().map(|w| [w.x, w.y]).collect(),
            completed: plan.completed,
            blocked_edge: plan.blocked_edge,
            steps,
        },
    )?;
    let mut txt = fs::File::create(out.join("plan.txt"))?;
    writeln!(txt, "{}", meta.csv_comment())?;
    write!(txt, "{plan}")?;
    Ok(())
}
