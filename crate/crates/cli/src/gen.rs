use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use gd2p_core::energy::{EnergyWeights, SceneContext};
use gd2p_core::hand::{builtin_hand, generate_contact_candidates};
use gd2p_core::object::ObjectModel;
use gd2p_core::optimizer::{optimize, OptimizerConfig};
use gd2p_core::push_sim::{
    retreat_to_contact, validate_batch, DatasetRecord, PushTrial, ValidationConfig,
    INITIAL_PEN_TOL,
};
use nalgebra::Vector3;

use crate::util::{
    derive_seed, encode_object, load_object, resolve_relative, standard_basis, write_json,
    write_jsonl, Degenerate, Meta,
};

/// Dataset-generation manifest. Paths are relative to the manifest file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    #[serde(default = "default_hand")]
    pub hand: String,
    pub objects: Vec<String>,
    /// Planar push directions (x, y).
    pub directions: Vec<[f64; 2]>,
    pub out_dir: String,
    pub optimizer_config: Option<String>,
    pub energy_config: Option<String>,
    pub validation_config: Option<String>,
}

fn default_hand() -> String {
    "allegro".into()
}

#[derive(Debug, Serialize)]
struct ObjectSummary {
    object_id: String,
    candidates: usize,
    records: usize,
    successes: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    meta: Meta,
    hand: String,
    objects: Vec<ObjectSummary>,
    directions: Vec<[f64; 2]>,
    candidates: usize,
    records: usize,
    successes: usize,
    success_rate: f64,
}

pub struct GenArgs {
    pub manifest: PathBuf,
    pub seed: Option<u64>,
    pub objects: Option<Vec<String>>,
    pub directions: Option<Vec<[f64; 2]>>,
    pub out: Option<PathBuf>,
}

/// For each (object, direction): optimize pose candidates, validate them in
/// the push simulation, and emit augmented dataset records plus per-object
/// BPS caches and a run summary. Per-object failures are logged and skipped.
pub fn cmd_gen_data(args: &GenArgs) -> Result<()> {
    let manifest_text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let mut manifest: RunManifest =
        toml::from_str(&manifest_text).context("parsing run manifest")?;
    if let Some(seed) = args.seed {
        manifest.seed = seed;
    }
    if let Some(objects) = &args.objects {
        manifest.objects = objects.clone();
    }
    if let Some(directions) = &args.directions {
        manifest.directions = directions.clone();
    }
    if manifest.objects.is_empty() {
        bail!("manifest lists no objects");
    }
    if manifest.directions.is_empty() {
        bail!("manifest lists no push directions");
    }

    let opt_cfg: OptimizerConfig = load_toml_or_default(&args.manifest, &manifest.optimizer_config)?;
    let weights: EnergyWeights = load_toml_or_default(&args.manifest, &manifest.energy_config)?;
    let val_cfg: ValidationConfig =
        load_toml_or_default(&args.manifest, &manifest.validation_config)?;
    weights.validate()?;

    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| resolve_relative(&args.manifest, &manifest.out_dir));
    fs::create_dir_all(out_dir.join("bps"))?;

    // The config hash covers everything that shapes the output bytes.
    let config_text = format!(
        "{}\n{}\n{}\n{}",
        toml::to_string(&manifest)?,
        toml::to_string(&opt_cfg)?,
        toml::to_string(&weights)?,
        toml::to_string(&val_cfg)?,
    );
    let meta = Meta::new("gen-data", manifest.seed, &config_text);

    let kin = builtin_hand(&manifest.hand)?;
    let candidates = generate_contact_candidates(&kin, derive_seed(manifest.seed, "contacts", 0))?;
    let basis = standard_basis()?;

    let mut records: Vec<DatasetRecord> = Vec::new();
    let mut summaries = Vec::new();
    let mut total_candidates = 0usize;

    for (obj_idx, obj_rel) in manifest.objects.iter().enumerate() {
        let obj_path = resolve_relative(&args.manifest, obj_rel);
        let obj = match load_object(&obj_path) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("gen-data: skipping {}: {e:#}", obj_path.display());
                continue;
            }
        };
        let encoding = encode_object(&basis, &obj)?;
        encoding.write_cache(out_dir.join("bps").join(format!("{}.bps", obj.id)))?;

        let mut obj_records = 0usize;
        let mut obj_successes = 0usize;
        let mut obj_candidates = 0usize;
        for (dir_idx, d) in manifest.directions.iter().enumerate() {
            let task_seed = derive_seed(
                manifest.seed,
                "optimize",
                (obj_idx as u64) << 16 | dir_idx as u64,
            );
            match run_task(&kin, &candidates, &obj, *d, &opt_cfg, &weights, &val_cfg, task_seed) {
                Ok((n_cand, recs)) => {
                    obj_candidates += n_cand;
                    obj_records += recs.len();
                    obj_successes += recs.iter().filter(|r| r.success).count();
                    records.extend(recs);
                }
                Err(e) => {
                    eprintln!(
                        "gen-data: {} direction ({}, {}): {e:#}",
                        obj.id, d[0], d[1]
                    );
                }
            }
        }
        total_candidates += obj_candidates;
        summaries.push(ObjectSummary {
            object_id: obj.id.clone(),
            candidates: obj_candidates,
            records: obj_records,
            successes: obj_successes,
        });
    }

    let successes = records.iter().filter(|r| r.success).count();
    let summary = Summary {
        meta: meta.clone(),
        hand: manifest.hand.clone(),
        directions: manifest.directions.clone(),
        candidates: total_candidates,
        records: records.len(),
        successes,
        success_rate: if records.is_empty() {
            0.0
        } else {
            successes as f64 / records.len() as f64
        },
        objects: summaries,
    };
    write_jsonl(&out_dir.join("dataset.jsonl"), &meta, &records)?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    println!(
        "gen-data: {} records ({} successes, rate {:.3}) -> {}",
        records.len(),
        successes,
        summary.success_rate,
        out_dir.display()
    );
    if records.is_empty() {
        return Err(Degenerate("no dataset records produced".into()).into());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_task(
    kin: &gd2p_core::hand::HandKinematics,
    candidates: &gd2p_core::hand::ContactCandidateSet,
    obj: &ObjectModel,
    d: [f64; 2],
    opt_cfg: &OptimizerConfig,
    weights: &EnergyWeights,
    val_cfg: &ValidationConfig,
    seed: u64,
) -> Result<(usize, Vec<DatasetRecord>)> {
    let u_dir = Vector3::new(d[0], d[1], 0.0);
    let chains = optimize(obj, u_dir, kin, candidates, opt_cfg, weights, seed)?;
    // The annealer leaves residual overlap; back each pose off along the
    // push direction to a pre-contact pose before validation.
    let poses: Vec<_> = chains
        .iter()
        .map(|c| {
            let pose = retreat_to_contact(kin, &c.best_pose, obj, u_dir, 0.5 * INITIAL_PEN_TOL)?;
            Ok((pose, c.best_selection.clone()))
        })
        .collect::<gd2p_core::error::Result<_>>()?;
    let trial = PushTrial::new(u_dir, obj.mesh.centroid(), 0.2)?;
    let scene = SceneContext::new(
        kin,
        candidates,
        &obj.sdf,
        0.0,
        trial.u_dir,
        opt_cfg.surface_points_per_link,
    )?;
    let records = validate_batch(kin, &poses, obj, &trial, &scene, weights, val_cfg)?;
    Ok((poses.len(), records))
}

fn load_toml_or_default<T>(manifest_path: &Path, rel: &Option<String>) -> Result<T>
where
    T: serde::de::DeserializeOwned + Default,
{
    match rel {
        None => Ok(T::default()),
        Some(rel) => {
            let path = resolve_relative(manifest_path, rel);
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
    }
}
