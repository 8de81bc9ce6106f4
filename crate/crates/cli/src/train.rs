use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use gd2p_core::bps::BpsEncoding;
use gd2p_core::generator::{train, ModelArtifact, PoseSample, TrainConfig};
use gd2p_core::hand::POSE_DIM;
use gd2p_core::push_sim::DatasetRecord;

use crate::util::{read_jsonl, write_json, Degenerate, Meta};

pub struct TrainArgs {
    pub dataset: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub fraction: f64,
    pub seed: u64,
    /// Directory of per-object BPS caches; defaults to `<dataset dir>/bps`.
    pub bps_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainMeta {
    meta: Meta,
    fraction: f64,
    records_available: usize,
    records_used: usize,
    steps: usize,
    final_loss: f64,
    config: TrainConfig,
}

/// Train the conditional diffusion model on the success-labeled fraction of
/// a dataset; writes raw and EMA model files, the loss curve, and metadata.
pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    if !(args.fraction > 0.0 && args.fraction <= 1.0) {
        bail!("--fraction must be in (0, 1]");
    }
    let config: TrainConfig = match &args.config {
        None => TrainConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
    };
    let meta = Meta::new("train", args.seed, &toml::to_string(&config)?);

    let records: Vec<DatasetRecord> = read_jsonl(&args.dataset)?;
    let usable: Vec<&DatasetRecord> = records
        .iter()
        .filter(|r| r.success && r.error.is_none() && r.pose.len() == POSE_DIM)
        .collect();
    if usable.is_empty() {
        return Err(Degenerate("dataset has no successful records".into()).into());
    }

    // Deterministic fraction: shuffle indices once, take the prefix.
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x5eed_f00d);
    order.shuffle(&mut rng);
    let take = ((args.fraction * usable.len() as f64).ceil() as usize)
        .clamp(1, usable.len());
    order.truncate(take);
    order.sort_unstable();

    let bps_dir = args
        .bps_dir
        .clone()
        .unwrap_or_else(|| args.dataset.parent().unwrap_or(".".as_ref()).join("bps"));
    let mut conditions: HashMap<String, Vec<f64>> = HashMap::new();
    let mut samples = Vec::with_capacity(order.len());
    for &i in &order {
        let r = usable[i];
        let cond = match conditions.get(&r.object_id) {
            Some(c) => c.clone(),
            None => {
                let path = bps_dir.join(format!("{}.bps", r.object_id));
                let enc = BpsEncoding::read_cache(&path)
                    .with_context(|| format!("BPS cache {}", path.display()))?;
                conditions.insert(r.object_id.clone(), enc.features.clone());
                enc.features
            }
        };
        let mut pose25 = [0.0; POSE_DIM];
        pose25.copy_from_slice(&r.pose);
        samples.push(PoseSample {
            pose25,
            condition: cond,
            object_id: r.object_id.clone(),
            u_dir: r.u_dir,
        });
    }

    let result = train(&samples, &config, args.seed)?;

    fs::create_dir_all(&args.out)?;
    ModelArtifact {
        model: result.params.clone(),
        timesteps: config.timesteps,
        norm: result.norm.clone(),
    }
    .save(args.out.join("model.bin"))?;
    ModelArtifact {
        model: result.ema.clone(),
        timesteps: config.timesteps,
        norm: result.norm.clone(),
    }
    .save(args.out.join("model_ema.bin"))?;

    let mut csv = fs::File::create(args.out.join("loss.csv"))?;
    writeln!(csv, "{}", meta.csv_comment())?;
    writeln!(csv, "step,loss,lr")?;
    for p in &result.loss_curve {
        writeln!(csv, "{},{},{}", p.step, p.loss, p.lr)?;
    }

    write_json(
        &args.out.join("train_meta.json"),
        &TrainMeta {
            meta,
            fraction: args.fraction,
            records_available: usable.len(),
            records_used: samples.len(),
            steps: result.loss_curve.len(),
            final_loss: result.loss_curve.last().map(|p| p.loss).unwrap_or(f64::NAN),
            config,
        },
    )?;
    println!(
        "train: {} samples, {} steps -> {}",
        samples.len(),
        result.loss_curve.len(),
        args.out.display()
    );
    Ok(())
}
