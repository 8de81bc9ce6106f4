use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;

use gd2p_core::push_sim::DatasetRecord;

use crate::util::{read_jsonl, write_json, Degenerate, Meta};

#[derive(Debug, Default, Serialize)]
struct ObjectStats {
    records: usize,
    successes: usize,
    augmented: usize,
    errors: usize,
    success_rate: f64,
}

#[derive(Debug, Serialize)]
struct DatasetStats {
    meta: Meta,
    records: usize,
    successes: usize,
    success_rate: f64,
    augmented: usize,
    errors: usize,
    objects: BTreeMap<String, ObjectStats>,
}

fn compute(records: &[DatasetRecord], meta: Meta) -> DatasetStats {
    let mut objects: BTreeMap<String, ObjectStats> = BTreeMap::new();
    for r in records {
        let s = objects.entry(r.object_id.clone()).or_default();
        s.records += 1;
        s.successes += r.success as usize;
        s.augmented += r.augmented as usize;
        s.errors += r.error.is_some() as usize;
    }
    for s in objects.values_mut() {
        s.success_rate = s.successes as f64 / s.records.max(1) as f64;
    }
    let successes = records.iter().filter(|r| r.success).count();
    DatasetStats {
        meta,
        records: records.len(),
        successes,
        success_rate: successes as f64 / records.len().max(1) as f64,
        augmented: records.iter().filter(|r| r.augmented).count(),
        errors: records.iter().filter(|r| r.error.is_some()).count(),
        objects,
    }
}

/// Print dataset statistics as JSON (and optionally write them to a file).
pub fn cmd_stats(dataset: &PathBuf, out: &Option<PathBuf>) -> Result<()> {
    let records: Vec<DatasetRecord> = read_jsonl(dataset)?;
    if records.is_empty() {
        return Err(Degenerate("dataset is empty".into()).into());
    }
    let stats = compute(&records, Meta::new("stats", 0, ""));
    println!("{}", serde_json::to_string_pretty(&stats)?);
    if let Some(out) = out {
        write_json(out, &stats)?;
    }
    Ok(())
}

/// Emit figure-ready CSVs from a dataset: per-object success rates and mean
/// energy components split by outcome.
pub fn cmd_plot_data(dataset: &PathBuf, out: &PathBuf) -> Result<()> {
    let records: Vec<DatasetRecord> = read_jsonl(dataset)?;
    if records.is_empty() {
        return Err(Degenerate("dataset is empty".into()).into());
    }
    let meta = Meta::new("plot-data", 0, "");
    let stats = compute(&records, meta.clone());
    fs::create_dir_all(out)?;

    let mut f = fs::File::create(out.join("success_by_object.csv"))?;
    writeln!(f, "{}", meta.csv_comment())?;
    writeln!(f, "object_id,records,successes,success_rate")?;
    for (id, s) in &stats.objects {
        writeln!(f, "{},{},{},{}", id, s.records, s.successes, s.success_rate)?;
    }

    const NAMES: [&str; 8] = [
        "e_fc", "e_dis", "e_joint", "e_pen_obj", "e_pen_table", "e_pen_self", "e_dir", "e_arm",
    ];
    let mut f = fs::File::create(out.join("energy_by_outcome.csv"))?;
    writeln!(f, "{}", meta.csv_comment())?;
    writeln!(f, "outcome,count,{}", NAMES.join(","))?;
    for (label, flag) in [("success", true), ("failure", false)] {
        let group: Vec<&DatasetRecord> = records
            .iter()
            .filter(|r| r.success == flag && r.error.is_none())
            .collect();
        let mut mean = [0.0f64; 8];
        for r in &group {
            for k in 0..8 {
                mean[k] += r.energy[k];
            }
        }
        let n = group.len().max(1) as f64;
        let cols: Vec<String> = mean.iter().map(|v| format!("{}", v / n)).collect();
        writeln!(f, "{},{},{}", label, group.len(), cols.join(","))?;
    }
    println!("plot-data: wrote {}", out.display());
    Ok(())
}
