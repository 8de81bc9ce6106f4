use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use gd2p_core::bps::{self, BasisPointSet, BpsEncoding, BPS_DIM, BPS_RADIUS};
use gd2p_core::object::ObjectModel;

/// Commands that handle a degenerate-but-valid situation (no feasible pose,
/// no path, empty dataset) exit with this code instead of failing.
pub const EXIT_DEGENERATE: u8 = 2;

/// Surface-cloud sampling seed; fixed so an object's BPS encoding is a pure
/// function of its mesh and matches between generation, training, and
/// sampling runs.
pub const CLOUD_SEED: u64 = 7;
/// Basis-point-set seed, fixed for the same reason.
pub const BASIS_SEED: u64 = 1337;

/// Raised for handled degenerate outcomes; mapped to exit code 2.
#[derive(Debug)]
pub struct Degenerate(pub String);

impl std::fmt::Display for Degenerate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for Degenerate {}

/// Provenance stamp embedded in every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(command: &str, seed: u64, config_text: &str) -> Self {
        Self {
            tool: "gd2p".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_sha256: sha256_hex(config_text.as_bytes()),
        }
    }

    /// Comment line for CSV artifacts.
    pub fn csv_comment(&self) -> String {
        format!(
            "# {} {} {} seed={} config={}",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable per-stage sub-seed derivation (splitmix-style mixing).
pub fn derive_seed(root: u64, stage: &str, index: u64) -> u64 {
    let mut x = root ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1));
    for b in stage.bytes() {
        x = x.wrapping_add(b as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x ^= x >> 27;
    }
    x ^= x >> 31;
    x.wrapping_mul(0x94d0_49bb_1331_11eb)
}

/// Parse "x,y" into a planar pair.
pub fn parse_xy(text: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("expected `x,y`, got `{text}`");
    }
    Ok((
        parts[0].trim().parse().context("bad x component")?,
        parts[1].trim().parse().context("bad y component")?,
    ))
}

/// Parse a semicolon-separated direction list, e.g. "1,0;0,1;-1,0".
pub fn parse_directions(text: &str) -> Result<Vec<[f64; 2]>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_xy(s).map(|(x, y)| [x, y]))
        .collect()
}

pub fn load_object(path: &Path) -> Result<ObjectModel> {
    ObjectModel::load_manifest(path, CLOUD_SEED)
        .with_context(|| format!("loading object {}", path.display()))
}

pub fn standard_basis() -> Result<BasisPointSet> {
    Ok(bps::generate_basis(BASIS_SEED, BPS_DIM, BPS_RADIUS)?)
}

pub fn encode_object(basis: &BasisPointSet, obj: &ObjectModel) -> Result<BpsEncoding> {
    let cloud = bps::canonicalize(&obj.cloud)?;
    Ok(bps::encode(basis, &cloud)?)
}

/// Write a JSON-lines file: one meta line, then one record per line.
pub fn write_jsonl<T: Serialize>(path: &Path, meta: &Meta, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", serde_json::to_string(&serde_json::json!({ "meta": meta }))?)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

/// Read a JSON-lines file written by `write_jsonl`, skipping the meta line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.contains("\"meta\"") {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Resolve a path relative to the file that mentioned it.
pub fn resolve_relative(base_file: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_file.parent().unwrap_or(Path::new(".")).join(p)
    }
}
