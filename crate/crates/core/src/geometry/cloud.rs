use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Unordered set of 3-D points in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, t: &crate::geometry::Transform3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(*p)).collect(),
        }
    }

    /// Line-delimited `x y z` text.
    pub fn load_xyz(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut points = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let coords: Vec<f64> = trimmed
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("xyz line {}: {e}", lineno + 1)))?;
            if coords.len() != 3 {
                return Err(Error::Parse(format!(
                    "xyz line {}: expected 3 values",
                    lineno + 1
                )));
            }
            points.push(Vector3::new(coords[0], coords[1], coords[2]));
        }
        Ok(Self { points })
    }

    pub fn write_xyz(&self, mut w: impl Write) -> Result<()> {
        for p in &self.points {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        Ok(())
    }
}
