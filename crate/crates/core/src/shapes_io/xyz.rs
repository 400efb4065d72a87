use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::IoError;
use crate::transport::PointCloud;

/// Parses whitespace-separated `x y z` lines. Blank lines are skipped.
pub fn parse_xyz(text: &str) -> Result<PointCloud, IoError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| IoError::Parse { line: i + 1, message: msg.to_string() };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad(&format!("expected 3 coordinates, found {}", fields.len())));
        }
        let mut p = [0.0f64; 3];
        for (v, f) in p.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|_| bad(&format!("{f:?} is not a number")))?;
            if !v.is_finite() {
                return Err(bad("non-finite coordinate"));
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(IoError::Parse { line: 0, message: "no points".into() });
    }
    Ok(PointCloud::new(points)?)
}

/// One point per line, 9 significant digits.
pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for p in cloud.points() {
        writeln!(out, "{:.8e} {:.8e} {:.8e}", p[0], p[1], p[2]).expect("writing to a String");
    }
    out
}

pub fn read_xyz(path: &Path) -> Result<PointCloud, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_xyz(&text).map_err(|e| e.in_file(path))
}

pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    fs::write(path, format_xyz(cloud)).map_err(|e| IoError::io(path, e))
}
