use std::fmt::Write as _;
use std::path::Path;

use super::IoError;
use crate::mesh::FeatureMatrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"DMF1";

/// Parses binary `DMF1` data, or comma/whitespace separated text rows.
pub fn read_features_from(path: &Path, bytes: &[u8]) -> Result<FeatureMatrix, IoError> {
    if let Some(body) = bytes.strip_prefix(FEATURE_MAGIC) {
        if body.len() < 8 {
            return Err(IoError::format(path, "truncated header"));
        }
        let rows = u32::from_le_bytes(body[0..4].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(body[4..8].try_into().unwrap()) as usize;
        let data = &body[8..];
        if data.len() != rows * cols * 8 {
            return Err(IoError::format(
                path,
                format!("expected {} bytes of data for {rows}x{cols}, found {}", rows * cols * 8, data.len()),
            ));
        }
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        return FeatureMatrix::new(rows, cols, values).map_err(|e| IoError::format(path, e.to_string()));
    }
    let Ok(text) = std::str::from_utf8(bytes) else {
        return Err(IoError::format(path, "bad magic: not a DMF1 file and not text"));
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match row {
            Ok(r) => rows.push(r),
            Err(_) if rows.is_empty() => {
                return Err(IoError::parse(path, i + 1, "bad magic: neither DMF1 nor numeric text"));
            }
            Err(_) => return Err(IoError::parse(path, i + 1, "invalid number")),
        }
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != rows[0].len()) {
        return Err(IoError::format(
            path,
            format!("row {i} has {} columns, expected {}", r.len(), rows[0].len()),
        ));
    }
    FeatureMatrix::from_rows(&rows).map_err(|e| IoError::format(path, e.to_string()))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    read_features_from(path, &bytes)
}

pub fn write_features(features: &FeatureMatrix, path: &Path) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(12 + features.data().len() * 8);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(features.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(features.cols() as u32).to_le_bytes());
    for v in features.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

pub fn write_features_csv(features: &FeatureMatrix, path: &Path) -> Result<(), IoError> {
    let mut s = String::new();
    for i in 0..features.rows() {
        let row: Vec<String> = features.row(i).iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    std::fs::write(path, s).map_err(|e| IoError::io(path, e))
}
