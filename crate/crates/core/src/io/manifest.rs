use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{read_text, write_text, IoError};

/// Files of one hierarchy level. Projections are absent on level 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelPaths {
    pub mesh_a: PathBuf,
    pub mesh_b: PathBuf,
    pub features_a: PathBuf,
    pub features_b: PathBuf,
    pub projection_a: Option<PathBuf>,
    pub projection_b: Option<PathBuf>,
}

/// Coarsest level first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub levels: Vec<LevelPaths>,
}

/// Reads `key = value` lines (`#` comments). Keys are `levels` and
/// `level<i>.<field>`; relative paths resolve against the manifest's
/// directory.
pub fn read_manifest(path: &Path) -> Result<Manifest, IoError> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| IoError::parse(path, i + 1, "expected 'key = value'"))?;
        if entries.insert(k.trim().to_string(), (i + 1, v.trim().to_string())).is_some() {
            return Err(IoError::parse(path, i + 1, format!("duplicate key '{}'", k.trim())));
        }
    }
    let (line, count) = entries
        .remove("levels")
        .ok_or_else(|| IoError::format(path, "missing 'levels' key"))?;
    let count: usize = count
        .parse()
        .ok()
        .filter(|&c| c > 0)
        .ok_or_else(|| IoError::parse(path, line, "levels must be a positive integer"))?;
    let mut take = |key: String, required: bool| -> Result<Option<PathBuf>, IoError> {
        match entries.remove(&key) {
            Some((_, v)) => Ok(Some(base.join(v))),
            None if required => Err(IoError::format(path, format!("missing key '{key}'"))),
            None => Ok(None),
        }
    };
    let mut levels = Vec::with_capacity(count);
    for l in 0..count {
        let f = |name: &str| format!("level{l}.{name}");
        levels.push(LevelPaths {
            mesh_a: take(f("mesh_a"), true)?.unwrap(),
            mesh_b: take(f("mesh_b"), true)?.unwrap(),
            features_a: take(f("features_a"), true)?.unwrap(),
            features_b: take(f("features_b"), true)?.unwrap(),
            projection_a: take(f("projection_a"), l > 0)?,
            projection_b: take(f("projection_b"), l > 0)?,
        });
    }
    if let Some((k, (line, _))) = entries.into_iter().next() {
        return Err(IoError::parse(path, line, format!("unknown key '{k}'")));
    }
    Ok(Manifest { levels })
}

/// Writes paths as given (callers pass paths relative to the manifest).
pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), IoError> {
    let mut s = format!("levels = {}\n", manifest.levels.len());
    for (l, p) in manifest.levels.iter().enumerate() {
        let _ = writeln!(s, "level{l}.mesh_a = {}", p.mesh_a.display());
        let _ = writeln!(s, "level{l}.mesh_b = {}", p.mesh_b.display());
        let _ = writeln!(s, "level{l}.features_a = {}", p.features_a.display());
        let _ = writeln!(s, "level{l}.features_b = {}", p.features_b.display());
        if let Some(q) = &p.projection_a {
            let _ = writeln!(s, "level{l}.projection_a = {}", q.display());
        }
        if let Some(q) = &p.projection_b {
            let _ = writeln!(s, "level{l}.projection_b = {}", q.display());
        }
    }
    write_text(path, &s)
}

/// One coarse vertex index per line.
pub fn read_projection(path: &Path) -> Result<Vec<usize>, IoError> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| IoError::parse(path, i + 1, format!("invalid vertex index '{}'", l.trim())))
        })
        .collect()
}

pub fn write_projection(projection: &[usize], path: &Path) -> Result<(), IoError> {
    let mut s = String::with_capacity(projection.len() * 4);
    for v in projection {
        let _ = writeln!(s, "{v}");
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let level = |l: usize| LevelPaths {
            mesh_a: format!("a{l}.off").into(),
            mesh_b: format!("b{l}.off").into(),
            features_a: format!("a{l}.dmf").into(),
            features_b: format!("b{l}.dmf").into(),
            projection_a: (l > 0).then(|| format!("pa{l}.txt").into()),
            projection_b: (l > 0).then(|| format!("pb{l}.txt").into()),
        };
        let m = Manifest {
            levels: vec![level(0), level(1)],
        };
        let path = dir.path().join("h.txt");
        write_manifest(&m, &path).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back.levels.len(), 2);
        assert_eq!(back.levels[1].projection_a, Some(dir.path().join("pa1.txt")));
        assert_eq!(back.levels[0].projection_a, None);
        let p = dir.path().join("p.txt");
        write_projection(&[0, 3, 1], &p).unwrap();
        assert_eq!(read_projection(&p).unwrap(), vec![0, 3, 1]);
    }

    #[test]
    fn missing_projection_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.txt");
        std::fs::write(
            &path,
            "levels = 2\nlevel0.mesh_a = a\nlevel0.mesh_b = b\nlevel0.features_a = c\nlevel0.features_b = d\n\
             level1.mesh_a = a\nlevel1.mesh_b = b\nlevel1.features_a = c\nlevel1.features_b = d\n",
        )
        .unwrap();
        assert!(read_manifest(&path).unwrap_err().to_string().contains("projection_a"));
    }
}
