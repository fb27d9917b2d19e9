//! File layout of a run directory and the manifest that indexes it.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsxai_core::analytics::SignalConfig;

use crate::failure::Failure;

pub const MANIFEST: &str = "manifest.json";

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Fails with the full list of missing relative paths.
    pub fn require(&self, rels: &[String]) -> Result<(), Failure> {
        let missing: Vec<&str> = rels
            .iter()
            .filter(|r| !self.path(r).is_file())
            .map(String::as_str)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Failure::data(format!(
                "missing artifacts in {}: {}",
                self.root.display(),
                missing.join(", ")
            )))
        }
    }

    /// Replaces the contents of a subdirectory so reruns leave no stale files.
    pub fn fresh_dir(&self, rel: &str) -> Result<PathBuf, Failure> {
        let dir = self.path(rel);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write_bytes(rel, s.as_bytes())
    }

    pub fn read_json<T: for<'de> Deserialize<'de>>(&self, rel: &str) -> Result<T, Failure> {
        let text = fs::read_to_string(self.path(rel)).map_err(|e| Failure::data(format!("{rel}: {e}")))?;
        serde_json::from_str(&text).map_err(|e| Failure::data(format!("{rel}: {e}")))
    }

    pub fn write_matrix(&self, rel: &str, dates: &[NaiveDate], header: &[String], m: &Array2<f64>) -> Result<(), Failure> {
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, dates, header, m)?;
        self.write_bytes(rel, &buf)
    }

    pub fn read_matrix(&self, rel: &str) -> Result<(Vec<NaiveDate>, Vec<String>, Array2<f64>), Failure> {
        let text = fs::read_to_string(self.path(rel)).map_err(|e| Failure::data(format!("{rel}: {e}")))?;
        read_matrix_csv(&text).map_err(|f| f.context(rel))
    }

    /// Relative paths and SHA-256 digests of every file except the manifest, sorted.
    pub fn artifact_hashes(&self) -> Result<Vec<ArtifactHash>, Failure> {
        let mut out = Vec::new();
        collect(&self.root, &self.root, &mut out)?;
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<ArtifactHash>) -> Result<(), Failure> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
            continue;
        }
        let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
        if rel == MANIFEST {
            continue;
        }
        out.push(ArtifactHash {
            sha256: hex::encode(Sha256::digest(fs::read(&path)?)),
            path: rel,
        });
    }
    Ok(())
}

pub fn write_matrix_csv<W: Write>(
    mut out: W,
    dates: &[NaiveDate],
    header: &[String],
    m: &Array2<f64>,
) -> Result<(), Failure> {
    writeln!(out, "date,{}", header.join(","))?;
    for (t, row) in m.rows().into_iter().enumerate() {
        write!(out, "{}", dates[t].format("%Y-%m-%d"))?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_matrix_csv(text: &str) -> Result<(Vec<NaiveDate>, Vec<String>, Array2<f64>), Failure> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Failure::data("empty file"))?
        .split(',')
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut dates = Vec::new();
    let mut flat = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let bad = |what: &str| Failure::data(format!("line {}: bad {what}", i + 2));
        let date = fields.next().ok_or_else(|| bad("date"))?;
        dates.push(NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| bad("date"))?);
        let before = flat.len();
        for f in fields {
            flat.push(f.parse::<f64>().map_err(|_| bad("value"))?);
        }
        if flat.len() - before != header.len() {
            return Err(bad("field count"));
        }
    }
    let m = Array2::from_shape_vec((dates.len(), header.len()), flat).map_err(|e| Failure::data(e.to_string()))?;
    Ok((dates, header, m))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHash {
    pub path: String,
    pub sha256: String,
}

/// Index of a run directory, rewritten after every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub signal_presets: BTreeMap<String, SignalConfig>,
    pub artifacts: Vec<ArtifactHash>,
    pub last_command: String,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn load(dir: &RunDir) -> Option<Self> {
        dir.path(MANIFEST)
            .is_file()
            .then(|| dir.read_json(MANIFEST).ok())
            .flatten()
    }
}
