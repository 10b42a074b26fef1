use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::util::{read_json, write_json};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Files in a stage directory that are excluded from its output hash.
pub const UNHASHED: [&str; 2] = ["manifest.json", "timings.json"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Generate,
    Reduce,
    Doe,
    Build3d,
    Simulate,
    Train,
    Explain,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Generate,
        Stage::Reduce,
        Stage::Doe,
        Stage::Build3d,
        Stage::Simulate,
        Stage::Train,
        Stage::Explain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Reduce => "reduce",
            Stage::Doe => "doe",
            Stage::Build3d => "build3d",
            Stage::Simulate => "simulate",
            Stage::Train => "train",
            Stage::Explain => "explain",
        }
    }

    /// Stages whose outputs this stage reads.
    pub fn prerequisites(self) -> &'static [Stage] {
        match self {
            Stage::Generate => &[],
            Stage::Reduce => &[Stage::Generate],
            Stage::Doe => &[Stage::Reduce],
            Stage::Build3d => &[Stage::Doe],
            Stage::Simulate => &[Stage::Build3d],
            Stage::Train => &[Stage::Reduce, Stage::Doe, Stage::Simulate],
            Stage::Explain => &[Stage::Reduce, Stage::Train],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown stage `{s}`")))
    }
}

/// Record of one stage execution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: Stage,
    pub inputs_hash: String,
    pub outputs_hash: String,
    /// SHA-256 per output file, by path relative to the stage directory.
    pub outputs: BTreeMap<String, String>,
    pub seed: u64,
    pub seconds: f64,
    pub tool_version: String,
}

/// A stage directory layout rooted at one path.
#[derive(Clone, Debug)]
pub struct Workspace {
    root: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.name())
    }

    pub fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.stage_dir(stage).join("manifest.json")
    }

    pub fn runs_log(&self) -> PathBuf {
        self.root.join("runs.jsonl")
    }

    pub fn shortlist_path(&self) -> PathBuf {
        self.root.join("shortlist.json")
    }

    pub fn manifest(&self, stage: Stage) -> Result<Option<RunManifest>> {
        let p = self.manifest_path(stage);
        if !p.exists() {
            return Ok(None);
        }
        read_json(&p).map(Some)
    }

    /// The manifest of a completed prerequisite, or an error naming the stage to run.
    pub fn require(&self, stage: Stage) -> Result<RunManifest> {
        self.manifest(stage)?.ok_or_else(|| Error::Prerequisite {
            missing: format!("{} outputs in {}", stage, self.stage_dir(stage).display()),
            run_first: stage.name().into(),
        })
    }

    /// Hashes every file under the stage directory except [`UNHASHED`].
    pub fn hash_outputs(&self, stage: Stage) -> Result<(String, BTreeMap<String, String>)> {
        let dir = self.stage_dir(stage);
        let mut files = BTreeMap::new();
        collect_files(&dir, &dir, &mut files)?;
        let mut h = Sha256::new();
        for (rel, digest) in &files {
            h.update(rel.as_bytes());
            h.update([0]);
            h.update(digest.as_bytes());
            h.update(b"\n");
        }
        Ok((hex::encode(h.finalize()), files))
    }

    pub fn write_manifest(&self, m: &RunManifest) -> Result<()> {
        write_json(&self.manifest_path(m.stage), m)
    }

    /// Appends one JSON line to `runs.jsonl`.
    pub fn log_run(&self, entry: &serde_json::Value) -> Result<()> {
        let path = self.runs_log();
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        writeln!(f, "{}", serde_json::to_string(entry)?).map_err(|e| Error::io(&path, e))
    }

    /// Empties and recreates a stage directory.
    pub fn reset_stage(&self, stage: Stage) -> Result<PathBuf> {
        let dir = self.stage_dir(stage);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }
}

fn collect_files(base: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(base, &path, out)?;
            continue;
        }
        let rel = path
            .strip_prefix(base)
            .expect("path under base")
            .to_string_lossy()
            .replace('\\', "/");
        if dir == base && UNHASHED.contains(&rel.as_str()) {
            continue;
        }
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        out.insert(rel, sha256_hex(&bytes));
    }
    Ok(())
}
