use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::workspace::{Stage, Workspace};
use crate::autoenc::AutoencoderModel;
use crate::designspace::DesignSet;
use crate::error::{Error, Result};
use crate::insight::Pca;
use crate::surrogate::{stiffness, EnsembleModel};
use crate::util::{read_json, write_json};

/// Latent code of one corpus design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentRow {
    pub id: String,
    pub z: Vec<f64>,
}

/// Outcome of one per-design step (build or simulation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemStatus {
    pub id: String,
    /// `"ok"` or `"failed: <reason>"`.
    pub status: String,
}

impl ItemStatus {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// FEM labels of one simulated design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub frequency_hz: f64,
    pub mass_kg: f64,
    pub lateral_index: usize,
    pub n_dofs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatedLabels {
    pub frequency_hz: f64,
    pub mass_kg: f64,
}

/// One row of the candidate table served by `/v1/map`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub frequency_hz: f64,
    pub mass_kg: f64,
    /// `(2πf)² m`, recomputed whenever the table is loaded.
    #[serde(default)]
    pub stiffness: f64,
    pub rank: usize,
    pub u: f64,
    pub v: f64,
    pub cluster: usize,
    pub frequency_group: usize,
    #[serde(default)]
    pub shortlisted: bool,
    pub simulated: Option<SimulatedLabels>,
}

impl CandidateRecord {
    pub fn refresh(&mut self) {
        self.stiffness = stiffness(self.frequency_hz, self.mass_kg);
    }
}

/// Principal latent directions shipped with the map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub latent_dim: usize,
    pub pca: Pca,
    pub embedding_method: String,
    pub frequency_ranges: Vec<[f64; 2]>,
}

pub(crate) fn csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub(crate) fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
    crate::util::write_atomic(path, &bytes)
}

/// Typed access to stage outputs.
impl Workspace {
    fn artifact(&self, stage: Stage, rel: &str) -> Result<PathBuf> {
        self.require(stage)?;
        Ok(self.stage_dir(stage).join(rel))
    }

    pub fn references(&self) -> Result<DesignSet> {
        DesignSet::load_dir(&self.artifact(Stage::Generate, "references")?)
    }

    pub fn generated(&self) -> Result<DesignSet> {
        DesignSet::load_dir(&self.artifact(Stage::Generate, "designs")?)
    }

    pub fn corpus(&self) -> Result<DesignSet> {
        DesignSet::load_dir(&self.artifact(Stage::Reduce, "corpus")?)
    }

    pub fn autoencoder_path(&self) -> PathBuf {
        self.stage_dir(Stage::Reduce).join("autoencoder.json")
    }

    pub fn autoencoder(&self) -> Result<AutoencoderModel> {
        AutoencoderModel::load(&self.artifact(Stage::Reduce, "autoencoder.json")?)
    }

    pub fn latents(&self) -> Result<Vec<LatentRow>> {
        read_json(&self.artifact(Stage::Reduce, "latents.json")?)
    }

    pub fn selected(&self) -> Result<DesignSet> {
        DesignSet::load_dir(&self.artifact(Stage::Doe, "selected")?)
    }

    pub fn builds(&self) -> Result<Vec<ItemStatus>> {
        read_json(&self.artifact(Stage::Build3d, "index.json")?)
    }

    pub fn design_dir(&self, id: &str) -> PathBuf {
        self.stage_dir(Stage::Build3d).join(id)
    }

    pub fn labels(&self) -> Result<Vec<LabelRow>> {
        csv_rows(&self.artifact(Stage::Simulate, "labels.csv")?)
    }

    pub fn ensemble_path(&self) -> PathBuf {
        self.stage_dir(Stage::Train).join("ensemble.json")
    }

    pub fn ensemble(&self) -> Result<EnsembleModel> {
        EnsembleModel::load(&self.artifact(Stage::Train, "ensemble.json")?)
    }

    /// Candidate table with stiffness recomputed and shortlist flags applied.
    pub fn candidates(&self) -> Result<Vec<CandidateRecord>> {
        let mut rows: Vec<CandidateRecord> = read_json(&self.artifact(Stage::Explain, "candidates.json")?)?;
        let flags = self.shortlist()?;
        for r in &mut rows {
            r.refresh();
            r.shortlisted = flags.get(&r.id).copied().unwrap_or(false);
        }
        Ok(rows)
    }

    pub fn map_meta(&self) -> Result<MapMeta> {
        read_json(&self.artifact(Stage::Explain, "map_meta.json")?)
    }

    pub fn shortlist(&self) -> Result<BTreeMap<String, bool>> {
        let p = self.shortlist_path();
        if !p.exists() {
            return Ok(BTreeMap::new());
        }
        read_json(&p)
    }

    pub fn write_shortlist(&self, flags: &BTreeMap<String, bool>) -> Result<()> {
        write_json(&self.shortlist_path(), flags)
    }
}
