use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoenc::{AutoencoderSpec, TrainConfig};
use crate::contour::ContourConfig;
use crate::doe::DoePlan;
use crate::error::{Error, Result};
use crate::insight::TsneConfig;
use crate::modal::{Material, ModalSettings};
use crate::solid::WheelBuildSpec;
use crate::surrogate::SurrogateConfig;
use crate::topopt::{DomainSpec, SweepLevels, TopOptSettings};

/// Environment variable that overrides the configured workspace root.
pub const WORKSPACE_ENV: &str = "WHEELFORGE_WORKSPACE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub n_references: usize,
    pub reference_seed: u64,
    /// Keep the references themselves in the design corpus.
    pub include_references: bool,
    /// `grid` is also the design image resolution.
    pub domain: DomainSpec,
    pub levels: SweepLevels,
    pub topopt: TopOptSettings,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            n_references: 20,
            reference_seed: 0,
            include_references: true,
            domain: DomainSpec::default(),
            levels: SweepLevels::default(),
            topopt: TopOptSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceConfig {
    /// Per-pixel L1 threshold for near-duplicate removal.
    pub dedup_threshold: f64,
    /// Random-rotation copies per corpus design for autoencoder training.
    pub rotation_copies: usize,
    pub autoencoder: AutoencoderSpec,
    pub train: TrainConfig,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        Self {
            dedup_threshold: 0.001,
            rotation_copies: 10,
            autoencoder: AutoencoderSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Build3dConfig {
    pub contour: ContourConfig,
    pub wheel: WheelBuildSpec,
    /// Optional `r_mm,z_mm` CSV files; the built-in sections are used otherwise.
    pub spoke_section: Option<PathBuf>,
    pub rim_section: Option<PathBuf>,
    pub write_stl: bool,
}

impl Default for Build3dConfig {
    fn default() -> Self {
        Self {
            contour: ContourConfig::default(),
            wheel: WheelBuildSpec::default(),
            spoke_section: None,
            rim_section: None,
            write_stl: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub material: Material,
    pub modal: ModalSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainStageConfig {
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub surrogate: SurrogateConfig,
}

impl Default for TrainStageConfig {
    fn default() -> Self {
        Self {
            val_fraction: 0.2,
            test_fraction: 0.1,
            split_seed: 0,
            surrogate: SurrogateConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Tsne,
    Pca,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub k_clusters: usize,
    pub k_frequency: usize,
    pub kmeans_seed: u64,
    pub embedding: EmbeddingKind,
    pub tsne: TsneConfig,
    /// Number of principal latent directions published with the map.
    pub pca_components: usize,
    /// Grad-CAM exports for the top candidates by stiffness.
    pub gradcam_top: usize,
    pub overlay_alpha: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            k_clusters: 20,
            k_frequency: 10,
            kmeans_seed: 0,
            embedding: EmbeddingKind::Tsne,
            tsne: TsneConfig::default(),
            pca_components: 8,
            gradcam_top: 5,
            overlay_alpha: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub bind: String,
    pub port: u16,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

/// Parameters of every stage plus the workspace location and global seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub workspace: PathBuf,
    /// Added to every stage seed.
    pub seed: u64,
    pub generate: GenerateConfig,
    pub reduce: ReduceConfig,
    pub doe: DoePlan,
    pub build3d: Build3dConfig,
    pub simulate: SimulateConfig,
    pub train: TrainStageConfig,
    pub explain: ExplainConfig,
    pub serve: ServeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            workspace: PathBuf::from("workspace"),
            seed: 0,
            generate: GenerateConfig::default(),
            reduce: ReduceConfig::default(),
            doe: DoePlan::default(),
            build3d: Build3dConfig::default(),
            simulate: SimulateConfig::default(),
            train: TrainStageConfig::default(),
            explain: ExplainConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses a JSON config; unknown keys are rejected. Relative section paths
    /// are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.build3d.spoke_section, &mut cfg.build3d.rim_section].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.generate;
        if g.n_references == 0 {
            return Err(Error::validation("generate.n_references must be >= 1"));
        }
        g.domain.validate()?;
        g.levels.validate()?;
        g.topopt.validate()?;
        crate::designspace::DesignImage::zeros("probe", crate::designspace::Provenance::Test, g.domain.grid)?;
        if self.reduce.autoencoder.input_size != g.domain.grid {
            return Err(Error::validation(format!(
                "reduce.autoencoder.input_size ({}) must equal generate.domain.grid ({})",
                self.reduce.autoencoder.input_size, g.domain.grid
            )));
        }
        if self.reduce.rotation_copies == 0 {
            return Err(Error::validation("reduce.rotation_copies must be >= 1"));
        }
        self.reduce.autoencoder.validate()?;
        self.reduce.train.validate()?;
        if self.doe.n_samples < 2 {
            return Err(Error::validation("doe.n_samples must be >= 2"));
        }
        self.build3d.wheel.validate()?;
        self.simulate.material.validate()?;
        self.train.surrogate.validate()?;
        let e = &self.explain;
        if e.k_clusters == 0 || e.k_frequency == 0 {
            return Err(Error::validation("explain cluster counts must be >= 1"));
        }
        if !(0.0..=1.0).contains(&e.overlay_alpha) {
            return Err(Error::validation("explain.overlay_alpha must be in [0, 1]"));
        }
        Ok(())
    }

    /// Workspace root: the environment override if set, else the configured path.
    pub fn workspace_root(&self) -> PathBuf {
        match std::env::var_os(WORKSPACE_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.workspace.clone(),
        }
    }

    pub(crate) fn seed_for(&self, block_seed: u64) -> u64 {
        block_seed.wrapping_add(self.seed)
    }
}
