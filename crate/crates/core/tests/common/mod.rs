#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use wheelforge::studio::{run_all, PipelineConfig, Workspace};

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn tiny_config(root: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::load(&fixture_path("tiny.json")).unwrap();
    cfg.workspace = root.to_path_buf();
    cfg
}

/// One fully run tiny workspace per test binary.
pub fn tiny_workspace() -> &'static (PipelineConfig, Workspace) {
    static WS: OnceLock<(PipelineConfig, Workspace)> = OnceLock::new();
    WS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        let cfg = tiny_config(&dir);
        let ws = Workspace::new(&dir);
        run_all(&cfg, &ws, false).unwrap();
        (cfg, ws)
    })
}
