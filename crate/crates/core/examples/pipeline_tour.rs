//! Runs every pipeline stage on a configuration file in a fresh workspace,
//! runs it again to show the cached stages being skipped, and exports the report.
//!
//! cargo run --example pipeline_tour -- [config.json] [workspace_dir]

use std::path::PathBuf;
use std::time::Instant;

use wheelforge::studio::{export_report, run_all, PipelineConfig, Workspace};

fn main() -> wheelforge::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.json"));
    let mut cfg = PipelineConfig::load(&config)?;
    if let Some(dir) = args.next() {
        cfg.workspace = dir.into();
    } else {
        cfg.workspace = std::env::temp_dir().join("wheelforge-tour");
    }
    let ws = Workspace::new(cfg.workspace.clone());
    println!("workspace {}", ws.root().display());
    for pass in 1..=2 {
        let t = Instant::now();
        for o in run_all(&cfg, &ws, false)? {
            println!(
                "  {:<9} {:<8} {}",
                o.stage,
                if o.skipped { "skipped" } else { "ran" },
                &o.manifest.outputs_hash[..12]
            );
        }
        println!("pass {pass}: {:.1}s", t.elapsed().as_secs_f64());
    }
    let index = export_report(&ws, &ws.root().join("report"))?;
    println!("report: top candidate {}", index.top_candidate.as_deref().unwrap_or("none"));
    for c in ws.candidates()?.iter().take(3) {
        println!("  {} rank {} cluster {}: {:.1} Hz, {:.2} kg", c.id, c.rank, c.cluster, c.frequency_hz, c.mass_kg);
    }
    Ok(())
}
