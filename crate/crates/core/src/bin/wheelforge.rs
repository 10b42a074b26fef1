use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use wheelforge::studio::{export_report, run_stage, serve, PipelineConfig, Stage, StageOutcome, Workspace};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Generate,
    Reduce,
    Doe,
    Build3d,
    Simulate,
    Train,
    Explain,
    All,
    Report,
    Serve,
}

/// Generative wheel design pipeline.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    /// Stage to run, `all`, `report` or `serve`.
    #[arg(value_enum)]
    command: Command,
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Rerun even if inputs are unchanged.
    #[arg(long)]
    force: bool,
    /// Overrides the global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the service port.
    #[arg(long)]
    port: Option<u16>,
}

fn print_outcome(o: &StageOutcome) {
    let m = &o.manifest;
    if o.skipped {
        println!("{:<9} skipped  outputs {}", o.stage, &m.outputs_hash[..12]);
    } else {
        println!("{:<9} ran      outputs {}  {:.1}s", o.stage, &m.outputs_hash[..12], m.seconds);
    }
}

fn run(cli: Cli) -> wheelforge::Result<()> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.port {
        cfg.serve.port = p;
    }
    let ws = Workspace::new(cfg.workspace_root());
    let stage = match cli.command {
        Command::Generate => Stage::Generate,
        Command::Reduce => Stage::Reduce,
        Command::Doe => Stage::Doe,
        Command::Build3d => Stage::Build3d,
        Command::Simulate => Stage::Simulate,
        Command::Train => Stage::Train,
        Command::Explain => Stage::Explain,
        Command::All => {
            for s in Stage::ALL {
                print_outcome(&run_stage(&cfg, &ws, s, cli.force)?);
            }
            return Ok(());
        }
        Command::Report => {
            let out = ws.root().join("report");
            let index = export_report(&ws, &out)?;
            println!("report written to {} ({} cluster panels)", out.display(), index.cluster_panels.len());
            return Ok(());
        }
        Command::Serve => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| wheelforge::Error::Io { path: "tokio runtime".into(), source: e })?;
            return rt.block_on(serve(&cfg));
        }
    };
    print_outcome(&run_stage(&cfg, &ws, stage, cli.force)?);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
