use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use embedleak_harness::{resolve_data_root, AttackKind, ExperimentConfig, HarnessResult, Pipeline};

#[derive(Parser)]
#[command(name = "embedleak", version, about = "Inference attacks on whole-graph embeddings")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(short, long, global = true, default_value = "configs/smoke.toml")]
    config: PathBuf,
    /// Root directory holding TUDataset folders.
    #[arg(short, long, global = true)]
    data_root: Option<PathBuf>,
    /// Directory under which run directories are created.
    #[arg(short, long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Overrides the configuration's base seed.
    #[arg(short, long, global = true)]
    seed: Option<u64>,
    /// Override the number of repeated runs.
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load datasets and write their summary.
    Ingest,
    /// Train and checkpoint the target models.
    TrainTarget,
    /// Run one attack against the target models.
    Attack {
        /// property, subgraph or reconstruct
        kind: AttackKind,
    },
    /// Sweep the Laplace defense.
    Defend,
    /// Run the transfer experiments.
    Transfer,
    /// Rebuild the report and plots from the stored tables.
    Report,
    /// Every stage the configuration enables, then the report.
    Run,
}

fn execute(cli: Cli) -> HarnessResult<()> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = cli.runs {
        cfg.runs = runs;
    }
    let data_root = resolve_data_root(cli.data_root, &cfg);
    let mut p = Pipeline::new(cfg, data_root, &cli.out)?;
    match cli.command {
        Command::Ingest => {
            for d in p.ingest()? {
                println!("{}: {} graphs, {} classes, {:.2} nodes, {:.2} edges", d.name, d.graphs, d.classes, d.avg_nodes, d.avg_edges);
            }
        }
        Command::TrainTarget => {
            for r in p.train_targets()? {
                println!("{}/{}/run{}: test accuracy {:.4}", r.dataset, r.pooling, r.run, r.test_accuracy);
            }
        }
        Command::Attack { kind } => match kind {
            AttackKind::Property => drop(p.property_attack()?),
            AttackKind::Subgraph => drop(p.subgraph_attack()?),
            AttackKind::Reconstruct => drop(p.reconstruction_attack()?),
        },
        Command::Defend => drop(p.defense()?),
        Command::Transfer => drop(p.transfer()?),
        Command::Report => {
            print!("{}", embedleak_harness::write_report(p.store())?.markdown);
        }
        Command::Run => {
            print!("{}", p.run_all()?.markdown);
        }
    }
    eprintln!("results in {}", p.store().root().display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
