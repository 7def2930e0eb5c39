use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hybrid_mlmc::experiment::{emit_outputs, load_config, run_experiment, TableRow};
use hybrid_mlmc::mlmc::CostMode;

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Measured,
    Proxy,
}

/// Run an MLMC hybrid transport experiment from a TOML config.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated tolerances, replacing the config's list.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Histories per sample on every level.
    #[arg(long)]
    histories: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long, value_enum)]
    cost_mode: Option<CostArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> hybrid_mlmc::Result<()> {
    let mut config = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.mlmc.seed = seed;
    }
    if let Some(eps) = cli.epsilon {
        config.mlmc.epsilon = eps;
    }
    if let Some(k) = cli.histories {
        config.mlmc.histories = vec![k];
        config.mlmc.level_histories = None;
    }
    if let Some(p) = cli.parallelism {
        config.mlmc.parallelism = p;
    }
    if let Some(mode) = cli.cost_mode {
        config.mlmc.cost_mode = match mode {
            CostArg::Measured => CostMode::Measured,
            CostArg::Proxy => CostMode::Proxy,
        };
    }
    if let Some(out) = cli.out {
        config.output.directory = out;
    }
    config.validate()?;

    let bundle = run_experiment(&config)?;
    println!("{}", TableRow::header(config.grid.levels + 1));
    for row in bundle.rows() {
        println!("{row}");
    }
    emit_outputs(&bundle, &config.output.directory)?;
    println!("wrote results to {}", config.output.directory.display());
    Ok(())
}
