use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use efgsolve::harness::{run_experiment, sweep, ConfigBuilder, SweepGrid};

/// Run equilibrium solvers on Kuhn or Leduc poker and log exploitability to CSV.
#[derive(Debug, Parser)]
#[command(name = "efgsolve", version)]
struct Cli {
    /// kuhn or leduc.
    #[arg(long)]
    game: Option<String>,

    /// cfr, mccfr, xfp, ed, ed_nn, neurd, neurd_nn, qpg, rpg, rmpg, rcfr, deep_cfr, nfsp or psro.
    #[arg(long)]
    algorithm: Option<String>,

    /// `key = value` config file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    iterations: Option<u64>,

    #[arg(long)]
    eval_every: Option<u64>,

    #[arg(long)]
    seed: Option<u64>,

    /// CSV output path, or the output directory when sweeping.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Grid file of `key = a | b | c` lines.
    #[arg(long)]
    sweep: Option<PathBuf>,

    /// paper or kuhn_desk.
    #[arg(long)]
    preset: Option<String>,

    /// Extra `key=value` assignment; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Concurrent runs during a sweep.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,

    /// Only log warnings and errors.
    #[arg(long)]
    quiet: bool,
}

fn run(cli: Cli) -> efgsolve::Result<()> {
    let mut builder = ConfigBuilder::new();
    if let Some(path) = &cli.config {
        builder = builder.file(path)?;
    }
    for pair in &cli.overrides {
        builder = builder.set_pair(pair)?;
    }
    let flags = [
        ("game", cli.game.clone()),
        ("algorithm", cli.algorithm.clone()),
        ("preset", cli.preset.clone()),
        ("iterations", cli.iterations.map(|v| v.to_string())),
        ("eval_every", cli.eval_every.map(|v| v.to_string())),
        ("seed", cli.seed.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            builder = builder.set(key, value);
        }
    }

    if let Some(grid_path) = &cli.sweep {
        let grid = SweepGrid::from_file(grid_path)?;
        let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
        let outcomes = sweep(&builder, &grid, &out_dir, cli.parallelism)?;
        let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
        log::info!("sweep finished: {} runs, {failed} failed, index at {}", outcomes.len(), out_dir.join("index.csv").display());
        for o in outcomes.iter().filter(|o| o.result.is_err()) {
            log::warn!("run {} failed: {}", o.run_id, o.result.as_ref().unwrap_err());
        }
        return Ok(());
    }

    if let Some(out) = &cli.out {
        builder = builder.set("out", out.display());
    }
    let config = builder.build()?;
    let summary = run_experiment(&config)?;
    if !cli.quiet {
        let last = summary.last();
        println!(
            "{} {}: iteration {} exploitability {:.6} (best {:.6} at iteration {})",
            config.algorithm, config.game, last.iteration, last.exploitability, summary.best_exploitability, summary.best_iteration
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
