use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use renewal_extremes::harness::{
    self, apply_overrides, parse_t_list, read_results_csv, ExperimentConfig,
};
use renewal_extremes::Result;

#[derive(Parser)]
#[command(name = "renewal-extremes", version, about = "Monte Carlo checks of limit laws for extremes of renewal-spaced observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results, timings and plot data.
    Simulate(RunArgs),
    /// Evaluate the experiment's limit law on a quantile grid.
    Limit(RunArgs),
    /// Run an experiment and print one pass/fail line per row.
    Verify(RunArgs),
    /// Summarize a previously written results.csv.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated horizons.
    #[arg(long = "t")]
    t: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding results.csv.
    #[arg(long)]
    out: PathBuf,
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, usize)> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    let t = args.t.as_deref().map(parse_t_list).transpose()?;
    apply_overrides(&mut config, args.seed, args.reps, t, args.out.clone())?;
    let workers = args
        .workers
        .or(config.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok((config, workers))
}

fn print_rows(rows: &[harness::ResultRow]) {
    for r in rows {
        println!(
            "{} {} t={} {}: empirical={} limit={} ks={} tol={}",
            if r.pass { "PASS" } else { "FAIL" },
            r.kind.name(),
            r.t,
            r.statistic,
            r.empirical,
            r.limit,
            r.ks,
            r.tolerance
        );
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => {
            let (config, workers) = load(&args)?;
            let out = harness::run(&config, workers)?;
            harness::write_outputs(&config.output, &out)?;
            println!(
                "wrote {} rows to {}",
                out.rows.len(),
                config.output.join("results.csv").display()
            );
            Ok(out.all_pass())
        }
        Command::Verify(args) => {
            let (config, workers) = load(&args)?;
            let out = harness::run(&config, workers)?;
            harness::write_outputs(&config.output, &out)?;
            print_rows(&out.rows);
            Ok(out.all_pass())
        }
        Command::Limit(args) => {
            let (config, _) = load(&args)?;
            let limit = harness::limit_reference(&config)?;
            fs::create_dir_all(&config.output)?;
            let path = config.output.join("limit_grid.csv");
            harness::write_limit_grid(&limit, fs::File::create(&path)?)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Report(args) => {
            let rows = read_results_csv(&args.out.join("results.csv"))?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            for r in &rows {
                println!(
                    "{} {} t={} {} ks={} tol={}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.kind,
                    r.t,
                    r.statistic,
                    r.ks,
                    r.tolerance
                );
            }
            println!("{} rows, {} failed", rows.len(), failed);
            Ok(failed == 0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
