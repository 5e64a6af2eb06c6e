use std::path::{Path, PathBuf};
use std::process::ExitCode;

use activeval::datagen::DatasetTable;
use activeval::harness::{self, ExperimentConfig, Seeds};
use activeval::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "activeval", version, about = "Active evaluation of agents across tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Number of seeds, starting at the generator seed.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Window of the windowed GRE curve.
    #[arg(long)]
    window: Option<usize>,
    /// Log scale on both plot axes.
    #[arg(long)]
    log_log: bool,
    /// Write final ratings to ratings.csv.
    #[arg(long)]
    ratings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm over every seed.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the configured grid of dispersions, cutoffs and algorithms.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check how well Kemeny rankings of task rankings recover the ground truth.
    KemenyCheck {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Lint a `task,agent,mean,stddev` dataset.
    ValidateData { csv: PathBuf },
    /// Rebuild plots of a results directory from its CSVs.
    Report {
        dir: PathBuf,
        #[arg(long)]
        log_log: bool,
    },
}

fn load(path: &Path, o: &Overrides) -> activeval::Result<ExperimentConfig> {
    let mut c = ExperimentConfig::from_file(path)?;
    if let Some(s) = o.seeds {
        c.seeds = Seeds::Count(s);
    }
    if let Some(h) = o.horizon {
        c.horizon = h;
    }
    if let Some(out) = &o.out {
        c.output = out.clone();
    }
    if let Some(w) = o.workers {
        c.workers = w;
    }
    if let Some(w) = o.window {
        c.window = w;
    }
    c.log_log |= o.log_log;
    c.export_ratings |= o.ratings;
    c.validate()?;
    Ok(c)
}

fn print_agre(report: &harness::AggregateReport) {
    for e in &report.agre {
        println!("{:<28} k={:<3} agre={:.6} ci95={:.6}", e.algorithm, e.k, e.agre, e.ci95);
    }
}

fn execute(cmd: Command) -> activeval::Result<()> {
    match cmd {
        Command::Run { config, overrides } => {
            let c = load(&config, &overrides)?;
            let report = harness::run_and_report(&c)?;
            print_agre(&report);
            println!("wrote {}", c.output.display());
        }
        Command::Sweep { config, overrides } => {
            let c = load(&config, &overrides)?;
            for cell in harness::run_sweep(&c)? {
                println!("phi = {}", cell.phi);
                print_agre(&cell.report);
            }
            println!("wrote {}", c.output.display());
        }
        Command::KemenyCheck { config, overrides } => {
            let c = load(&config, &overrides)?;
            let (recs, _) = harness::write_kemeny_reports(&c, &c.output)?;
            for r in recs {
                println!(
                    "phi={} exact={}/{} mean_kn={:.6} mean_ksd={:.4}",
                    r.phi, r.exact, r.instances, r.mean_kn, r.mean_ksd
                );
            }
            println!("wrote {}", c.output.display());
        }
        Command::ValidateData { csv } => {
            let table = DatasetTable::read_csv(&csv)?;
            let constant = table.constant_tasks();
            if !constant.is_empty() {
                let names: Vec<&str> = constant.iter().map(|&v| table.tasks[v].as_str()).collect();
                return Err(Error::Data(format!("tasks with identical means: {}", names.join(", "))));
            }
            println!("{}: {} tasks, {} agents, complete", csv.display(), table.tasks.len(), table.agents.len());
        }
        Command::Report { dir, log_log } => {
            for p in harness::rebuild_plots(&dir, log_log)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Data(_) => 2,
        Error::Contract(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
