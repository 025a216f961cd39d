use std::io::stdout;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use cmaxpp_cli::{
    run_config, sweep_schedules, write_oracle, ExperimentConfig, RepetitionSummary, ScheduleGrid,
};

#[derive(Parser)]
#[command(version, about = "Run planning-with-inaccurate-model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a config once per schedule in a schedule grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        schedules: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print exact model and true optimal values for one instance as CSV.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Instance seed; defaults to the first seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"))
}

fn print_summary(summary: &[RepetitionSummary]) {
    println!("{:>4} {:>8} {:>10} {:>8}", "rep", "success", "steps", "se");
    for s in summary {
        println!(
            "{:>4} {:>7.0}% {:>10} {:>8}",
            s.repetition,
            s.success_pct,
            fmt(s.mean_steps),
            fmt(s.se_steps)
        );
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let report = run_config(&config, &out)
                .with_context(|| format!("results under {}", out.display()))?;
            print_summary(&report.summary);
        }
        Command::Sweep {
            config,
            schedules,
            out,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let grid = ScheduleGrid::load(&schedules)?;
            for (name, report) in sweep_schedules(&config, &grid, &out)? {
                let last = report.summary.last().expect("at least one repetition");
                println!(
                    "{name}: {:.0}% at repetition {}",
                    last.success_pct, last.repetition
                );
            }
        }
        Command::Oracle { config, seed } => {
            let config = ExperimentConfig::load(&config)?;
            let seed = seed.unwrap_or(config.seeds[0]);
            write_oracle(&config, seed, stdout().lock())?;
        }
    }
    Ok(())
}
