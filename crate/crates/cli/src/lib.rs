//! `sigtune`: compute cost-effective sampling rates for signature ensembles
//! and replay them against synthetic multi-year schedules.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sigtune::report::{day_rows_csv, summary_csv};
use sigtune::schedule::{generate_random_schedule, parse_schedule, write_schedule, ScheduleEntry};
use sigtune::sim::{sweep, CellReport, SimConfig};

pub mod config;
pub mod plot;
mod selftest;

use config::{OverlapMode, RunConfig};

#[derive(Parser)]
#[command(
    name = "sigtune",
    version,
    about = "Sampling-rate optimization and lifecycle replay for classifier ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation (single theta/beta) and write per-day and summary CSVs.
    Simulate(RunArgs),
    /// Run the full theta x beta x overlap grid and write one summary plus
    /// per-cell day CSVs.
    Sweep(RunArgs),
    /// Emit a synthetic random schedule file.
    GenSchedule {
        /// Number of signatures to generate.
        #[arg(long)]
        signatures: usize,
        /// Schedule horizon in days.
        #[arg(long)]
        days: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in oracle checks (selection, inference, rate formulas).
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Schedule CSV (signature_id,intro_day,removal_day,severity,update_days).
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Output directory for reports and plots.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated theta values (FP volume as a fraction of TP volume).
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Comma-separated beta values (false-negative cost relative to a FP).
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    overlap: Option<OverlapMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Emit SVG plots next to the CSVs.
    #[arg(long)]
    plots: Option<String>,
    /// Re-optimize rates every N days.
    #[arg(long = "update-period")]
    update_period: Option<i64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(schedule) = &self.schedule {
            config.schedule = Some(schedule.clone());
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(thetas) = &self.theta {
            config.thetas = thetas.clone();
        }
        if let Some(betas) = &self.beta {
            config.betas = betas.clone();
        }
        if let Some(overlap) = self.overlap {
            config.overlap = overlap;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(plots) = &self.plots {
            config.set("plots", plots)?;
        }
        if let Some(period) = self.update_period {
            config.update_period = period;
        }
        if config.thetas.is_empty() || config.betas.is_empty() {
            bail!("theta and beta lists must be nonempty");
        }
        Ok(config)
    }
}

fn load_schedule(config: &RunConfig) -> Result<Vec<ScheduleEntry>> {
    let Some(path) = &config.schedule else {
        bail!("no schedule given; pass --schedule or set `schedule` in the config file");
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading schedule {}", path.display()))?;
    Ok(parse_schedule(&text)?)
}

fn cell_file_name(cell: &CellReport) -> String {
    format!(
        "days_theta{}_beta{}_{}.csv",
        cell.theta,
        cell.beta,
        if cell.overlap { "on" } else { "off" }
    )
}

fn write_outputs(out: &Path, cells: &[CellReport], plots: bool) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("summary.csv"), summary_csv(cells))?;
    for cell in cells {
        std::fs::write(out.join(cell_file_name(cell)), day_rows_csv(&cell.report))?;
    }
    if plots {
        let emitted = [
            ("removal.svg", plot::removal_scatter(cells)),
            ("precision_recall.svg", plot::precision_recall_panels(cells)),
            ("solve_times.svg", plot::solve_time_cdf(cells)),
        ];
        for (name, svg) in emitted {
            match svg {
                Some(svg) => std::fs::write(out.join(name), svg)?,
                None => eprintln!("warning: skipping {name}: not enough data to plot"),
            }
        }
    }
    Ok(())
}

fn print_summary_table(cells: &[CellReport]) {
    let fmt = |v: Option<f64>| v.map_or("   NA".to_string(), |x| format!("{x:5.2}"));
    println!("theta  beta  overlap  tp_removed%  fp_removed%  precision  recall  fallbacks");
    for c in cells {
        println!(
            "{:<6} {:<5} {:<8} {:>11} {:>12} {:>10} {:>7} {:>10}",
            c.theta,
            c.beta,
            if c.overlap { "on" } else { "off" },
            fmt(c.summary.tp_removed_pct),
            fmt(c.summary.fp_removed_pct),
            fmt(c.summary.precision),
            fmt(c.summary.recall),
            c.summary.fallback_count,
        );
    }
}

fn run_cells(config: &RunConfig, base: &SimConfig) -> Result<Vec<CellReport>> {
    let entries = load_schedule(config)?;
    let cells = sweep(&entries, base, &config.grid())?;
    Ok(cells)
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => {
            let config = args.resolve()?;
            if config.thetas.len() != 1
                || config.betas.len() != 1
                || config.overlap == OverlapMode::Both
            {
                bail!("simulate runs one cell; pass single --theta and --beta values and overlap on|off (use `sweep` for grids)");
            }
            let cells = run_cells(&config, &config.to_sim_config())?;
            write_outputs(&config.out, &cells, config.plots)?;
            print_summary_table(&cells);
            println!("reports written to {}", config.out.display());
        }
        Command::Sweep(args) => {
            let config = args.resolve()?;
            let cells = run_cells(&config, &config.to_sim_config())?;
            write_outputs(&config.out, &cells, config.plots)?;
            print_summary_table(&cells);
            println!("{} cells written to {}", cells.len(), config.out.display());
        }
        Command::GenSchedule {
            signatures,
            days,
            seed,
            out,
        } => {
            let entries = generate_random_schedule(signatures, days, seed);
            let text = write_schedule(&entries);
            match out {
                Some(path) => {
                    std::fs::write(&path, text)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {} signatures to {}", entries.len(), path.display());
                }
                None => print!("{text}"),
            }
        }
        Command::Selftest => selftest::run()?,
    }
    Ok(())
}
