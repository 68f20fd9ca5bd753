use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use switchdiff::config::{preset, preset_source, ExperimentConfig, PRESET_NAMES};
use switchdiff::harness::{
    compare, report, run_experiment, run_map_analysis, MAP_ORACLE_TOLERANCE,
};
use switchdiff::metrics::{write_reports, MetricReport};

#[derive(Parser)]
#[command(
    name = "switchdiff",
    version,
    about = "Switching differentiator experiments"
)]
struct Cli {
    /// Output directory; overrides the config's `output.dir`.
    #[arg(long, global = true, env = "SWITCHDIFF_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config file or preset name.
    Run { config: String },
    /// Tabulate the error return map, optionally against the ODE oracle.
    Map {
        /// Comma-separated rho = L_delta / k values.
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 1.0, 100.0])]
        rho: Vec<f64>,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1000.0])]
        k: Vec<f64>,
        /// Comma-separated e_sigma values; default is a symmetric log grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        e: Vec<f64>,
        /// Compare every point with brute-force integration.
        #[arg(long)]
        oracle: bool,
        /// Output CSV; defaults to `<out-dir>/map.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run several presets or configs on a shared signal and tabulate them.
    Compare {
        #[arg(required = true, num_args = 2..)]
        presets: Vec<String>,
    },
    /// Recompute the metrics of a trajectory CSV and print them as CSV.
    Report { trajectory: PathBuf },
    /// List presets, or print one preset's TOML.
    Presets { name: Option<String> },
}

fn load_config(arg: &str) -> Result<ExperimentConfig> {
    let path = Path::new(arg);
    if path.is_file() {
        return ExperimentConfig::load(path).with_context(|| format!("loading {arg}"));
    }
    if PRESET_NAMES.contains(&arg) {
        return Ok(preset(arg)?);
    }
    bail!(
        "`{arg}` is neither a config file nor a preset ({})",
        PRESET_NAMES.join(", ")
    )
}

fn print_summary(reports: &[MetricReport]) {
    println!(
        "{:<12} {:>5} {:>12} {:>14} {:>14} {:>12}",
        "estimate", "order", "settling[s]", "peak", "chatter[/s]", "rms"
    );
    for r in reports {
        println!(
            "{:<12} {:>5} {:>12} {:>14.6e} {:>14.6e} {:>12.4e}",
            r.estimate,
            r.order,
            r.settling_time
                .map_or_else(|| "none".into(), |t| format!("{t:.4}")),
            r.peak_abs,
            r.chattering_index,
            r.rms_error
        );
    }
}

fn default_e_grid() -> Vec<f64> {
    let mags: Vec<f64> = (0..=20)
        .map(|j| 10f64.powf(-3.0 + 5.0 * j as f64 / 20.0))
        .collect();
    let mut grid: Vec<f64> = mags.iter().rev().map(|m| -m).collect();
    grid.push(0.0);
    grid.extend(mags);
    grid
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = |fallback: &Path| {
        cli.out_dir
            .clone()
            .unwrap_or_else(|| fallback.to_path_buf())
    };
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(config)?;
            let dir = out_dir(&cfg.output.dir);
            let outcome = run_experiment(&cfg, &dir)?;
            print_summary(&outcome.reports);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Map {
            rho,
            k,
            e,
            oracle,
            output,
        } => {
            let e = if e.is_empty() {
                default_e_grid()
            } else {
                e.clone()
            };
            let path = output
                .clone()
                .unwrap_or_else(|| out_dir(Path::new("out")).join("map.csv"));
            let rows = run_map_analysis(rho, k, &e, *oracle, &path)?;
            println!("{} rows", rows.len());
            if let Some(worst) = rows
                .iter()
                .filter_map(|r| r.oracle)
                .map(|o| o.rel_err)
                .reduce(f64::max)
            {
                println!("max oracle rel err {worst:.3e} (tolerance {MAP_ORACLE_TOLERANCE:e})");
                if worst > MAP_ORACLE_TOLERANCE {
                    bail!("closed form and oracle disagree beyond tolerance");
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Compare { presets } => {
            let configs = presets
                .iter()
                .map(|p| load_config(p))
                .collect::<Result<Vec<_>>>()?;
            let dir = out_dir(&configs[0].output.dir);
            let outcome = compare(&configs, &dir)?;
            for m in &outcome.members {
                println!("[{}]", m.config.name);
                print_summary(&m.reports);
            }
            println!("wrote {}", outcome.table.display());
            for p in &outcome.plots {
                println!("wrote {}", p.display());
            }
        }
        Command::Report { trajectory } => {
            let outcome =
                report(trajectory).with_context(|| format!("reading {}", trajectory.display()))?;
            let comment = outcome.config.map(|c| c.header()).unwrap_or_default();
            write_reports(&outcome.reports, io::stdout().lock(), &comment)?;
        }
        Command::Presets { name } => match name {
            Some(n) => print!("{}", preset_source(n)?),
            None => {
                for n in PRESET_NAMES {
                    println!("{n}\t{}", preset(n)?.description);
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
