use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gapscan::budget::ErrorBudget;
use gapscan::cli::{self, SpectrumTable, EXIT_CONFIG};
use gapscan::pauli::Hamiltonian;
use gapscan::peaks::{PeakSignal, DEFAULT_THRESHOLD};
use gapscan::{Error, Result};

#[derive(Parser)]
#[command(name = "gapscan", version, about = "Energy gaps and eigenvalues from cooled time-evolution data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scan described by a config file and write its artifacts.
    Scan { config: PathBuf },
    /// Check a config file and list every violation.
    Validate { config: PathBuf },
    /// Detect peaks in a spectrum CSV and print the report as JSON.
    Peaks {
        spectrum: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value = "real", value_parser = ["real", "magnitude"])]
        signal: String,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the cutoff and shot-noise error budget as CSV.
    Budget {
        #[arg(long)]
        a: f64,
        #[arg(long = "T")]
        t_max: f64,
        #[arg(long)]
        eps: Option<f64>,
        /// Pauli-sum observable whose coefficients enter the shot-noise bound.
        #[arg(long, requires = "shots")]
        observable: Option<PathBuf>,
        #[arg(long, requires = "observable")]
        shots: Option<u64>,
    },
    /// Track a gap peak over a list of cutoff times and write sweep.csv.
    SweepCutoff {
        config: PathBuf,
        #[arg(long = "T-list", value_delimiter = ',', num_args = 1.., required = true)]
        t_list: Vec<f64>,
        /// Gap to track; defaults to the first gap between populated levels.
        #[arg(long)]
        gap: Option<f64>,
        /// Half-width of the window searched around the gap.
        #[arg(long, default_value_t = 0.5)]
        window: f64,
    },
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Scan { config } => {
            let cfg = cli::load_config(&config)?;
            let summary = cli::run(&cfg)?;
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
            if let Some(p) = &summary.peaks {
                println!("{} peaks above threshold {}", p.peaks.len(), p.threshold);
            }
        }
        Command::Validate { config } => {
            let diags = cli::check_config(&config)?;
            if diags.is_empty() {
                println!("{}: ok", config.display());
            } else {
                for d in &diags {
                    println!("{}: {d}", config.display());
                }
                return Ok(EXIT_CONFIG);
            }
        }
        Command::Peaks { spectrum, threshold, signal, out } => {
            let text = std::fs::read_to_string(&spectrum).map_err(|e| Error::Io {
                path: spectrum.display().to_string(),
                source: e,
            })?;
            let signal = if signal == "magnitude" { PeakSignal::Magnitude } else { PeakSignal::Real };
            let report = SpectrumTable::parse_csv(&text)?.peaks(threshold, signal)?;
            write_out(out.as_deref(), &(report.to_json()? + "\n"))?;
        }
        Command::Budget { a, t_max, eps, observable, shots } => {
            let coeffs = match &observable {
                Some(p) => Some(Hamiltonian::load(p)?.coefficient_magnitudes()),
                None => None,
            };
            let shot_terms = coeffs.as_deref().zip(shots);
            print!("{}", ErrorBudget::new(a, t_max, eps, shot_terms)?.to_csv());
        }
        Command::SweepCutoff { config, t_list, gap, window } => {
            let cfg = cli::load_config(&config)?;
            let (_, csv) = cli::sweep(&cfg, &t_list, gap, window)?;
            std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::Io {
                path: cfg.output_dir.display().to_string(),
                source: e,
            })?;
            let path = cfg.output_dir.join("sweep.csv");
            write_out(Some(&path), &csv)?;
            print!("{csv}");
        }
    }
    Ok(cli::EXIT_OK)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match execute(args.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
