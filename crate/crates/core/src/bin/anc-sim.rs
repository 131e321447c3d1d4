//! Monte-Carlo BER sweep for the two-way relay decoder.
//!
//! Exit codes: 0 on success, 1 on a configuration error, 2 on an I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use anc::harness::{emit_plot, sweep, Grid, SweepConfig};
use anc::{HarnessError, Strategy};
use clap::error::ErrorKind;
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "anc-sim", version, about = "BER sweep over SNR x SIR for analog network coding with MSK")]
struct Cli {
    /// SNR grid in dB as min:max:step
    #[arg(long, default_value = "20:30:2")]
    snr: String,
    /// SIR grid in dB as min:max:step
    #[arg(long, default_value = "-3:3:1", allow_hyphen_values = true)]
    sir: String,
    /// Payload bits per packet
    #[arg(long, default_value_t = 2048)]
    packet_bits: usize,
    /// Pilot bits at each end of a packet
    #[arg(long, default_value_t = 64)]
    pilot_bits: usize,
    /// Mean overlap fraction between the two packets
    #[arg(long, default_value_t = 0.8)]
    overlap: f64,
    /// Trials per grid point
    #[arg(long, default_value_t = 120)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "geometric", value_parser = parse_strategy)]
    strategy: Strategy,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG heatmap path
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Worker threads (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: anc::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let cfg = SweepConfig {
        snr_db: cli.snr.parse::<Grid>()?,
        sir_db: cli.sir.parse::<Grid>()?,
        packet_bits: cli.packet_bits,
        pilot_bits: cli.pilot_bits,
        mean_overlap: cli.overlap,
        trials_per_point: cli.trials,
        master_seed: cli.seed,
        strategy: cli.strategy,
        out_path: Some(cli.out.clone()),
    };
    cfg.validate()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(HarnessError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let records = pool.install(|| sweep(&cfg))?;

    for r in &records {
        log::info!(
            "snr {:>5} sir {:>5} {:<5} ber {:.3e} ({}/{})",
            r.snr_db,
            r.sir_db,
            r.party,
            r.ber,
            r.bit_errors,
            r.bits_total
        );
    }
    if let Some(path) = &cli.plot {
        emit_plot(&records, path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config(_) => ExitCode::from(1),
                HarnessError::Io { .. } | HarnessError::Csv { .. } => ExitCode::from(2),
            }
        }
    }
}
