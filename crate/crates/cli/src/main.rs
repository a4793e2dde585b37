use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gfl_cli::config::{ConfigError, Experiment, ExperimentConfig};
use gfl_cli::run::{run, Outcome};

/// Run one experiment. Outputs (CSV, JSON, SVG and a run manifest) go to
/// `--out`, the config's `output_dir`, or `out/<experiment>`.
#[derive(Debug, Parser)]
#[command(name = "gfl", version)]
struct Cli {
    experiment: Experiment,
    /// TOML config; defaults are used for every key it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(cli.experiment),
    };
    if cfg.experiment != cli.experiment {
        return Err(ConfigError::Field {
            field: "experiment".into(),
            message: format!("config is for {}, command line asks for {}", cfg.experiment.name(), cli.experiment.name()),
        });
    }
    if let Some(s) = cli.seed {
        cfg.seeds = Some(vec![s]);
    }
    if cli.steps.is_some() {
        cfg.steps = cli.steps;
    }
    if cli.out.is_some() {
        cfg.output_dir = cli.out.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(outcome: &Outcome) {
    match outcome {
        Outcome::Poly(s) => {
            for r in &s.seeds {
                println!(
                    "seed {}: ema loss {:.3e} -> {:.3e}, |theta| {:.3} -> {:.3}",
                    r.seed, r.initial_ema_loss, r.final_ema_loss, r.initial_theta_norm, r.final_theta_norm
                );
            }
        }
        Outcome::Flow(f) => println!(
            "verdict {:?} at t = {} ({} steps); loss {:.3e} -> {:.3e}, |theta| {:.3} -> {:.3}",
            f.verdict.tag, f.t_final, f.accepted_steps, f.initial_loss, f.final_loss, f.initial_theta_norm, f.final_theta_norm
        ),
        Outcome::Sweep(rows) => {
            for r in rows {
                println!("j = {:e}: sup error {:.3e}, |theta| {:.3e}, width {}", r.j, r.sup_error, r.theta_norm, r.width);
            }
        }
        Outcome::Kolmogorov(e) => {
            for r in &e.seeds {
                println!(
                    "seed {}: relative mse {:.3e} -> {:.3e}, |theta| {:.3} -> {:.3}",
                    r.seed, r.baseline_relative_mse, r.final_relative_mse, r.initial_theta_norm, r.final_theta_norm
                );
            }
        }
        Outcome::Mnist(m) => {
            for r in &m.seeds {
                println!(
                    "seed {}: train loss {:.3e} -> {:.3e}, test accuracy {:.4}, |theta| {:.3} -> {:.3}",
                    r.seed, r.initial_train_loss, r.final_train_loss, r.final_test_accuracy, r.initial_theta_norm, r.final_theta_norm
                );
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok((outcome, dir)) => {
            report(&outcome);
            println!("outputs in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
