//! Experiment runners. Each writes its outputs plus `manifest.json` into the
//! configured output directory and returns an in-memory summary.

mod flow;
mod kolmogorov;
mod mnist;
mod poly;
mod sweep;

use std::path::{Path, PathBuf};

use gfl_core::network::l2_norm;
use gfl_core::{Architecture, EmaTracker, OptimizerKind, OptimizerState, ParameterVector, ShallowNet};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::idx::IdxError;
use crate::metrics::{write_metrics, MetricsRow};
use crate::plot::PlotError;

pub use flow::{run_flow_experiment, FlowOutcome};
pub use kolmogorov::{run_kolmogorov_experiment, KolmogorovEval, KolmogorovOutcome, KolmogorovSeedEval};
pub use mnist::{run_mnist_experiment, MnistOutcome, MnistSeedResult};
pub use poly::{run_polynomial_experiment, PolySummary, SeedSummary};
pub use sweep::{run_theorem_c_sweep, SweepRow, SWEEP_HEADER};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] gfl_core::Error),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

impl RunError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(gfl_core::Error::Io(_) | gfl_core::Error::Parse(_)) => 1,
            RunError::Core(_) => 3,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

pub(crate) fn write_rows(path: &Path, rows: &[MetricsRow]) -> Result<(), RunError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_metrics(std::io::BufWriter::new(file), rows)?;
    Ok(())
}

pub(crate) fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

/// Runs `f` on a pool of `threads` workers, or the global pool when unset.
pub(crate) fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| RunError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Stochastic training for `steps` updates. Row `k` records the minibatch loss and
/// gradient at the `k`-th iterate, so `steps + 1` rows are produced and the last
/// row describes the final parameters.
pub(crate) fn train(
    theta: &mut [f64],
    optimizer: OptimizerKind,
    steps: usize,
    ema_alpha: f64,
    seed: u64,
    mut batch: impl FnMut(u64, &[f64]) -> Result<(f64, Vec<f64>), RunError>,
    mut hook: impl FnMut(&MetricsRow, &[f64]) -> Result<(), RunError>,
) -> Result<Vec<MetricsRow>, RunError> {
    let mut state = OptimizerState::new(optimizer, theta.len());
    let mut ema = EmaTracker::new(ema_alpha)?;
    let mut rows = Vec::with_capacity(steps + 1);
    for k in 0..=steps as u64 {
        let (loss, grad) = batch(k, theta)?;
        if !loss.is_finite() {
            return Err(gfl_core::Error::NonFinite("training loss").into());
        }
        let row = MetricsRow {
            step: k,
            loss,
            ema_loss: ema.update(loss),
            theta_norm: l2_norm(theta),
            grad_norm: l2_norm(&grad),
            seed,
        };
        hook(&row, theta)?;
        rows.push(row);
        if k < steps as u64 {
            state.step(theta, &grad)?;
        }
    }
    Ok(rows)
}

/// Embeds `core` at the first hidden layer of `arch` that can hold it.
pub(crate) fn embed_anywhere(arch: &Architecture, core: &ShallowNet, j: f64) -> Result<ParameterVector, RunError> {
    let mut last = None;
    for layer in 1..arch.depth() {
        match gfl_core::poly::embed_deep(arch, core, layer, j) {
            Ok(theta) => return Ok(theta),
            Err(e @ gfl_core::Error::ArchitectureTooSmall(_)) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(last
        .unwrap_or_else(|| gfl_core::Error::ArchitectureTooSmall(format!("{:?} has no hidden layer", arch.widths())))
        .into())
}

/// Summary of any runner, for the CLI.
#[derive(Debug)]
pub enum Outcome {
    Poly(PolySummary),
    Flow(FlowOutcome),
    Sweep(Vec<SweepRow>),
    Kolmogorov(KolmogorovOutcome),
    Mnist(MnistOutcome),
}

pub fn run(config: &ExperimentConfig) -> Result<(Outcome, PathBuf), RunError> {
    config.validate()?;
    let out = config.output_dir();
    create_dir(&out)?;
    let outcome = match config.experiment {
        Experiment::Poly1d | Experiment::Poly2d | Experiment::Poly4d => Outcome::Poly(run_polynomial_experiment(config, &out)?),
        Experiment::Flow => Outcome::Flow(run_flow_experiment(config, &out)?),
        Experiment::TheoremC => Outcome::Sweep(run_theorem_c_sweep(config, &out)?),
        Experiment::Heat | Experiment::BlackScholes => Outcome::Kolmogorov(run_kolmogorov_experiment(config, &out)?),
        Experiment::Mnist => Outcome::Mnist(run_mnist_experiment(config, &out)?),
    };
    Ok((outcome, out))
}
