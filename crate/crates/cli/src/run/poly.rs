use std::path::Path;

use gfl_core::network::init_params;
use gfl_core::optim::minibatch_indices;
use gfl_core::{ExpectedLoss, TargetSpec, WeightedDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{file_name, train, with_pool, write_json, write_rows, RunError};
use crate::config::{ExperimentConfig, PolySettings};
use crate::manifest::write_manifest;
use crate::metrics::{tail_norm_slope, MetricsRow};
use crate::plot::emit_plots;

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub initial_ema_loss: f64,
    pub final_ema_loss: f64,
    pub initial_theta_norm: f64,
    pub final_theta_norm: f64,
    pub norm_ratio: f64,
    /// Least-squares slope of `‖θ‖` per step over the second half of training.
    pub tail_norm_slope: f64,
}

impl SeedSummary {
    pub(crate) fn from_rows(seed: u64, rows: &[MetricsRow]) -> Self {
        let (first, last) = (rows[0], rows[rows.len() - 1]);
        Self {
            seed,
            initial_ema_loss: first.ema_loss,
            final_ema_loss: last.ema_loss,
            initial_theta_norm: first.theta_norm,
            final_theta_norm: last.theta_norm,
            norm_ratio: last.theta_norm / first.theta_norm,
            tail_norm_slope: tail_norm_slope(rows, 0.5),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolySummary {
    pub experiment: &'static str,
    pub target: String,
    pub widths: Vec<usize>,
    pub activation: String,
    pub optimizer: String,
    pub steps: usize,
    pub seeds: Vec<SeedSummary>,
}

fn dataset(s: &PolySettings) -> Result<WeightedDataset, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.data_seed);
    let d = s.arch.input_dim();
    let xs: Vec<Vec<f64>> = (0..s.dataset_size)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let ys = xs.iter().map(|x| vec![s.target.eval_unchecked(x)]).collect();
    Ok(WeightedDataset::uniform(xs, ys)?)
}

pub fn run_polynomial_experiment(config: &ExperimentConfig, out: &Path) -> Result<PolySummary, RunError> {
    let s = PolySettings::resolve(config)?;
    if s.batch > s.dataset_size {
        return Err(crate::config::ConfigError::Field {
            field: "batch".into(),
            message: format!("exceeds dataset_size {}", s.dataset_size),
        }
        .into());
    }
    let data = dataset(&s)?;
    let target = TargetSpec::FixedLabels;
    let objective = ExpectedLoss::new(&s.arch, &data, &target, s.loss)?;

    let run_seed = |seed: u64| -> Result<(SeedSummary, String), RunError> {
        let mut theta = init_params(&s.arch, s.init, seed)?.into_vec();
        let rows = train(
            &mut theta,
            s.optimizer,
            s.steps,
            s.ema_alpha,
            seed,
            |k, th| {
                let idx = minibatch_indices(data.len(), s.batch, seed, k)?;
                Ok(objective.batch_value_grad(th, &idx)?)
            },
            |_, _| Ok(()),
        )?;
        let path = out.join(format!("metrics_seed{seed}.csv"));
        write_rows(&path, &rows)?;
        Ok((SeedSummary::from_rows(seed, &rows), file_name(&path)))
    };
    let results: Vec<(SeedSummary, String)> =
        with_pool(config.threads, || s.seeds.par_iter().map(|&seed| run_seed(seed)).collect::<Result<_, _>>())??;

    let mut outputs: Vec<String> = results.iter().map(|r| r.1.clone()).collect();
    let csvs: Vec<_> = outputs.iter().map(|n| out.join(n)).collect();
    let label = format!("{} {}", s.arch.activation(), optimizer_name(&s));
    for p in emit_plots(&csvs, &label, out)? {
        outputs.push(file_name(&p));
    }
    let summary = PolySummary {
        experiment: config.experiment.name(),
        target: s.target.to_string(),
        widths: s.arch.widths().to_vec(),
        activation: s.arch.activation().to_string(),
        optimizer: optimizer_name(&s),
        steps: s.steps,
        seeds: results.into_iter().map(|r| r.0).collect(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    outputs.push("summary.json".into());
    write_manifest(out, config, &s.seeds, outputs).map_err(super::io_err(out))?;
    Ok(summary)
}

fn optimizer_name(s: &PolySettings) -> String {
    match s.optimizer {
        gfl_core::OptimizerKind::Sgd { lr } => format!("sgd lr={lr}"),
        gfl_core::OptimizerKind::Adam { lr, .. } => format!("adam lr={lr}"),
    }
}
