use std::path::Path;

use gfl_core::network::{init_params, Workspace};
use gfl_core::optim::minibatch_indices;
use gfl_core::{Architecture, ExpectedLoss, LossKind, TargetSpec, WeightedDataset};
use rayon::prelude::*;
use serde::Serialize;

use super::{file_name, io_err, train, with_pool, write_json, write_rows, RunError};
use crate::config::{ExperimentConfig, MnistSettings};
use crate::idx::load_labeled;
use crate::manifest::write_manifest;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Checkpoint {
    pub step: u64,
    /// Cross-entropy over the whole training subsample.
    pub train_loss: f64,
    pub theta_norm: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MnistSeedResult {
    pub seed: u64,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub initial_theta_norm: f64,
    pub final_theta_norm: f64,
    pub final_test_accuracy: f64,
    pub checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MnistOutcome {
    pub train_examples: usize,
    pub test_examples: usize,
    pub seeds: Vec<MnistSeedResult>,
}

fn one_hot(labels: &[u8], classes: usize) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|&l| {
            let mut v = vec![0.0; classes];
            v[l as usize] = 1.0;
            v
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

/// Fraction of examples whose largest logit is the label.
pub fn accuracy(arch: &Architecture, theta: &[f64], xs: &[Vec<f64>], labels: &[u8]) -> f64 {
    let correct: usize = xs
        .par_chunks(64)
        .zip(labels.par_chunks(64))
        .map(|(xc, lc)| {
            let mut ws = Workspace::new(arch);
            xc.iter().zip(lc).filter(|(x, &l)| argmax(ws.forward(arch, theta, x)) == l as usize).count()
        })
        .sum();
    correct as f64 / xs.len().max(1) as f64
}

pub fn run_mnist_experiment(config: &ExperimentConfig, out: &Path) -> Result<MnistOutcome, RunError> {
    let s = MnistSettings::resolve(config)?;
    let (train_x, train_y) = load_labeled(&s.train_images, &s.train_labels, s.subsample)?;
    let (test_x, test_y) = load_labeled(&s.test_images, &s.test_labels, s.test_subsample)?;
    let classes = s.arch.output_dim();
    if let Some(&l) = train_y.iter().chain(&test_y).find(|&&l| l as usize >= classes) {
        return Err(gfl_core::Error::DimensionMismatch { expected: classes, got: l as usize + 1 }.into());
    }
    if s.batch > train_x.len() {
        return Err(crate::config::ConfigError::Field {
            field: "batch".into(),
            message: format!("exceeds the {} training examples", train_x.len()),
        }
        .into());
    }
    let n_train = train_x.len();
    let data = WeightedDataset::uniform(train_x, one_hot(&train_y, classes))?;
    let target = TargetSpec::FixedLabels;
    let objective = ExpectedLoss::new(&s.arch, &data, &target, LossKind::CrossEntropySoftmax)?;

    let run_seed = |seed: u64| -> Result<(MnistSeedResult, String), RunError> {
        let mut theta = init_params(&s.arch, s.init, seed)?.into_vec();
        let mut checkpoints = Vec::new();
        let rows = train(
            &mut theta,
            s.optimizer,
            s.steps,
            s.ema_alpha,
            seed,
            |k, th| {
                let idx = minibatch_indices(n_train, s.batch, seed, k)?;
                Ok(objective.batch_value_grad(th, &idx)?)
            },
            |row, th| {
                if row.step % s.eval_every as u64 == 0 || row.step == s.steps as u64 {
                    checkpoints.push(Checkpoint {
                        step: row.step,
                        train_loss: objective.value(th)?,
                        theta_norm: row.theta_norm,
                        test_accuracy: accuracy(&s.arch, th, &test_x, &test_y),
                    });
                }
                Ok(())
            },
        )?;
        let path = out.join(format!("metrics_seed{seed}.csv"));
        write_rows(&path, &rows)?;
        let (first, last) = (checkpoints[0], checkpoints[checkpoints.len() - 1]);
        let result = MnistSeedResult {
            seed,
            initial_train_loss: first.train_loss,
            final_train_loss: last.train_loss,
            initial_theta_norm: first.theta_norm,
            final_theta_norm: last.theta_norm,
            final_test_accuracy: last.test_accuracy,
            checkpoints,
        };
        Ok((result, file_name(&path)))
    };
    let results: Vec<_> =
        with_pool(config.threads, || s.seeds.par_iter().map(|&seed| run_seed(seed)).collect::<Result<Vec<_>, _>>())??;

    let mut outputs: Vec<String> = results.iter().map(|r| r.1.clone()).collect();
    let outcome = MnistOutcome {
        train_examples: n_train,
        test_examples: test_x.len(),
        seeds: results.into_iter().map(|r| r.0).collect(),
    };
    write_json(&out.join("accuracy.json"), &outcome)?;
    outputs.push("accuracy.json".into());
    write_manifest(out, config, &s.seeds, outputs).map_err(io_err(out))?;
    Ok(outcome)
}
