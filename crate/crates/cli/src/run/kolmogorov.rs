use std::path::Path;

use gfl_core::kolmogorov::{bs_payoff_sample, heat_exact, kolmogorov_batch, mc_reference, relative_mse, sample_box, Pde};
use gfl_core::network::{init_params, l2_norm, Workspace};
use gfl_core::{Architecture, DataPoint, ExpectedLoss, TargetSpec, WeightedDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{file_name, io_err, train, with_pool, write_json, write_rows, RunError};
use crate::config::{ExperimentConfig, KolmogorovSettings};
use crate::manifest::write_manifest;

#[derive(Debug, Clone, Serialize)]
pub struct KolmogorovSeedEval {
    pub seed: u64,
    pub baseline_relative_mse: f64,
    pub final_relative_mse: f64,
    pub initial_theta_norm: f64,
    pub final_theta_norm: f64,
    /// Test points whose prediction lies within two reference standard errors
    /// (Monte Carlo references only).
    pub within_mc_noise: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KolmogorovEval {
    pub pde: &'static str,
    pub dim: usize,
    pub test_points: usize,
    /// Network outputs are multiplied by this to give solution values.
    pub output_scale: f64,
    pub reference: &'static str,
    pub seeds: Vec<KolmogorovSeedEval>,
}

pub type KolmogorovOutcome = KolmogorovEval;

/// Affine map of the sample box onto `[-1, 1]^d` plus an output scale.
struct Normalizer {
    lo: Vec<f64>,
    width: Vec<f64>,
    scale: f64,
}

impl Normalizer {
    fn new(pde: &Pde) -> Self {
        let b = pde.sample_box();
        let scale = match pde {
            Pde::Heat(_) => 1.0,
            Pde::BlackScholes(s) => s.strike,
        };
        Self { lo: b.iter().map(|r| r.0).collect(), width: b.iter().map(|r| r.1 - r.0).collect(), scale }
    }

    fn input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.lo).zip(&self.width).map(|((v, lo), w)| 2.0 * (v - lo) / w - 1.0).collect()
    }

    fn predict(&self, ws: &mut Workspace, arch: &Architecture, theta: &[f64], x: &[f64]) -> f64 {
        self.scale * ws.forward(arch, theta, &self.input(x))[0]
    }
}

struct TestSet {
    xs: Vec<Vec<f64>>,
    refs: Vec<f64>,
    stderr: Option<Vec<f64>>,
}

fn test_set(s: &KolmogorovSettings) -> Result<TestSet, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.test_seed);
    let xs = sample_box(s.pde.sample_box(), s.test_points, &mut rng);
    match &s.pde {
        Pde::Heat(spec) => {
            let refs = xs.iter().map(|x| heat_exact(spec, spec.horizon, x)).collect::<Result<_, _>>()?;
            Ok(TestSet { xs, refs, stderr: None })
        }
        Pde::BlackScholes(spec) => {
            let est: Vec<_> = xs
                .par_iter()
                .enumerate()
                .map(|(i, x)| mc_reference(|r| bs_payoff_sample(spec, x, r), s.rounds, s.paths, s.test_seed.wrapping_add(1 + i as u64)))
                .collect::<Result<_, _>>()?;
            Ok(TestSet { xs, refs: est.iter().map(|e| e.mean).collect(), stderr: Some(est.iter().map(|e| e.stderr).collect()) })
        }
    }
}

pub fn run_kolmogorov_experiment(config: &ExperimentConfig, out: &Path) -> Result<KolmogorovEval, RunError> {
    let s = KolmogorovSettings::resolve(config)?;
    let norm = Normalizer::new(&s.pde);
    let test = with_pool(config.threads, || test_set(&s))??;
    let target = TargetSpec::FixedLabels;

    let run_seed = |seed: u64| -> Result<(KolmogorovSeedEval, Vec<String>), RunError> {
        let mut theta = init_params(&s.arch, s.init, seed)?.into_vec();
        let mut ws = Workspace::new(&s.arch);
        let mut predict_all = |th: &[f64]| -> Vec<f64> { test.xs.iter().map(|x| norm.predict(&mut ws, &s.arch, th, x)).collect() };
        let baseline = relative_mse(&predict_all(&theta), &test.refs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let rows = train(
            &mut theta,
            s.optimizer,
            s.steps,
            s.ema_alpha,
            seed,
            |_, th| {
                let raw = kolmogorov_batch(&s.pde, s.batch, &mut rng)?;
                let points = raw
                    .points()
                    .iter()
                    .map(|p| DataPoint { x: norm.input(&p.x), target: vec![p.target[0] / norm.scale], weight: p.weight })
                    .collect();
                let data = WeightedDataset::new(points)?;
                Ok(ExpectedLoss::new(&s.arch, &data, &target, gfl_core::LossKind::SquaredError)?.value_grad(th)?)
            },
            |_, _| Ok(()),
        )?;
        let preds = predict_all(&theta);
        let metrics = out.join(format!("metrics_seed{seed}.csv"));
        write_rows(&metrics, &rows)?;
        let pred_path = out.join(format!("predictions_seed{seed}.csv"));
        let within = write_predictions(&pred_path, &test, &preds)?;
        let eval = KolmogorovSeedEval {
            seed,
            baseline_relative_mse: baseline,
            final_relative_mse: relative_mse(&preds, &test.refs)?,
            initial_theta_norm: rows[0].theta_norm,
            final_theta_norm: l2_norm(&theta),
            within_mc_noise: within,
        };
        Ok((eval, vec![file_name(&metrics), file_name(&pred_path)]))
    };
    let results: Vec<_> =
        with_pool(config.threads, || s.seeds.par_iter().map(|&seed| run_seed(seed)).collect::<Result<Vec<_>, _>>())??;

    let mut outputs: Vec<String> = results.iter().flat_map(|r| r.1.clone()).collect();
    let eval = KolmogorovEval {
        pde: config.experiment.name(),
        dim: s.pde.dim(),
        test_points: s.test_points,
        output_scale: norm.scale,
        reference: if test.stderr.is_some() { "monte_carlo" } else { "closed_form" },
        seeds: results.into_iter().map(|r| r.0).collect(),
    };
    write_json(&out.join("eval.json"), &eval)?;
    outputs.push("eval.json".into());
    write_manifest(out, config, &s.seeds, outputs).map_err(io_err(out))?;
    Ok(eval)
}

/// Writes per-point predictions and returns the within-noise count for Monte Carlo references.
fn write_predictions(path: &Path, test: &TestSet, preds: &[f64]) -> Result<Option<usize>, RunError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut wr = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let d = test.xs.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.extend(["reference", "stderr", "prediction", "within_mc_noise"].map(String::from));
    wr.write_record(&header)?;
    let mut within = 0;
    for (i, x) in test.xs.iter().enumerate() {
        let se = test.stderr.as_ref().map(|v| v[i]);
        let flag = se.map(|se| (preds[i] - test.refs[i]).abs() <= 2.0 * se);
        within += usize::from(flag == Some(true));
        let mut rec: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{:?}", test.refs[i]));
        rec.push(se.map_or_else(String::new, |v| format!("{v:?}")));
        rec.push(format!("{:?}", preds[i]));
        rec.push(flag.map_or_else(String::new, |b| b.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush().map_err(io_err(path))?;
    Ok(test.stderr.as_ref().map(|_| within))
}
