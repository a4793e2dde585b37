use std::path::Path;

use gfl_core::activation::linspace;
use gfl_core::flow::{classify, integrate_partial, DichotomyVerdict};
use gfl_core::network::{forward, init_params};
use gfl_core::poly::build_poly_shallow;
use gfl_core::{ExpectedLoss, TargetSpec, TrajectoryLog, WeightedDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{embed_anywhere, io_err, write_json, RunError};
use crate::config::{ExperimentConfig, FlowSettings, FlowStart};
use crate::manifest::write_manifest;

#[derive(Debug, Clone, Serialize)]
pub struct FlowOutcome {
    pub verdict: DichotomyVerdict,
    pub start: FlowStart,
    pub horizon: f64,
    /// Time actually reached; below `horizon` when integration stopped early.
    pub t_final: f64,
    pub stop_reason: Option<String>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub initial_theta_norm: f64,
    pub final_theta_norm: f64,
    #[serde(skip)]
    pub log: TrajectoryLog,
}

fn inputs(s: &FlowSettings) -> Vec<Vec<f64>> {
    let d = s.arch.input_dim();
    if d == 1 {
        return linspace(-1.0, 1.0, s.points).into_iter().map(|x| vec![x]).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed);
    (0..s.points).map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect()
}

pub fn run_flow_experiment(config: &ExperimentConfig, out: &Path) -> Result<FlowOutcome, RunError> {
    let s = FlowSettings::resolve(config)?;
    let xs = inputs(&s);
    let (theta0, ys) = match s.start {
        FlowStart::Realizable => {
            let theta = init_params(&s.arch, s.init, s.seed)?;
            let ys = xs.iter().map(|x| forward(&s.arch, &theta, x)).collect::<Result<Vec<_>, _>>()?;
            (theta, ys)
        }
        start => {
            let theta = if start == FlowStart::Warm {
                let core = build_poly_shallow(s.arch.activation(), std::slice::from_ref(&s.target), s.warm_j)?;
                embed_anywhere(&s.arch, &core, s.warm_j)?
            } else {
                init_params(&s.arch, s.init, s.seed)?
            };
            (theta, xs.iter().map(|x| vec![s.target.eval_unchecked(x)]).collect())
        }
    };
    let data = WeightedDataset::uniform(xs, ys)?;
    let target = TargetSpec::FixedLabels;
    let objective = ExpectedLoss::new(&s.arch, &data, &target, s.loss)?;
    let (log, err) = integrate_partial(&objective, theta0.as_slice(), &s.flow);

    let path = out.join("trajectory.csv");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    log.write_csv(std::io::BufWriter::new(file))?;

    let verdict = classify(&log, &s.thresholds);
    let (first, last) = match (log.samples.first(), log.samples.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(err.unwrap_or(gfl_core::Error::NonFinite("empty trajectory")).into()),
    };
    let outcome = FlowOutcome {
        verdict,
        start: s.start,
        horizon: s.flow.horizon,
        t_final: last.t,
        stop_reason: err.as_ref().map(ToString::to_string),
        accepted_steps: log.accepted_steps,
        rejected_steps: log.rejected_steps,
        initial_loss: first.loss,
        final_loss: last.loss,
        initial_theta_norm: first.theta_norm,
        final_theta_norm: last.theta_norm,
        log,
    };
    write_json(&out.join("verdict.json"), &outcome)?;
    write_manifest(out, config, &[s.seed], vec!["trajectory.csv".into(), "verdict.json".into()]).map_err(io_err(out))?;
    // running out of step budget leaves a usable partial trajectory; anything else is fatal
    match err {
        None | Some(gfl_core::Error::StepBudgetExhausted(_)) => Ok(outcome),
        Some(e) => Err(e.into()),
    }
}
