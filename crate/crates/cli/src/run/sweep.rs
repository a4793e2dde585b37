use std::path::Path;

use gfl_core::activation::linspace;
use gfl_core::loss::expected_loss;
use gfl_core::network::forward;
use gfl_core::poly::{build_poly_shallow, sup_grid_error};
use gfl_core::{LossKind, TargetSpec, WeightedDataset};
use serde::Serialize;

use super::{embed_anywhere, io_err, RunError};
use crate::config::{ExperimentConfig, TheoremCSettings};
use crate::manifest::write_manifest;

pub const SWEEP_HEADER: [&str; 5] = ["j", "sup_error", "expected_loss", "theta_norm", "width"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub j: f64,
    pub sup_error: f64,
    pub expected_loss: f64,
    pub theta_norm: f64,
    /// Hidden width of the builder network.
    pub width: usize,
}

/// Builds the approximating network for each scale `j` and records how close it gets
/// and how large its parameters are.
pub fn run_theorem_c_sweep(config: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>, RunError> {
    let s = TheoremCSettings::resolve(config)?;
    let target = [s.target.clone()];
    let dim = s.target.num_vars();
    let xs: Vec<Vec<f64>> = if dim == 1 {
        linspace(-1.0, 1.0, s.points).into_iter().map(|x| vec![x]).collect()
    } else {
        // tensor grid with `points` nodes in total, rounded down per axis
        let per = ((s.points as f64).powf(1.0 / dim as f64).floor() as usize).max(2);
        let axis = linspace(-1.0, 1.0, per);
        (0..per.pow(dim as u32))
            .map(|mut k| {
                (0..dim)
                    .map(|_| {
                        let v = axis[k % per];
                        k /= per;
                        v
                    })
                    .collect()
            })
            .collect()
    };
    let data = WeightedDataset::uniform(xs, vec![])?;
    let spec = TargetSpec::Polynomial(target.to_vec());

    let mut rows = Vec::with_capacity(s.js.len());
    for &j in &s.js {
        let core = build_poly_shallow(s.activation, &target, j)?;
        let (arch, theta) = match &s.arch {
            Some(a) => (a.clone(), embed_anywhere(a, &core, j)?),
            None => core.to_params()?,
        };
        let f = |x: &[f64]| forward(&arch, &theta, x).expect("grid point has the input dimension");
        rows.push(SweepRow {
            j,
            sup_error: sup_grid_error(&f, &target, 1.0, s.grid),
            expected_loss: expected_loss(&arch, &theta, &data, &spec, LossKind::SquaredError)?,
            theta_norm: theta.norm(),
            width: core.width(),
        });
    }

    let path = out.join("sweep.csv");
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    let mut wr = csv::Writer::from_writer(std::io::BufWriter::new(file));
    wr.write_record(SWEEP_HEADER)?;
    for r in &rows {
        wr.write_record([format!("{:?}", r.j), format!("{:?}", r.sup_error), format!("{:?}", r.expected_loss), format!("{:?}", r.theta_norm), r.width.to_string()])?;
    }
    wr.flush().map_err(io_err(&path))?;
    write_manifest(out, config, &[], vec!["sweep.csv".into()]).map_err(io_err(out))?;
    Ok(rows)
}
