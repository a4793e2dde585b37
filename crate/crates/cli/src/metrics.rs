use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub const METRICS_HEADER: [&str; 6] = ["step", "loss", "ema_loss", "theta_norm", "grad_norm", "seed"];

/// One training step of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub loss: f64,
    pub ema_loss: f64,
    pub theta_norm: f64,
    pub grad_norm: f64,
    pub seed: u64,
}

pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> csv::Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(METRICS_HEADER)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> csv::Result<Vec<MetricsRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Least-squares slope of `theta_norm` against `step` over the last `fraction` of rows.
pub fn tail_norm_slope(rows: &[MetricsRow], fraction: f64) -> f64 {
    let start = rows.len() - ((rows.len() as f64 * fraction).ceil() as usize).min(rows.len());
    let tail = &rows[start..];
    let xs: Vec<f64> = tail.iter().map(|r| r.step as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.theta_norm).collect();
    gfl_core::flow::ls_slope(&xs, &ys)
}
