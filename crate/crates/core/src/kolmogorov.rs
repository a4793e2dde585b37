//! Monte Carlo regression data and reference values for the heat and Black–Scholes
//! equations through their Feynman–Kac representations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::loss::WeightedDataset;
use crate::{Error, Result};

/// `∂_t u = ½Δu`, `u(0, x) = ‖x‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatSpec {
    pub dim: usize,
    pub horizon: f64,
    #[serde(rename = "box")]
    pub sample_box: Vec<(f64, f64)>,
}

impl HeatSpec {
    /// Sample box `[-1, 1]^dim`.
    pub fn new(dim: usize, horizon: f64) -> Self {
        Self { dim, horizon, sample_box: vec![(-1.0, 1.0); dim] }
    }
}

/// Volatilities used for up to ten assets.
pub const DEFAULT_SIGMA: [f64; 10] = [
    0.1000, 0.1444, 0.1889, 0.2333, 0.2778, 0.3222, 0.3667, 0.4111, 0.4556, 0.5000,
];

/// Discounted best-of call on independent geometric Brownian motions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackScholesSpec {
    pub dim: usize,
    pub horizon: f64,
    pub r: f64,
    pub c: f64,
    pub strike: f64,
    pub sigma: Vec<f64>,
    #[serde(rename = "box")]
    pub sample_box: Vec<(f64, f64)>,
}

impl BlackScholesSpec {
    /// `r = 0.05`, `c = 0.01`, `K = 100`, the first `dim` default volatilities (evenly
    /// spaced on [0.1, 0.5] beyond ten assets) and sample box `[K/2, 3K/2]^dim`.
    pub fn standard(dim: usize, horizon: f64) -> Self {
        let strike = 100.0;
        let sigma = if dim <= DEFAULT_SIGMA.len() {
            DEFAULT_SIGMA[..dim].to_vec()
        } else {
            crate::activation::linspace(0.1, 0.5, dim)
        };
        Self {
            dim,
            horizon,
            r: 0.05,
            c: 0.01,
            strike,
            sigma,
            sample_box: vec![(0.5 * strike, 1.5 * strike); dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: self.sigma.len() });
        }
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("volatilities must be positive".into()));
        }
        if !(self.strike >= 0.0) {
            return Err(Error::InvalidArgument("strike must be nonnegative".into()));
        }
        Ok(())
    }
}

fn check_len(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    Ok(())
}

/// One draw of `‖x + √T Z‖²`.
pub fn heat_terminal_sample<R: Rng + ?Sized>(spec: &HeatSpec, x: &[f64], rng: &mut R) -> Result<f64> {
    check_len(spec.dim, x)?;
    let s = spec.horizon.sqrt();
    Ok(x.iter()
        .map(|&xi| {
            let z: f64 = rng.sample(StandardNormal);
            let v = xi + s * z;
            v * v
        })
        .sum())
}

/// `u(t, x) = ‖x‖² + d t`.
pub fn heat_exact(spec: &HeatSpec, t: f64, x: &[f64]) -> Result<f64> {
    check_len(spec.dim, x)?;
    if !(t >= 0.0 && t <= spec.horizon) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, {}]", spec.horizon)));
    }
    Ok(x.iter().map(|v| v * v).sum::<f64>() + spec.dim as f64 * t)
}

/// One draw of `e^{-rT} max(max_i X_{T,i} - K, 0)` with exact GBM terminal values.
pub fn bs_payoff_sample<R: Rng + ?Sized>(spec: &BlackScholesSpec, x: &[f64], rng: &mut R) -> Result<f64> {
    check_len(spec.dim, x)?;
    if let Some(v) = x.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("asset price {v} must be positive")));
    }
    let t = spec.horizon;
    let best = x
        .iter()
        .zip(&spec.sigma)
        .map(|(&xi, &s)| {
            let z: f64 = rng.sample(StandardNormal);
            xi * ((spec.r - spec.c - 0.5 * s * s) * t + s * t.sqrt() * z).exp()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((-spec.r * t).exp() * (best - spec.strike).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pde", rename_all = "snake_case")]
pub enum Pde {
    Heat(HeatSpec),
    BlackScholes(BlackScholesSpec),
}

impl Pde {
    pub fn dim(&self) -> usize {
        match self {
            Pde::Heat(s) => s.dim,
            Pde::BlackScholes(s) => s.dim,
        }
    }

    pub fn sample_box(&self) -> &[(f64, f64)] {
        match self {
            Pde::Heat(s) => &s.sample_box,
            Pde::BlackScholes(s) => &s.sample_box,
        }
    }

    pub fn terminal_sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        match self {
            Pde::Heat(s) => heat_terminal_sample(s, x, rng),
            Pde::BlackScholes(s) => bs_payoff_sample(s, x, rng),
        }
    }
}

/// Uniform draws from an axis-aligned box.
pub fn sample_box<R: Rng + ?Sized>(bounds: &[(f64, f64)], n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect())
        .collect()
}

/// `batch` box-uniform inputs, each paired with a single terminal sample, equal weights.
pub fn kolmogorov_batch<R: Rng + ?Sized>(pde: &Pde, batch: usize, rng: &mut R) -> Result<WeightedDataset> {
    if batch == 0 {
        return Err(Error::InvalidArgument("batch must be positive".into()));
    }
    let xs = sample_box(pde.sample_box(), batch, rng);
    let ys = xs
        .iter()
        .map(|x| pde.terminal_sample(x, rng).map(|v| vec![v]))
        .collect::<Result<Vec<_>>>()?;
    WeightedDataset::uniform(xs, ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Total sample count, `rounds × paths`.
    pub paths: usize,
}

/// Mean over `rounds` round-means of `paths` samples each. Round `i` draws from stream `i`
/// of the seeded generator, so rounds run in parallel reproducibly. The standard error
/// comes from the spread of the round means, or from the sample spread when there is a
/// single round.
pub fn mc_reference<F>(sampler: F, rounds: usize, paths: usize, seed: u64) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if rounds == 0 || paths == 0 {
        return Err(Error::InvalidArgument("rounds and paths must be positive".into()));
    }
    let stats: Vec<(f64, f64)> = (0..rounds)
        .into_par_iter()
        .map(|round| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(round as u64);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..paths {
                let v = sampler(&mut rng)?;
                sum += v;
                sq += v * v;
            }
            Ok((sum / paths as f64, sq / paths as f64))
        })
        .collect::<Result<_>>()?;
    let k = rounds as f64;
    let mean = stats.iter().map(|s| s.0).sum::<f64>() / k;
    let stderr = if rounds >= 2 {
        let var = stats.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        let (m, m2) = stats[0];
        let n = paths as f64;
        let var = if paths > 1 { ((m2 - m * m) * n / (n - 1.0)).max(0.0) } else { 0.0 };
        (var / n).sqrt()
    };
    Ok(McEstimate { mean, stderr, paths: rounds * paths })
}

/// `Σ (p_i - r_i)² / Σ r_i²`.
pub fn relative_mse(predictions: &[f64], references: &[f64]) -> Result<f64> {
    if predictions.len() != references.len() || references.is_empty() {
        return Err(Error::DimensionMismatch { expected: references.len(), got: predictions.len() });
    }
    let den: f64 = references.iter().map(|r| r * r).sum();
    if den == 0.0 {
        return Err(Error::AllZeroReference);
    }
    let num: f64 = predictions.iter().zip(references).map(|(p, r)| (p - r).powi(2)).sum();
    Ok(num / den)
}
