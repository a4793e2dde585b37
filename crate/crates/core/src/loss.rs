//! Pointwise losses and the expected loss `L(θ) = E_{x∼μ}[ℓ(N_θ(x), f(x))]` over
//! weighted point sets (empirical measures, quadrature-discretized densities and
//! convex combinations of both).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::network::{Architecture, ParameterVector, Workspace};
use crate::poly::Polynomial;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LossKind {
    /// `Σ_i (ŷ_i - y_i)²`.
    SquaredError,
    /// `-Σ_i [y_i ln ŷ_i + (1 - y_i) ln(1 - ŷ_i)]`, predictions in (0, 1).
    BinaryCrossEntropy,
    /// Coordinatewise Huber loss summed over outputs.
    Huber(f64),
    /// Softmax over the prediction fused with cross-entropy against `y`.
    CrossEntropySoftmax,
}

impl LossKind {
    /// The three catalog losses usable with scalar regression outputs.
    pub const SCALAR_CATALOG: [LossKind; 3] = [
        LossKind::SquaredError,
        LossKind::BinaryCrossEntropy,
        LossKind::Huber(1.0),
    ];
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::SquaredError => f.write_str("squared_error"),
            LossKind::BinaryCrossEntropy => f.write_str("bce"),
            LossKind::Huber(d) => write!(f, "huber:{d}"),
            LossKind::CrossEntropySoftmax => f.write_str("cross_entropy"),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "squared_error" | "mse" | "se" => Ok(LossKind::SquaredError),
            "bce" | "binary_cross_entropy" => Ok(LossKind::BinaryCrossEntropy),
            "huber" => Ok(LossKind::Huber(1.0)),
            "cross_entropy" | "ce" => Ok(LossKind::CrossEntropySoftmax),
            other => {
                let delta = other
                    .strip_prefix("huber:")
                    .ok_or_else(|| Error::Parse(format!("unknown loss {other:?}")))?;
                let delta: f64 = delta
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad huber delta in {other:?}")))?;
                if delta > 0.0 && delta.is_finite() {
                    Ok(LossKind::Huber(delta))
                } else {
                    Err(Error::InvalidArgument(format!("huber delta must be positive, got {delta}")))
                }
            }
        }
    }
}

impl TryFrom<String> for LossKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LossKind> for String {
    fn from(k: LossKind) -> String {
        k.to_string()
    }
}

fn check_pair(yhat: &[f64], y: &[f64]) -> Result<()> {
    if yhat.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    Ok(())
}

fn check_bce_domain(yhat: &[f64]) -> Result<()> {
    match yhat.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        Some(p) => Err(Error::Domain(format!(
            "binary cross-entropy needs predictions in (0, 1), got {p}"
        ))),
        None => Ok(()),
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn loss_eval(kind: LossKind, yhat: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(yhat, y)?;
    let v = match kind {
        LossKind::SquaredError => yhat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
        LossKind::Huber(delta) => yhat
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let r = (a - b).abs();
                if r <= delta {
                    0.5 * r * r
                } else {
                    delta * (r - 0.5 * delta)
                }
            })
            .sum(),
        LossKind::BinaryCrossEntropy => {
            check_bce_domain(yhat)?;
            -yhat
                .iter()
                .zip(y)
                .map(|(p, t)| t * p.ln() + (1.0 - t) * (-p).ln_1p())
                .sum::<f64>()
        }
        LossKind::CrossEntropySoftmax => {
            let lse = log_sum_exp(yhat);
            yhat.iter().zip(y).map(|(z, t)| t * (lse - z)).sum()
        }
    };
    Ok(v)
}

/// Gradient of [`loss_eval`] in the prediction.
pub fn loss_grad(kind: LossKind, yhat: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_pair(yhat, y)?;
    Ok(match kind {
        LossKind::SquaredError => yhat.iter().zip(y).map(|(a, b)| 2.0 * (a - b)).collect(),
        LossKind::Huber(delta) => yhat
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).clamp(-delta, delta))
            .collect(),
        LossKind::BinaryCrossEntropy => {
            check_bce_domain(yhat)?;
            yhat.iter()
                .zip(y)
                .map(|(p, t)| -t / p + (1.0 - t) / (1.0 - p))
                .collect()
        }
        LossKind::CrossEntropySoftmax => {
            let lse = log_sum_exp(yhat);
            let mass: f64 = y.iter().sum();
            yhat.iter()
                .zip(y)
                .map(|(z, t)| (z - lse).exp() * mass - t)
                .collect()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: Vec<f64>,
    /// Stored label; may be empty when the target is a polynomial.
    pub target: Vec<f64>,
    pub weight: f64,
}

/// A discrete probability measure with optional stored labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDataset {
    points: Vec<DataPoint>,
}

const WEIGHT_TOL: f64 = 1e-12;

impl WeightedDataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("dataset is empty".into()));
        }
        let dx = points[0].x.len();
        let dy = points[0].target.len();
        let mut total = 0.0;
        let mut nonzero = 0;
        for p in &points {
            if p.x.len() != dx {
                return Err(Error::DimensionMismatch { expected: dx, got: p.x.len() });
            }
            if p.target.len() != dy {
                return Err(Error::DimensionMismatch { expected: dy, got: p.target.len() });
            }
            if !(p.weight >= 0.0) || !p.weight.is_finite() {
                return Err(Error::InvalidArgument(format!("bad weight {}", p.weight)));
            }
            if p.x.iter().chain(&p.target).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dataset point"));
            }
            total += p.weight;
            nonzero += usize::from(p.weight > 0.0);
        }
        if (total - 1.0).abs() > WEIGHT_TOL || nonzero == 0 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points })
    }

    /// Empirical measure `(1/n) Σ δ_{x_i}`.
    pub fn uniform(xs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if !targets.is_empty() && targets.len() != xs.len() {
            return Err(Error::DimensionMismatch { expected: xs.len(), got: targets.len() });
        }
        let n = xs.len();
        let w = 1.0 / n.max(1) as f64;
        let mut targets = targets.into_iter();
        let points = xs
            .into_iter()
            .map(|x| DataPoint {
                x,
                target: targets.next().unwrap_or_default(),
                weight: w,
            })
            .collect();
        Self::new(points)
    }

    /// Convex combination `λ a + (1 - λ) b` by concatenation with scaled weights.
    pub fn mix(a: &Self, b: &Self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let points = a
            .points
            .iter()
            .map(|p| DataPoint { weight: p.weight * lambda, ..p.clone() })
            .chain(b.points.iter().map(|p| DataPoint {
                weight: p.weight * (1.0 - lambda),
                ..p.clone()
            }))
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.points[0].x.len()
    }

    pub fn label_dim(&self) -> usize {
        self.points[0].target.len()
    }

    /// Whether all inputs are pairwise distinct.
    pub fn has_distinct_inputs(&self) -> bool {
        let mut xs: Vec<Vec<u64>> = self
            .points
            .iter()
            .map(|p| p.x.iter().map(|v| v.to_bits()).collect())
            .collect();
        xs.sort();
        xs.windows(2).all(|w| w[0] != w[1])
    }

    /// CSV with header `x_0..x_{d0-1}, y_0..y_{dk-1}, weight`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.input_dim()).map(|i| format!("x_{i}")).collect();
        header.extend((0..self.label_dim()).map(|i| format!("y_{i}")));
        header.push("weight".into());
        wr.write_record(&header)?;
        for p in &self.points {
            let row: Vec<String> = p
                .x
                .iter()
                .chain(&p.target)
                .chain(std::iter::once(&p.weight))
                .map(|v| format!("{v:?}"))
                .collect();
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let dx = header.iter().filter(|h| h.starts_with("x_")).count();
        let dy = header.iter().filter(|h| h.starts_with("y_")).count();
        if header.len() != dx + dy + 1 || header.get(header.len() - 1) != Some("weight") {
            return Err(Error::Parse(format!("unexpected dataset header {header:?}")));
        }
        let mut points = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<_>>()?;
            points.push(DataPoint {
                x: vals[..dx].to_vec(),
                target: vals[dx..dx + dy].to_vec(),
                weight: vals[dx + dy],
            });
        }
        Self::new(points)
    }
}

/// Where the regression targets come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// One polynomial per output coordinate.
    Polynomial(Vec<Polynomial>),
    /// Use the labels stored in the dataset.
    FixedLabels,
}

impl TargetSpec {
    fn check(&self, arch: &Architecture, data: &WeightedDataset) -> Result<()> {
        if data.input_dim() != arch.input_dim() {
            return Err(Error::DimensionMismatch { expected: arch.input_dim(), got: data.input_dim() });
        }
        match self {
            TargetSpec::Polynomial(ps) => {
                if ps.len() != arch.output_dim() {
                    return Err(Error::DimensionMismatch { expected: arch.output_dim(), got: ps.len() });
                }
                if let Some(p) = ps.iter().find(|p| p.num_vars() != arch.input_dim()) {
                    return Err(Error::DimensionMismatch { expected: arch.input_dim(), got: p.num_vars() });
                }
            }
            TargetSpec::FixedLabels => {
                if data.label_dim() != arch.output_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: arch.output_dim(),
                        got: data.label_dim(),
                    });
                }
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &DataPoint, buf: &mut Vec<f64>) {
        buf.clear();
        match self {
            TargetSpec::Polynomial(ps) => buf.extend(ps.iter().map(|q| q.eval_unchecked(&p.x))),
            TargetSpec::FixedLabels => buf.extend_from_slice(&p.target),
        }
    }
}

/// Objective `θ ↦ Σ_i w_i ℓ(N_θ(x_i), f(x_i))` bundled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct ExpectedLoss<'a> {
    pub arch: &'a Architecture,
    pub data: &'a WeightedDataset,
    pub target: &'a TargetSpec,
    pub kind: LossKind,
}

impl<'a> ExpectedLoss<'a> {
    pub fn new(
        arch: &'a Architecture,
        data: &'a WeightedDataset,
        target: &'a TargetSpec,
        kind: LossKind,
    ) -> Result<Self> {
        target.check(arch, data)?;
        Ok(Self { arch, data, target, kind })
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        self.accumulate(theta, None, false).map(|(l, _)| l)
    }

    pub fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.accumulate(theta, None, true)
    }

    /// Uniformly weighted loss and gradient over `indices` (a minibatch), ignoring the
    /// stored weights.
    pub fn batch_value_grad(&self, theta: &[f64], indices: &[usize]) -> Result<(f64, Vec<f64>)> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty minibatch".into()));
        }
        if let Some(&i) = indices.iter().find(|&&i| i >= self.data.len()) {
            return Err(Error::InvalidArgument(format!("batch index {i} out of range")));
        }
        self.accumulate(theta, Some(indices), true)
    }

    fn accumulate(&self, theta: &[f64], subset: Option<&[usize]>, with_grad: bool) -> Result<(f64, Vec<f64>)> {
        if theta.len() != self.arch.param_dim() {
            return Err(Error::DimensionMismatch { expected: self.arch.param_dim(), got: theta.len() });
        }
        let n = subset.map_or(self.data.len(), <[usize]>::len);
        let uniform = 1.0 / n as f64;
        let point = |i: usize| match subset {
            Some(idx) => (&self.data.points[idx[i]], uniform),
            None => {
                let p = &self.data.points[i];
                (p, p.weight)
            }
        };
        let dim = if with_grad { self.arch.param_dim() } else { 0 };
        let run_chunk = |range: std::ops::Range<usize>| -> Result<(f64, Vec<f64>)> {
            let mut ws = Workspace::new(self.arch);
            let mut grad = vec![0.0; dim];
            let mut target = Vec::with_capacity(self.arch.output_dim());
            let mut loss = 0.0;
            for i in range {
                let (p, w) = point(i);
                if w == 0.0 {
                    continue;
                }
                self.target.resolve(p, &mut target);
                let yhat = ws.forward(self.arch, theta, &p.x);
                loss += w * loss_eval(self.kind, yhat, &target)?;
                if with_grad {
                    let g = loss_grad(self.kind, yhat, &target)?;
                    ws.backward(self.arch, theta, &p.x, &g, w, &mut grad);
                }
            }
            Ok((loss, grad))
        };
        // Chunk size depends only on n so the summation order is fixed.
        let chunk = 16usize.max(n.div_ceil(64));
        let (loss, grad) = if n <= chunk {
            run_chunk(0..n)?
        } else {
            let starts: Vec<usize> = (0..n).step_by(chunk).collect();
            let parts: Vec<(f64, Vec<f64>)> = starts
                .par_iter()
                .map(|&s| run_chunk(s..(s + chunk).min(n)))
                .collect::<Result<_>>()?;
            let mut loss = 0.0;
            let mut grad = vec![0.0; dim];
            for (l, g) in parts {
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            (loss, grad)
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        Ok((loss.max(0.0), grad))
    }
}

pub fn expected_loss(
    arch: &Architecture,
    theta: &ParameterVector,
    data: &WeightedDataset,
    target: &TargetSpec,
    kind: LossKind,
) -> Result<f64> {
    ExpectedLoss::new(arch, data, target, kind)?.value(theta.as_slice())
}

pub fn expected_loss_grad(
    arch: &Architecture,
    theta: &ParameterVector,
    data: &WeightedDataset,
    target: &TargetSpec,
    kind: LossKind,
) -> Result<(f64, Vec<f64>)> {
    ExpectedLoss::new(arch, data, target, kind)?.value_grad(theta.as_slice())
}

/// Tensor-product trapezoidal discretization of `density` on an axis-aligned box.
/// Weights are renormalized to sum to one; stored labels are left empty.
pub fn quadrature_dataset(
    density: &dyn Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    nodes_per_dim: usize,
) -> Result<WeightedDataset> {
    if bounds.is_empty() || nodes_per_dim < 2 {
        return Err(Error::InvalidArgument("need at least one axis and two nodes per axis".into()));
    }
    let total = (nodes_per_dim as f64).powi(bounds.len() as i32);
    if total > 1e6 {
        return Err(Error::InvalidArgument(format!("{total} quadrature nodes exceed 10^6")));
    }
    let axes: Vec<Vec<(f64, f64)>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            let h = (hi - lo) / (nodes_per_dim - 1) as f64;
            (0..nodes_per_dim)
                .map(|i| {
                    let w = if i == 0 || i == nodes_per_dim - 1 { 0.5 * h } else { h };
                    (lo + h * i as f64, w)
                })
                .collect()
        })
        .collect();
    let mut points = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; bounds.len()];
    loop {
        let x: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i].0).collect();
        let w: f64 = idx.iter().zip(&axes).map(|(&i, a)| a[i].1).product();
        let rho = density(&x);
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::Domain(format!("density value {rho} at {x:?}")));
        }
        points.push(DataPoint { x, target: Vec::new(), weight: w * rho });
        // odometer increment, last axis fastest
        let mut d = bounds.len();
        loop {
            if d == 0 {
                let mass: f64 = points.iter().map(|p| p.weight).sum();
                if mass <= 0.0 {
                    return Err(Error::ZeroMass);
                }
                points.iter_mut().for_each(|p| p.weight /= mass);
                return WeightedDataset::new(points);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < nodes_per_dim {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;

    #[test]
    fn pointwise_examples() {
        assert_eq!(loss_eval(LossKind::SquaredError, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_eval(LossKind::SquaredError, &[3.0], &[1.0]).unwrap(), 4.0);
        assert_eq!(loss_eval(LossKind::Huber(1.0), &[2.0], &[0.0]).unwrap(), 1.5);
        assert_eq!(loss_grad(LossKind::SquaredError, &[3.0], &[1.0]).unwrap(), vec![4.0]);
        assert_eq!(loss_grad(LossKind::Huber(1.0), &[2.0], &[0.0]).unwrap(), vec![1.0]);
        assert_eq!(loss_grad(LossKind::Huber(1.0), &[0.3], &[0.0]).unwrap(), vec![0.3]);
        // both Huber branches agree at |r| = δ
        assert_eq!(loss_grad(LossKind::Huber(1.0), &[1.0], &[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn bce_domain() {
        assert!(matches!(
            loss_eval(LossKind::BinaryCrossEntropy, &[1.0], &[1.0]),
            Err(Error::Domain(_))
        ));
        assert!(loss_grad(LossKind::BinaryCrossEntropy, &[-0.1], &[0.0]).is_err());
        let v = loss_eval(LossKind::BinaryCrossEntropy, &[0.5], &[1.0]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn softmax_cross_entropy_is_stable() {
        let v = loss_eval(LossKind::CrossEntropySoftmax, &[1000.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(v.abs() < 1e-12);
        let g = loss_grad(LossKind::CrossEntropySoftmax, &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(g, vec![0.5, -0.5]);
    }

    #[test]
    fn loss_names() {
        for k in [LossKind::SquaredError, LossKind::BinaryCrossEntropy, LossKind::Huber(0.5), LossKind::CrossEntropySoftmax] {
            assert_eq!(k.to_string().parse::<LossKind>().unwrap(), k);
        }
        assert!("huber:0".parse::<LossKind>().is_err());
    }

    #[test]
    fn dataset_weights_must_sum_to_one() {
        let p = |w| DataPoint { x: vec![0.0], target: vec![], weight: w };
        assert!(WeightedDataset::new(vec![p(0.5), p(0.25)]).is_err());
        assert!(WeightedDataset::new(vec![p(0.5), p(0.5)]).is_ok());
        assert!(WeightedDataset::new(vec![]).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let d = quadrature_dataset(&|_| 1.0, &[(0.0, 1.0)], 3).unwrap();
        let xs: Vec<f64> = d.points().iter().map(|p| p.x[0]).collect();
        let ws: Vec<f64> = d.points().iter().map(|p| p.weight).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert_eq!(ws, vec![0.25, 0.5, 0.25]);

        let spike = quadrature_dataset(&|x| if x[0] == 0.5 { 7.0 } else { 0.0 }, &[(0.0, 1.0)], 3).unwrap();
        assert_eq!(spike.points()[1].weight, 1.0);

        let sq = quadrature_dataset(&|_| 1.0, &[(-1.0, 1.0), (-1.0, 1.0)], 2).unwrap();
        assert_eq!(sq.len(), 4);
        assert!(sq.points().iter().all(|p| p.weight == 0.25 && p.x.iter().all(|v| v.abs() == 1.0)));

        assert!(matches!(quadrature_dataset(&|_| 0.0, &[(0.0, 1.0)], 4), Err(Error::ZeroMass)));
    }

    #[test]
    fn csv_round_trip() {
        let d = WeightedDataset::uniform(
            vec![vec![0.1, -0.2], vec![1.0 / 3.0, 2.0]],
            vec![vec![5.0], vec![-1.5]],
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x_0,x_1,y_0,weight\n"));
        assert_eq!(WeightedDataset::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn expected_loss_of_constant_net_at_exact_fit_is_zero() {
        let arch = Architecture::new(vec![1, 2, 1], ActivationKind::Tanh).unwrap();
        let theta = ParameterVector::new(&arch, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.5]).unwrap();
        let data = WeightedDataset::uniform(
            vec![vec![-1.0], vec![0.0], vec![0.7]],
            vec![vec![2.5], vec![2.5], vec![2.5]],
        )
        .unwrap();
        let (l, g) = expected_loss_grad(&arch, &theta, &data, &TargetSpec::FixedLabels, LossKind::SquaredError).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parallel_reduction_is_deterministic() {
        let arch = Architecture::new(vec![1, 8, 1], ActivationKind::Gelu).unwrap();
        let theta = crate::network::init_params(&arch, crate::network::InitScheme::GlorotUniform, 1).unwrap();
        let xs: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64 / 500.0 - 1.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * x[0]]).collect();
        let data = WeightedDataset::uniform(xs, ys).unwrap();
        let obj = ExpectedLoss::new(&arch, &data, &TargetSpec::FixedLabels, LossKind::SquaredError).unwrap();
        let a = obj.value_grad(theta.as_slice()).unwrap();
        for _ in 0..5 {
            let b = obj.value_grad(theta.as_slice()).unwrap();
            assert_eq!(a.0.to_bits(), b.0.to_bits());
            assert!(a.1.iter().zip(&b.1).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
