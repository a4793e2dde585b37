//! Gradient flow `Θ'(t) = -∇L(Θ(t))`: integrators, telemetry and the
//! converge-or-diverge classifier.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::loss::{ExpectedLoss, LossKind, TargetSpec, WeightedDataset};
use crate::network::{l2_norm, Architecture, ParameterVector};
use crate::{Error, Result};

/// A differentiable scalar objective on a flat parameter vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl Objective for ExpectedLoss<'_> {
    fn dim(&self) -> usize {
        self.arch.param_dim()
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        ExpectedLoss::value_grad(self, theta)
    }
}

/// `½‖θ‖²`, whose flow is `e^{-t} θ0`.
#[derive(Debug, Clone, Copy)]
pub struct HalfSquaredNorm {
    pub dim: usize,
}

impl Objective for HalfSquaredNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = l2_norm(theta);
        Ok((0.5 * n * n, theta.to_vec()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    /// Gradient descent with learning rate `h`.
    ExplicitEuler { h: f64 },
    Rk4 { h: f64 },
    AdaptiveRkf45 {
        rel_tol: f64,
        abs_tol: f64,
        h_init: f64,
        h_min: f64,
        h_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub integrator: Integrator,
    pub horizon: f64,
    pub record_every: usize,
    /// Accepted plus rejected steps allowed before giving up.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_max_steps() -> usize {
    10_000_000
}

impl FlowConfig {
    pub fn adaptive(rel_tol: f64, abs_tol: f64, horizon: f64) -> Self {
        Self {
            integrator: Integrator::AdaptiveRkf45 {
                rel_tol,
                abs_tol,
                h_init: 1e-3,
                h_min: 1e-12,
                h_max: 0.01,
            },
            horizon,
            record_every: 1,
            max_steps: default_max_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad("horizon must be positive");
        }
        if self.record_every == 0 {
            return bad("record_every must be positive");
        }
        match self.integrator {
            Integrator::ExplicitEuler { h } | Integrator::Rk4 { h } if !(h > 0.0) => bad("step size must be positive"),
            Integrator::AdaptiveRkf45 { rel_tol, abs_tol, h_init, h_min, h_max } => {
                if !(rel_tol > 0.0 && abs_tol > 0.0) {
                    bad("tolerances must be positive")
                } else if !(h_min > 0.0 && h_min <= h_init && h_init <= h_max) {
                    bad("need 0 < h_min <= h_init <= h_max")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub loss: f64,
    pub theta_norm: f64,
    pub grad_norm: f64,
    pub norm_grad_product: f64,
}

impl TrajectorySample {
    pub fn new(t: f64, loss: f64, theta: &[f64], grad: &[f64]) -> Self {
        let theta_norm = l2_norm(theta);
        let grad_norm = l2_norm(grad);
        Self {
            t,
            loss,
            theta_norm,
            grad_norm,
            norm_grad_product: theta_norm * grad_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub samples: Vec<TrajectorySample>,
    pub final_theta: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "loss", "theta_norm", "grad_norm", "norm_grad_product"];

impl TrajectoryLog {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(TRAJECTORY_HEADER)?;
        for s in &self.samples {
            wr.write_record([s.t, s.loss, s.theta_norm, s.grad_norm, s.norm_grad_product].map(|v| format!("{v:?}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads samples back; `final_theta` is left empty.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().ne(TRAJECTORY_HEADER) {
            return Err(Error::Parse("unexpected trajectory header".into()));
        }
        let mut samples = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<_>>()?;
            samples.push(TrajectorySample {
                t: v[0],
                loss: v[1],
                theta_norm: v[2],
                grad_norm: v[3],
                norm_grad_product: v[4],
            });
        }
        Ok(Self { samples, final_theta: Vec::new(), accepted_steps: 0, rejected_steps: 0 })
    }
}

fn eval(obj: &dyn Objective, theta: &[f64], t: f64) -> Result<(f64, Vec<f64>)> {
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(t));
    }
    match obj.value_grad(theta) {
        Ok((l, g)) if l.is_finite() && g.iter().all(|v| v.is_finite()) => Ok((l, g)),
        Ok(_) | Err(Error::NonFinite(_)) => Err(Error::NonFiniteState(t)),
        Err(e) => Err(e),
    }
}

fn axpy(y: &[f64], h: f64, ks: &[(&[f64], f64)]) -> Vec<f64> {
    let mut out = y.to_vec();
    for &(k, c) in ks {
        let hc = h * c;
        out.iter_mut().zip(k).for_each(|(o, kv)| *o -= hc * kv);
    }
    out
}

struct Recorder {
    log: TrajectoryLog,
    last_recorded_step: Option<usize>,
}

impl Recorder {
    fn push(&mut self, step: usize, t: f64, loss: f64, theta: &[f64], grad: &[f64]) {
        self.log.samples.push(TrajectorySample::new(t, loss, theta, grad));
        self.last_recorded_step = Some(step);
    }
}

/// Integrates the flow, returning whatever trajectory was produced together with the
/// error that stopped it early, if any.
pub fn integrate_partial(obj: &dyn Objective, theta0: &[f64], config: &FlowConfig) -> (TrajectoryLog, Option<Error>) {
    let mut rec = Recorder {
        log: TrajectoryLog {
            samples: Vec::new(),
            final_theta: theta0.to_vec(),
            accepted_steps: 0,
            rejected_steps: 0,
        },
        last_recorded_step: None,
    };
    let err = run(obj, theta0, config, &mut rec).err();
    (rec.log, err)
}

pub fn integrate(obj: &dyn Objective, theta0: &[f64], config: &FlowConfig) -> Result<TrajectoryLog> {
    match integrate_partial(obj, theta0, config) {
        (log, None) => Ok(log),
        (_, Some(e)) => Err(e),
    }
}

/// Full-batch gradient flow of the expected loss.
pub fn integrate_flow(
    arch: &Architecture,
    theta0: &ParameterVector,
    data: &WeightedDataset,
    target: &TargetSpec,
    kind: LossKind,
    config: &FlowConfig,
) -> Result<TrajectoryLog> {
    let obj = ExpectedLoss::new(arch, data, target, kind)?;
    integrate(&obj, theta0.as_slice(), config)
}

// Fehlberg 4(5) tableau
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];

fn run(obj: &dyn Objective, theta0: &[f64], config: &FlowConfig, rec: &mut Recorder) -> Result<()> {
    config.validate()?;
    if theta0.len() != obj.dim() {
        return Err(Error::DimensionMismatch { expected: obj.dim(), got: theta0.len() });
    }
    let horizon = config.horizon;
    let mut theta = theta0.to_vec();
    let mut t = 0.0;
    let (mut loss, mut grad) = eval(obj, &theta, t)?;
    rec.push(0, t, loss, &theta, &grad);
    let mut step = 0usize;
    let mut attempts = 0usize;

    let finish = |rec: &mut Recorder, step: usize, t: f64, loss: f64, theta: &[f64], grad: &[f64]| {
        if rec.last_recorded_step != Some(step) {
            rec.push(step, t, loss, theta, grad);
        } else if let Some(last) = rec.log.samples.last_mut() {
            last.t = t;
        }
    };

    match config.integrator {
        Integrator::ExplicitEuler { h } | Integrator::Rk4 { h } => {
            let rk4 = matches!(config.integrator, Integrator::Rk4 { .. });
            while t < horizon {
                if step >= config.max_steps {
                    return Err(Error::StepBudgetExhausted(config.max_steps));
                }
                let hs = h.min(horizon - t);
                let next = if rk4 {
                    let (_, k2) = eval(obj, &axpy(&theta, hs / 2.0, &[(&grad, 1.0)]), t)?;
                    let (_, k3) = eval(obj, &axpy(&theta, hs / 2.0, &[(&k2, 1.0)]), t)?;
                    let (_, k4) = eval(obj, &axpy(&theta, hs, &[(&k3, 1.0)]), t)?;
                    axpy(&theta, hs / 6.0, &[(&grad, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)])
                } else {
                    axpy(&theta, hs, &[(&grad, 1.0)])
                };
                t = if horizon - t <= h { horizon } else { t + hs };
                step += 1;
                (loss, grad) = eval(obj, &next, t)?;
                theta = next;
                rec.log.accepted_steps = step;
                rec.log.final_theta.clone_from(&theta);
                if step % config.record_every == 0 {
                    rec.push(step, t, loss, &theta, &grad);
                }
            }
        }
        Integrator::AdaptiveRkf45 { rel_tol, abs_tol, h_init, h_min, h_max } => {
            let mut h = h_init;
            while t < horizon {
                if attempts >= config.max_steps {
                    return Err(Error::StepBudgetExhausted(config.max_steps));
                }
                attempts += 1;
                let last = horizon - t <= h;
                let hs = if last { horizon - t } else { h };
                let mut k: Vec<Vec<f64>> = Vec::with_capacity(6);
                k.push(grad.clone());
                for row in A.iter().skip(1) {
                    let combo: Vec<(&[f64], f64)> = k.iter().zip(row).map(|(kv, &c)| (kv.as_slice(), c)).collect();
                    let (_, ki) = eval(obj, &axpy(&theta, hs, &combo), t)?;
                    k.push(ki);
                }
                let y5 = axpy(&theta, hs, &k.iter().zip(B5).map(|(kv, c)| (kv.as_slice(), c)).collect::<Vec<_>>());
                let y4 = axpy(&theta, hs, &k.iter().zip(B4).map(|(kv, c)| (kv.as_slice(), c)).collect::<Vec<_>>());
                let scale = theta.iter().zip(&y5).fold(0.0f64, |m, (a, b)| m.max(a.abs()).max(b.abs()));
                let err = y5
                    .iter()
                    .zip(&y4)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
                    / (abs_tol + rel_tol * scale);
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let mut accept = err.is_finite() && err <= 1.0;
                let mut new_state = None;
                if accept {
                    let t_new = if last { horizon } else { t + hs };
                    let (l_new, g_new) = eval(obj, &y5, t_new)?;
                    if l_new > loss + abs_tol {
                        accept = false;
                    } else {
                        new_state = Some((t_new, l_new, g_new));
                    }
                }
                match new_state {
                    Some((t_new, l_new, g_new)) if accept => {
                        t = t_new;
                        theta = y5;
                        loss = l_new;
                        grad = g_new;
                        step += 1;
                        rec.log.accepted_steps = step;
                        rec.log.final_theta.clone_from(&theta);
                        if step % config.record_every == 0 {
                            rec.push(step, t, loss, &theta, &grad);
                        }
                        h = (hs * factor).clamp(h_min, h_max);
                        if last {
                            h = h.max(hs);
                        }
                    }
                    _ => {
                        rec.log.rejected_steps += 1;
                        if hs <= h_min {
                            return Err(Error::StepSizeUnderflow { t, h_min });
                        }
                        // error-driven shrink, or halving after a loss increase
                        let shrink = if err <= 1.0 { 0.5 } else { factor.min(0.5) };
                        h = (hs * shrink).max(h_min);
                    }
                }
            }
        }
    }
    finish(rec, step, t, loss, &theta, &grad);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    /// Final gradient norm relative to the initial one.
    pub grad_eps: f64,
    pub norm_growth_factor: f64,
    pub tail_fraction: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self { grad_eps: 1e-6, norm_growth_factor: 1.5, tail_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictTag {
    ConvergedToCriticalPoint,
    DivergingToInfinity,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub final_grad_norm: f64,
    pub theta_norm_slope: f64,
    /// Mean loss over the tail window.
    pub loss_limit_estimate: f64,
    pub norm_grad_product_slope: f64,
    pub norm_ratio: f64,
    pub tail_loss_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyVerdict {
    pub tag: VerdictTag,
    pub evidence: Evidence,
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn range(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let hi = v.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.fold(f64::INFINITY, f64::min);
    hi - lo
}

pub fn classify(log: &TrajectoryLog, th: &ClassifyThresholds) -> DichotomyVerdict {
    let s = &log.samples;
    let n = s.len();
    let nan = f64::NAN;
    if n == 0 {
        let evidence = Evidence {
            final_grad_norm: nan,
            theta_norm_slope: nan,
            loss_limit_estimate: nan,
            norm_grad_product_slope: nan,
            norm_ratio: nan,
            tail_loss_range: nan,
        };
        return DichotomyVerdict { tag: VerdictTag::Undetermined, evidence };
    }
    let tail_len = ((th.tail_fraction * n as f64).ceil() as usize).clamp(2.min(n), n);
    let tail = &s[n - tail_len..];
    let (first, last) = (s[0], s[n - 1]);
    let ts: Vec<f64> = tail.iter().map(|x| x.t).collect();
    let theta_tail: Vec<f64> = tail.iter().map(|x| x.theta_norm).collect();
    let ngp_tail: Vec<f64> = tail.iter().map(|x| x.norm_grad_product).collect();
    let evidence = Evidence {
        final_grad_norm: last.grad_norm,
        theta_norm_slope: ls_slope(&ts, &theta_tail),
        loss_limit_estimate: tail.iter().map(|x| x.loss).sum::<f64>() / tail_len as f64,
        norm_grad_product_slope: ls_slope(&ts, &ngp_tail),
        norm_ratio: last.theta_norm / first.theta_norm,
        tail_loss_range: range(tail.iter().map(|x| x.loss)),
    };
    if n < 10 {
        return DichotomyVerdict { tag: VerdictTag::Undetermined, evidence };
    }
    let max_theta = s.iter().map(|x| x.theta_norm).fold(0.0, f64::max);
    let theta_range = range(theta_tail.iter().copied());
    let grad_small = last.grad_norm == 0.0 || last.grad_norm <= th.grad_eps * first.grad_norm;
    let theta_flat = theta_range == 0.0 || theta_range < 0.01 * max_theta;
    let tag = if grad_small && theta_flat {
        VerdictTag::ConvergedToCriticalPoint
    } else if last.theta_norm >= th.norm_growth_factor * first.theta_norm
        && evidence.theta_norm_slope > 0.0
        && evidence.tail_loss_range <= 0.01 * first.loss
    {
        VerdictTag::DivergingToInfinity
    } else {
        VerdictTag::Undetermined
    };
    DichotomyVerdict { tag, evidence }
}

/// `|(L(0) - L(T)) - ∫ ‖∇L‖² dt| / max(L(0), 1e-12)` with the integral by the trapezoid rule.
pub fn check_energy_identity(log: &TrajectoryLog) -> f64 {
    let s = &log.samples;
    if s.len() < 2 {
        return 0.0;
    }
    let integral: f64 = s
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].grad_norm.powi(2) + w[1].grad_norm.powi(2)))
        .sum();
    let drop = s[0].loss - s[s.len() - 1].loss;
    (drop - integral).abs() / s[0].loss.max(1e-12)
}

/// `min_t (‖Θ(0)‖ + √(t L(0)) - ‖Θ(t)‖)`.
pub fn check_norm_bound(log: &TrajectoryLog) -> f64 {
    let Some(first) = log.samples.first() else {
        return 0.0;
    };
    log.samples
        .iter()
        .map(|x| first.theta_norm + (x.t * first.loss).sqrt() - x.theta_norm)
        .fold(f64::INFINITY, f64::min)
}
