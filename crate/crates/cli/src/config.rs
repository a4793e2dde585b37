//! Flat TOML experiment configuration.
//!
//! Every key is optional except `experiment`; missing keys take per-experiment
//! defaults. Keys that do not apply to the chosen experiment are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use gfl_core::flow::{ClassifyThresholds, FlowConfig, Integrator};
use gfl_core::kolmogorov::{BlackScholesSpec, HeatSpec, Pde};
use gfl_core::{ActivationKind, Architecture, InitScheme, LossKind, OptimizerKind, Polynomial};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Experiment {
    #[serde(rename = "poly1d")]
    #[value(name = "poly1d")]
    Poly1d,
    #[serde(rename = "poly2d")]
    #[value(name = "poly2d")]
    Poly2d,
    #[serde(rename = "poly4d")]
    #[value(name = "poly4d")]
    Poly4d,
    #[serde(rename = "flow")]
    #[value(name = "flow")]
    Flow,
    #[serde(rename = "theoremC")]
    #[value(name = "theoremC")]
    TheoremC,
    #[serde(rename = "heat")]
    #[value(name = "heat")]
    Heat,
    #[serde(rename = "black_scholes")]
    #[value(name = "black_scholes")]
    BlackScholes,
    #[serde(rename = "mnist")]
    #[value(name = "mnist")]
    Mnist,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Poly1d => "poly1d",
            Experiment::Poly2d => "poly2d",
            Experiment::Poly4d => "poly4d",
            Experiment::Flow => "flow",
            Experiment::TheoremC => "theoremC",
            Experiment::Heat => "heat",
            Experiment::BlackScholes => "black_scholes",
            Experiment::Mnist => "mnist",
        }
    }

    fn keys(self) -> Vec<&'static str> {
        const COMMON: &[&str] = &["experiment", "output_dir", "threads"];
        const TRAIN: &[&str] = &[
            "widths", "activation", "loss", "optimizer", "lr", "beta1", "beta2", "eps", "steps", "batch", "seeds",
            "ema_alpha", "init",
        ];
        let own: &[&str] = match self {
            Experiment::Poly1d | Experiment::Poly2d | Experiment::Poly4d => &["target", "dataset_size", "data_seed"],
            Experiment::Flow => &[
                "widths", "activation", "loss", "target", "points", "horizon", "rel_tol", "abs_tol", "h_max",
                "max_steps", "record_every", "start", "warm_j", "seeds", "init", "grad_eps", "norm_growth",
            ],
            Experiment::TheoremC => &["widths", "activation", "target", "js", "grid", "points"],
            Experiment::Heat => &["dim", "horizon", "box", "test_points", "test_seed"],
            Experiment::BlackScholes => &[
                "dim", "horizon", "box", "r", "c", "strike", "sigma", "rounds", "paths", "test_points", "test_seed",
            ],
            Experiment::Mnist => &[
                "train_images", "train_labels", "test_images", "test_labels", "subsample", "test_subsample",
                "eval_every",
            ],
        };
        let train = !matches!(self, Experiment::Flow | Experiment::TheoremC);
        let mut all: Vec<&str> = COMMON.to_vec();
        if train {
            all.extend(TRAIN);
        }
        all.extend(own);
        all
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ema_alpha: Option<f64>,
    /// `glorot_uniform`, `normal:<std>` or `uniform:<half-width>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    /// `warm`, `random` or `realizable`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_growth: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub js: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_seed: Option<u64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_subsample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
}

impl ExperimentConfig {
    /// A config with every optional key unset.
    pub fn new(experiment: Experiment) -> Self {
        toml::from_str(&format!("experiment = \"{}\"", experiment.name())).expect("minimal config parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Names of the keys that are set.
    pub fn present_keys(&self) -> BTreeSet<String> {
        match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(self.experiment.name()))
    }

    /// Rejects keys foreign to the experiment and resolves every setting once so
    /// bad values surface before any work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let allowed = self.experiment.keys();
        if let Some(k) = self.present_keys().into_iter().find(|k| !allowed.contains(&k.as_str())) {
            return Err(field_err(&k, format!("not used by experiment {}", self.experiment.name())));
        }
        if self.threads == Some(0) {
            return Err(field_err("threads", "must be positive"));
        }
        match self.experiment {
            Experiment::Poly1d | Experiment::Poly2d | Experiment::Poly4d => PolySettings::resolve(self).map(drop),
            Experiment::Flow => FlowSettings::resolve(self).map(drop),
            Experiment::TheoremC => TheoremCSettings::resolve(self).map(drop),
            Experiment::Heat | Experiment::BlackScholes => KolmogorovSettings::resolve(self).map(drop),
            Experiment::Mnist => MnistSettings::resolve(self).map(drop),
        }
    }
}

/// The degree-10, degree-5 and degree-11 targets for input dimensions 1, 2 and 4.
pub fn default_poly_target(dim: usize) -> Polynomial {
    let text = match dim {
        1 => "x0^10 - 2*x0^8 + 2*x0^5 + 3*x0^3 - 2*x0^2 + 5",
        2 => "x1^5 - x0^3*x1^2 - 4*x0^2*x1 + 3*x0^3 - x1^2 + x0 + 2",
        4 => "x0^6*x3^5 + x1^6 - x0^3*x1^2*x2 + x3^2 - 4*x2^4*x1^4 + 3*x3^3*x1^3 - x2^2*x0 + x2 + 3",
        _ => unreachable!("no default target for dimension {dim}"),
    };
    Polynomial::parse(text, dim).expect("built-in target parses")
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field_err(field, format!("must be positive and finite, got {v}")))
    }
}

fn nonzero(field: &str, v: usize) -> Result<usize, ConfigError> {
    if v == 0 {
        Err(field_err(field, "must be positive"))
    } else {
        Ok(v)
    }
}

fn activation(cfg: &ExperimentConfig, default: ActivationKind) -> Result<ActivationKind, ConfigError> {
    match &cfg.activation {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: gfl_core::Error| field_err("activation", e.to_string())),
    }
}

fn loss(cfg: &ExperimentConfig, default: LossKind) -> Result<LossKind, ConfigError> {
    match &cfg.loss {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: gfl_core::Error| field_err("loss", e.to_string())),
    }
}

fn architecture(
    cfg: &ExperimentConfig,
    default: Vec<usize>,
    act: ActivationKind,
    io: (usize, usize),
) -> Result<Architecture, ConfigError> {
    let widths = cfg.widths.clone().unwrap_or(default);
    if widths.first() != Some(&io.0) || widths.last() != Some(&io.1) {
        return Err(field_err("widths", format!("must start at {} and end at {}, got {widths:?}", io.0, io.1)));
    }
    Architecture::new(widths, act).map_err(|e| field_err("widths", e.to_string()))
}

fn optimizer(cfg: &ExperimentConfig, default_adam_lr: f64, default_sgd_lr: f64) -> Result<OptimizerKind, ConfigError> {
    let name = cfg.optimizer.as_deref().unwrap_or("adam");
    let kind = match name {
        "adam" => {
            let OptimizerKind::Adam { beta1, beta2, eps, .. } = OptimizerKind::adam(1.0) else { unreachable!() };
            OptimizerKind::Adam {
                lr: positive("lr", cfg.lr.unwrap_or(default_adam_lr))?,
                beta1: cfg.beta1.unwrap_or(beta1),
                beta2: cfg.beta2.unwrap_or(beta2),
                eps: positive("eps", cfg.eps.unwrap_or(eps))?,
            }
        }
        "sgd" => {
            for (k, v) in [("beta1", cfg.beta1), ("beta2", cfg.beta2), ("eps", cfg.eps)] {
                if v.is_some() {
                    return Err(field_err(k, "only meaningful for optimizer = \"adam\""));
                }
            }
            OptimizerKind::Sgd { lr: positive("lr", cfg.lr.unwrap_or(default_sgd_lr))? }
        }
        other => return Err(field_err("optimizer", format!("expected \"sgd\" or \"adam\", got {other:?}"))),
    };
    for (k, v) in [("beta1", cfg.beta1), ("beta2", cfg.beta2)] {
        if let Some(b) = v {
            if !(0.0..1.0).contains(&b) {
                return Err(field_err(k, format!("must lie in [0, 1), got {b}")));
            }
        }
    }
    Ok(kind)
}

fn init(cfg: &ExperimentConfig) -> Result<InitScheme, ConfigError> {
    let Some(s) = cfg.init.as_deref() else {
        return Ok(InitScheme::GlorotUniform);
    };
    let num = |v: &str| v.parse::<f64>().ok().filter(|x| *x > 0.0 && x.is_finite());
    let scheme = match s.split_once(':') {
        None if s == "glorot_uniform" => Some(InitScheme::GlorotUniform),
        Some(("normal", v)) => num(v).map(|std| InitScheme::Normal { mean: 0.0, std }),
        Some(("uniform", v)) => num(v).map(|a| InitScheme::Uniform { low: -a, high: a }),
        _ => None,
    };
    scheme.ok_or_else(|| field_err("init", format!("expected glorot_uniform, normal:<std> or uniform:<a>, got {s:?}")))
}

fn seeds(cfg: &ExperimentConfig, default: Vec<u64>) -> Result<Vec<u64>, ConfigError> {
    let s = cfg.seeds.clone().unwrap_or(default);
    if s.is_empty() {
        return Err(field_err("seeds", "must not be empty"));
    }
    let distinct: BTreeSet<_> = s.iter().collect();
    if distinct.len() != s.len() {
        return Err(field_err("seeds", "contains duplicates"));
    }
    Ok(s)
}

fn ema_alpha(cfg: &ExperimentConfig) -> Result<f64, ConfigError> {
    let a = cfg.ema_alpha.unwrap_or(0.95);
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(field_err("ema_alpha", format!("must lie in (0, 1), got {a}")))
    }
}

fn target(cfg: &ExperimentConfig, dim: usize, default: impl FnOnce() -> Polynomial) -> Result<Polynomial, ConfigError> {
    match &cfg.target {
        None => Ok(default()),
        Some(s) => Polynomial::parse(s, dim).map_err(|e| field_err("target", e.to_string())),
    }
}

#[derive(Debug, Clone)]
pub struct PolySettings {
    pub target: Polynomial,
    pub arch: Architecture,
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    pub init: InitScheme,
    pub steps: usize,
    pub batch: usize,
    pub dataset_size: usize,
    pub data_seed: u64,
    pub seeds: Vec<u64>,
    pub ema_alpha: f64,
}

impl PolySettings {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let dim = match cfg.experiment {
            Experiment::Poly1d => 1,
            Experiment::Poly2d => 2,
            Experiment::Poly4d => 4,
            e => return Err(field_err("experiment", format!("{} is not a polynomial experiment", e.name()))),
        };
        let act = activation(cfg, ActivationKind::Tanh)?;
        let hidden: &[usize] = if dim == 1 { &[10, 20, 10] } else { &[20, 40, 20] };
        let default_widths = [&[dim][..], hidden, &[1]].concat();
        Ok(Self {
            target: target(cfg, dim, || default_poly_target(dim))?,
            arch: architecture(cfg, default_widths, act, (dim, 1))?,
            loss: loss(cfg, LossKind::SquaredError)?,
            optimizer: optimizer(cfg, 0.005, 0.01)?,
            init: init(cfg)?,
            steps: cfg.steps.unwrap_or(20_000),
            batch: nonzero("batch", cfg.batch.unwrap_or(100))?,
            dataset_size: nonzero("dataset_size", cfg.dataset_size.unwrap_or(10_000))?,
            data_seed: cfg.data_seed.unwrap_or(0),
            seeds: seeds(cfg, (0..20).collect())?,
            ema_alpha: ema_alpha(cfg)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStart {
    /// Builder network for the target, embedded into the architecture.
    Warm,
    Random,
    /// Labels produced by the initial network itself.
    Realizable,
}

#[derive(Debug, Clone)]
pub struct FlowSettings {
    pub arch: Architecture,
    pub target: Polynomial,
    pub loss: LossKind,
    pub points: usize,
    pub flow: FlowConfig,
    pub start: FlowStart,
    pub warm_j: f64,
    pub init: InitScheme,
    pub seed: u64,
    pub thresholds: ClassifyThresholds,
}

impl FlowSettings {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let act = activation(cfg, ActivationKind::Tanh)?;
        let arch = architecture(cfg, vec![1, 4, 1], act, (cfg.widths.as_ref().map_or(1, |w| w[0]), 1))?;
        let dim = arch.input_dim();
        let start = match cfg.start.as_deref().unwrap_or("warm") {
            "warm" => FlowStart::Warm,
            "random" => FlowStart::Random,
            "realizable" => FlowStart::Realizable,
            other => return Err(field_err("start", format!("expected warm, random or realizable, got {other:?}"))),
        };
        let horizon = positive("horizon", cfg.horizon.unwrap_or(1e3))?;
        let rel_tol = positive("rel_tol", cfg.rel_tol.unwrap_or(1e-8))?;
        let abs_tol = positive("abs_tol", cfg.abs_tol.unwrap_or(1e-12))?;
        let mut flow = FlowConfig::adaptive(rel_tol, abs_tol, horizon);
        if let Integrator::AdaptiveRkf45 { h_max, h_init, .. } = &mut flow.integrator {
            *h_max = positive("h_max", cfg.h_max.unwrap_or(*h_max))?;
            *h_init = h_init.min(*h_max);
        }
        flow.record_every = nonzero("record_every", cfg.record_every.unwrap_or(10))?;
        flow.max_steps = nonzero("max_steps", cfg.max_steps.unwrap_or(2_000_000))?;
        flow.validate().map_err(|e| field_err("h_max", e.to_string()))?;
        let seed = match cfg.seeds.as_deref() {
            None => 0,
            Some([s]) => *s,
            Some(_) => return Err(field_err("seeds", "flow runs take exactly one seed")),
        };
        let defaults = ClassifyThresholds::default();
        Ok(Self {
            arch,
            target: target(cfg, dim, || Polynomial::parse("x0^2", dim).expect("x0^2 parses"))?,
            loss: loss(cfg, LossKind::SquaredError)?,
            points: nonzero("points", cfg.points.unwrap_or(32))?,
            flow,
            start,
            warm_j: positive("warm_j", cfg.warm_j.unwrap_or(10.0))?,
            init: init(cfg)?,
            seed,
            thresholds: ClassifyThresholds {
                grad_eps: positive("grad_eps", cfg.grad_eps.unwrap_or(defaults.grad_eps))?,
                norm_growth_factor: positive("norm_growth", cfg.norm_growth.unwrap_or(defaults.norm_growth_factor))?,
                ..defaults
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct TheoremCSettings {
    pub target: Polynomial,
    pub activation: ActivationKind,
    /// Deep architecture to embed into; the bare builder network when absent.
    pub arch: Option<Architecture>,
    pub js: Vec<f64>,
    pub grid: usize,
    pub points: usize,
}

impl TheoremCSettings {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let act = activation(cfg, ActivationKind::Tanh)?;
        let dim = cfg.widths.as_ref().and_then(|w| w.first().copied()).unwrap_or(1);
        let arch = match &cfg.widths {
            Some(w) => Some(architecture(cfg, w.clone(), act, (dim, *w.last().unwrap_or(&0)))?),
            None => None,
        };
        if let Some(a) = &arch {
            if a.output_dim() != 1 {
                return Err(field_err("widths", "the sweep fits a single scalar target"));
            }
        }
        let js = cfg.js.clone().unwrap_or_else(|| vec![10.0, 100.0, 1000.0]);
        if js.is_empty() {
            return Err(field_err("js", "must not be empty"));
        }
        for &j in &js {
            positive("js", j)?;
        }
        Ok(Self {
            target: target(cfg, dim, || Polynomial::parse("x0^2", dim).expect("x0^2 parses"))?,
            activation: act,
            arch,
            js,
            grid: nonzero("grid", cfg.grid.unwrap_or(201))?,
            points: nonzero("points", cfg.points.unwrap_or(32))?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct KolmogorovSettings {
    pub pde: Pde,
    pub arch: Architecture,
    pub optimizer: OptimizerKind,
    pub init: InitScheme,
    pub steps: usize,
    pub batch: usize,
    pub seeds: Vec<u64>,
    pub ema_alpha: f64,
    pub test_points: usize,
    pub test_seed: u64,
    /// Monte Carlo reference effort (Black–Scholes only).
    pub rounds: usize,
    pub paths: usize,
}

impl KolmogorovSettings {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let dim = nonzero("dim", cfg.dim.unwrap_or(2))?;
        let horizon = positive("horizon", cfg.horizon.unwrap_or(1.0))?;
        let check_box = |b: &[(f64, f64)]| -> Result<(), ConfigError> {
            if b.len() != dim {
                return Err(field_err("box", format!("needs {dim} intervals, got {}", b.len())));
            }
            if b.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                return Err(field_err("box", "every interval needs finite lo < hi"));
            }
            Ok(())
        };
        let pde = match cfg.experiment {
            Experiment::Heat => {
                let mut spec = HeatSpec::new(dim, horizon);
                if let Some(b) = &cfg.sample_box {
                    check_box(b)?;
                    spec.sample_box = b.clone();
                }
                Pde::Heat(spec)
            }
            Experiment::BlackScholes => {
                let mut spec = BlackScholesSpec::standard(dim, horizon);
                spec.r = cfg.r.unwrap_or(spec.r);
                spec.c = cfg.c.unwrap_or(spec.c);
                if let Some(k) = cfg.strike {
                    spec.strike = positive("strike", k)?;
                    spec.sample_box = vec![(0.5 * k, 1.5 * k); dim];
                }
                if let Some(s) = &cfg.sigma {
                    if s.len() != dim {
                        return Err(field_err("sigma", format!("needs {dim} entries, got {}", s.len())));
                    }
                    spec.sigma = s.clone();
                }
                if let Some(b) = &cfg.sample_box {
                    check_box(b)?;
                    spec.sample_box = b.clone();
                }
                spec.validate().map_err(|e| field_err("sigma", e.to_string()))?;
                Pde::BlackScholes(spec)
            }
            e => return Err(field_err("experiment", format!("{} is not a PDE experiment", e.name()))),
        };
        let act = activation(cfg, ActivationKind::Gelu)?;
        Ok(Self {
            pde,
            arch: architecture(cfg, vec![dim, 32, 32, 32, 1], act, (dim, 1))?,
            optimizer: optimizer(cfg, 5e-3, 1e-2)?,
            init: init(cfg)?,
            steps: cfg.steps.unwrap_or(5000),
            batch: nonzero("batch", cfg.batch.unwrap_or(256))?,
            seeds: seeds(cfg, vec![0])?,
            ema_alpha: ema_alpha(cfg)?,
            test_points: nonzero("test_points", cfg.test_points.unwrap_or(1024))?,
            test_seed: cfg.test_seed.unwrap_or(12_345),
            rounds: nonzero("rounds", cfg.rounds.unwrap_or(16))?,
            paths: nonzero("paths", cfg.paths.unwrap_or(1024))?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MnistSettings {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub arch: Architecture,
    pub optimizer: OptimizerKind,
    pub init: InitScheme,
    pub steps: usize,
    pub batch: usize,
    pub seeds: Vec<u64>,
    pub ema_alpha: f64,
    pub subsample: Option<usize>,
    pub test_subsample: Option<usize>,
    pub eval_every: usize,
}

impl MnistSettings {
    pub fn resolve(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let dir = PathBuf::from("data/mnist");
        let path = |v: &Option<PathBuf>, name: &str| v.clone().unwrap_or_else(|| dir.join(name));
        if let Some(l) = &cfg.loss {
            if l.parse::<LossKind>().ok() != Some(LossKind::CrossEntropySoftmax) {
                return Err(field_err("loss", "mnist trains with cross_entropy only"));
            }
        }
        let act = activation(cfg, ActivationKind::Gelu)?;
        Ok(Self {
            train_images: path(&cfg.train_images, "train-images-idx3-ubyte"),
            train_labels: path(&cfg.train_labels, "train-labels-idx1-ubyte"),
            test_images: path(&cfg.test_images, "t10k-images-idx3-ubyte"),
            test_labels: path(&cfg.test_labels, "t10k-labels-idx1-ubyte"),
            arch: architecture(cfg, vec![784, 64, 64, 10], act, (784, 10))?,
            optimizer: optimizer(cfg, 1e-3, 1e-2)?,
            init: init(cfg)?,
            steps: cfg.steps.unwrap_or(3000),
            batch: nonzero("batch", cfg.batch.unwrap_or(128))?,
            seeds: seeds(cfg, vec![0])?,
            ema_alpha: ema_alpha(cfg)?,
            subsample: Some(nonzero("subsample", cfg.subsample.unwrap_or(2000))?),
            test_subsample: cfg.test_subsample.map(|n| nonzero("test_subsample", n)).transpose()?,
            eval_every: nonzero("eval_every", cfg.eval_every.unwrap_or(100))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gfl_core::MultiIndex;

    #[test]
    fn minimal_configs_validate() {
        for e in [
            Experiment::Poly1d,
            Experiment::Poly2d,
            Experiment::Poly4d,
            Experiment::Flow,
            Experiment::TheoremC,
            Experiment::Heat,
            Experiment::BlackScholes,
            Experiment::Mnist,
        ] {
            ExperimentConfig::new(e).validate().unwrap();
        }
    }

    #[test]
    fn unknown_and_foreign_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("experiment = \"poly1d\"\nbogus = 1").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax(m) if m.contains("bogus")));
        let err = ExperimentConfig::from_toml("experiment = \"poly1d\"\nstrike = 90.0").unwrap_err();
        assert!(matches!(err, ConfigError::Field { field, .. } if field == "strike"));
    }

    #[test]
    fn bad_values_name_their_field() {
        let cases = [
            ("experiment = \"poly1d\"\nwidths = [2, 4, 1]", "widths"),
            ("experiment = \"poly1d\"\nema_alpha = 1.5", "ema_alpha"),
            ("experiment = \"heat\"\nactivation = \"cosine\"", "activation"),
            ("experiment = \"poly2d\"\ntarget = \"x5\"", "target"),
            ("experiment = \"black_scholes\"\ndim = 2\nsigma = [0.1]", "sigma"),
            ("experiment = \"poly1d\"\noptimizer = \"sgd\"\nbeta1 = 0.5", "beta1"),
            ("experiment = \"flow\"\nstart = \"hot\"", "start"),
        ];
        for (text, field) in cases {
            match ExperimentConfig::from_toml(text) {
                Err(ConfigError::Field { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn poly_defaults() {
        let s = PolySettings::resolve(&ExperimentConfig::new(Experiment::Poly1d)).unwrap();
        assert_eq!(s.seeds.len(), 20);
        assert_eq!(s.arch.widths(), &[1, 10, 20, 10, 1]);
        assert_eq!(s.optimizer, OptimizerKind::adam(0.005));
        let s = PolySettings::resolve(&ExperimentConfig::new(Experiment::Poly4d)).unwrap();
        assert_eq!(s.arch.widths(), &[4, 20, 40, 20, 1]);
    }

    #[test]
    fn default_targets_term_for_term() {
        let p1 = default_poly_target(1);
        let expect1 = [(10, 1.0), (8, -2.0), (5, 2.0), (3, 3.0), (2, -2.0), (0, 5.0)];
        assert_eq!(p1.num_terms(), expect1.len());
        for (e, c) in expect1 {
            assert_eq!(p1.coeff(&MultiIndex(vec![e])), c);
        }

        let p2 = default_poly_target(2);
        let expect2 = [([0, 5], 1.0), ([3, 2], -1.0), ([2, 1], -4.0), ([3, 0], 3.0), ([0, 2], -1.0), ([1, 0], 1.0), ([0, 0], 2.0)];
        assert_eq!(p2.num_terms(), expect2.len());
        for (e, c) in expect2 {
            assert_eq!(p2.coeff(&MultiIndex(e.to_vec())), c);
        }

        let p4 = default_poly_target(4);
        let expect4 = [
            ([6, 0, 0, 5], 1.0),
            ([0, 6, 0, 0], 1.0),
            ([3, 2, 1, 0], -1.0),
            ([0, 0, 0, 2], 1.0),
            ([0, 4, 4, 0], -4.0),
            ([0, 3, 0, 3], 3.0),
            ([1, 0, 2, 0], -1.0),
            ([0, 0, 1, 0], 1.0),
            ([0, 0, 0, 0], 3.0),
        ];
        assert_eq!(p4.num_terms(), expect4.len());
        for (e, c) in expect4 {
            assert_eq!(p4.coeff(&MultiIndex(e.to_vec())), c);
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml("experiment = \"heat\"\ndim = 3\nbox = [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]").unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
