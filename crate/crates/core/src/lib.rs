//! Numerical core: activations and their Taylor jets, dense networks, losses,
//! polynomial approximation builders, gradient-flow integration, stochastic
//! optimizers and Monte Carlo PDE data.

pub mod activation;
pub mod error;
pub mod flow;
pub mod kolmogorov;
pub mod loss;
pub mod network;
pub mod optim;
pub mod poly;

pub use activation::{ActivationKind, Jet};
pub use error::{Error, Result};
pub use flow::{
    classify, integrate, integrate_flow, ClassifyThresholds, DichotomyVerdict, FlowConfig, Integrator, Objective,
    TrajectoryLog, TrajectorySample, VerdictTag,
};
pub use loss::{DataPoint, ExpectedLoss, LossKind, TargetSpec, WeightedDataset};
pub use network::{Architecture, InitScheme, ParameterVector};
pub use optim::{EmaTracker, OptimizerKind, OptimizerState};
pub use poly::{MultiIndex, Polynomial, ShallowNet};
