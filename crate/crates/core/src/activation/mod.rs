//! Scalar activation functions: values, first derivatives, Taylor jets and a
//! bounded-derivative (sublinearity) probe.

pub mod jet;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
pub use jet::Jet;

/// Nonzero threshold for expansion-point coefficients.
pub const ALPHA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ActivationKind {
    Logistic,
    Tanh,
    Softplus,
    /// `x · σ(βx)` with `β > 0`.
    Swish(f64),
    Gelu,
    Mish,
    Elu,
    Softsign,
    Relu,
}

impl ActivationKind {
    /// Every kind in the catalog, with swish at β = 1.
    pub const ALL: [ActivationKind; 9] = [
        ActivationKind::Logistic,
        ActivationKind::Tanh,
        ActivationKind::Softplus,
        ActivationKind::Swish(1.0),
        ActivationKind::Gelu,
        ActivationKind::Mish,
        ActivationKind::Elu,
        ActivationKind::Softsign,
        ActivationKind::Relu,
    ];

    /// Real-analytic kinds.
    pub const ANALYTIC: [ActivationKind; 6] = [
        ActivationKind::Logistic,
        ActivationKind::Tanh,
        ActivationKind::Softplus,
        ActivationKind::Swish(1.0),
        ActivationKind::Gelu,
        ActivationKind::Mish,
    ];

    /// Default set for the polynomial experiments.
    pub const DEFAULT_SWEEP: [ActivationKind; 5] = [
        ActivationKind::Logistic,
        ActivationKind::Tanh,
        ActivationKind::Softplus,
        ActivationKind::Swish(1.0),
        ActivationKind::Gelu,
    ];

    pub fn swish(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta.is_finite() {
            Ok(ActivationKind::Swish(beta))
        } else {
            Err(Error::InvalidArgument(format!(
                "swish beta must be positive, got {beta}"
            )))
        }
    }

    pub fn is_analytic(self) -> bool {
        !matches!(
            self,
            ActivationKind::Elu | ActivationKind::Softsign | ActivationKind::Relu
        )
    }

    pub fn is_c1(self) -> bool {
        self != ActivationKind::Relu
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            ActivationKind::Logistic => logistic_value(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Softplus => softplus_value(x),
            ActivationKind::Swish(beta) => x * logistic_value(beta * x),
            ActivationKind::Gelu => x * normal_cdf(x),
            ActivationKind::Mish => x * softplus_value(x).tanh(),
            ActivationKind::Elu => {
                if x <= 0.0 {
                    x.exp_m1()
                } else {
                    x
                }
            }
            ActivationKind::Softsign => x / (1.0 + x.abs()),
            ActivationKind::Relu => x.max(0.0),
        }
    }

    /// First derivative. Relu uses the subgradient 0 at the kink.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Logistic => {
                let s = logistic_value(x);
                s * (1.0 - s)
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Softplus => logistic_value(x),
            ActivationKind::Swish(beta) => {
                let s = logistic_value(beta * x);
                s + beta * x * s * (1.0 - s)
            }
            ActivationKind::Gelu => normal_cdf(x) + x * normal_pdf(x),
            ActivationKind::Mish => {
                let t = softplus_value(x).tanh();
                t + x * (1.0 - t * t) * logistic_value(x)
            }
            ActivationKind::Elu => {
                if x <= 0.0 {
                    x.exp()
                } else {
                    1.0
                }
            }
            ActivationKind::Softsign => {
                let d = 1.0 + x.abs();
                1.0 / (d * d)
            }
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Normalized Taylor coefficients `ψ^(j)(x0)/j!` for `j = 0..=order`.
    pub fn jet(self, x0: f64, order: usize) -> Result<Jet> {
        if !x0.is_finite() {
            return Err(Error::NonFinite("jet basepoint"));
        }
        let unsupported = || Error::UnsupportedOrder {
            kind: self.to_string(),
            order,
            x0,
        };
        let len = order + 1;
        let x = jet::variable(x0, len);
        let mut coeffs = match self {
            ActivationKind::Logistic => jet::logistic(&x),
            ActivationKind::Tanh => jet::tanh(&x),
            ActivationKind::Softplus => jet::softplus(&x),
            ActivationKind::Swish(beta) => jet::mul(&x, &jet::logistic(&jet::scale(&x, beta))),
            ActivationKind::Gelu => {
                let cdf = jet::add_scalar(
                    &jet::scale(&jet::erf(&jet::scale(&x, FRAC_1_SQRT_2)), 0.5),
                    0.5,
                );
                jet::mul(&x, &cdf)
            }
            ActivationKind::Mish => jet::mul(&x, &jet::tanh(&jet::softplus(&x))),
            ActivationKind::Elu => {
                if x0 == 0.0 && order > 1 {
                    return Err(unsupported());
                }
                if x0 <= 0.0 {
                    jet::add_scalar(&jet::exp(&x), -1.0)
                } else {
                    x.clone()
                }
            }
            ActivationKind::Softsign => {
                if x0 == 0.0 && order > 1 {
                    return Err(unsupported());
                }
                let sign = if x0 >= 0.0 { 1.0 } else { -1.0 };
                let denom = jet::add_scalar(&jet::scale(&x, sign), 1.0);
                jet::div(&x, &denom)
            }
            ActivationKind::Relu => {
                if order > 1 {
                    return Err(unsupported());
                }
                if x0 > 0.0 {
                    x.clone()
                } else {
                    vec![0.0; len]
                }
            }
        };
        coeffs[0] = self.eval(x0);
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("jet coefficients"));
        }
        Ok(Jet {
            basepoint: x0,
            coeffs,
        })
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Logistic => f.write_str("logistic"),
            ActivationKind::Tanh => f.write_str("tanh"),
            ActivationKind::Softplus => f.write_str("softplus"),
            ActivationKind::Swish(beta) => write!(f, "swish:{beta}"),
            ActivationKind::Gelu => f.write_str("gelu"),
            ActivationKind::Mish => f.write_str("mish"),
            ActivationKind::Elu => f.write_str("elu"),
            ActivationKind::Softsign => f.write_str("softsign"),
            ActivationKind::Relu => f.write_str("relu"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "logistic" | "sigmoid" => ActivationKind::Logistic,
            "tanh" => ActivationKind::Tanh,
            "softplus" => ActivationKind::Softplus,
            "swish" => ActivationKind::Swish(1.0),
            "gelu" => ActivationKind::Gelu,
            "mish" => ActivationKind::Mish,
            "elu" => ActivationKind::Elu,
            "softsign" => ActivationKind::Softsign,
            "relu" => ActivationKind::Relu,
            other => match other.strip_prefix("swish:") {
                Some(beta) => {
                    let beta: f64 = beta
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad swish beta in {other:?}")))?;
                    ActivationKind::swish(beta)?
                }
                None => return Err(Error::Parse(format!("unknown activation {other:?}"))),
            },
        })
    }
}

impl TryFrom<String> for ActivationKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ActivationKind> for String {
    fn from(k: ActivationKind) -> String {
        k.to_string()
    }
}

pub(crate) fn logistic_value(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus_value(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Grid used when callers do not supply one: 61 points on [-3, 3].
pub fn default_search_grid() -> Vec<f64> {
    linspace(-3.0, 3.0, 61)
}

/// Expansion point with a nonzero normalized Taylor coefficient of the given order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionPoint {
    pub x0: f64,
    pub alpha: f64,
}

/// Picks the grid point maximizing `|ψ^(order)(x0) / order!|`.
pub fn find_expansion_point(
    kind: ActivationKind,
    order: usize,
    grid: &[f64],
) -> Result<ExpansionPoint> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty search grid".into()));
    }
    let mut best: Option<ExpansionPoint> = None;
    for &x0 in grid {
        let alpha = kind.jet(x0, order)?.coeffs[order];
        if best.is_none_or(|b| alpha.abs() > b.alpha.abs()) {
            best = Some(ExpansionPoint { x0, alpha });
        }
    }
    match best {
        Some(b) if b.alpha.abs() > ALPHA_FLOOR => Ok(b),
        _ => Err(Error::NoNonzeroCoefficient { order }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublinearityReport {
    pub sup_abs_derivative: f64,
    pub bounded: bool,
}

/// Estimates `sup |ψ'|` on `[-radius, radius]` and flags it bounded when doubling the
/// radius moves the estimate by at most 1%.
pub fn sublinearity_probe(
    kind: ActivationKind,
    radius: f64,
    samples: usize,
) -> Result<SublinearityReport> {
    if !(radius > 0.0) || samples == 0 {
        return Err(Error::InvalidArgument(
            "radius must be positive and samples nonzero".into(),
        ));
    }
    let sup = |r: f64| {
        linspace(-r, r, samples)
            .into_iter()
            .map(|x| kind.derivative(x).abs())
            .fold(0.0, f64::max)
    };
    let near = sup(radius);
    let far = sup(2.0 * radius);
    Ok(SublinearityReport {
        sup_abs_derivative: near,
        bounded: far <= 1.01 * near,
    })
}
