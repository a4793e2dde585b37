//! Truncated Taylor series arithmetic.
//!
//! A series of length `n + 1` stores normalized coefficients `c[k] = f^(k)(t0) / k!`.
//! Transcendental functions use the ODE recurrences they satisfy
//! (`exp' = exp·u'`, `tanh' = (1 - tanh²)·u'`, `erf' = 2/√π · exp(-u²)·u'`),
//! so every coefficient costs O(k) and no expression tree is ever built.

use std::f64::consts::PI;

/// Normalized Taylor coefficients of a scalar function around `basepoint`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub basepoint: f64,
    pub coeffs: Vec<f64>,
}

impl Jet {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `f^(k)(x0)`, recovered from the normalized coefficient.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeffs[k] * factorial(k)
    }

    /// Evaluates the Taylor polynomial at `basepoint + h`.
    pub fn eval_offset(&self, h: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * h + c)
    }

    /// Re-expands the Taylor polynomial around `basepoint + h`.
    ///
    /// Exact for the polynomial; as an approximation of the underlying function the
    /// highest coefficients lose accuracy first.
    pub fn shift(&self, h: f64) -> Jet {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut binom = 1.0;
            let mut hp = 1.0;
            let mut acc = 0.0;
            for i in k..n {
                acc += self.coeffs[i] * binom * hp;
                binom = binom * (i + 1) as f64 / (i + 1 - k) as f64;
                hp *= h;
            }
            *slot = acc;
        }
        Jet {
            basepoint: self.basepoint + h,
            coeffs: out,
        }
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// The identity series `x0 + t`.
pub(crate) fn variable(x0: f64, len: usize) -> Vec<f64> {
    let mut s = vec![0.0; len];
    s[0] = x0;
    if len > 1 {
        s[1] = 1.0;
    }
    s
}

pub(crate) fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

pub(crate) fn add_scalar(a: &[f64], s: f64) -> Vec<f64> {
    let mut out = a.to_vec();
    out[0] += s;
    out
}

/// Cauchy product.
pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum())
        .collect()
}

/// `a / b`, requires `b[0] != 0`.
pub(crate) fn div(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n];
    for k in 0..n {
        let mut acc = a[k];
        for j in 1..=k {
            acc -= b[j] * c[k - j];
        }
        c[k] = acc / b[0];
    }
    c
}

pub(crate) fn exp(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut c = vec![0.0; n];
    c[0] = u[0].exp();
    for k in 1..n {
        let acc: f64 = (1..=k).map(|j| j as f64 * u[j] * c[k - j]).sum();
        c[k] = acc / k as f64;
    }
    c
}

pub(crate) fn tanh(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut t = vec![0.0; n];
    // s = 1 - t², built alongside t
    let mut s = vec![0.0; n];
    t[0] = u[0].tanh();
    s[0] = 1.0 - t[0] * t[0];
    for k in 1..n {
        let acc: f64 = (1..=k).map(|j| j as f64 * u[j] * s[k - j]).sum();
        t[k] = acc / k as f64;
        s[k] = -(0..=k).map(|i| t[i] * t[k - i]).sum::<f64>();
    }
    t
}

/// Logistic function through `σ(u) = (1 + tanh(u/2)) / 2`, which never overflows.
pub(crate) fn logistic(u: &[f64]) -> Vec<f64> {
    let half = scale(u, 0.5);
    let t = tanh(&half);
    add_scalar(&scale(&t, 0.5), 0.5)
}

/// `log(1 + e^u)` via `softplus' = σ`.
pub(crate) fn softplus(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let sig = logistic(u);
    let mut c = vec![0.0; n];
    c[0] = super::softplus_value(u[0]);
    for k in 1..n {
        let acc: f64 = (1..=k).map(|j| j as f64 * u[j] * sig[k - j]).sum();
        c[k] = acc / k as f64;
    }
    c
}

pub(crate) fn erf(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let neg_sq = scale(&mul(u, u), -1.0);
    let e = exp(&neg_sq);
    let two_over_sqrt_pi = 2.0 / PI.sqrt();
    let mut c = vec![0.0; n];
    c[0] = libm::erf(u[0]);
    for k in 1..n {
        let acc: f64 = (1..=k).map(|j| j as f64 * u[j] * e[k - j]).sum();
        c[k] = two_over_sqrt_pi * acc / k as f64;
    }
    c
}
