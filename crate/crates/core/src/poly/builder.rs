//! Networks whose responses converge to a given polynomial as a scale parameter grows.
//!
//! Every degree level `d` writes the top homogeneous part as `Σ C_i ⟨â_i, x⟩^d` with unit
//! vectors `â_i` and spends one hidden unit per term:
//!
//! ```text
//! (C s^d / α) ψ(⟨â, x⟩ / s + x0) = C ⟨â, x⟩^d + Σ_{k<d} C t_k s^{d-k} / α ⟨â, x⟩^k + O(1/s)
//! ```
//!
//! where `t_k` are the Taylor coefficients of `ψ` at `x0` and `α = t_d`. The lower-order
//! sum is subtracted from the target and handled by the next level down. The constant
//! left at the end becomes the output bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{decompose_homogeneous, Polynomial};
use crate::activation::{default_search_grid, find_expansion_point, ActivationKind};
use crate::network::{l2_norm, Architecture, ParameterVector};
use crate::{Error, Result};

/// Scaled and shifted activation approximating `x ↦ x^n`:
/// `g(x) = (j^n / α) (ψ(x0 + x/j) - Σ_{k<n} t_k (x/j)^k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFragment {
    pub activation: ActivationKind,
    pub n: u32,
    pub j: f64,
    pub x0: f64,
    pub alpha: f64,
    /// `t_0..t_{n-1}`.
    pub taylor: Vec<f64>,
}

impl PowerFragment {
    pub fn eval(&self, x: f64) -> f64 {
        let u = x / self.j;
        let poly = self.taylor.iter().rev().fold(0.0, |acc, &c| acc * u + c);
        self.j.powi(self.n as i32) / self.alpha * (self.activation.eval(self.x0 + u) - poly)
    }
}

pub fn build_univariate_power_jet(kind: ActivationKind, n: u32, j: f64) -> Result<PowerFragment> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::DegenerateScale(j));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let ep = find_expansion_point(kind, n as usize, &default_search_grid())?;
    let jet = kind.jet(ep.x0, n as usize)?;
    Ok(PowerFragment {
        activation: kind,
        n,
        j,
        x0: ep.x0,
        alpha: ep.alpha,
        taylor: jet.coeffs[..n as usize].to_vec(),
    })
}

/// One-hidden-layer network `x ↦ W2 ψ(W1 x + b1) + b2` with row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShallowNet {
    pub activation: ActivationKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ShallowNet {
    pub fn width(&self) -> usize {
        self.b1.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let m = self.input_dim;
        let h: Vec<f64> = self
            .b1
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let z = b + self.w1[i * m..(i + 1) * m].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                self.activation.eval(z)
            })
            .collect();
        let w = self.width();
        self.b2
            .iter()
            .enumerate()
            .map(|(o, b)| b + self.w2[o * w..(o + 1) * w].iter().zip(&h).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(vec![self.input_dim, self.width(), self.output_dim], self.activation)
    }

    pub fn to_params(&self) -> Result<(Architecture, ParameterVector)> {
        let arch = self.architecture()?;
        let theta = ParameterVector::from_blocks(
            &arch,
            &[(self.w1.clone(), self.b1.clone()), (self.w2.clone(), self.b2.clone())],
        )?;
        Ok((arch, theta))
    }

    pub fn param_norm(&self) -> f64 {
        let all: Vec<f64> = [&self.w1, &self.b1, &self.w2, &self.b2].into_iter().flatten().copied().collect();
        l2_norm(&all)
    }
}

struct Unit {
    w: Vec<f64>,
    b: f64,
    out: f64,
}

fn build_single(kind: ActivationKind, p: &Polynomial, j: f64) -> Result<(Vec<Unit>, f64)> {
    let m = p.num_vars();
    let mut parts = p.homogeneous_parts();
    let mut units = Vec::new();
    for d in (1..parts.len()).rev() {
        let part = std::mem::replace(&mut parts[d], Polynomial::zero(m));
        if part.is_zero() {
            continue;
        }
        // (C, â) pairs with ‖â‖ = 1
        let terms: Vec<(f64, Vec<f64>)> = if d == 1 {
            let a: Vec<f64> = (0..m).map(|i| part.coeff(&super::MultiIndex::unit(m, i))).collect();
            let c = l2_norm(&a);
            vec![(c, a.iter().map(|v| v / c).collect())]
        } else {
            decompose_homogeneous(&part)?
                .terms
                .into_iter()
                .map(|t| {
                    let norm = l2_norm(&t.a);
                    (t.c * norm.powi(d as i32), t.a.iter().map(|v| v / norm).collect())
                })
                .collect()
        };
        let frag = build_univariate_power_jet(kind, d as u32, 1.0)?;
        let cmax = terms.iter().fold(0.0f64, |a, (c, _)| a.max(c.abs()));
        let s = j * cmax.max(1.0);
        for (c, a) in terms {
            units.push(Unit {
                w: a.iter().map(|v| v / s).collect(),
                b: frag.x0,
                out: c * s.powi(d as i32) / frag.alpha,
            });
            for (k, &t) in frag.taylor.iter().enumerate() {
                if t == 0.0 {
                    continue;
                }
                let coef = -c * t * s.powi((d - k) as i32) / frag.alpha;
                parts[k] = parts[k].add(&Polynomial::linear_form_power(&a, k as u32).scale(coef));
            }
        }
        for q in parts.iter_mut().take(d) {
            // cancellation noise far below the surviving coefficients
            let tol = 1e-15 * q.max_abs_coeff();
            q.prune(tol);
        }
    }
    let constant = parts.first().map_or(0.0, |q| q.coeff(&super::MultiIndex::zero(m)));
    Ok((units, constant))
}

/// Shallow network approximating the polynomial map `x ↦ (p_1(x), …, p_r(x))`;
/// the outputs use disjoint groups of hidden units.
pub fn build_poly_shallow(kind: ActivationKind, p: &[Polynomial], j: f64) -> Result<ShallowNet> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::DegenerateScale(j));
    }
    let first = p.first().ok_or_else(|| Error::InvalidArgument("no output polynomials".into()))?;
    let m = first.num_vars();
    if let Some(q) = p.iter().find(|q| q.num_vars() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: q.num_vars() });
    }
    let r = p.len();
    let mut groups = Vec::with_capacity(r);
    for q in p {
        groups.push(build_single(kind, q, j)?);
    }
    let width = groups.iter().map(|(u, _)| u.len()).sum::<usize>().max(1);
    let mut w1 = vec![0.0; width * m];
    let mut b1 = vec![0.0; width];
    let mut w2 = vec![0.0; r * width];
    let mut b2 = vec![0.0; r];
    let mut idx = 0;
    for (o, (units, c)) in groups.into_iter().enumerate() {
        b2[o] = c;
        for u in units {
            w1[idx * m..(idx + 1) * m].copy_from_slice(&u.w);
            b1[idx] = u.b;
            w2[o * width + idx] = u.out;
            idx += 1;
        }
    }
    let net = ShallowNet { activation: kind, input_dim: m, output_dim: r, w1, b1, w2, b2 };
    if [&net.w1, &net.b1, &net.w2, &net.b2].into_iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("builder weights"));
    }
    check_rounding(&net, p)?;
    Ok(net)
}

const ROUNDING_PROBES: usize = 64;
const ROUNDING_RTOL: f64 = 1e-4;

/// Rejects networks whose output sums cancel so heavily that double-precision rounding
/// alone could exceed `1e-4 (1 + max |p|)` on `[-1, 1]^m`.
fn check_rounding(net: &ShallowNet, p: &[Polynomial]) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x726f_756e);
    let (m, w) = (net.input_dim, net.width());
    let mut magnitude = 0.0f64;
    let mut scale = 0.0f64;
    for _ in 0..ROUNDING_PROBES {
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let h: Vec<f64> = (0..w)
            .map(|i| {
                let z = net.b1[i] + net.w1[i * m..(i + 1) * m].iter().zip(&x).map(|(a, v)| a * v).sum::<f64>();
                net.activation.eval(z).abs()
            })
            .collect();
        for (o, q) in p.iter().enumerate() {
            let sum = net.b2[o].abs() + net.w2[o * w..(o + 1) * w].iter().zip(&h).map(|(a, v)| a.abs() * v).sum::<f64>();
            magnitude = magnitude.max(sum);
            scale = scale.max(q.eval_unchecked(&x).abs());
        }
    }
    let residual = f64::EPSILON * magnitude;
    let tolerance = ROUNDING_RTOL * (1.0 + scale);
    if residual > tolerance {
        return Err(Error::IllConditioned { residual, tolerance });
    }
    Ok(())
}

/// Affine map `v = P a + q` from a layer's activations `a` to the vector it represents.
struct Decoder {
    p: Vec<f64>,
    q: Vec<f64>,
    cols: usize,
}

/// Places `core` at hidden layer `layer_index` of `arch`, with identity approximants
/// `z ↦ (j/α)(ψ(z/j + x0) - ψ(x0))` on all other hidden layers and zeros elsewhere.
pub fn embed_deep(arch: &Architecture, core: &ShallowNet, layer_index: usize, j: f64) -> Result<ParameterVector> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::DegenerateScale(j));
    }
    let widths = arch.widths();
    let k = arch.depth();
    let (d0, dk) = (core.input_dim, core.output_dim);
    if arch.input_dim() != d0 {
        return Err(Error::DimensionMismatch { expected: d0, got: arch.input_dim() });
    }
    if arch.output_dim() != dk {
        return Err(Error::DimensionMismatch { expected: dk, got: arch.output_dim() });
    }
    if arch.activation() != core.activation {
        return Err(Error::InvalidArgument(format!(
            "architecture uses {} but the core uses {}",
            arch.activation(),
            core.activation
        )));
    }
    if layer_index == 0 || layer_index >= k {
        return Err(Error::InvalidArgument(format!(
            "layer index {layer_index} is not a hidden layer of a depth-{k} network"
        )));
    }
    if widths[layer_index] < core.width() {
        return Err(Error::ArchitectureTooSmall(format!(
            "hidden layer {layer_index} has width {} but the core needs {}",
            widths[layer_index],
            core.width()
        )));
    }
    if let Some(l) = (1..layer_index).find(|&l| widths[l] < d0) {
        return Err(Error::ArchitectureTooSmall(format!(
            "hidden layer {l} before the core has width {} < input dimension {d0}",
            widths[l]
        )));
    }
    if let Some(l) = (layer_index + 1..k).find(|&l| widths[l] < dk) {
        return Err(Error::ArchitectureTooSmall(format!(
            "hidden layer {l} after the core has width {} < output dimension {dk}",
            widths[l]
        )));
    }

    let needs_identity = layer_index > 1 || layer_index + 1 < k;
    let ident = if needs_identity {
        Some(find_expansion_point(core.activation, 1, &default_search_grid())?)
    } else {
        None
    };

    let identity = |n: usize| -> Decoder {
        let mut p = vec![0.0; n * n];
        (0..n).for_each(|i| p[i * n + i] = 1.0);
        Decoder { p, q: vec![0.0; n], cols: n }
    };
    let mut dec = identity(d0);
    let mut blocks = Vec::with_capacity(k);
    for l in 1..=k {
        let (rows, cols) = (widths[l], widths[l - 1]);
        let dim = dec.q.len();
        // desired pre-activation rows: z = M v + c
        let (m, c, next): (Vec<f64>, Vec<f64>, Option<Decoder>) = if l == layer_index {
            let h = core.width();
            (
                core.w1.clone(),
                core.b1.clone(),
                Some(Decoder { p: core.w2.clone(), q: core.b2.clone(), cols: h }),
            )
        } else if l == k {
            (identity(dim).p, vec![0.0; dim], None)
        } else {
            let ep = ident.expect("identity expansion point");
            let mut mm = vec![0.0; dim * dim];
            (0..dim).for_each(|i| mm[i * dim + i] = 1.0 / j);
            let g = j / ep.alpha;
            let mut p = vec![0.0; dim * dim];
            (0..dim).for_each(|i| p[i * dim + i] = g);
            let q = vec![-g * core.activation.eval(ep.x0); dim];
            (mm, vec![ep.x0; dim], Some(Decoder { p, q, cols: dim }))
        };
        let used = c.len();
        let mut w = vec![0.0; rows * cols];
        let mut b = vec![0.0; rows];
        for i in 0..used {
            let mrow = &m[i * dim..(i + 1) * dim];
            for col in 0..dec.cols {
                w[i * cols + col] = (0..dim).map(|t| mrow[t] * dec.p[t * dec.cols + col]).sum();
            }
            b[i] = c[i] + (0..dim).map(|t| mrow[t] * dec.q[t]).sum::<f64>();
        }
        blocks.push((w, b));
        if let Some(n) = next {
            dec = n;
        }
    }
    ParameterVector::from_blocks(arch, &blocks)
}

/// Largest deviation `max_o |f(x)_o - p_o(x)|` over a tensor grid on `[-radius, radius]^m`.
pub fn sup_grid_error(f: &dyn Fn(&[f64]) -> Vec<f64>, p: &[Polynomial], radius: f64, nodes_per_dim: usize) -> f64 {
    let m = p.first().map_or(1, Polynomial::num_vars);
    let axis = crate::activation::linspace(-radius, radius, nodes_per_dim);
    let mut idx = vec![0usize; m];
    let mut worst = 0.0f64;
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| axis[i]).collect();
        let y = f(&x);
        for (yo, q) in y.iter().zip(p) {
            worst = worst.max((yo - q.eval_unchecked(&x)).abs());
        }
        let mut d = m;
        loop {
            if d == 0 {
                return worst;
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
