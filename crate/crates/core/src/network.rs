//! Fully connected feed-forward networks: hidden layers apply the activation
//! coordinatewise, the last layer is affine.
//!
//! Parameters live in one flat vector laid out as `(W_1, b_1, ..., W_k, b_k)`, each
//! `W_i` row-major with shape `d_i × d_{i-1}`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
    activation: ActivationKind,
}

/// Offsets of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl Architecture {
    pub fn new(widths: Vec<usize>, activation: ActivationKind) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "an architecture needs at least an input and an output width".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidArgument("layer widths must be positive".into()));
        }
        Ok(Self { widths, activation })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    /// Number of affine layers `k`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    pub fn param_dim(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    rows: w[1],
                    cols: w[0],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset += w[1] * (w[0] + 1);
                shape
            })
            .collect()
    }
}

pub fn param_dim(arch: &Architecture) -> usize {
    arch.param_dim()
}

/// Flat parameter vector of an [`Architecture`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(arch: &Architecture, data: Vec<f64>) -> Result<Self> {
        if data.len() != arch.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: arch.param_dim(),
                got: data.len(),
            });
        }
        let p = Self(data);
        p.check_finite()?;
        Ok(p)
    }

    pub fn zeros(arch: &Architecture) -> Self {
        Self(vec![0.0; arch.param_dim()])
    }

    /// Assembles `θ` from explicit `(W_i, b_i)` blocks, each `W_i` row-major.
    pub fn from_blocks(arch: &Architecture, blocks: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        let shapes = arch.layer_shapes();
        if blocks.len() != shapes.len() {
            return Err(Error::DimensionMismatch {
                expected: shapes.len(),
                got: blocks.len(),
            });
        }
        let mut data = Vec::with_capacity(arch.param_dim());
        for (shape, (w, b)) in shapes.iter().zip(blocks) {
            if w.len() != shape.rows * shape.cols {
                return Err(Error::DimensionMismatch {
                    expected: shape.rows * shape.cols,
                    got: w.len(),
                });
            }
            if b.len() != shape.rows {
                return Err(Error::DimensionMismatch {
                    expected: shape.rows,
                    got: b.len(),
                });
            }
            data.extend_from_slice(w);
            data.extend_from_slice(b);
        }
        Self::new(arch, data)
    }

    /// Borrowed `(W_i, b_i)` views.
    pub fn blocks<'a>(&'a self, arch: &Architecture) -> Vec<(&'a [f64], &'a [f64])> {
        arch.layer_shapes()
            .iter()
            .map(|s| {
                (
                    &self.0[s.weight_offset..s.bias_offset],
                    &self.0[s.bias_offset..s.bias_offset + s.rows],
                )
            })
            .collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.0.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("parameter vector"))
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Binary form: `u32` width count, the `u32` widths, then the `f64` entries, all
    /// little-endian.
    pub fn write_binary<W: Write>(&self, arch: &Architecture, mut w: W) -> Result<()> {
        w.write_all(&(arch.widths.len() as u32).to_le_bytes())?;
        for &d in &arch.widths {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in &self.0 {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary form, returning the stored widths alongside the parameters.
    pub fn read_binary<R: Read>(mut r: R) -> Result<(Vec<usize>, Self)> {
        let mut u = [0u8; 4];
        r.read_exact(&mut u)?;
        let count = u32::from_le_bytes(u) as usize;
        if count < 2 {
            return Err(Error::Parse(format!("width count {count} < 2")));
        }
        let mut widths = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut u)?;
            widths.push(u32::from_le_bytes(u) as usize);
        }
        let dim: usize = widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let mut data = Vec::with_capacity(dim);
        let mut f = [0u8; 8];
        for _ in 0..dim {
            r.read_exact(&mut f)?;
            data.push(f64::from_le_bytes(f));
        }
        let p = Self(data);
        p.check_finite()?;
        Ok((widths, p))
    }
}

/// JSON document for small networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkJson {
    pub widths: Vec<usize>,
    pub activation: ActivationKind,
    pub theta: ParameterVector,
}

impl NetworkJson {
    pub fn new(arch: &Architecture, theta: &ParameterVector) -> Self {
        Self {
            widths: arch.widths.clone(),
            activation: arch.activation,
            theta: theta.clone(),
        }
    }

    pub fn into_parts(self) -> Result<(Architecture, ParameterVector)> {
        let arch = Architecture::new(self.widths, self.activation)?;
        let theta = ParameterVector::new(&arch, self.theta.0)?;
        Ok((arch, theta))
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Per-layer buffers reused across forward/backward passes.
#[derive(Debug, Clone)]
pub struct Workspace {
    shapes: Vec<LayerShape>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(arch: &Architecture) -> Self {
        let shapes = arch.layer_shapes();
        let pre = shapes.iter().map(|s| vec![0.0; s.rows]).collect::<Vec<_>>();
        Self {
            post: pre.clone(),
            delta: pre.clone(),
            pre,
            shapes,
        }
    }

    /// Runs the network and keeps the intermediates for [`Workspace::backward`].
    pub fn forward(&mut self, arch: &Architecture, theta: &[f64], x: &[f64]) -> &[f64] {
        debug_assert_eq!(theta.len(), arch.param_dim());
        debug_assert_eq!(x.len(), arch.input_dim());
        let psi = arch.activation;
        let k = self.shapes.len();
        for l in 0..k {
            let s = self.shapes[l];
            let (before, rest) = self.post.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &before[l - 1] };
            let w = &theta[s.weight_offset..s.bias_offset];
            let b = &theta[s.bias_offset..s.bias_offset + s.rows];
            let z = &mut self.pre[l];
            for r in 0..s.rows {
                let row = &w[r * s.cols..(r + 1) * s.cols];
                z[r] = b[r] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            }
            let out = &mut rest[0];
            if l + 1 == k {
                out.copy_from_slice(z);
            } else {
                for (o, &zi) in out.iter_mut().zip(z.iter()) {
                    *o = psi.eval(zi);
                }
            }
        }
        &self.post[k - 1]
    }

    /// Adds `scale · ∇_θ ⟨dl_dy, N_θ(x)⟩` into `grad`. Must follow a `forward` on the
    /// same `(theta, x)`.
    pub fn backward(
        &mut self,
        arch: &Architecture,
        theta: &[f64],
        x: &[f64],
        dl_dy: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) {
        let psi = arch.activation;
        let k = self.shapes.len();
        self.delta[k - 1].copy_from_slice(dl_dy);
        for l in (0..k).rev() {
            let s = self.shapes[l];
            let input: &[f64] = if l == 0 { x } else { &self.post[l - 1] };
            let delta = &self.delta[l];
            {
                let (gw, gb) = grad[s.weight_offset..s.bias_offset + s.rows].split_at_mut(s.rows * s.cols);
                for r in 0..s.rows {
                    let d = scale * delta[r];
                    if d == 0.0 {
                        continue;
                    }
                    gb[r] += d;
                    for (g, a) in gw[r * s.cols..(r + 1) * s.cols].iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
            }
            if l == 0 {
                break;
            }
            // δ_{l-1} = (W_lᵀ δ_l) ⊙ ψ'(z_{l-1})
            let w = &theta[s.weight_offset..s.bias_offset];
            let (lower, upper) = self.delta.split_at_mut(l);
            let prev = &mut lower[l - 1];
            prev.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..s.rows {
                let d = upper[0][r];
                if d == 0.0 {
                    continue;
                }
                for (p, wv) in prev.iter_mut().zip(&w[r * s.cols..(r + 1) * s.cols]) {
                    *p += wv * d;
                }
            }
            for (p, &z) in prev.iter_mut().zip(&self.pre[l - 1]) {
                *p *= psi.derivative(z);
            }
        }
    }
}

fn check_dims(arch: &Architecture, theta: &ParameterVector, x: &[f64]) -> Result<()> {
    if theta.len() != arch.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.param_dim(),
            got: theta.len(),
        });
    }
    if x.len() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Network response `N_θ(x)`.
pub fn forward(arch: &Architecture, theta: &ParameterVector, x: &[f64]) -> Result<Vec<f64>> {
    check_dims(arch, theta, x)?;
    let mut ws = Workspace::new(arch);
    Ok(ws.forward(arch, theta.as_slice(), x).to_vec())
}

/// Response together with the gradient of `⟨dl_dy, N_θ(x)⟩` in `θ`.
pub fn forward_backward(
    arch: &Architecture,
    theta: &ParameterVector,
    x: &[f64],
    dl_dy: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(arch, theta, x)?;
    if dl_dy.len() != arch.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.output_dim(),
            got: dl_dy.len(),
        });
    }
    let mut ws = Workspace::new(arch);
    let y = ws.forward(arch, theta.as_slice(), x).to_vec();
    let mut grad = vec![0.0; arch.param_dim()];
    ws.backward(arch, theta.as_slice(), x, dl_dy, 1.0, &mut grad);
    Ok((y, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum InitScheme {
    /// Every entry, biases included, from `U(low, high)`.
    Uniform { low: f64, high: f64 },
    /// Every entry, biases included, from `N(mean, std²)`.
    Normal { mean: f64, std: f64 },
    /// Weights from `U(±√(6/(fan_in + fan_out)))`, biases zero.
    GlorotUniform,
}

pub fn init_params(arch: &Architecture, scheme: InitScheme, seed: u64) -> Result<ParameterVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; arch.param_dim()];
    match scheme {
        InitScheme::Uniform { low, high } => {
            if !(low <= high) || !low.is_finite() || !high.is_finite() {
                return Err(Error::InvalidArgument(format!("bad uniform range [{low}, {high}]")));
            }
            if low < high {
                let dist = Uniform::new(low, high).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                data.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
            } else {
                data.iter_mut().for_each(|v| *v = low);
            }
        }
        InitScheme::Normal { mean, std } => {
            let dist = Normal::new(mean, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            data.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
        }
        InitScheme::GlorotUniform => {
            for s in arch.layer_shapes() {
                let bound = (6.0 / (s.cols + s.rows) as f64).sqrt();
                for v in &mut data[s.weight_offset..s.bias_offset] {
                    *v = rng.random_range(-bound..=bound);
                }
            }
        }
    }
    ParameterVector::new(arch, data)
}
