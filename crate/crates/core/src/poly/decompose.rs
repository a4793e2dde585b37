//! Homogeneous polynomials as signed sums of powers of linear forms.
//!
//! For a degree-`n` form in `m` variables the linear forms are `(1, λ_1, …, λ_{m-1})`
//! with `λ` ranging over the lattice `{λ ∈ ℕ^{m-1} : Σλ ≤ n}`. Matching monomial
//! coefficients gives the square generalized-Vandermonde system
//! `Σ_λ c_λ Π_{i≥1} λ_i^{μ_i} = coeff(μ) / multinomial(n; μ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{monomials_of_degree, Polynomial};
use crate::{Error, Result};

const RESIDUAL_POINTS: usize = 100;
const RESIDUAL_SEED: u64 = 0x6c69_6e66;
const RESIDUAL_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFormTerm {
    pub c: f64,
    pub a: Vec<f64>,
}

/// `p0(x) = Σ_i c_i ⟨a_i, x⟩^degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFormDecomposition {
    pub degree: u32,
    pub num_vars: usize,
    pub terms: Vec<LinearFormTerm>,
}

impl LinearFormDecomposition {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let s: f64 = t.a.iter().zip(x).map(|(a, v)| a * v).sum();
                t.c * s.powi(self.degree as i32)
            })
            .sum()
    }

    pub fn to_polynomial(&self) -> Polynomial {
        self.terms.iter().fold(Polynomial::zero(self.num_vars), |acc, t| {
            acc.add(&Polynomial::linear_form_power(&t.a, self.degree).scale(t.c))
        })
    }
}

/// Lattice points `λ ∈ ℕ^m` with `Σ λ_i ≤ n`; there are `binom(n + m, m)` of them.
pub fn lattice(n: u32, m: usize) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: usize, budget: u32, out: &mut Vec<Vec<u32>>) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=budget {
            prefix.push(e);
            rec(prefix, left - 1, budget - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(m), m, n, &mut out);
    out
}

pub fn decompose_homogeneous(p0: &Polynomial) -> Result<LinearFormDecomposition> {
    let m = p0.num_vars();
    if m == 0 {
        return Err(Error::InvalidArgument("polynomial has no variables".into()));
    }
    if !p0.is_homogeneous() {
        return Err(Error::InvalidArgument("polynomial is not homogeneous".into()));
    }
    let n = p0.degree();
    if p0.is_zero() {
        return Ok(LinearFormDecomposition { degree: n, num_vars: m, terms: Vec::new() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("degree-0 polynomial has no linear-form decomposition".into()));
    }

    let nodes = lattice(n, m - 1);
    let rows = monomials_of_degree(m, n);
    debug_assert_eq!(nodes.len(), rows.len());
    let matrix: Vec<Vec<f64>> = rows
        .iter()
        .map(|mu| {
            nodes
                .iter()
                .map(|lam| {
                    lam.iter()
                        .zip(&mu.exponents()[1..])
                        .map(|(&l, &e)| (l as f64).powi(e as i32))
                        .product()
                })
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = rows.iter().map(|mu| p0.coeff(mu) / mu.multinomial()).collect();

    let lu = FullPivotLu::factor(matrix.clone());
    let mut c = lu.solve(&rhs);
    for _ in 0..3 {
        let r: Vec<f64> = matrix
            .iter()
            .zip(&rhs)
            .map(|(row, &b)| b - dot2(row, &c))
            .collect();
        let d = lu.solve(&r);
        c.iter_mut().zip(&d).for_each(|(x, dx)| *x += dx);
    }

    let cmax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let terms: Vec<LinearFormTerm> = c
        .iter()
        .zip(&nodes)
        .filter(|(v, _)| v.abs() > 1e-14 * cmax && v.is_finite())
        .map(|(&v, lam)| {
            let mut a = Vec::with_capacity(m);
            a.push(1.0);
            a.extend(lam.iter().map(|&l| l as f64));
            LinearFormTerm { c: v, a }
        })
        .collect();
    let dec = LinearFormDecomposition { degree: n, num_vars: m, terms };

    let mut rng = ChaCha8Rng::seed_from_u64(RESIDUAL_SEED);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for _ in 0..RESIDUAL_POINTS {
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let exact = p0.eval_unchecked(&x);
        scale = scale.max(exact.abs());
        worst = worst.max((exact - dec.eval(&x)).abs());
    }
    let tolerance = RESIDUAL_RTOL * (1.0 + scale);
    if !(worst <= tolerance) {
        return Err(Error::IllConditioned { residual: worst, tolerance });
    }
    Ok(dec)
}

/// Error-free product and sum accumulate a dot product in roughly twice working precision.
fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut comp = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let ep = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        let es = (s - (t - z)) + (p - z);
        s = t;
        comp += ep + es;
    }
    s + comp
}

/// `P A Q = L U` with complete pivoting.
struct FullPivotLu {
    lu: Vec<Vec<f64>>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
}

impl FullPivotLu {
    fn factor(mut a: Vec<Vec<f64>>) -> Self {
        let n = a.len();
        let mut row_perm: Vec<usize> = (0..n).collect();
        let mut col_perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut pr, mut pc, mut best) = (k, k, -1.0);
            for (i, row) in a.iter().enumerate().skip(k) {
                for (j, v) in row.iter().enumerate().skip(k) {
                    if v.abs() > best {
                        best = v.abs();
                        pr = i;
                        pc = j;
                    }
                }
            }
            a.swap(k, pr);
            row_perm.swap(k, pr);
            if pc != k {
                for row in a.iter_mut() {
                    row.swap(k, pc);
                }
                col_perm.swap(k, pc);
            }
            let pivot = a[k][k];
            if pivot == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(k + 1);
            let pivot_row = &top[k];
            for row in bottom.iter_mut() {
                let f = row[k] / pivot;
                row[k] = f;
                for j in k + 1..n {
                    row[j] -= f * pivot_row[j];
                }
            }
        }
        Self { lu: a, row_perm, col_perm }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.len();
        let mut y: Vec<f64> = self.row_perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i][j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[i][j] * y[j];
            }
            y[i] = if self.lu[i][i] == 0.0 { 0.0 } else { y[i] / self.lu[i][i] };
        }
        let mut x = vec![0.0; n];
        for (k, &c) in self.col_perm.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_x0_x1() {
        let p = Polynomial::parse("x0*x1", 2).unwrap();
        let d = decompose_homogeneous(&p).unwrap();
        let cs: Vec<f64> = d.terms.iter().map(|t| t.c).collect();
        let forms: Vec<Vec<f64>> = d.terms.iter().map(|t| t.a.clone()).collect();
        assert_eq!(forms, vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        for (c, e) in cs.iter().zip([-0.75, 1.0, -0.25]) {
            assert!((c - e).abs() < 1e-12, "{c} vs {e}");
        }
    }

    #[test]
    fn pure_power_of_first_variable() {
        let p = Polynomial::parse("x0^4", 3).unwrap();
        let d = decompose_homogeneous(&p).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].a, vec![1.0, 0.0, 0.0]);
        assert!((d.terms[0].c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_of_linear_form_reconstructs() {
        let p = Polynomial::linear_form_power(&[1.0, 1.0], 3);
        let d = decompose_homogeneous(&p).unwrap();
        for x in [[0.3, -0.7], [1.0, 1.0], [-0.2, 0.9]] {
            assert!((d.eval(&x) - p.eval(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_sizes() {
        assert_eq!(lattice(2, 1), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(lattice(3, 0).len(), 1);
        assert_eq!(lattice(2, 2).len(), 6);
    }

    #[test]
    fn rejects_inhomogeneous_input() {
        let p = Polynomial::parse("x0^2 + x1", 2).unwrap();
        assert!(decompose_homogeneous(&p).is_err());
    }

    #[test]
    fn compensated_dot_beats_naive_on_cancellation() {
        let a = [1e16, 1.0, -1e16];
        let b = [1.0, 1.0, 1.0];
        assert_eq!(dot2(&a, &b), 1.0);
    }
}
