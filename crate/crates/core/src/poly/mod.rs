//! Sparse multivariate polynomials, decomposition of homogeneous parts into powers
//! of linear forms, and the constructive shallow/deep approximation builder.

mod builder;
mod decompose;

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use builder::{
    build_poly_shallow, build_univariate_power_jet, embed_deep, sup_grid_error, PowerFragment, ShallowNet,
};
pub use decompose::{decompose_homogeneous, lattice, LinearFormDecomposition, LinearFormTerm};

/// Exponent vector of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(num_vars: usize) -> Self {
        MultiIndex(vec![0; num_vars])
    }

    pub fn unit(num_vars: usize, i: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// `n! / Π μ_i!`.
    pub fn multinomial(&self) -> f64 {
        let mut out = 1.0;
        let mut acc = 0u32;
        for &e in &self.0 {
            for k in 1..=e {
                acc += 1;
                out = out * acc as f64 / k as f64;
            }
        }
        out
    }

    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product()
    }

    fn add(&self, other: &Self) -> Self {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// All exponent vectors in `num_vars` variables with total degree exactly `n`,
/// in lexicographic order.
pub fn monomials_of_degree(num_vars: usize, n: u32) -> Vec<MultiIndex> {
    fn rec(prefix: &mut Vec<u32>, left: usize, n: u32, out: &mut Vec<MultiIndex>) {
        if left == 1 {
            prefix.push(n);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=n).rev() {
            prefix.push(e);
            rec(prefix, left - 1, n - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if num_vars == 0 {
        if n == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return out;
    }
    rec(&mut Vec::with_capacity(num_vars), num_vars, n, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    num_vars: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(num_vars: usize) -> Self {
        Self { num_vars, terms: BTreeMap::new() }
    }

    pub fn constant(num_vars: usize, c: f64) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(MultiIndex::zero(num_vars), c);
        p
    }

    pub fn variable(num_vars: usize, i: usize) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(MultiIndex::unit(num_vars, i), 1.0);
        p
    }

    /// `Σ a_i x_i + a0`.
    pub fn affine(a: &[f64], a0: f64) -> Self {
        let mut p = Self::constant(a.len(), a0);
        for (i, &c) in a.iter().enumerate() {
            p.add_term(MultiIndex::unit(a.len(), i), c);
        }
        p
    }

    pub fn from_terms<I>(num_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(num_vars);
        for (e, c) in terms {
            if e.len() != num_vars {
                return Err(Error::DimensionMismatch { expected: num_vars, got: e.len() });
            }
            if !c.is_finite() {
                return Err(Error::NonFinite("polynomial coefficient"));
            }
            p.add_term(MultiIndex(e), c);
        }
        Ok(p)
    }

    /// Adds `c·x^e`, removing the monomial if the coefficient cancels to zero.
    pub fn add_term(&mut self, e: MultiIndex, c: f64) {
        debug_assert_eq!(e.0.len(), self.num_vars);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(e) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, e: &MultiIndex) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.terms.keys().all(|e| e.degree() == d)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.num_vars {
            return Err(Error::DimensionMismatch { expected: self.num_vars, got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation with the variable count assumed correct.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.monomial(x)).sum()
    }

    /// `parts[d]` holds the degree-`d` terms.
    pub fn homogeneous_parts(&self) -> Vec<Polynomial> {
        let mut parts = vec![Polynomial::zero(self.num_vars); self.degree() as usize + 1];
        for (e, &c) in &self.terms {
            parts[e.degree() as usize].terms.insert(e.clone(), c);
        }
        parts
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.num_vars);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.num_vars, other.num_vars, "variable count mismatch");
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.num_vars, other.num_vars, "variable count mismatch");
        let mut out = Polynomial::zero(self.num_vars);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                out.add_term(e1.add(e2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.num_vars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// `⟨a, x⟩^k` expanded by the multinomial theorem.
    pub fn linear_form_power(a: &[f64], k: u32) -> Polynomial {
        let mut out = Polynomial::zero(a.len());
        for mu in monomials_of_degree(a.len(), k) {
            let c = mu.multinomial() * mu.monomial(a);
            out.add_term(mu, c);
        }
        out
    }

    /// Drops terms whose magnitude is at most `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.abs() > tol);
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // highest degree first
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| b.0.degree().cmp(&a.0.degree()).then(b.0.cmp(a.0)));
        for (i, (e, &c)) in terms.into_iter().enumerate() {
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if i == 0 {
                if sign == "-" {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let vars: Vec<String> = e
                .0
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0)
                .map(|(v, &p)| if p == 1 { format!("x{v}") } else { format!("x{v}^{p}") })
                .collect();
            if vars.is_empty() {
                write!(f, "{mag:?}")?;
            } else if mag == 1.0 {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{mag:?}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl Polynomial {
    /// Parses text such as `"3*x0^2*x1 - 2*x1 + 5"` over `num_vars` variables.
    pub fn parse(s: &str, num_vars: usize) -> Result<Self> {
        let mut p = Polynomial::zero(num_vars);
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() {
            return Err(Error::Parse("empty polynomial".into()));
        }
        // split into signed terms, ignoring signs inside exponents like 1e-3
        let mut terms = Vec::new();
        let mut start = 0;
        let bytes = cleaned.as_bytes();
        for i in 1..bytes.len() {
            let c = bytes[i];
            let prev = bytes[i - 1];
            if (c == b'+' || c == b'-') && prev != b'e' && prev != b'E' && prev != b'*' && prev != b'^' {
                terms.push(&cleaned[start..i]);
                start = i;
            }
        }
        terms.push(&cleaned[start..]);
        for term in terms {
            let (neg, body) = match term.as_bytes().first() {
                Some(b'-') => (true, &term[1..]),
                Some(b'+') => (false, &term[1..]),
                _ => (false, term),
            };
            if body.is_empty() {
                return Err(Error::Parse(format!("dangling sign in {s:?}")));
            }
            let mut coeff = if neg { -1.0 } else { 1.0 };
            let mut e = MultiIndex::zero(num_vars);
            for factor in body.split('*') {
                if let Some(rest) = factor.strip_prefix('x') {
                    let (var, pow) = match rest.split_once('^') {
                        Some((v, k)) => (v, k),
                        None => (rest, "1"),
                    };
                    let var: usize = var
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad variable in {factor:?}")))?;
                    let pow: u32 = pow
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad exponent in {factor:?}")))?;
                    if var >= num_vars {
                        return Err(Error::Parse(format!(
                            "variable x{var} out of range for {num_vars} variables"
                        )));
                    }
                    e.0[var] += pow;
                } else {
                    let v: f64 = factor
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad factor {factor:?}")))?;
                    if !v.is_finite() {
                        return Err(Error::Parse(format!("non-finite coefficient {factor:?}")));
                    }
                    coeff *= v;
                }
            }
            p.add_term(e, coeff);
        }
        Ok(p)
    }

    /// Like [`Polynomial::parse`] with the variable count inferred from the highest index.
    pub fn parse_infer(s: &str) -> Result<Self> {
        let mut max_var = None::<usize>;
        let mut chars = s.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if c == 'x' {
                let digits: String = s[i + 1..].chars().take_while(char::is_ascii_digit).collect();
                if let Ok(v) = digits.parse::<usize>() {
                    max_var = Some(max_var.map_or(v, |m| m.max(v)));
                }
            }
        }
        Self::parse(s, max_var.map_or(1, |m| m + 1))
    }
}

impl FromStr for Polynomial {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_infer(s)
    }
}
