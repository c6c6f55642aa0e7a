//! Polynomials in `z, z̄` on the disc and in `x` on the interval.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};


use crate::linalg::c;
use crate::{CMat, C64};

/// Finite sum `Σ c_{ab} z^a z̄^b`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscPoly {
    pub terms: BTreeMap<(u32, u32), C64>,
}

impl DiscPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(v: C64) -> Self {
        Self::monomial(0, 0, v)
    }

    pub fn monomial(a: u32, b: u32, coeff: C64) -> Self {
        let mut terms = BTreeMap::new();
        if coeff != c(0.0, 0.0) {
            terms.insert((a, b), coeff);
        }
        Self { terms }
    }

    pub fn z() -> Self {
        Self::monomial(1, 0, c(1.0, 0.0))
    }

    pub fn zbar() -> Self {
        Self::monomial(0, 1, c(1.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree `max(a + b)`; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, a: u32, b: u32, coeff: C64) {
        let e = self.terms.entry((a, b)).or_insert(c(0.0, 0.0));
        *e += coeff;
        if *e == c(0.0, 0.0) {
            self.terms.remove(&(a, b));
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &v) in &self.terms {
            out.add_term(a, b, v * s);
        }
        out
    }

    /// Pointwise complex conjugate: `conj(z^a z̄^b) = z^b z̄^a`.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &v) in &self.terms {
            out.add_term(b, a, v.conj());
        }
        out
    }

    pub fn eval(&self, z: C64) -> C64 {
        let zb = z.conj();
        self.terms
            .iter()
            .map(|(&(a, b), &v)| v * z.powu(a) * zb.powu(b))
            .sum()
    }

    /// `∂_z^p ∂_z̄^q`.
    pub fn dz_dzbar(&self, p: u32, q: u32) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &v) in &self.terms {
            if a < p || b < q {
                continue;
            }
            let f = falling(a, p) * falling(b, q);
            out.add_term(a - p, b - q, v * f);
        }
        out
    }

    /// `∂_r^k` restricted to `r = 1`, as a Fourier series in θ:
    /// returns mode → coefficient.
    pub fn radial_derivative_on_circle(&self, k: u32) -> BTreeMap<i64, C64> {
        let mut out: BTreeMap<i64, C64> = BTreeMap::new();
        for (&(a, b), &v) in &self.terms {
            let f = falling(a + b, k);
            if f == 0.0 {
                continue;
            }
            *out.entry(a as i64 - b as i64).or_insert(c(0.0, 0.0)) += v * f;
        }
        out.retain(|_, v| *v != c(0.0, 0.0));
        out
    }

    /// Largest `|a − b|` over the terms.
    pub fn max_mode(&self) -> u32 {
        self.terms
            .keys()
            .map(|&(a, b)| (a as i64 - b as i64).unsigned_abs() as u32)
            .max()
            .unwrap_or(0)
    }
}

/// `n (n−1) … (n−k+1)`.
pub fn falling(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).map(|i| (n - i) as f64).product()
}

impl Add for &DiscPoly {
    type Output = DiscPoly;
    fn add(self, rhs: &DiscPoly) -> DiscPoly {
        let mut out = self.clone();
        for (&(a, b), &v) in &rhs.terms {
            out.add_term(a, b, v);
        }
        out
    }
}

impl Sub for &DiscPoly {
    type Output = DiscPoly;
    fn sub(self, rhs: &DiscPoly) -> DiscPoly {
        self + &rhs.scale(c(-1.0, 0.0))
    }
}

impl Neg for &DiscPoly {
    type Output = DiscPoly;
    fn neg(self) -> DiscPoly {
        self.scale(c(-1.0, 0.0))
    }
}

impl Mul for &DiscPoly {
    type Output = DiscPoly;
    fn mul(self, rhs: &DiscPoly) -> DiscPoly {
        let mut out = DiscPoly::zero();
        for (&(a, b), &v) in &self.terms {
            for (&(p, q), &w) in &rhs.terms {
                out.add_term(a + p, b + q, v * w);
            }
        }
        out
    }
}

/// Vector-valued section: one polynomial per fiber component.
pub type DiscSection = Vec<DiscPoly>;

/// Matrix of polynomials stored as degree → coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatPoly {
    pub size: usize,
    pub terms: BTreeMap<(u32, u32), CMat>,
}

impl MatPoly {
    pub fn new(size: usize) -> Self {
        Self { size, terms: BTreeMap::new() }
    }

    pub fn scalar(p: &DiscPoly) -> Self {
        let mut out = Self::new(1);
        for (&k, &v) in &p.terms {
            out.terms.insert(k, CMat::from_element(1, 1, v));
        }
        out
    }

    pub fn constant(m: CMat) -> Self {
        let mut out = Self::new(m.nrows());
        out.terms.insert((0, 0), m);
        out
    }

    pub fn add_term(&mut self, a: u32, b: u32, m: CMat) {
        let size = self.size;
        let e = self.terms.entry((a, b)).or_insert_with(|| CMat::zeros(size, size));
        *e += m;
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn eval(&self, z: C64) -> CMat {
        let zb = z.conj();
        let mut out = CMat::zeros(self.size, self.size);
        for (&(a, b), m) in &self.terms {
            out += m * (z.powu(a) * zb.powu(b));
        }
        out
    }

    /// Entry `(i, j)` as a scalar polynomial.
    pub fn entry(&self, i: usize, j: usize) -> DiscPoly {
        let mut p = DiscPoly::zero();
        for (&(a, b), m) in &self.terms {
            p.add_term(a, b, m[(i, j)]);
        }
        p
    }

    /// Pointwise adjoint `α*`.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::new(self.size);
        for (&(a, b), m) in &self.terms {
            out.add_term(b, a, m.adjoint());
        }
        out
    }

    pub fn mul(&self, rhs: &MatPoly) -> MatPoly {
        let mut out = MatPoly::new(self.size);
        for (&(a, b), m) in &self.terms {
            for (&(p, q), n) in &rhs.terms {
                out.add_term(a + p, b + q, m * n);
            }
        }
        out
    }
}

/// Polynomial `Σ c_k x^k` on the interval.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinePoly {
    pub coeffs: Vec<C64>,
}

impl LinePoly {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, x: f64) -> C64 {
        self.coeffs.iter().rev().fold(c(0.0, 0.0), |acc, &v| acc * x + v)
    }

    pub fn derivative(&self, k: usize) -> LinePoly {
        if k >= self.coeffs.len() {
            return LinePoly::default();
        }
        let coeffs = (k..self.coeffs.len())
            .map(|n| self.coeffs[n] * falling(n as u32, k as u32))
            .collect();
        LinePoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conj_and_eval_agree() {
        let mut p = DiscPoly::monomial(2, 1, c(1.0, 2.0));
        p.add_term(0, 3, c(-0.5, 0.0));
        let z = c(0.3, -0.4);
        assert!((p.conj().eval(z) - p.eval(z).conj()).norm() < 1e-15);
    }

    #[test]
    fn wirtinger_derivatives() {
        let p = DiscPoly::monomial(3, 2, c(1.0, 0.0));
        let d = p.dz_dzbar(1, 1);
        assert_eq!(d.terms.get(&(2, 1)), Some(&c(6.0, 0.0)));
        assert!(p.dz_dzbar(4, 0).is_zero());
    }

    #[test]
    fn radial_derivative_of_monomial() {
        let p = DiscPoly::monomial(3, 0, c(1.0, 0.0));
        let d = p.radial_derivative_on_circle(1);
        assert_eq!(d.get(&3), Some(&c(3.0, 0.0)));
        assert!(DiscPoly::constant(c(2.0, 0.0)).radial_derivative_on_circle(1).is_empty());
    }

    #[test]
    fn line_poly_derivative() {
        let p = LinePoly::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(p.derivative(1).eval(2.0), c(14.0, 0.0));
        assert_eq!(p.derivative(2).eval(0.0), c(6.0, 0.0));
    }
}
